//! Run configuration: one JSON document with a section per model component.
//!
//! Only `policy` is required; every other section falls back to its
//! defaults. Unknown keys are rejected and every invariant is checked at load
//! time, so a loaded [`RunConfig`] is always usable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ara::{AraModel, IncentiveGrid, DEFAULT_K, DEFAULT_RUNS};
use crate::error::{Error, Result};
use crate::model::{CovariateProfile, ScreeningPolicy, ScreeningTest, TestId};
use crate::population::CohortSpec;
use crate::risk::{AgeMarginalTable, RiskSurrogate};
use crate::utility::{CitizenModelConfig, EconomicConstants, Eq5dTable};

const BUNDLED_CONFIG: &str = include_str!("../data/default_config.json");
const BUNDLED_PROFILES: &str = include_str!("../data/profiles.json");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyThresholds {
    pub th1: f64,
    pub th2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    /// Citizen draws per run.
    pub k: usize,
    /// Replications of the single-patient search.
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            k: DEFAULT_K,
            n_runs: DEFAULT_RUNS,
            seed: 20_250_601,
        }
    }
}

fn default_tests() -> BTreeMap<TestId, ScreeningTest> {
    ScreeningPolicy::new(0.5, 0.25).tests
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub economics: EconomicConstants,
    #[serde(default)]
    pub citizen: CitizenModelConfig,
    #[serde(default)]
    pub risk: RiskSurrogate,
    #[serde(default)]
    pub age_marginal: AgeMarginalTable,
    #[serde(default)]
    pub eq5d: Eq5dTable,
    #[serde(default = "default_tests")]
    pub tests: BTreeMap<TestId, ScreeningTest>,
    pub policy: PolicyThresholds,
    #[serde(default)]
    pub grid: IncentiveGrid,
    #[serde(default)]
    pub engine: EngineParams,
    #[serde(default)]
    pub cohort: CohortSpec,
}

impl RunConfig {
    /// Defaults for everything except the thresholds.
    pub fn with_thresholds(th1: f64, th2: f64) -> Self {
        RunConfig {
            economics: EconomicConstants::default(),
            citizen: CitizenModelConfig::default(),
            risk: RiskSurrogate::default(),
            age_marginal: AgeMarginalTable::default(),
            eq5d: Eq5dTable::default(),
            tests: default_tests(),
            policy: PolicyThresholds { th1, th2 },
            grid: IncentiveGrid::default(),
            engine: EngineParams::default(),
            cohort: CohortSpec::default(),
        }
    }

    /// The configuration shipped with the crate (`data/default_config.json`).
    pub fn bundled_default() -> Self {
        Self::from_json(BUNDLED_CONFIG).expect("bundled configuration is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn policy(&self) -> ScreeningPolicy {
        ScreeningPolicy {
            th1: self.policy.th1,
            th2: self.policy.th2,
            tests: self.tests.clone(),
        }
    }

    pub fn ara_model(&self) -> AraModel {
        AraModel {
            economics: self.economics.clone(),
            citizen: self.citizen.clone(),
            age_marginal: self.age_marginal.clone(),
            policy: self.policy(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for id in [TestId::Fit, TestId::Sdna, TestId::Colonoscopy] {
            if !self.tests.contains_key(&id) {
                return Err(Error::config(format!("tests.{id}"), "missing test parameters"));
            }
        }
        self.ara_model().validate()?;
        self.risk.validate()?;
        self.eq5d.validate()?;
        self.grid.validate()?;
        if self.engine.k == 0 {
            return Err(Error::config("engine.k", "must be at least 1"));
        }
        if self.engine.n_runs == 0 {
            return Err(Error::config("engine.n_runs", "must be at least 1"));
        }
        self.cohort.validate()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    RunConfig::from_json(&text)
}

/// SHA-256 of the raw configuration bytes, hex encoded.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The bundled example citizens, keyed by name.
pub fn example_profiles() -> BTreeMap<String, CovariateProfile> {
    serde_json::from_str(BUNDLED_PROFILES).expect("bundled profiles are valid")
}

pub fn example_profile(name: &str) -> Result<CovariateProfile> {
    example_profiles().remove(name).ok_or_else(|| {
        Error::Input(format!(
            "unknown example profile `{name}`; available: {}",
            example_profiles().keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })
}
