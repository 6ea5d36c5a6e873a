//! Policymaker risk model `p_PM(CRC | x)` and the age-marginal anchor used by
//! the citizen's self-perception.
//!
//! The risk model is a logistic surrogate over named risk factors. Each name
//! maps to a covariate value:
//!
//! | name           | value                         |
//! |----------------|-------------------------------|
//! | `smoker`       | 1 if smoker                   |
//! | `alcohol`      | 1 if regular alcohol intake   |
//! | `diabetes`     | 1 if diabetic                 |
//! | `hypertension` | 1 if hypertensive             |
//! | `male`         | 1 if male                     |
//! | `ses_level`    | `ses_level - 1` (0 through 4) |
//!
//! Age enters separately through `age_scale`, in log-odds per decade above 40.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariateProfile, Sex, MAX_AGE, MIN_AGE};

pub const COVARIATE_NAMES: [&str; 6] = [
    "smoker",
    "alcohol",
    "diabetes",
    "hypertension",
    "male",
    "ses_level",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSurrogate {
    pub intercept: f64,
    #[serde(default)]
    pub age_scale: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl Default for RiskSurrogate {
    fn default() -> Self {
        let coefficients = [
            ("smoker", 0.5),
            ("alcohol", 0.3),
            ("diabetes", 0.4),
            ("hypertension", 0.2),
            ("male", 0.3),
            ("ses_level", -0.05),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        RiskSurrogate {
            intercept: -6.0,
            age_scale: 0.35,
            coefficients,
        }
    }
}

fn covariate_value(name: &str, profile: &CovariateProfile) -> Option<f64> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Some(match name {
        "smoker" => flag(profile.smoker),
        "alcohol" => flag(profile.alcohol),
        "diabetes" => flag(profile.diabetes),
        "hypertension" => flag(profile.hypertension),
        "male" => flag(profile.sex == Sex::Male),
        "ses_level" => f64::from(profile.ses_level) - 1.0,
        _ => return None,
    })
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl RiskSurrogate {
    pub fn validate(&self) -> Result<()> {
        for (name, coef) in &self.coefficients {
            if !COVARIATE_NAMES.contains(&name.as_str()) {
                return Err(Error::config(
                    format!("risk.coefficients.{name}"),
                    format!("unknown covariate; expected one of {COVARIATE_NAMES:?}"),
                ));
            }
            if !coef.is_finite() {
                return Err(Error::config(format!("risk.coefficients.{name}"), "must be finite"));
            }
        }
        if !self.intercept.is_finite() || !self.age_scale.is_finite() {
            return Err(Error::config("risk", "intercept and age_scale must be finite"));
        }
        Ok(())
    }

    pub fn log_odds(&self, profile: &CovariateProfile) -> Result<f64> {
        let mut z = self.intercept + self.age_scale * (f64::from(profile.age) - 40.0) / 10.0;
        for (name, coef) in &self.coefficients {
            let value = covariate_value(name, profile).ok_or_else(|| {
                Error::config(format!("risk.coefficients.{name}"), "unknown covariate")
            })?;
            z += coef * value;
        }
        Ok(z)
    }

    pub fn predict_risk(&self, profile: &CovariateProfile) -> Result<f64> {
        profile.validate()?;
        Ok(logistic(self.log_odds(profile)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeBand {
    pub age_low: u32,
    /// Inclusive.
    pub age_high: u32,
    pub probability: f64,
}

/// Marginal CRC probability by age band; bands partition [18, 100].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeMarginalTable {
    pub bands: Vec<AgeBand>,
}

impl Default for AgeMarginalTable {
    fn default() -> Self {
        let band = |age_low, age_high, probability| AgeBand {
            age_low,
            age_high,
            probability,
        };
        AgeMarginalTable {
            bands: vec![
                band(18, 39, 0.0005),
                band(40, 49, 0.001),
                band(50, 69, 0.004),
                band(70, 100, 0.008),
            ],
        }
    }
}

impl AgeMarginalTable {
    pub fn validate(&self) -> Result<()> {
        let path = "age_marginal.bands";
        let first = self
            .bands
            .first()
            .ok_or_else(|| Error::config(path, "at least one band is required"))?;
        if first.age_low != MIN_AGE {
            return Err(Error::config(path, format!("first band must start at {MIN_AGE}")));
        }
        let mut previous: Option<&AgeBand> = None;
        for (i, band) in self.bands.iter().enumerate() {
            let here = format!("{path}[{i}]");
            if band.age_low > band.age_high {
                return Err(Error::config(here, "age_low exceeds age_high"));
            }
            if !(band.probability > 0.0 && band.probability < 1.0) {
                return Err(Error::config(here, "probability must lie in (0, 1)"));
            }
            if let Some(prev) = previous {
                if band.age_low != prev.age_high + 1 {
                    return Err(Error::config(here, "bands must be contiguous without overlap"));
                }
                if band.probability < prev.probability {
                    return Err(Error::config(here, "probabilities must be non-decreasing with age"));
                }
            }
            previous = Some(band);
        }
        if previous.map(|b| b.age_high) != Some(MAX_AGE) {
            return Err(Error::config(path, format!("last band must end at {MAX_AGE}")));
        }
        Ok(())
    }

    pub fn band_for(&self, age: u32) -> Result<&AgeBand> {
        self.bands
            .iter()
            .find(|b| (b.age_low..=b.age_high).contains(&age))
            .ok_or_else(|| Error::Input(format!("age {age} not covered by the age-marginal table")))
    }

    pub fn marginal_age_risk(&self, age: u32) -> Result<f64> {
        self.band_for(age).map(|b| b.probability)
    }
}
