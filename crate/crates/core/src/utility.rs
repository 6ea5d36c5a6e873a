//! Monetary utilities of the policymaker and the citizen, and the random
//! citizen model (QALY gains, screening burden, misperceived CRC risk).
//!
//! All amounts are euros. Life years are monetized at GDP per capita and
//! weighted by the citizen's EQ-5D index. Declining screening is the status
//! quo and is worth exactly zero to both parties.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CitizenChoice, CovariateProfile, ScreeningAction, ScreeningPolicy, Sex, TestOutcome};
use crate::risk::AgeMarginalTable;

/// How screening expenditure enters the policymaker utility.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmCostSign {
    /// Screening cost is subtracted.
    #[default]
    Expense,
    /// Screening cost is added, reproducing the formula as printed.
    Literal,
}

impl PmCostSign {
    fn factor(self) -> f64 {
        match self {
            PmCostSign::Expense => -1.0,
            PmCostSign::Literal => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicConstants {
    /// Value of one quality-adjusted life year (Spanish GDP per capita, 2023).
    pub gdp_per_capita: f64,
    /// Mean treatment cost of a detected cancer.
    pub treatment_cost: f64,
    pub burden_base: f64,
    /// Burden relief on a positive result.
    pub detection_relief: f64,
    pub pm_cost_sign: PmCostSign,
}

impl Default for EconomicConstants {
    fn default() -> Self {
        EconomicConstants {
            gdp_per_capita: 30_968.0,
            treatment_cost: 25_955.0,
            burden_base: 200.0,
            detection_relief: 1_000.0,
            pm_cost_sign: PmCostSign::Expense,
        }
    }
}

impl EconomicConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gdp_per_capita", self.gdp_per_capita),
            ("treatment_cost", self.treatment_cost),
            ("burden_base", self.burden_base),
            ("detection_relief", self.detection_relief),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("economics.{name}"), "must be strictly positive"));
            }
        }
        Ok(())
    }
}

/// Closed interval `[low, high]` for a uniform draw; serialized as a pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub fn low(self) -> f64 {
        self.0
    }

    pub fn high(self) -> f64 {
        self.1
    }

    pub fn midpoint(self) -> f64 {
        0.5 * (self.0 + self.1)
    }

    /// Maps a unit uniform variate onto the interval. A degenerate interval
    /// returns `low` for every `u`.
    pub fn at(self, u: f64) -> f64 {
        self.0 + (self.1 - self.0) * u
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        self.at(rng.random::<f64>())
    }

    fn validate(self, path: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return Err(Error::config(path, format!("interval [{}, {}] needs low <= high", self.0, self.1)));
        }
        Ok(())
    }
}

/// The random model the policymaker holds over the citizen's utilities and
/// beliefs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitizenModelConfig {
    /// QALY change when CRC is present but the cascade is negative.
    pub qaly_missed: Interval,
    /// QALY change when CRC is present and detected.
    pub qaly_detected: Interval,
    pub burden_fraction: Interval,
    /// Multiplier on the age-marginal risk expressing underestimation.
    pub misconception: Interval,
    /// Standard deviation of the perceived risk as a fraction of the
    /// age-marginal risk. Zero makes the perceived risk a point mass.
    pub perceived_sd_factor: f64,
}

impl Default for CitizenModelConfig {
    fn default() -> Self {
        CitizenModelConfig {
            qaly_missed: Interval(-5.0, -3.0),
            qaly_detected: Interval(5.0, 10.0),
            burden_fraction: Interval(0.6, 0.9),
            misconception: Interval(0.3, 0.4),
            perceived_sd_factor: 0.1,
        }
    }
}

impl CitizenModelConfig {
    pub fn validate(&self, table: &AgeMarginalTable) -> Result<()> {
        self.qaly_missed.validate("citizen.qaly_missed")?;
        self.qaly_detected.validate("citizen.qaly_detected")?;
        self.burden_fraction.validate("citizen.burden_fraction")?;
        self.misconception.validate("citizen.misconception")?;
        if !(self.misconception.low() > 0.0 && self.misconception.high() <= 1.0) {
            return Err(Error::config("citizen.misconception", "interval must lie within (0, 1]"));
        }
        if !(self.perceived_sd_factor >= 0.0 && self.perceived_sd_factor.is_finite()) {
            return Err(Error::config("citizen.perceived_sd_factor", "must be non-negative"));
        }
        // mean*(1-mean) is concave, so checking both interval ends covers
        // every misconception value.
        for (i, band) in table.bands.iter().enumerate() {
            for m in [self.misconception.low(), self.misconception.high()] {
                let mean = band.probability * m;
                let variance = self.perceived_variance(band.probability);
                if variance > 0.0 && beta_params(mean, variance).is_err() {
                    return Err(infeasible_band(i, band.age_low, band.age_high, mean, variance));
                }
            }
        }
        Ok(())
    }

    pub fn perceived_variance(&self, marginal: f64) -> f64 {
        let sd = marginal * self.perceived_sd_factor;
        sd * sd
    }

    /// A draw at the interval midpoints; the policymaker's own expected QALY
    /// gains are read from it.
    pub fn expected_draw(&self) -> CitizenDraw {
        CitizenDraw {
            qaly_missed: self.qaly_missed.midpoint(),
            qaly_detected: self.qaly_detected.midpoint(),
            burden_fraction: self.burden_fraction.midpoint(),
            perceived_crc_prob: f64::NAN,
        }
    }
}

fn infeasible_band(index: usize, lo: u32, hi: u32, mean: f64, variance: f64) -> Error {
    Error::config(
        format!("age_marginal.bands[{index}]"),
        format!(
            "age band {lo}-{hi}: perceived risk Beta with mean {mean} and variance {variance} is infeasible"
        ),
    )
}

/// One realization `(U_C^k, P_C^k)` of the citizen's random utility and
/// random probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CitizenDraw {
    pub qaly_missed: f64,
    pub qaly_detected: f64,
    pub burden_fraction: f64,
    pub perceived_crc_prob: f64,
}

/// EQ-5D utility weights by age band and sex. Ages without a matching entry
/// get full health (1.0).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Eq5dTable {
    pub entries: Vec<Eq5dEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eq5dEntry {
    pub age_low: u32,
    pub age_high: u32,
    /// Applies to both sexes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sex: Option<Sex>,
    pub value: f64,
}

impl Eq5dTable {
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.age_low > e.age_high || !(e.value > 0.0 && e.value <= 1.0) {
                return Err(Error::config(
                    format!("eq5d.entries[{i}]"),
                    "needs age_low <= age_high and value in (0, 1]",
                ));
            }
        }
        Ok(())
    }

    /// First matching entry wins.
    pub fn lookup(&self, age: u32, sex: Sex) -> f64 {
        self.entries
            .iter()
            .find(|e| (e.age_low..=e.age_high).contains(&age) && e.sex.is_none_or(|s| s == sex))
            .map_or(1.0, |e| e.value)
    }
}

/// A single leaf of the screening outcome tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Encounter {
    pub crc: bool,
    pub action: ScreeningAction,
    pub choice: CitizenChoice,
    pub outcome: TestOutcome,
}

impl Encounter {
    /// Whether a test was actually administered.
    fn screened(&self) -> bool {
        self.choice == CitizenChoice::Accept && self.action != ScreeningAction::None
    }
}

pub fn qaly_gain(crc: bool, outcome: TestOutcome, draw: &CitizenDraw) -> f64 {
    match (crc, outcome) {
        (true, TestOutcome::Negative) => draw.qaly_missed,
        (true, TestOutcome::Positive) => draw.qaly_detected,
        _ => 0.0,
    }
}

pub fn pm_utility(
    profile: &CovariateProfile,
    encounter: &Encounter,
    incentive: f64,
    qaly: f64,
    constants: &EconomicConstants,
    policy: &ScreeningPolicy,
) -> Result<f64> {
    if !(incentive >= 0.0) {
        return Err(Error::Input(format!("negative incentive {incentive}")));
    }
    if !encounter.screened() {
        return Ok(constants.gdp_per_capita * profile.eq5d_index * qaly);
    }
    let screening_cost = match policy.cascade(encounter.action)? {
        Some(cascade) => cascade.expected_cost(encounter.crc),
        None => 0.0,
    };
    let treatment = if encounter.crc && encounter.outcome == TestOutcome::Positive {
        constants.treatment_cost
    } else {
        0.0
    };
    Ok(constants.gdp_per_capita * profile.eq5d_index * qaly - incentive
        + constants.pm_cost_sign.factor() * screening_cost
        - treatment)
}

pub fn citizen_utility(
    profile: &CovariateProfile,
    encounter: &Encounter,
    incentive: f64,
    draw: &CitizenDraw,
    constants: &EconomicConstants,
    policy: &ScreeningPolicy,
) -> Result<f64> {
    if !(incentive >= 0.0) {
        return Err(Error::Input(format!("negative incentive {incentive}")));
    }
    let life = constants.gdp_per_capita * profile.eq5d_index * qaly_gain(encounter.crc, encounter.outcome, draw);
    let Some(initial) = encounter.action.initial_test().filter(|_| encounter.screened()) else {
        return Ok(life);
    };
    let comfort = policy.test(initial)?.comfort;
    if !(comfort > 0.0) {
        return Err(Error::config(format!("tests.{initial}.comfort"), "must be strictly positive"));
    }
    let relief = if encounter.outcome == TestOutcome::Positive {
        constants.detection_relief
    } else {
        0.0
    };
    let burden = constants.burden_base * draw.burden_fraction / comfort - relief;
    Ok(life + incentive - burden)
}

/// Moment-matched Beta shape parameters.
pub fn beta_params(mean: f64, variance: f64) -> Result<(f64, f64)> {
    let infeasible = || Error::InfeasibleBeta { mean, variance };
    if !(mean > 0.0 && mean < 1.0 && variance > 0.0) {
        return Err(infeasible());
    }
    let spread = mean * (1.0 - mean);
    if variance >= spread {
        return Err(infeasible());
    }
    let nu = spread / variance - 1.0;
    Ok((mean * nu, (1.0 - mean) * nu))
}

/// Draws one citizen sample. Consumes four uniforms and then one Beta
/// variate from `rng`, in that order.
pub fn sample_citizen_draw<R: Rng + ?Sized>(
    profile: &CovariateProfile,
    config: &CitizenModelConfig,
    table: &AgeMarginalTable,
    rng: &mut R,
) -> Result<CitizenDraw> {
    let qaly_missed = config.qaly_missed.sample(rng);
    let qaly_detected = config.qaly_detected.sample(rng);
    let burden_fraction = config.burden_fraction.sample(rng);
    let misconception = config.misconception.sample(rng);

    let marginal = table.marginal_age_risk(profile.age)?;
    let mean = marginal * misconception;
    let variance = config.perceived_variance(marginal);
    let perceived_crc_prob = if variance == 0.0 {
        mean
    } else {
        let (alpha, beta) = beta_params(mean, variance).map_err(|_| {
            let i = table
                .bands
                .iter()
                .position(|b| (b.age_low..=b.age_high).contains(&profile.age))
                .unwrap_or_default();
            let b = table.bands[i];
            infeasible_band(i, b.age_low, b.age_high, mean, variance)
        })?;
        Beta::new(alpha, beta)
            .map_err(|e| Error::Input(format!("beta({alpha}, {beta}): {e}")))?
            .sample(rng)
    };
    Ok(CitizenDraw {
        qaly_missed,
        qaly_detected,
        burden_fraction,
        perceived_crc_prob,
    })
}
