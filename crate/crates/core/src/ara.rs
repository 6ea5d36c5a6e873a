//! Adversarial risk analysis of a single incentive decision.
//!
//! The policymaker does not know the citizen's utilities and beliefs. She
//! holds a random model of them ([`CitizenModelConfig`]), draws `K` citizens
//! from it, lets each draw choose between accepting and declining the
//! proposed screening, and reads the acceptance probability `p̂(I)` off the
//! fraction that accept. Her own expected utility of offering `I` is then
//!
//! ```text
//! ψ(I | x) = p̂(I) · Σ_{c, r} u_PM(c, accept, r, I) · p_PM(c | x) · p(r | c, s)
//! ```
//!
//! because the decline branch is worth zero. The optimal incentive is the
//! grid point maximizing `ψ`.
//!
//! The same `K` draws are used at every grid point. Each draw then accepts
//! exactly when `I` passes its own threshold, so `p̂` is the empirical CDF of
//! those thresholds and is non-decreasing in `I` without Monte Carlo noise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    result_distribution, CitizenChoice, CovariateProfile, ScreeningAction, ScreeningPolicy,
};
use crate::risk::{AgeMarginalTable, RiskSurrogate};
use crate::seed::{derive_seed, rng_from_seed};
use crate::utility::{
    citizen_utility, pm_utility, qaly_gain, sample_citizen_draw, CitizenDraw, CitizenModelConfig,
    EconomicConstants, Encounter,
};

/// Default number of citizen draws per run.
pub const DEFAULT_K: usize = 200;
/// Default number of independent replications.
pub const DEFAULT_RUNS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncentiveGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for IncentiveGrid {
    fn default() -> Self {
        IncentiveGrid {
            min: 0.0,
            max: 500.0,
            step: 1.0,
        }
    }
}

impl IncentiveGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let grid = IncentiveGrid { min, max, step };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min >= 0.0 && self.step > 0.0 && self.min < self.max && self.max.is_finite()) {
            return Err(Error::config(
                "grid",
                format!(
                    "need min >= 0, step > 0 and min < max (got min {}, max {}, step {})",
                    self.min, self.max, self.step
                ),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        // Tolerate representation error in (max - min) / step.
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, index: usize) -> f64 {
        self.min + index as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }
}

/// Everything the engine needs besides the citizen: economics, the random
/// citizen model and the screening policy.
#[derive(Clone, Debug, PartialEq)]
pub struct AraModel {
    pub economics: EconomicConstants,
    pub citizen: CitizenModelConfig,
    pub age_marginal: AgeMarginalTable,
    pub policy: ScreeningPolicy,
}

impl AraModel {
    pub fn validate(&self) -> Result<()> {
        self.economics.validate()?;
        self.age_marginal.validate()?;
        self.citizen.validate(&self.age_marginal)?;
        self.policy.validate()
    }
}

/// A citizen together with the action proposed to them and their model risk.
#[derive(Clone, Debug, PartialEq)]
pub struct Patient {
    pub profile: CovariateProfile,
    pub action: ScreeningAction,
    /// `p_PM(CRC | x)`.
    pub risk: f64,
}

impl Patient {
    /// Scores `profile` with `risk_model` and applies the policy's threshold rule.
    pub fn assess(
        profile: CovariateProfile,
        risk_model: &RiskSurrogate,
        policy: &ScreeningPolicy,
    ) -> Result<Self> {
        let risk = risk_model.predict_risk(&profile)?;
        let action = crate::model::assign_screening(risk, policy)?;
        Ok(Patient {
            profile,
            action,
            risk,
        })
    }
}

/// A finite lottery whose payoffs are affine in the incentive:
/// `E[U](I) = Σ weight · (base + slope · I)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lottery {
    branches: Vec<Branch>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Branch {
    weight: f64,
    base: f64,
    slope: f64,
}

impl Lottery {
    pub fn expected(&self, incentive: f64) -> f64 {
        self.branches
            .iter()
            .map(|b| b.weight * (b.base + b.slope * incentive))
            .sum()
    }
}

fn incentive_slope(action: ScreeningAction, choice: CitizenChoice) -> f64 {
    if choice == CitizenChoice::Accept && action != ScreeningAction::None {
        1.0
    } else {
        0.0
    }
}

/// Builds the citizen's lottery for one draw over the 2 × 3 tree of CRC
/// state and test outcome.
pub fn citizen_lottery(
    model: &AraModel,
    profile: &CovariateProfile,
    action: ScreeningAction,
    choice: CitizenChoice,
    draw: &CitizenDraw,
) -> Result<Lottery> {
    let slope = incentive_slope(action, choice);
    let mut branches = Vec::with_capacity(6);
    for crc in [true, false] {
        let p_crc = if crc {
            draw.perceived_crc_prob
        } else {
            1.0 - draw.perceived_crc_prob
        };
        let outcomes = result_distribution(crc, action, choice, &model.policy)?;
        for (outcome, p_outcome) in outcomes.iter() {
            let encounter = Encounter {
                crc,
                action,
                choice,
                outcome,
            };
            let base = citizen_utility(profile, &encounter, 0.0, draw, &model.economics, &model.policy)?;
            branches.push(Branch {
                weight: p_crc * p_outcome,
                base,
                slope,
            });
        }
    }
    Ok(Lottery { branches })
}

/// The policymaker's lottery for one citizen choice, weighting CRC by the
/// model risk and valuing life years at the expected QALY gains.
pub fn pm_lottery(model: &AraModel, patient: &Patient, choice: CitizenChoice) -> Result<Lottery> {
    let slope = -incentive_slope(patient.action, choice);
    let expected_qaly = model.citizen.expected_draw();
    let mut branches = Vec::with_capacity(6);
    for crc in [true, false] {
        let p_crc = if crc { patient.risk } else { 1.0 - patient.risk };
        let outcomes = result_distribution(crc, patient.action, choice, &model.policy)?;
        for (outcome, p_outcome) in outcomes.iter() {
            let encounter = Encounter {
                crc,
                action: patient.action,
                choice,
                outcome,
            };
            let qaly = qaly_gain(crc, outcome, &expected_qaly);
            let base = pm_utility(&patient.profile, &encounter, 0.0, qaly, &model.economics, &model.policy)?;
            branches.push(Branch {
                weight: p_crc * p_outcome,
                base,
                slope,
            });
        }
    }
    Ok(Lottery { branches })
}

/// `Ψ_C(choice, I | x)` for one draw.
pub fn citizen_expected_utility(
    model: &AraModel,
    profile: &CovariateProfile,
    draw: &CitizenDraw,
    choice: CitizenChoice,
    action: ScreeningAction,
    incentive: f64,
) -> Result<f64> {
    Ok(citizen_lottery(model, profile, action, choice, draw)?.expected(incentive))
}

/// `ψ(I | x)` given an acceptance probability.
pub fn pm_expected_utility(
    model: &AraModel,
    patient: &Patient,
    incentive: f64,
    acceptance: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&acceptance) {
        return Err(Error::Input(format!("acceptance {acceptance} outside [0, 1]")));
    }
    let accept = pm_lottery(model, patient, CitizenChoice::Accept)?.expected(incentive);
    let decline = pm_lottery(model, patient, CitizenChoice::Decline)?.expected(incentive);
    Ok(acceptance * accept + (1.0 - acceptance) * decline)
}

/// Draws `k` citizens sequentially from a stream seeded with `seed`.
pub fn sample_draws(model: &AraModel, profile: &CovariateProfile, k: usize, seed: u64) -> Result<Vec<CitizenDraw>> {
    let mut rng = rng_from_seed(seed);
    sample_draws_with(model, profile, k, &mut rng)
}

pub fn sample_draws_with<R: Rng + ?Sized>(
    model: &AraModel,
    profile: &CovariateProfile,
    k: usize,
    rng: &mut R,
) -> Result<Vec<CitizenDraw>> {
    (0..k)
        .map(|_| sample_citizen_draw(profile, &model.citizen, &model.age_marginal, rng))
        .collect()
}

/// `p̂_PM(accept | I, x)`: the share of draws whose best response is to accept.
pub fn estimate_acceptance(
    model: &AraModel,
    patient: &Patient,
    incentive: f64,
    draws: &[CitizenDraw],
) -> Result<f64> {
    Ok(IncentiveEvaluator::new(model, patient, draws)?.acceptance(incentive))
}

/// One patient's acceptance and expected-utility curves, with the citizen
/// lotteries precomputed for a fixed set of draws.
#[derive(Clone, Debug)]
pub struct IncentiveEvaluator {
    accept: Vec<Lottery>,
    decline: Vec<Lottery>,
    pm_accept: Lottery,
    pm_decline: Lottery,
}

/// Evaluation at a single incentive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub incentive: f64,
    pub accept_count: usize,
    pub acceptance: f64,
    pub psi: f64,
    pub psi_se: f64,
}

impl IncentiveEvaluator {
    pub fn new(model: &AraModel, patient: &Patient, draws: &[CitizenDraw]) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Input("at least one citizen draw is required".into()));
        }
        let lotteries = |choice| {
            draws
                .iter()
                .map(|d| citizen_lottery(model, &patient.profile, patient.action, choice, d))
                .collect::<Result<Vec<_>>>()
        };
        Ok(IncentiveEvaluator {
            accept: lotteries(CitizenChoice::Accept)?,
            decline: lotteries(CitizenChoice::Decline)?,
            pm_accept: pm_lottery(model, patient, CitizenChoice::Accept)?,
            pm_decline: pm_lottery(model, patient, CitizenChoice::Decline)?,
        })
    }

    pub fn k(&self) -> usize {
        self.accept.len()
    }

    /// Number of draws preferring to accept; ties go to accept.
    pub fn accept_count(&self, incentive: f64) -> usize {
        self.accept
            .iter()
            .zip(&self.decline)
            .filter(|(a, d)| a.expected(incentive) >= d.expected(incentive))
            .count()
    }

    pub fn acceptance(&self, incentive: f64) -> f64 {
        self.accept_count(incentive) as f64 / self.k() as f64
    }

    pub fn psi_if_accepted(&self, incentive: f64) -> f64 {
        self.pm_accept.expected(incentive)
    }

    pub fn evaluate(&self, incentive: f64) -> GridPoint {
        let k = self.k() as f64;
        let accept_count = self.accept_count(incentive);
        let acceptance = accept_count as f64 / k;
        let accepted = self.pm_accept.expected(incentive);
        let declined = self.pm_decline.expected(incentive);
        let psi = acceptance * accepted + (1.0 - acceptance) * declined;
        // Only p̂ is random; ψ is linear in it.
        let psi_se = (acceptance * (1.0 - acceptance) / k).sqrt() * (accepted - declined).abs();
        GridPoint {
            incentive,
            accept_count,
            acceptance,
            psi,
            psi_se,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AraResult {
    pub incentives: Vec<f64>,
    pub accept_counts: Vec<usize>,
    pub acceptance: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_se: Vec<f64>,
    pub optimal_incentive: f64,
    pub optimal_psi: f64,
    pub k_samples: usize,
    pub seed: u64,
}

impl AraResult {
    fn from_points(points: Vec<GridPoint>, k_samples: usize, seed: u64) -> Self {
        let best = argmax_first(points.iter().map(|p| p.psi));
        AraResult {
            optimal_incentive: points[best].incentive,
            optimal_psi: points[best].psi,
            incentives: points.iter().map(|p| p.incentive).collect(),
            accept_counts: points.iter().map(|p| p.accept_count).collect(),
            acceptance: points.iter().map(|p| p.acceptance).collect(),
            psi: points.iter().map(|p| p.psi).collect(),
            psi_se: points.iter().map(|p| p.psi_se).collect(),
            k_samples,
            seed,
        }
    }

    /// `p̂(decline | I)` at every grid point.
    pub fn decline(&self) -> Vec<f64> {
        self.accept_counts
            .iter()
            .map(|&n| (self.k_samples - n) as f64 / self.k_samples as f64)
            .collect()
    }
}

/// Index of the first maximum.
pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Evaluates every grid point against a fixed set of draws.
pub fn evaluate_grid(evaluator: &IncentiveEvaluator, grid: &IncentiveGrid) -> Vec<GridPoint> {
    (0..grid.len())
        .into_par_iter()
        .map(|j| evaluator.evaluate(grid.point(j)))
        .collect()
}

/// Grid search for `I*_ARA` with `k` draws seeded by `seed`.
pub fn optimal_incentive(
    model: &AraModel,
    patient: &Patient,
    grid: &IncentiveGrid,
    k: usize,
    seed: u64,
) -> Result<AraResult> {
    if patient.action == ScreeningAction::None {
        return Err(Error::Input("no screening assigned".into()));
    }
    if k == 0 {
        return Err(Error::Input("k must be at least 1".into()));
    }
    grid.validate()?;
    let draws = sample_draws(model, &patient.profile, k, seed)?;
    let evaluator = IncentiveEvaluator::new(model, patient, &draws)?;
    Ok(optimal_from_evaluator(&evaluator, grid, seed))
}

/// Grid search over precomputed draws; `seed` is recorded, not used.
pub fn optimal_from_evaluator(evaluator: &IncentiveEvaluator, grid: &IncentiveGrid, seed: u64) -> AraResult {
    AraResult::from_points(evaluate_grid(evaluator, grid), evaluator.k(), seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub optimal_incentive: f64,
    pub optimal_psi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
    /// Central 90% interval.
    pub q05: f64,
    pub q95: f64,
}

impl Spread {
    /// Sample statistics; `sd` uses `n - 1` and is 0 for a single value.
    /// Quantiles interpolate linearly between order statistics.
    pub fn of(values: &[f64]) -> Spread {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantile = |q: f64| {
            let h = q * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Spread {
            mean,
            sd,
            q05: quantile(0.05),
            q95: quantile(0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Replication {
    pub master_seed: u64,
    pub runs: Vec<RunOutcome>,
    pub optimal_incentive: Spread,
    pub optimal_psi: Spread,
}

/// Repeats [`optimal_incentive`] `n_runs` times; run `j` uses
/// `derive_seed(master_seed, j)`.
pub fn replicate_optimal_incentive(
    model: &AraModel,
    patient: &Patient,
    grid: &IncentiveGrid,
    k: usize,
    n_runs: usize,
    master_seed: u64,
) -> Result<Replication> {
    if n_runs == 0 {
        return Err(Error::Input("n_runs must be at least 1".into()));
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|j| {
            let seed = derive_seed(master_seed, j);
            optimal_incentive(model, patient, grid, k, seed).map(|r| RunOutcome {
                seed,
                optimal_incentive: r.optimal_incentive,
                optimal_psi: r.optimal_psi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let incentives: Vec<f64> = runs.iter().map(|r| r.optimal_incentive).collect();
    let psis: Vec<f64> = runs.iter().map(|r| r.optimal_psi).collect();
    Ok(Replication {
        master_seed,
        optimal_incentive: Spread::of(&incentives),
        optimal_psi: Spread::of(&psis),
        runs,
    })
}
