//! Cohort-level incentive schemes.
//!
//! Two approaches are provided. [`iterated_allocation`] walks the cohort in
//! descending risk, offering each screened citizen their own optimal
//! incentive while the budget allows. [`marginal_incentive`] instead picks a
//! single incentive for everyone assigned a screening, maximizing the mean
//! per-patient expected utility.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ara::{
    argmax_first, optimal_from_evaluator, sample_draws, AraModel, IncentiveEvaluator, IncentiveGrid, Patient,
};
use crate::error::{Error, Result};
use crate::model::{assign_screening, CovariateProfile, ScreeningAction, ScreeningPolicy, Sex, MAX_AGE, MIN_AGE};
use crate::risk::RiskSurrogate;
use crate::seed::{profile_seed, rng_from_seed};
use crate::utility::Eq5dTable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedAgeBand {
    pub age_low: u32,
    pub age_high: u32,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prevalence {
    pub smoker: f64,
    pub alcohol: f64,
    pub diabetes: f64,
    pub hypertension: f64,
}

impl Default for Prevalence {
    fn default() -> Self {
        Prevalence {
            smoker: 0.25,
            alcohol: 0.3,
            diabetes: 0.08,
            hypertension: 0.2,
        }
    }
}

/// Risk-quantile construction of the screening thresholds: the riskiest
/// `sdna_share` of the cohort gets sDNA, the next `fit_share` gets FIT.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileThresholds {
    pub sdna_share: f64,
    pub fit_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub size: usize,
    pub seed: u64,
    pub age_bands: Vec<WeightedAgeBand>,
    pub male_fraction: f64,
    pub prevalence: Prevalence,
    /// Weights of socioeconomic strata 1 through 5.
    pub ses_weights: [f64; 5],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile_thresholds: Option<QuantileThresholds>,
    /// Incentive budget for the iterated allocation; unlimited when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl Default for CohortSpec {
    fn default() -> Self {
        let band = |age_low, age_high, weight| WeightedAgeBand {
            age_low,
            age_high,
            weight,
        };
        CohortSpec {
            size: 10_000,
            seed: 2016,
            age_bands: vec![
                band(18, 39, 0.35),
                band(40, 49, 0.25),
                band(50, 69, 0.3),
                band(70, 100, 0.1),
            ],
            male_fraction: 0.5,
            prevalence: Prevalence::default(),
            ses_weights: [0.2; 5],
            quantile_thresholds: Some(QuantileThresholds {
                sdna_share: 0.02,
                fit_share: 0.12,
            }),
            budget: None,
        }
    }
}

const WEIGHT_TOLERANCE: f64 = 1e-9;

fn check_probability(path: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(path, format!("{p} outside [0, 1]")));
    }
    Ok(())
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("cohort.size", "must be at least 1"));
        }
        if self.age_bands.is_empty() {
            return Err(Error::config("cohort.age_bands", "at least one band is required"));
        }
        for (i, b) in self.age_bands.iter().enumerate() {
            if b.age_low > b.age_high || b.age_low < MIN_AGE || b.age_high > MAX_AGE || !(b.weight >= 0.0) {
                return Err(Error::config(
                    format!("cohort.age_bands[{i}]"),
                    format!("needs {MIN_AGE} <= age_low <= age_high <= {MAX_AGE} and weight >= 0"),
                ));
            }
        }
        let total: f64 = self.age_bands.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::config("cohort.age_bands", format!("weights sum to {total}, not 1")));
        }
        if self.ses_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::config("cohort.ses_weights", "weights must be non-negative"));
        }
        let total: f64 = self.ses_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::config("cohort.ses_weights", format!("weights sum to {total}, not 1")));
        }
        check_probability("cohort.male_fraction", self.male_fraction)?;
        let p = &self.prevalence;
        check_probability("cohort.prevalence.smoker", p.smoker)?;
        check_probability("cohort.prevalence.alcohol", p.alcohol)?;
        check_probability("cohort.prevalence.diabetes", p.diabetes)?;
        check_probability("cohort.prevalence.hypertension", p.hypertension)?;
        if let Some(q) = self.quantile_thresholds {
            if !(q.sdna_share > 0.0 && q.fit_share > 0.0 && q.sdna_share + q.fit_share < 1.0) {
                return Err(Error::config(
                    "cohort.quantile_thresholds",
                    "shares must be positive and sum to less than 1",
                ));
            }
        }
        if let Some(b) = self.budget {
            if !(b >= 0.0) {
                return Err(Error::config("cohort.budget", "must be non-negative"));
            }
        }
        Ok(())
    }
}

fn categorical(weights: impl IntoIterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Draws `spec.size` independent citizens; EQ-5D comes from `eq5d`.
pub fn generate_cohort(spec: &CohortSpec, eq5d: &Eq5dTable) -> Result<Vec<CovariateProfile>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut cohort = Vec::with_capacity(spec.size);
    for _ in 0..spec.size {
        let band = spec.age_bands[categorical(spec.age_bands.iter().map(|b| b.weight), rng.random())];
        let age = rng.random_range(band.age_low..=band.age_high);
        let sex = if rng.random::<f64>() < spec.male_fraction {
            Sex::Male
        } else {
            Sex::Female
        };
        let mut flag = |p: f64| rng.random::<f64>() < p;
        let smoker = flag(spec.prevalence.smoker);
        let alcohol = flag(spec.prevalence.alcohol);
        let diabetes = flag(spec.prevalence.diabetes);
        let hypertension = flag(spec.prevalence.hypertension);
        let ses_level = categorical(spec.ses_weights, rng.random()) as u8 + 1;
        cohort.push(CovariateProfile {
            age,
            sex,
            smoker,
            alcohol,
            diabetes,
            hypertension,
            ses_level,
            eq5d_index: eq5d.lookup(age, sex),
        });
    }
    Ok(cohort)
}

/// Risk scores, assigned actions and the descending-risk visiting order.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub risks: Vec<f64>,
    pub actions: Vec<ScreeningAction>,
    /// Patient ids by descending risk; ties keep id order.
    pub order: Vec<usize>,
}

impl Segmentation {
    pub fn screened(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.actions.len()).filter(|&i| self.actions[i] != ScreeningAction::None)
    }

    pub fn screened_count(&self) -> usize {
        self.screened().count()
    }

    pub fn patient(&self, cohort: &[CovariateProfile], id: usize) -> Patient {
        Patient {
            profile: cohort[id].clone(),
            action: self.actions[id],
            risk: self.risks[id],
        }
    }
}

pub fn score_cohort(cohort: &[CovariateProfile], risk_model: &RiskSurrogate) -> Result<Vec<f64>> {
    cohort.iter().map(|p| risk_model.predict_risk(p)).collect()
}

pub fn segment_cohort(
    cohort: &[CovariateProfile],
    risk_model: &RiskSurrogate,
    policy: &ScreeningPolicy,
) -> Result<Segmentation> {
    if cohort.is_empty() {
        return Err(Error::Input("cohort is empty".into()));
    }
    let risks = score_cohort(cohort, risk_model)?;
    segment_scored(risks, policy)
}

pub fn segment_scored(risks: Vec<f64>, policy: &ScreeningPolicy) -> Result<Segmentation> {
    let actions = risks
        .iter()
        .map(|&r| assign_screening(r, policy))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..risks.len()).collect();
    order.sort_by(|&a, &b| risks[b].total_cmp(&risks[a]).then(a.cmp(&b)));
    Ok(Segmentation { risks, actions, order })
}

/// Thresholds placing at most `sdna_share` of the cohort strictly above
/// `th1` and at most `sdna_share + fit_share` strictly above `th2`.
pub fn quantile_policy(risks: &[f64], shares: QuantileThresholds, base: &ScreeningPolicy) -> Result<ScreeningPolicy> {
    if risks.is_empty() {
        return Err(Error::Input("cohort is empty".into()));
    }
    let mut sorted = risks.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let cut = |share: f64| sorted[((share * n as f64).floor() as usize).min(n - 1)];
    let policy = ScreeningPolicy {
        th1: cut(shares.sdna_share),
        th2: cut(shares.sdna_share + shares.fit_share),
        tests: base.tests.clone(),
    };
    policy.validate().map_err(|_| {
        Error::config(
            "cohort.quantile_thresholds",
            format!(
                "cohort risks too coarse for distinct thresholds (th1 = {}, th2 = {})",
                policy.th1, policy.th2
            ),
        )
    })?;
    Ok(policy)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatientAllocation {
    pub patient_id: usize,
    pub risk: f64,
    pub action: ScreeningAction,
    pub incentive: f64,
    /// `ψ` at the allocated incentive; 0 without a screening.
    pub expected_psi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllocationTotals {
    pub screened: usize,
    /// Screened patients whose incentive fitted the budget.
    pub funded: usize,
    pub total_expense: f64,
    pub total_expected_benefit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllocationPlan {
    /// In patient-id order.
    pub patients: Vec<PatientAllocation>,
    pub totals: AllocationTotals,
}

/// Per-patient seed for the draws of `patient` within a cohort run.
pub fn patient_seed(master: u64, patient: &Patient) -> u64 {
    profile_seed(master, &patient.profile)
}

fn patient_evaluator(model: &AraModel, patient: &Patient, k: usize, master: u64) -> Result<IncentiveEvaluator> {
    let draws = sample_draws(model, &patient.profile, k, patient_seed(master, patient))?;
    IncentiveEvaluator::new(model, patient, &draws)
}

/// A screened patient's own optimum, the input to the budgeted walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatientSolution {
    pub patient_id: usize,
    pub optimal_incentive: f64,
    pub optimal_psi: f64,
    /// `ψ(0 | x)`, what the policymaker expects when offering nothing.
    pub psi_without_incentive: f64,
}

/// Single-patient optimum for every screened patient, in id order.
pub fn solve_patients(
    model: &AraModel,
    cohort: &[CovariateProfile],
    segmentation: &Segmentation,
    grid: &IncentiveGrid,
    k: usize,
    seed: u64,
) -> Result<Vec<PatientSolution>> {
    grid.validate()?;
    let screened: Vec<usize> = segmentation.screened().collect();
    screened
        .par_iter()
        .map(|&id| {
            let patient = segmentation.patient(cohort, id);
            let evaluator = patient_evaluator(model, &patient, k, seed)?;
            let result = optimal_from_evaluator(&evaluator, grid, patient_seed(seed, &patient));
            Ok(PatientSolution {
                patient_id: id,
                optimal_incentive: result.optimal_incentive,
                optimal_psi: result.optimal_psi,
                psi_without_incentive: evaluator.evaluate(0.0).psi,
            })
        })
        .collect()
}

/// Greedy budget-constrained walk in descending risk. A patient whose
/// optimal incentive would breach the budget is skipped (offered 0) and the
/// walk continues with the next one. `budget = None` never binds.
pub fn allocate_budget(
    segmentation: &Segmentation,
    solutions: &[PatientSolution],
    budget: Option<f64>,
) -> Result<AllocationPlan> {
    if let Some(b) = budget {
        if !(b >= 0.0) {
            return Err(Error::Input(format!("budget {b} must be non-negative")));
        }
    }
    let by_id: BTreeMap<usize, &PatientSolution> = solutions.iter().map(|s| (s.patient_id, s)).collect();

    // (incentive, expected psi, funded)
    let mut allocated: BTreeMap<usize, (f64, f64, bool)> = BTreeMap::new();
    let mut spent = 0.0;
    for id in &segmentation.order {
        let Some(solution) = by_id.get(id) else {
            continue;
        };
        let candidate = spent + solution.optimal_incentive;
        if budget.is_none_or(|b| candidate <= b) {
            spent = candidate;
            allocated.insert(*id, (solution.optimal_incentive, solution.optimal_psi, true));
        } else {
            allocated.insert(*id, (0.0, solution.psi_without_incentive, false));
        }
    }

    let mut totals = AllocationTotals {
        screened: solutions.len(),
        funded: 0,
        total_expense: 0.0,
        total_expected_benefit: 0.0,
    };
    let patients = (0..segmentation.risks.len())
        .map(|id| {
            let (incentive, expected_psi, funded) = allocated.get(&id).copied().unwrap_or((0.0, 0.0, false));
            totals.funded += usize::from(funded);
            totals.total_expense += incentive;
            totals.total_expected_benefit += expected_psi;
            PatientAllocation {
                patient_id: id,
                risk: segmentation.risks[id],
                action: segmentation.actions[id],
                incentive,
                expected_psi,
            }
        })
        .collect();
    Ok(AllocationPlan { patients, totals })
}

/// [`solve_patients`] followed by [`allocate_budget`].
pub fn iterated_allocation(
    model: &AraModel,
    cohort: &[CovariateProfile],
    segmentation: &Segmentation,
    grid: &IncentiveGrid,
    k: usize,
    budget: Option<f64>,
    seed: u64,
) -> Result<AllocationPlan> {
    let solutions = solve_patients(model, cohort, segmentation, grid, k, seed)?;
    allocate_budget(segmentation, &solutions, budget)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionBreakdown {
    pub action: ScreeningAction,
    pub screened: usize,
    pub optimal_incentive: f64,
    pub mean_psi: f64,
}

/// Common incentive for every screened patient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalResult {
    pub incentives: Vec<f64>,
    /// Mean acceptance over screened patients.
    pub mean_acceptance: Vec<f64>,
    /// `ψ_pop(I)`, the mean per-patient `ψ(I | x_i)`.
    pub psi: Vec<f64>,
    pub optimal_incentive: f64,
    /// Mean `ψ` per screened case at the optimum.
    pub optimal_psi: f64,
    pub screened: usize,
    pub total_expense: f64,
    pub total_expected_benefit: f64,
    /// The same optimization restricted to each screening action.
    pub per_action: Vec<ActionBreakdown>,
}

fn mean_curves(curves: &[(ScreeningAction, Vec<(f64, f64)>)], len: usize, filter: Option<ScreeningAction>) -> (usize, Vec<f64>, Vec<f64>) {
    let mut acceptance = vec![0.0; len];
    let mut psi = vec![0.0; len];
    let mut n = 0;
    for (action, curve) in curves {
        if filter.is_some_and(|f| f != *action) {
            continue;
        }
        n += 1;
        for (j, (a, p)) in curve.iter().enumerate() {
            acceptance[j] += a;
            psi[j] += p;
        }
    }
    let scale = 1.0 / n as f64;
    acceptance.iter_mut().chain(psi.iter_mut()).for_each(|v| *v *= scale);
    (n, acceptance, psi)
}

/// Maximizes the mean expected utility over screened patients of a common
/// incentive, each patient evaluated with their own action and risk.
pub fn marginal_incentive(
    model: &AraModel,
    cohort: &[CovariateProfile],
    segmentation: &Segmentation,
    grid: &IncentiveGrid,
    k: usize,
    seed: u64,
) -> Result<MarginalResult> {
    grid.validate()?;
    let screened: Vec<usize> = segmentation.screened().collect();
    if screened.is_empty() {
        return Err(Error::Input("no patient is assigned a screening action".into()));
    }
    let incentives = grid.points();
    // Curves come back in patient-id order, so the reduction is
    // independent of scheduling.
    let curves = screened
        .par_iter()
        .map(|&id| {
            let patient = segmentation.patient(cohort, id);
            let evaluator = patient_evaluator(model, &patient, k, seed)?;
            let curve = incentives
                .iter()
                .map(|&i| {
                    let p = evaluator.evaluate(i);
                    (p.acceptance, p.psi)
                })
                .collect::<Vec<_>>();
            Ok((patient.action, curve))
        })
        .collect::<Result<Vec<_>>>()?;

    let (n, mean_acceptance, psi) = mean_curves(&curves, incentives.len(), None);
    let best = argmax_first(psi.iter().copied());
    let per_action = [ScreeningAction::FitCascade, ScreeningAction::SdnaCascade]
        .into_iter()
        .filter_map(|action| {
            let (count, _, psi) = mean_curves(&curves, incentives.len(), Some(action));
            (count > 0).then(|| {
                let best = argmax_first(psi.iter().copied());
                ActionBreakdown {
                    action,
                    screened: count,
                    optimal_incentive: incentives[best],
                    mean_psi: psi[best],
                }
            })
        })
        .collect();
    let optimal_incentive = incentives[best];
    let optimal_psi = psi[best];
    Ok(MarginalResult {
        optimal_incentive,
        optimal_psi,
        screened: n,
        total_expense: optimal_incentive * n as f64,
        total_expected_benefit: optimal_psi * n as f64,
        incentives,
        mean_acceptance,
        psi,
        per_action,
    })
}
