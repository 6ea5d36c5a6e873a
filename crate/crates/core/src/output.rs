//! Single-patient and population runs with their file outputs.
//!
//! Single run (`single_*`):
//!
//! | file                  | content                                                 |
//! |-----------------------|---------------------------------------------------------|
//! | `single_curve.csv`    | `incentive_eur,acceptance,psi_eur,psi_se_eur`           |
//! | `single_summary.json` | optimum, replication spread and provenance              |
//! | `single_plot.svg`     | `ψ(I)` and `p̂(I)` against the incentive                 |
//!
//! Population run:
//!
//! | file                      | content                                                                                                  |
//! |---------------------------|----------------------------------------------------------------------------------------------------------|
//! | `cohort.csv`              | `patient_id,age,sex,smoker,alcohol,diabetes,hypertension,ses_level,eq5d_index,risk,action`               |
//! | `allocation.csv`          | `patient_id,risk,action,incentive_eur,expected_psi_eur`                                                  |
//! | `marginal_curve.csv`      | `incentive_eur,mean_acceptance,psi_eur`                                                                  |
//! | `marginal_plot.svg`       | common-incentive curves                                                                                  |
//! | `population_summary.json` | screened count, common `I*`, totals and provenance                                                       |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ara::{optimal_incentive, replicate_optimal_incentive, IncentiveGrid, Patient, Spread};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{CovariateProfile, ScreeningAction};
use crate::plot::CurvePlot;
use crate::population::{
    generate_cohort, iterated_allocation, marginal_incentive, patient_seed, quantile_policy, score_cohort,
    segment_scored, ActionBreakdown, AllocationTotals,
};

pub const SINGLE_CURVE_HEADER: &str = "incentive_eur,acceptance,psi_eur,psi_se_eur";
pub const COHORT_HEADER: &str =
    "patient_id,age,sex,smoker,alcohol,diabetes,hypertension,ses_level,eq5d_index,risk,action";
pub const ALLOCATION_HEADER: &str = "patient_id,risk,action,incentive_eur,expected_psi_eur";
pub const MARGINAL_CURVE_HEADER: &str = "incentive_eur,mean_acceptance,psi_eur";

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub k: usize,
    pub n_runs: usize,
    pub grid: IncentiveGrid,
}

impl Provenance {
    fn new(config: &RunConfig, config_hash: &str) -> Self {
        Provenance {
            config_hash: config_hash.to_string(),
            seed: config.engine.seed,
            k: config.engine.k,
            n_runs: config.engine.n_runs,
            grid: config.grid,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicationSummary {
    pub optimal_incentive: Spread,
    pub optimal_psi: Spread,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingleSummary {
    pub profile: CovariateProfile,
    pub risk: f64,
    pub action: ScreeningAction,
    pub optimal_incentive: f64,
    pub optimal_psi: f64,
    /// Seed of the run written to the curve file.
    pub run_seed: u64,
    pub replication: ReplicationSummary,
    pub provenance: Provenance,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summaries serialize");
    s.push('\n');
    s
}

/// Optimal incentive for one citizen. The curve file holds the run seeded
/// exactly as a cohort run would seed this citizen; the summary adds the
/// spread over `engine.n_runs` replications.
pub fn run_single(
    config: &RunConfig,
    config_hash: &str,
    profile: CovariateProfile,
    out_dir: &Path,
) -> Result<SingleSummary> {
    let model = config.ara_model();
    let patient = Patient::assess(profile, &config.risk, &model.policy)?;
    if patient.action == ScreeningAction::None {
        return Err(Error::Input(format!(
            "patient not assigned a screening (risk {} <= th2 = {})",
            patient.risk, model.policy.th2
        )));
    }
    let engine = config.engine;
    let run_seed = patient_seed(engine.seed, &patient);
    let result = optimal_incentive(&model, &patient, &config.grid, engine.k, run_seed)?;
    let replication = replicate_optimal_incentive(&model, &patient, &config.grid, engine.k, engine.n_runs, engine.seed)?;

    prepare_dir(out_dir)?;
    let mut csv = String::from(SINGLE_CURVE_HEADER);
    csv.push('\n');
    for j in 0..result.incentives.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            result.incentives[j], result.acceptance[j], result.psi[j], result.psi_se[j]
        );
    }
    write_file(out_dir, "single_curve.csv", &csv)?;

    let title = format!(
        "age {} risk {:.4} ({}): I* = {} EUR",
        patient.profile.age, patient.risk, patient.action, result.optimal_incentive
    );
    let svg = CurvePlot {
        title: &title,
        incentives: &result.incentives,
        psi: &result.psi,
        acceptance: &result.acceptance,
        optimal_incentive: result.optimal_incentive,
        optimal_psi: result.optimal_psi,
    }
    .render();
    write_file(out_dir, "single_plot.svg", &svg)?;

    let summary = SingleSummary {
        risk: patient.risk,
        action: patient.action,
        profile: patient.profile,
        optimal_incentive: result.optimal_incentive,
        optimal_psi: result.optimal_psi,
        run_seed,
        replication: ReplicationSummary {
            optimal_incentive: replication.optimal_incentive,
            optimal_psi: replication.optimal_psi,
        },
        provenance: Provenance::new(config, config_hash),
    };
    write_file(out_dir, "single_summary.json", &to_json(&summary))?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalSummary {
    pub common_incentive: f64,
    pub mean_psi_per_case: f64,
    pub total_expense: f64,
    pub total_expected_benefit: f64,
    pub per_action: Vec<ActionBreakdown>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AllocationSummary {
    pub budget: Option<f64>,
    #[serde(flatten)]
    pub totals: AllocationTotals,
}

#[derive(Clone, Debug, Serialize)]
pub struct PopulationSummary {
    pub cohort_size: usize,
    pub cohort_seed: u64,
    pub th1: f64,
    pub th2: f64,
    pub screened: usize,
    pub screened_fit: usize,
    pub screened_sdna: usize,
    pub marginal: MarginalSummary,
    pub allocation: AllocationSummary,
    pub provenance: Provenance,
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

/// Cohort generation, segmentation, common incentive and budgeted
/// per-patient allocation.
pub fn run_population(config: &RunConfig, config_hash: &str, out_dir: &Path) -> Result<PopulationSummary> {
    let mut model = config.ara_model();
    let spec = &config.cohort;
    let cohort = generate_cohort(spec, &config.eq5d)?;
    let risks = score_cohort(&cohort, &config.risk)?;
    if let Some(shares) = spec.quantile_thresholds {
        model.policy = quantile_policy(&risks, shares, &model.policy)?;
    }
    let segmentation = segment_scored(risks, &model.policy)?;
    let engine = config.engine;
    let marginal = marginal_incentive(&model, &cohort, &segmentation, &config.grid, engine.k, engine.seed)?;
    let plan = iterated_allocation(&model, &cohort, &segmentation, &config.grid, engine.k, spec.budget, engine.seed)?;

    prepare_dir(out_dir)?;
    let mut csv = String::from(COHORT_HEADER);
    csv.push('\n');
    for (id, p) in cohort.iter().enumerate() {
        let sex = match p.sex {
            crate::model::Sex::Male => "male",
            crate::model::Sex::Female => "female",
        };
        let _ = writeln!(
            csv,
            "{id},{},{sex},{},{},{},{},{},{},{},{}",
            p.age,
            flag(p.smoker),
            flag(p.alcohol),
            flag(p.diabetes),
            flag(p.hypertension),
            p.ses_level,
            p.eq5d_index,
            segmentation.risks[id],
            segmentation.actions[id]
        );
    }
    write_file(out_dir, "cohort.csv", &csv)?;

    let mut csv = String::from(ALLOCATION_HEADER);
    csv.push('\n');
    for a in &plan.patients {
        let _ = writeln!(csv, "{},{},{},{},{}", a.patient_id, a.risk, a.action, a.incentive, a.expected_psi);
    }
    write_file(out_dir, "allocation.csv", &csv)?;

    let mut csv = String::from(MARGINAL_CURVE_HEADER);
    csv.push('\n');
    for j in 0..marginal.incentives.len() {
        let _ = writeln!(csv, "{},{},{}", marginal.incentives[j], marginal.mean_acceptance[j], marginal.psi[j]);
    }
    write_file(out_dir, "marginal_curve.csv", &csv)?;

    let title = format!(
        "common incentive over {} screened: I* = {} EUR",
        marginal.screened, marginal.optimal_incentive
    );
    let svg = CurvePlot {
        title: &title,
        incentives: &marginal.incentives,
        psi: &marginal.psi,
        acceptance: &marginal.mean_acceptance,
        optimal_incentive: marginal.optimal_incentive,
        optimal_psi: marginal.optimal_psi,
    }
    .render();
    write_file(out_dir, "marginal_plot.svg", &svg)?;

    let count = |action| segmentation.actions.iter().filter(|&&a| a == action).count();
    let summary = PopulationSummary {
        cohort_size: cohort.len(),
        cohort_seed: spec.seed,
        th1: model.policy.th1,
        th2: model.policy.th2,
        screened: marginal.screened,
        screened_fit: count(ScreeningAction::FitCascade),
        screened_sdna: count(ScreeningAction::SdnaCascade),
        marginal: MarginalSummary {
            common_incentive: marginal.optimal_incentive,
            mean_psi_per_case: marginal.optimal_psi,
            total_expense: marginal.total_expense,
            total_expected_benefit: marginal.total_expected_benefit,
            per_action: marginal.per_action,
        },
        allocation: AllocationSummary {
            budget: spec.budget,
            totals: plan.totals,
        },
        provenance: Provenance::new(config, config_hash),
    };
    write_file(out_dir, "population_summary.json", &to_json(&summary))?;
    Ok(summary)
}
