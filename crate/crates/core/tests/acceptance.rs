//! Acceptance suite. Runs every exit criterion, prints one line per
//! criterion and exits non-zero if any fails.
//!
//! ```text
//! cargo test -p crc-incentives --test acceptance
//! ```

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crc_incentives::ara::{
    optimal_incentive, replicate_optimal_incentive, sample_draws, AraModel, IncentiveGrid, Patient,
};
use crc_incentives::config::{config_hash, example_profile, RunConfig};
use crc_incentives::model::{CovariateProfile, ScreeningAction, Sex, TestId};
use crc_incentives::output::{run_population, run_single};
use crc_incentives::population::{
    allocate_budget, generate_cohort, iterated_allocation, marginal_incentive, quantile_policy, score_cohort,
    segment_scored, solve_patients,
};
use crc_incentives::risk::{AgeBand, AgeMarginalTable};
use crc_incentives::utility::{sample_citizen_draw, CitizenDraw, CitizenModelConfig, Interval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("runtime {elapsed:?} exceeds {limit:?}"))
}

fn profile(age: u32) -> CovariateProfile {
    CovariateProfile {
        age,
        sex: Sex::Female,
        smoker: false,
        alcohol: false,
        diabetes: false,
        hypertension: false,
        ses_level: 3,
        eq5d_index: 1.0,
    }
}

/// Point-mass citizen whose net accept utility is `I - threshold + 0.5`,
/// so on a 1 EUR grid acceptance switches on exactly at `threshold`.
fn threshold_citizen(threshold: f64) -> (RunConfig, CovariateProfile) {
    let mut config = RunConfig::bundled_default();
    config.citizen = CitizenModelConfig {
        qaly_missed: Interval(-4.0, -4.0),
        qaly_detected: Interval(7.5, 7.5),
        burden_fraction: Interval(0.75, 0.75),
        misconception: Interval(0.35, 0.35),
        perceived_sd_factor: 0.0,
    };
    let p = profile(60);
    let draw = CitizenDraw {
        qaly_missed: -4.0,
        qaly_detected: 7.5,
        burden_fraction: 0.75,
        perceived_crc_prob: config.age_marginal.marginal_age_risk(60).unwrap() * 0.35,
    };
    // Burden-free part of the net utility, from the oracle with zero burden.
    let action = ScreeningAction::SdnaCascade;
    let comfort = config.tests[&TestId::Sdna].comfort;
    let zero_burden = CitizenDraw { burden_fraction: 0.0, ..draw };
    let gain = common::citizen_net(&config, &p, action, &zero_burden);
    config.economics.burden_base = (gain + threshold - 0.5) * comfort / 0.75;
    (config, p)
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    for t in [50.0, 150.0, 350.0] {
        let start = Instant::now();
        let (config, p) = threshold_citizen(t);
        let model = config.ara_model();
        let patient = Patient { profile: p, action: ScreeningAction::SdnaCascade, risk: 0.05 };
        let r = optimal_incentive(&model, &patient, &config.grid, 200, 1).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        check((r.optimal_incentive - t).abs() <= config.grid.step, || {
            format!("T = {t}: I* = {}", r.optimal_incentive)
        })?;
        for (i, a) in r.incentives.iter().zip(&r.acceptance) {
            let step = if *i >= t { 1.0 } else { 0.0 };
            check(*a == step, || format!("T = {t}: p-hat({i}) = {a}, expected {step}"))?;
        }
        within(elapsed, Duration::from_secs(1))?;
        notes.push(format!("T={t} -> I*={}", r.optimal_incentive));
    }
    Ok(notes.join(", "))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::bundled_default();
    let model = config.ara_model();
    let mut checked = 0;
    for (name, action, risk, seed) in [
        ("young_high_risk", ScreeningAction::SdnaCascade, 0.015, 3),
        ("middle_aged", ScreeningAction::FitCascade, 0.008, 4),
        ("older", ScreeningAction::FitCascade, 0.011, 5),
    ] {
        let p = example_profile(name).map_err(|e| e.to_string())?;
        let patient = Patient { profile: p.clone(), action, risk };
        let r = optimal_incentive(&model, &patient, &config.grid, 200, seed).map_err(|e| e.to_string())?;
        let draws = sample_draws(&model, &p, 200, seed).map_err(|e| e.to_string())?;
        let thresholds: Vec<f64> = draws.iter().map(|d| common::threshold(&config, &p, action, d)).collect();
        for (i, a) in r.incentives.iter().zip(&r.acceptance) {
            let expected = common::ecdf(&thresholds, *i);
            check(*a == expected, || format!("{name}: p-hat({i}) = {a}, ECDF = {expected}"))?;
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{checked} grid points equal"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::bundled_default();
    let model = config.ara_model();
    let grid = IncentiveGrid::new(0.0, 300.0, 150.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, action, age) in [(5, ScreeningAction::FitCascade, 55), (4, ScreeningAction::SdnaCascade, 45), (1, ScreeningAction::FitCascade, 72)] {
        let p = CovariateProfile { eq5d_index: 0.9, ..profile(age) };
        let patient = Patient { profile: p.clone(), action, risk: 0.012 };
        let r = optimal_incentive(&model, &patient, &grid, k, 77).map_err(|e| e.to_string())?;
        check(r.incentives.len() == 3, || "grid must have 3 points".into())?;
        let draws = sample_draws(&model, &p, k, 77).map_err(|e| e.to_string())?;
        for (j, &i) in r.incentives.iter().enumerate() {
            let accepted = draws
                .iter()
                .filter(|d| common::citizen_net(&config, &p, action, d) + i >= 0.0)
                .count() as f64
                / k as f64;
            let psi = accepted * common::pm_accept_value(&config, &p, action, patient.risk, i);
            check(accepted == r.acceptance[j], || format!("K={k}: acceptance at {i}"))?;
            worst = worst.max((psi - r.psi[j]).abs());
        }
    }
    check(worst <= 1e-9, || format!("max |psi - oracle| = {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max |Δψ| = {worst:.1e}"))
}

fn random_config(rng: &mut ChaCha8Rng) -> (AraModel, Patient, IncentiveGrid, usize) {
    let mut config = RunConfig::bundled_default();
    let iv = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        Interval(a.min(b), a.max(b))
    };
    config.citizen = CitizenModelConfig {
        qaly_missed: iv(rng, -8.0, -1.0),
        qaly_detected: iv(rng, 1.0, 12.0),
        burden_fraction: iv(rng, 0.1, 1.5),
        misconception: iv(rng, 0.05, 1.0),
        perceived_sd_factor: rng.random_range(0.0..0.3),
    };
    for id in [TestId::Fit, TestId::Sdna, TestId::Colonoscopy] {
        let t = config.tests.get_mut(&id).unwrap();
        t.sensitivity = rng.random_range(0.3..1.0);
        t.specificity = rng.random_range(0.5..1.0);
        t.comfort = rng.random_range(0.1..3.0);
        t.unit_cost = rng.random_range(0.0..800.0);
    }
    config.economics.burden_base = rng.random_range(20.0..800.0);
    config.economics.detection_relief = rng.random_range(1.0..2000.0);
    config.grid = IncentiveGrid::new(0.0, rng.random_range(50.0..800.0), rng.random_range(0.5..10.0)).unwrap();
    config.validate().expect("random config valid");
    let p = CovariateProfile {
        age: rng.random_range(18..=100),
        eq5d_index: rng.random_range(0.3..=1.0),
        ..profile(50)
    };
    let action = if rng.random::<bool>() { ScreeningAction::FitCascade } else { ScreeningAction::SdnaCascade };
    let patient = Patient { profile: p, action, risk: rng.random_range(0.0005..0.2) };
    let k = rng.random_range(1..=300);
    (config.ara_model(), patient, config.grid, k)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut points = 0;
    for case in 0..100 {
        let (model, patient, grid, k) = random_config(&mut rng);
        let r = optimal_incentive(&model, &patient, &grid, k, case).map_err(|e| e.to_string())?;
        for (j, (a, d)) in r.acceptance.iter().zip(r.decline()).enumerate() {
            check(a + d == 1.0, || format!("case {case}: accept + decline = {}", a + d))?;
            if j > 0 {
                check(*a >= r.acceptance[j - 1], || format!("case {case}: p-hat decreases at {}", r.incentives[j]))?;
            }
            points += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("100 configs, {points} grid points"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let config = CitizenModelConfig {
        misconception: Interval(0.35, 0.35),
        perceived_sd_factor: 0.1,
        ..CitizenModelConfig::default()
    };
    let table = AgeMarginalTable {
        bands: vec![AgeBand { age_low: 18, age_high: 100, probability: 0.004 }],
    };
    let p = profile(60);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let xs: Vec<f64> = (0..n)
        .map(|_| sample_citizen_draw(&p, &config, &table, &mut rng).map(|d| d.perceived_crc_prob))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mean_err = (mean - 0.0014).abs() / 0.0014;
    let sd_err = (sd - 0.0004).abs() / 0.0004;
    check(mean_err < 0.01, || format!("mean {mean} off by {:.2}%", 100.0 * mean_err))?;
    check(sd_err < 0.05, || format!("sd {sd} off by {:.2}%", 100.0 * sd_err))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("mean {mean:.6} ({:.2}%), sd {sd:.6} ({:.2}%)", 100.0 * mean_err, 100.0 * sd_err))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::bundled_default();
    let model = config.ara_model();
    let (k, n) = (config.engine.k, config.engine.n_runs);
    check(k == 200 && n == 200, || format!("bundled K = {k}, N = {n}"))?;
    let mut means = Vec::new();
    for name in ["young_high_risk", "middle_aged", "older"] {
        let p = example_profile(name).map_err(|e| e.to_string())?;
        let patient = Patient::assess(p, &config.risk, &model.policy).map_err(|e| e.to_string())?;
        let rep = replicate_optimal_incentive(&model, &patient, &config.grid, k, n, config.engine.seed)
            .map_err(|e| e.to_string())?;
        // (c) positive expected utility at the optimum, in every run.
        for run in &rep.runs {
            check(run.optimal_psi > 0.0, || format!("{name}: psi(I*) = {} in run {}", run.optimal_psi, run.seed))?;
        }
        // (b) lower model risk never raises I*, run by run.
        let mut previous: Vec<f64> = rep.runs.iter().map(|r| r.optimal_incentive).collect();
        for scale in [0.8, 0.6, 0.4, 0.2] {
            let lower = Patient { risk: patient.risk * scale, ..patient.clone() };
            let rep = replicate_optimal_incentive(&model, &lower, &config.grid, k, n, config.engine.seed)
                .map_err(|e| e.to_string())?;
            for (run, before) in rep.runs.iter().zip(&previous) {
                check(run.optimal_incentive <= *before, || {
                    format!("{name}: risk x{scale} raised I* {before} -> {}", run.optimal_incentive)
                })?;
            }
            previous = rep.runs.iter().map(|r| r.optimal_incentive).collect();
        }
        means.push((name, rep.optimal_incentive.mean, rep.optimal_psi.mean));
    }
    // (a) younger high-risk patient needs more than the older one.
    let young = means[0].1;
    let old = means[2].1;
    check(young > old, || format!("young I* {young} <= older I* {old}"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(means
        .iter()
        .map(|(n, i, p)| format!("{n}: I*={i:.1} psi={p:.0}"))
        .collect::<Vec<_>>()
        .join("; "))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::bundled_default();
    let mut model = config.ara_model();
    let (k, seed) = (config.engine.k, config.engine.seed);
    check(config.cohort.size == 10_000 && k == 200, || "bundled cohort must be 10,000 at K = 200".into())?;
    let cohort = generate_cohort(&config.cohort, &config.eq5d).map_err(|e| e.to_string())?;
    let risks = score_cohort(&cohort, &config.risk).map_err(|e| e.to_string())?;
    let shares = config.cohort.quantile_thresholds.ok_or("bundled cohort lacks quantile thresholds")?;
    model.policy = quantile_policy(&risks, shares, &model.policy).map_err(|e| e.to_string())?;
    let seg = segment_scored(risks.clone(), &model.policy).map_err(|e| e.to_string())?;
    let screened = seg.screened_count();
    let share = screened as f64 / cohort.len() as f64;
    check((share - 0.14).abs() < 0.005, || format!("screened share {share}"))?;

    let m = marginal_incentive(&model, &cohort, &seg, &config.grid, k, seed).map_err(|e| e.to_string())?;
    check(config.grid.points().contains(&m.optimal_incentive), || format!("I* {} not on grid", m.optimal_incentive))?;
    check(m.total_expense == m.optimal_incentive * screened as f64, || "expense != I* x screened".into())?;

    let doubled: Vec<CovariateProfile> = cohort.iter().chain(&cohort).cloned().collect();
    let doubled_risks: Vec<f64> = risks.iter().chain(&risks).copied().collect();
    let seg2 = segment_scored(doubled_risks, &model.policy).map_err(|e| e.to_string())?;
    let m2 = marginal_incentive(&model, &doubled, &seg2, &config.grid, k, seed).map_err(|e| e.to_string())?;
    check(m2.optimal_incentive == m.optimal_incentive, || {
        format!("duplicated cohort moved I* {} -> {}", m.optimal_incentive, m2.optimal_incentive)
    })?;
    check(m2.total_expense == 2.0 * m.total_expense, || "duplicated expense not doubled".into())?;

    let solutions = solve_patients(&model, &cohort, &seg, &config.grid, k, seed).map_err(|e| e.to_string())?;
    let unlimited: f64 = solutions.iter().map(|s| s.optimal_incentive).sum();
    let mut budgets = vec![0.0, 1_000.0, 12_345.0, 50_000.0, 0.5 * unlimited, unlimited - 1.0, unlimited];
    budgets.push(m.total_expense);
    for &b in &budgets {
        let plan = allocate_budget(&seg, &solutions, Some(b)).map_err(|e| e.to_string())?;
        check(plan.totals.total_expense <= b, || format!("budget {b} exceeded: {}", plan.totals.total_expense))?;
        let sum: f64 = plan.patients.iter().map(|p| p.incentive).sum();
        check(sum == plan.totals.total_expense, || "totals inconsistent".into())?;
        check(
            plan.patients.iter().all(|p| p.action != ScreeningAction::None || p.incentive == 0.0),
            || "unscreened patient paid".into(),
        )?;
    }
    let full = iterated_allocation(&model, &cohort, &seg, &config.grid, k, None, seed).map_err(|e| e.to_string())?;
    check(full.totals.total_expense == unlimited, || "unlimited budget must fund every optimum".into())?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "{screened} screened ({:.2}%), common I* = {} EUR, {} budgets respected",
        100.0 * share,
        m.optimal_incentive,
        budgets.len()
    ))
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Outcome {
    let mut config = RunConfig::bundled_default();
    config.cohort.size = 2_000;
    config.cohort.budget = Some(5_000.0);
    let hash = config_hash(config.to_json().as_bytes());
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut snapshots = Vec::new();
    for (threads, round) in [(1, 0), (1, 1), (4, 0), (4, 1)] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        let dir = tmp.path().join(format!("t{threads}_{round}"));
        pool.install(|| -> Result<(), String> {
            let p = example_profile("young_high_risk").map_err(|e| e.to_string())?;
            run_single(&config, &hash, p, &dir).map_err(|e| e.to_string())?;
            run_population(&config, &hash, &dir).map_err(|e| e.to_string())?;
            Ok(())
        })?;
        snapshots.push(read_outputs(&dir));
    }
    let files = snapshots[0].len();
    check(files == 8, || format!("expected 8 output files, found {files}"))?;
    for s in &snapshots[1..] {
        check(*s == snapshots[0], || "outputs differ between runs or thread counts".into())?;
    }
    Ok(format!("{files} files byte-identical across 1 and 4 threads"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("threshold-citizen oracle", criterion_1),
        ("empirical-CDF equivalence", criterion_2),
        ("brute-force psi", criterion_3),
        ("monotonicity and normalization", criterion_4),
        ("beta moment reproduction", criterion_5),
        ("qualitative single-patient findings", criterion_6),
        ("population consistency", criterion_7),
        ("determinism", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {label} ({:.2?}): {detail}", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {label} ({:.2?}): {why}", start.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
