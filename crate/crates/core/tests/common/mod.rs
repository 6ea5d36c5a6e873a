//! Independent oracles. Nothing here calls the engine's utility or lottery
//! code; every quantity is recomputed by enumerating the two-stage screening
//! tree leaf by leaf.

#![allow(dead_code)]

use crc_incentives::config::RunConfig;
use crc_incentives::model::{CovariateProfile, ScreeningAction, ScreeningTest, TestId};
use crc_incentives::utility::CitizenDraw;

pub struct Leaf {
    pub probability: f64,
    pub crc: bool,
    /// Both stages positive.
    pub detected: bool,
    pub initial_positive: bool,
}

fn initial(config: &RunConfig, action: ScreeningAction) -> ScreeningTest {
    match action {
        ScreeningAction::FitCascade => config.tests[&TestId::Fit],
        ScreeningAction::SdnaCascade => config.tests[&TestId::Sdna],
        ScreeningAction::None => panic!("no test"),
    }
}

/// All eight leaves of (crc, initial result, colonoscopy result) collapsed
/// where the colonoscopy is not performed.
pub fn leaves(config: &RunConfig, action: ScreeningAction, p_crc: f64) -> Vec<Leaf> {
    let first = initial(config, action);
    let col = config.tests[&TestId::Colonoscopy];
    let mut out = Vec::new();
    for crc in [true, false] {
        let pc = if crc { p_crc } else { 1.0 - p_crc };
        let p1 = if crc { first.sensitivity } else { 1.0 - first.specificity };
        let p2 = if crc { col.sensitivity } else { 1.0 - col.specificity };
        out.push(Leaf { probability: pc * p1 * p2, crc, detected: true, initial_positive: true });
        out.push(Leaf { probability: pc * p1 * (1.0 - p2), crc, detected: false, initial_positive: true });
        out.push(Leaf { probability: pc * (1.0 - p1), crc, detected: false, initial_positive: false });
    }
    out
}

/// Citizen's accept-minus-decline expected utility without incentive.
pub fn citizen_net(config: &RunConfig, profile: &CovariateProfile, action: ScreeningAction, draw: &CitizenDraw) -> f64 {
    let e = &config.economics;
    let life = e.gdp_per_capita * profile.eq5d_index;
    let burden = e.burden_base * draw.burden_fraction / initial(config, action).comfort;
    leaves(config, action, draw.perceived_crc_prob)
        .iter()
        .map(|l| {
            let qaly = match (l.crc, l.detected) {
                (true, true) => draw.qaly_detected,
                (true, false) => draw.qaly_missed,
                _ => 0.0,
            };
            let relief = if l.detected { e.detection_relief } else { 0.0 };
            l.probability * (life * qaly - burden + relief)
        })
        .sum()
}

/// Acceptance threshold `max(0, -net)` of one draw.
pub fn threshold(config: &RunConfig, profile: &CovariateProfile, action: ScreeningAction, draw: &CitizenDraw) -> f64 {
    (-citizen_net(config, profile, action, draw)).max(0.0)
}

/// Policymaker's expected utility when the citizen accepts incentive `i`,
/// charging the colonoscopy only on initial-positive paths.
pub fn pm_accept_value(config: &RunConfig, profile: &CovariateProfile, action: ScreeningAction, risk: f64, i: f64) -> f64 {
    let e = &config.economics;
    let c = &config.citizen;
    let life = e.gdp_per_capita * profile.eq5d_index;
    let first = initial(config, action);
    let col = config.tests[&TestId::Colonoscopy];
    let qd = 0.5 * (c.qaly_detected.0 + c.qaly_detected.1);
    let qm = 0.5 * (c.qaly_missed.0 + c.qaly_missed.1);
    leaves(config, action, risk)
        .iter()
        .map(|l| {
            let qaly = match (l.crc, l.detected) {
                (true, true) => qd,
                (true, false) => qm,
                _ => 0.0,
            };
            let cost = first.unit_cost + if l.initial_positive { col.unit_cost } else { 0.0 };
            let treatment = if l.crc && l.detected { e.treatment_cost } else { 0.0 };
            l.probability * (life * qaly - i - cost - treatment)
        })
        .sum()
}

pub fn ecdf(thresholds: &[f64], i: f64) -> f64 {
    thresholds.iter().filter(|&&t| t <= i).count() as f64 / thresholds.len() as f64
}
