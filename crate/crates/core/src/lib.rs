//! Optimal financial incentives for colorectal cancer screening under
//! adversarial risk analysis.
//!
//! A policymaker proposes a screening cascade to a citizen whose beliefs and
//! preferences she only knows up to a random model. The crate simulates the
//! citizen's best response to each candidate incentive, estimates how likely
//! acceptance is, and picks the incentive maximizing the policymaker's expected
//! monetary utility, for one patient or for a whole cohort.
//!
//! ```
//! use crc_incentives::prelude::*;
//!
//! let config = RunConfig::bundled_default();
//! let model = config.ara_model();
//! let profile = crc_incentives::config::example_profile("young_high_risk").unwrap();
//! let patient = Patient::assess(profile, &config.risk, &model.policy).unwrap();
//! let result = optimal_incentive(&model, &patient, &config.grid, 200, 42).unwrap();
//! assert!(result.optimal_psi > 0.0);
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ara;
pub mod config;
pub mod error;
pub mod model;
pub mod output;
pub mod plot;
pub mod population;
pub mod risk;
pub mod seed;
pub mod utility;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/screening-model.md")]
    mod screening_model {}
    #[doc = include_str!("../../../book/src/citizen-model.md")]
    mod citizen_model {}
    #[doc = include_str!("../../../book/src/ara-engine.md")]
    mod ara_engine {}
    #[doc = include_str!("../../../book/src/population.md")]
    mod population {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

pub mod prelude {
    pub use crate::ara::{
        estimate_acceptance, optimal_incentive, pm_expected_utility, replicate_optimal_incentive, AraModel,
        AraResult, IncentiveGrid, Patient,
    };
    pub use crate::config::RunConfig;
    pub use crate::model::{
        assign_screening, result_distribution, CitizenChoice, CovariateProfile, ScreeningAction, ScreeningPolicy,
        Sex, TestOutcome,
    };
    pub use crate::population::{generate_cohort, iterated_allocation, marginal_incentive, segment_cohort};
    pub use crate::utility::{CitizenDraw, CitizenModelConfig, EconomicConstants};
}
