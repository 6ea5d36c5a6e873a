//! Domain types shared by the engine: citizen covariates, screening tests,
//! the two-threshold screening rule and the cascade result model.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

/// One citizen's features `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateProfile {
    pub age: u32,
    pub sex: Sex,
    pub smoker: bool,
    pub alcohol: bool,
    pub diabetes: bool,
    pub hypertension: bool,
    pub ses_level: u8,
    /// Health utility index `u_EQ5D(x)` in (0, 1].
    pub eq5d_index: f64,
}

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 100;

impl CovariateProfile {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_AGE..=MAX_AGE).contains(&self.age) {
            return Err(Error::Input(format!(
                "age {} outside [{MIN_AGE}, {MAX_AGE}]",
                self.age
            )));
        }
        if !(1..=5).contains(&self.ses_level) {
            return Err(Error::Input(format!(
                "ses_level {} outside [1, 5]",
                self.ses_level
            )));
        }
        if !(self.eq5d_index > 0.0 && self.eq5d_index <= 1.0) {
            return Err(Error::Input(format!(
                "eq5d_index {} outside (0, 1]",
                self.eq5d_index
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    Fit,
    Sdna,
    Colonoscopy,
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestId::Fit => "fit",
            TestId::Sdna => "sdna",
            TestId::Colonoscopy => "colonoscopy",
        })
    }
}

/// Characteristics of a single screening instrument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningTest {
    pub sensitivity: f64,
    pub specificity: f64,
    /// Euros per administration.
    pub unit_cost: f64,
    /// Constructed comfort scale value; divides the citizen's burden.
    pub comfort: f64,
}

impl ScreeningTest {
    pub fn defaults(id: TestId) -> Self {
        match id {
            TestId::Fit => ScreeningTest {
                sensitivity: 0.74,
                specificity: 0.96,
                unit_cost: 20.0,
                comfort: 0.6,
            },
            TestId::Sdna => ScreeningTest {
                sensitivity: 0.92,
                specificity: 0.87,
                unit_cost: 150.0,
                comfort: 0.5,
            },
            TestId::Colonoscopy => ScreeningTest {
                sensitivity: 0.95,
                specificity: 0.99,
                unit_cost: 600.0,
                comfort: 0.2,
            },
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.sensitivity) {
            return Err(Error::config(
                format!("{path}.sensitivity"),
                format!("{} outside [0, 1]", self.sensitivity),
            ));
        }
        if !unit(self.specificity) {
            return Err(Error::config(
                format!("{path}.specificity"),
                format!("{} outside [0, 1]", self.specificity),
            ));
        }
        if !(self.unit_cost >= 0.0 && self.unit_cost.is_finite()) {
            return Err(Error::config(
                format!("{path}.unit_cost"),
                "must be a finite non-negative amount",
            ));
        }
        if !(self.comfort > 0.0 && self.comfort.is_finite()) {
            return Err(Error::config(
                format!("{path}.comfort"),
                "must be strictly positive",
            ));
        }
        Ok(())
    }
}

/// The screening strategy proposed to a citizen. Ordered by intensity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreeningAction {
    None,
    FitCascade,
    SdnaCascade,
}

impl ScreeningAction {
    pub const ALL: [ScreeningAction; 3] = [
        ScreeningAction::None,
        ScreeningAction::FitCascade,
        ScreeningAction::SdnaCascade,
    ];

    /// The initial test of the cascade; `None` administers nothing.
    pub fn initial_test(self) -> Option<TestId> {
        match self {
            ScreeningAction::None => None,
            ScreeningAction::FitCascade => Some(TestId::Fit),
            ScreeningAction::SdnaCascade => Some(TestId::Sdna),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScreeningAction::None => "none",
            ScreeningAction::FitCascade => "fit_cascade",
            ScreeningAction::SdnaCascade => "sdna_cascade",
        }
    }
}

impl fmt::Display for ScreeningAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitizenChoice {
    Accept,
    Decline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Positive,
    Negative,
    NoResult,
}

impl TestOutcome {
    pub const ALL: [TestOutcome; 3] = [
        TestOutcome::Positive,
        TestOutcome::Negative,
        TestOutcome::NoResult,
    ];
}

/// Two-threshold risk rule plus the parameters of every test it may order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningPolicy {
    /// High-risk threshold: risk strictly above it gets the sDNA cascade.
    pub th1: f64,
    /// Intermediate threshold: risk strictly above it gets the FIT cascade.
    pub th2: f64,
    pub tests: BTreeMap<TestId, ScreeningTest>,
}

impl ScreeningPolicy {
    /// Policy with the default test table.
    pub fn new(th1: f64, th2: f64) -> Self {
        let tests = [TestId::Fit, TestId::Sdna, TestId::Colonoscopy]
            .into_iter()
            .map(|id| (id, ScreeningTest::defaults(id)))
            .collect();
        ScreeningPolicy { th1, th2, tests }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.th2 && self.th2 < self.th1 && self.th1 < 1.0) {
            return Err(Error::config(
                "policy.th1/th2",
                format!(
                    "thresholds must satisfy 0 < th2 < th1 < 1 (got th1 = {}, th2 = {})",
                    self.th1, self.th2
                ),
            ));
        }
        for (id, test) in &self.tests {
            test.validate(&format!("tests.{id}"))?;
        }
        Ok(())
    }

    pub fn test(&self, id: TestId) -> Result<&ScreeningTest> {
        self.tests
            .get(&id)
            .ok_or_else(|| Error::config(format!("tests.{id}"), "missing test parameters"))
    }

    /// Resolves the two-stage cascade for an action; `None` for no screening.
    pub fn cascade(&self, action: ScreeningAction) -> Result<Option<Cascade>> {
        match action.initial_test() {
            None => Ok(None),
            Some(id) => Ok(Some(Cascade {
                initial: *self.test(id)?,
                confirmation: *self.test(TestId::Colonoscopy)?,
            })),
        }
    }
}

/// Initial test followed by a colonoscopy on a positive result. Stage errors
/// are independent and compliance after acceptance is total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cascade {
    pub initial: ScreeningTest,
    pub confirmation: ScreeningTest,
}

impl Cascade {
    pub fn initial_positive(&self, crc: bool) -> f64 {
        if crc {
            self.initial.sensitivity
        } else {
            1.0 - self.initial.specificity
        }
    }

    pub fn positive(&self, crc: bool) -> f64 {
        if crc {
            self.initial.sensitivity * self.confirmation.sensitivity
        } else {
            (1.0 - self.initial.specificity) * (1.0 - self.confirmation.specificity)
        }
    }

    /// Expected euros spent on tests: the initial test always, the
    /// colonoscopy only after an initial positive.
    pub fn expected_cost(&self, crc: bool) -> f64 {
        self.initial.unit_cost + self.initial_positive(crc) * self.confirmation.unit_cost
    }
}

/// `p(r | c, s)` over the three outcomes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub positive: f64,
    pub negative: f64,
    pub no_result: f64,
}

impl OutcomeDistribution {
    pub const NO_RESULT: OutcomeDistribution = OutcomeDistribution {
        positive: 0.0,
        negative: 0.0,
        no_result: 1.0,
    };

    pub fn probability(&self, outcome: TestOutcome) -> f64 {
        match outcome {
            TestOutcome::Positive => self.positive,
            TestOutcome::Negative => self.negative,
            TestOutcome::NoResult => self.no_result,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (TestOutcome, f64)> + '_ {
        TestOutcome::ALL.into_iter().map(|o| (o, self.probability(o)))
    }
}

/// Maps a model risk onto the proposed screening action.
pub fn assign_screening(risk: f64, policy: &ScreeningPolicy) -> Result<ScreeningAction> {
    policy.validate()?;
    if !(0.0..=1.0).contains(&risk) {
        return Err(Error::Input(format!("risk {risk} outside [0, 1]")));
    }
    Ok(if risk > policy.th1 {
        ScreeningAction::SdnaCascade
    } else if risk > policy.th2 {
        ScreeningAction::FitCascade
    } else {
        ScreeningAction::None
    })
}

pub fn result_distribution(
    crc: bool,
    action: ScreeningAction,
    choice: CitizenChoice,
    policy: &ScreeningPolicy,
) -> Result<OutcomeDistribution> {
    if choice == CitizenChoice::Decline {
        return Ok(OutcomeDistribution::NO_RESULT);
    }
    Ok(match policy.cascade(action)? {
        None => OutcomeDistribution::NO_RESULT,
        Some(cascade) => {
            let positive = cascade.positive(crc);
            OutcomeDistribution {
                positive,
                negative: 1.0 - positive,
                no_result: 0.0,
            }
        }
    })
}
