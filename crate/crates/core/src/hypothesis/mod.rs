//! Decision rules: the MIR-based tests and the classical baselines.

pub mod classic;
pub mod fractional;
pub mod mir;

use serde::{Deserialize, Serialize};

use crate::error::{MirError, Result};
use crate::estimator::MemoryEstimateReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// H0: d < 1/2, rejected when d̃ exceeds the upper threshold.
    Stationarity,
    /// H0: d ≥ 1/2, rejected when d̃ falls below the lower threshold.
    Nonstationarity,
    /// H0: d = 1, accepted when d̃ exceeds the lower threshold.
    Fur,
    /// H0: d ≤ d0, rejected when d̃ exceeds d0 plus the margin.
    GeneralizedD0,
    Kpss,
    Vs,
    Adf,
    Pp,
    Dgm,
    Lv,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Stationarity => "stationarity",
            TestKind::Nonstationarity => "nonstationarity",
            TestKind::Fur => "fur",
            TestKind::GeneralizedD0 => "generalized_d0",
            TestKind::Kpss => "kpss",
            TestKind::Vs => "vs",
            TestKind::Adf => "adf",
            TestKind::Pp => "pp",
            TestKind::Dgm => "dgm",
            TestKind::Lv => "lv",
        }
    }

    /// Whether H0 is rejected for this statistic and threshold. Boundary
    /// values never trigger the indicator of the defining inequality.
    pub fn rejects(self, statistic: f64, threshold: f64) -> bool {
        match self {
            TestKind::Stationarity | TestKind::GeneralizedD0 | TestKind::Kpss | TestKind::Vs => {
                statistic > threshold
            }
            TestKind::Nonstationarity
            | TestKind::Adf
            | TestKind::Pp
            | TestKind::Dgm
            | TestKind::Lv => statistic < threshold,
            TestKind::Fur => !(statistic > threshold),
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = MirError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "stationarity" => TestKind::Stationarity,
            "nonstationarity" => TestKind::Nonstationarity,
            "fur" => TestKind::Fur,
            "d0" | "generalized_d0" => TestKind::GeneralizedD0,
            "kpss" => TestKind::Kpss,
            "vs" => TestKind::Vs,
            "adf" => TestKind::Adf,
            "pp" => TestKind::Pp,
            "dgm" => TestKind::Dgm,
            "lv" => TestKind::Lv,
            other => return Err(MirError::invalid(format!("unknown test kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptH0,
    RejectH0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    /// Truncation lag or bandwidth used by the statistic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
    /// Autoregressive lags in the augmented regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lags: Option<usize>,
    /// Pilot or plug-in memory estimate used by the fractional baselines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<MemoryEstimateReport>,
}

impl TestReport {
    pub fn new(kind: TestKind, statistic: f64, threshold: f64, level: f64) -> Self {
        let decision = if kind.rejects(statistic, threshold) {
            Decision::RejectH0
        } else {
            Decision::AcceptH0
        };
        TestReport {
            kind,
            statistic,
            threshold,
            decision,
            level,
            d0: None,
            bandwidth: None,
            lags: None,
            pilot_d: None,
            estimate: None,
        }
    }

    pub fn rejected(&self) -> bool {
        self.decision == Decision::RejectH0
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level <= 0.5 {
        Ok(())
    } else {
        Err(MirError::invalid(format!("level {level} outside (0, 0.5]")))
    }
}
