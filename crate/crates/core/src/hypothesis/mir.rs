//! Threshold tests on the adaptive estimate.

use super::{check_level, TestKind, TestReport};
use crate::covariance::SigmaTable;
use crate::error::Result;
use crate::estimator::{mir_estimate, EstimatorOptions, MemoryEstimateReport};
use crate::normal::normal_quantile;
use crate::series::TimeSeries;

/// σ_p(d0) q_{1-level} N^{(α̃-1)/2}.
pub fn threshold_margin(sigma: f64, level: f64, n: usize, alpha_tilde: f64) -> f64 {
    sigma * normal_quantile(1.0 - level) * (n as f64).powf((alpha_tilde - 1.0) / 2.0)
}

/// Applies one of the threshold rules to an existing estimate.
pub fn decide(
    est: &MemoryEstimateReport,
    kind: TestKind,
    level: f64,
    d0: Option<f64>,
    table: &SigmaTable,
) -> Result<TestReport> {
    check_level(level)?;
    let (center, upper) = match kind {
        TestKind::Stationarity => (0.5, true),
        TestKind::GeneralizedD0 => (d0.unwrap_or(0.5), true),
        TestKind::Nonstationarity => (0.5, false),
        TestKind::Fur => (1.0, false),
        other => {
            return Err(crate::MirError::invalid(format!(
                "{} is not a threshold test on the estimate",
                other.name()
            )))
        }
    };
    let sigma = table.sigma_p_of_d(est.p, center)?;
    let margin = threshold_margin(sigma, level, est.n, est.alpha_tilde);
    let threshold = if upper {
        center + margin
    } else {
        center - margin
    };
    let mut report = TestReport::new(kind, est.d_mir, threshold, level);
    if matches!(kind, TestKind::GeneralizedD0 | TestKind::Stationarity) {
        report.d0 = Some(center);
    }
    report.estimate = Some(est.clone());
    Ok(report)
}

/// Rejects H0: d ≤ d0 when d̃ > d0 + margin; d0 = 1/2 is stationarity.
pub fn stationarity_test(
    x: &TimeSeries,
    level: f64,
    d0: f64,
    opts: &EstimatorOptions,
    table: &SigmaTable,
) -> Result<TestReport> {
    check_level(level)?;
    let est = mir_estimate(x, opts, table)?;
    let kind = if d0 == 0.5 {
        TestKind::Stationarity
    } else {
        TestKind::GeneralizedD0
    };
    decide(&est, kind, level, Some(d0), table)
}

/// Rejects non-stationarity when d̃ < 1/2 - margin.
pub fn nonstationarity_test(
    x: &TimeSeries,
    level: f64,
    opts: &EstimatorOptions,
    table: &SigmaTable,
) -> Result<TestReport> {
    check_level(level)?;
    let est = mir_estimate(x, opts, table)?;
    decide(&est, TestKind::Nonstationarity, level, None, table)
}

/// Accepts a fractional unit root when d̃ > 1 - margin.
pub fn fur_test(
    x: &TimeSeries,
    level: f64,
    opts: &EstimatorOptions,
    table: &SigmaTable,
) -> Result<TestReport> {
    check_level(level)?;
    let est = mir_estimate(x, opts, table)?;
    decide(&est, TestKind::Fur, level, None, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::Decision;

    #[test]
    fn worked_thresholds() {
        let m = threshold_margin(0.7861, 0.05, 10_000, 0.5);
        assert!((0.5 + m - 0.6293).abs() < 1e-4);
        assert!((0.5 - m - 0.3707).abs() < 1e-4);
        let f = 1.0 - threshold_margin(0.7929, 0.05, 10_000, 0.5);
        assert!((f - 0.8696).abs() < 1e-4);
        assert_eq!(
            TestReport::new(TestKind::Stationarity, 0.7, 0.5 + m, 0.05).decision,
            Decision::RejectH0
        );
        assert_eq!(
            TestReport::new(TestKind::Nonstationarity, 0.2, 0.5 - m, 0.05).decision,
            Decision::RejectH0
        );
        assert_eq!(
            TestReport::new(TestKind::Fur, 0.9, f, 0.05).decision,
            Decision::AcceptH0
        );
    }

    #[test]
    fn boundary_is_not_an_exceedance() {
        let t = 0.61;
        assert_eq!(
            TestReport::new(TestKind::Stationarity, t, t, 0.05).decision,
            Decision::AcceptH0
        );
        assert_eq!(
            TestReport::new(TestKind::Nonstationarity, t, t, 0.05).decision,
            Decision::AcceptH0
        );
        // F̃ = 1{d̃ > t} is 0 at equality, so the unit root is rejected
        assert_eq!(
            TestReport::new(TestKind::Fur, t, t, 0.05).decision,
            Decision::RejectH0
        );
    }

    #[test]
    fn margin_shrinks_with_n() {
        let a = threshold_margin(0.8, 0.05, 500, 0.3);
        let b = threshold_margin(0.8, 0.05, 5000, 0.3);
        let c = threshold_margin(0.8, 0.05, 50_000, 0.3);
        assert!(a > b && b > c);
    }

    #[test]
    fn duality_and_level_monotonicity() {
        for i in 0..200 {
            let d = -0.4 + i as f64 * 0.01;
            for n in [500usize, 5000] {
                let m = threshold_margin(0.85, 0.05, n, 0.3);
                let s = TestKind::Stationarity.rejects(d, 0.5 + m);
                let t = TestKind::Nonstationarity.rejects(d, 0.5 - m);
                assert!(!(s && t));
                let loose = threshold_margin(0.85, 0.10, n, 0.3);
                if s {
                    assert!(TestKind::Stationarity.rejects(d, 0.5 + loose));
                }
                assert!(loose < m);
            }
        }
    }

    #[test]
    fn level_validated() {
        assert!(check_level(0.0).is_err());
        assert!(check_level(0.6).is_err());
        assert!(check_level(0.5).is_ok());
    }
}
