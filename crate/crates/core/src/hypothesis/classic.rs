//! KPSS, V/S, ADF and Phillips–Perron baselines.

use nalgebra::{DMatrix, DVector};

use super::{check_level, TestKind, TestReport};
use crate::error::{MirError, Result};
use crate::linalg::ols;

pub const MIN_LENGTH: usize = 20;

/// Truncation lag used by each classical statistic.
pub fn bandwidth(kind: TestKind, n: usize) -> Result<usize> {
    let nf = n as f64;
    let k = match kind {
        TestKind::Kpss => 3.0 * nf.sqrt() / 13.0,
        TestKind::Vs => nf.sqrt(),
        TestKind::Adf => (nf - 1.0).cbrt(),
        TestKind::Pp => 4.0 * (nf / 100.0).powf(0.25),
        other => {
            return Err(MirError::invalid(format!(
                "{} is not a classical test",
                other.name()
            )))
        }
    };
    Ok((k + 1e-9).floor() as usize)
}

fn level_index(level: f64) -> Result<usize> {
    [0.10, 0.05, 0.01]
        .iter()
        .position(|&l| (l - level).abs() < 1e-12)
        .ok_or(MirError::UnsupportedLevel(level))
}

/// Asymptotic critical value for the statistic at the given level.
pub fn critical_value(kind: TestKind, level: f64) -> Result<f64> {
    match kind {
        TestKind::Kpss => Ok([0.347, 0.463, 0.739][level_index(level)?]),
        TestKind::Adf | TestKind::Pp => Ok([-2.57, -2.86, -3.43][level_index(level)?]),
        TestKind::Vs => {
            check_level(level)?;
            Ok(watson_u2_quantile(level))
        }
        other => Err(MirError::invalid(format!(
            "{} has no tabulated critical value",
            other.name()
        ))),
    }
}

/// Upper quantile of the law of ∫(B⁰)² - (∫B⁰)², whose tail is
/// 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²π²x).
fn watson_u2_quantile(level: f64) -> f64 {
    let tail = |x: f64| {
        (1..=20)
            .map(|k| {
                let s = if k % 2 == 1 { 2.0 } else { -2.0 };
                s * (-2.0 * (k * k) as f64 * std::f64::consts::PI.powi(2) * x).exp()
            })
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (1e-3, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bartlett long-run variance of a mean-zero sequence.
pub(crate) fn long_run_variance(e: &[f64], k: usize) -> f64 {
    let n = e.len() as f64;
    let gamma = |j: usize| e.iter().zip(&e[j..]).map(|(a, b)| a * b).sum::<f64>() / n;
    let mut s = gamma(0);
    for j in 1..=k.min(e.len() - 1) {
        s += 2.0 * (1.0 - j as f64 / (k as f64 + 1.0)) * gamma(j);
    }
    s
}

fn demeaned_partial_sums(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let e: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let s = e
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    (e, s)
}

fn positive_lrv(e: &[f64], k: usize) -> Result<f64> {
    let s2 = long_run_variance(e, k);
    if s2 > 0.0 && s2.is_finite() {
        Ok(s2)
    } else {
        Err(MirError::Degenerate(
            "non-positive long-run variance".into(),
        ))
    }
}

pub fn kpss_statistic(x: &[f64], k: usize) -> Result<f64> {
    let (e, s) = demeaned_partial_sums(x);
    let n = x.len() as f64;
    Ok(s.iter().map(|v| v * v).sum::<f64>() / (n * n) / positive_lrv(&e, k)?)
}

pub fn vs_statistic(x: &[f64], k: usize) -> Result<f64> {
    let (e, s) = demeaned_partial_sums(x);
    let n = x.len() as f64;
    let sum: f64 = s.iter().sum();
    let sq: f64 = s.iter().map(|v| v * v).sum();
    Ok((sq - sum * sum / n) / (n * n) / positive_lrv(&e, k)?)
}

/// t-statistic of the lagged level in ΔX_t = a + b X_{t-1} + Σ c_j ΔX_{t-j}.
pub fn adf_statistic(x: &[f64], k: usize) -> Result<f64> {
    let n = x.len();
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // dx[t-1] = x[t] - x[t-1]; usable t = k+1..n-1
    let start = k + 1;
    if n <= start + k + 3 {
        return Err(MirError::SeriesTooShort {
            needed: start + k + 4,
            got: n,
        });
    }
    let rows = n - start;
    let design = DMatrix::from_fn(rows, k + 2, |r, c| {
        let t = r + start;
        match c {
            0 => 1.0,
            1 => x[t - 1],
            j => dx[t - j],
        }
    });
    let y = DVector::from_fn(rows, |r, _| dx[r + start - 1]);
    Ok(ols(&design, &y)?.t_stat(1))
}

/// Phillips–Perron Z_t from X_t = a + ρ X_{t-1} + u_t.
pub fn pp_statistic(x: &[f64], k: usize) -> Result<f64> {
    let n = x.len();
    let rows = n - 1;
    let design = DMatrix::from_fn(rows, 2, |r, c| if c == 0 { 1.0 } else { x[r] });
    let y = DVector::from_fn(rows, |r, _| x[r + 1]);
    let fit = ols(&design, &y)?;
    let t = (fit.coef[1] - 1.0) / fit.std_err[1];
    let u = fit.residuals.as_slice();
    let tn = rows as f64;
    let gamma0 = u.iter().map(|v| v * v).sum::<f64>() / tn;
    let lambda2 = positive_lrv(u, k)?;
    let s = fit.sigma2.sqrt();
    let lambda = lambda2.sqrt();
    Ok((gamma0 / lambda2).sqrt() * t - 0.5 * (lambda2 - gamma0) / lambda * tn * fit.std_err[1] / s)
}

/// Runs one classical test with its default bandwidth.
pub fn classic_test(x: &[f64], kind: TestKind, level: f64) -> Result<TestReport> {
    if x.len() < MIN_LENGTH {
        return Err(MirError::SeriesTooShort {
            needed: MIN_LENGTH,
            got: x.len(),
        });
    }
    let k = bandwidth(kind, x.len())?;
    let threshold = critical_value(kind, level)?;
    let stat = match kind {
        TestKind::Kpss => kpss_statistic(x, k)?,
        TestKind::Vs => vs_statistic(x, k)?,
        TestKind::Adf => adf_statistic(x, k)?,
        TestKind::Pp => pp_statistic(x, k)?,
        _ => unreachable!("bandwidth rejects other kinds"),
    };
    let mut report = TestReport::new(kind, stat, threshold, level);
    report.bandwidth = Some(k);
    Ok(report)
}
