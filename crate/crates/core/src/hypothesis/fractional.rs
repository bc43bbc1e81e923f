//! Fractional differencing and the fractional unit-root baselines.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{check_level, TestKind, TestReport};
use crate::error::{MirError, Result};
use crate::linalg::ols;
use crate::normal::normal_quantile;
use crate::series::TimeSeries;
use crate::spectral::{default_bandwidth, local_whittle, log_periodogram};

/// Series length above which the convolution switches to the FFT.
const FFT_THRESHOLD: usize = 2048;

/// Default clipping constant of the pilot estimate.
pub const DGM_CLIP: f64 = 0.02;

/// Coefficients π_i(d) of (1 - L)^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracDiffCoeffs {
    pub d: f64,
    pub coeffs: Vec<f64>,
}

impl FracDiffCoeffs {
    pub fn new(d: f64, n: usize) -> Self {
        let mut coeffs = Vec::with_capacity(n);
        if n > 0 {
            coeffs.push(1.0);
        }
        for i in 1..n {
            let prev = coeffs[i - 1];
            coeffs.push(prev * (i as f64 - 1.0 - d) / i as f64);
        }
        FracDiffCoeffs { d, coeffs }
    }
}

/// Truncated causal convolution y_t = Σ_{i ≤ t} c_i x_{t-i}.
pub(crate) fn causal_convolve(c: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n <= FFT_THRESHOLD {
        return (0..n)
            .map(|t| (0..=t).map(|i| c[i] * x[t - i]).sum())
            .collect();
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut b = vec![Complex64::new(0.0, 0.0); size];
        for (slot, &x) in b.iter_mut().zip(v) {
            slot.re = x;
        }
        b
    };
    let mut a = pad(&c[..n]);
    let mut b = pad(x);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    a[..n].iter().map(|z| z.re / size as f64).collect()
}

/// Δ^d x with zero pre-sample values; output has the input length.
pub fn frac_diff(x: &TimeSeries, d: f64) -> Result<TimeSeries> {
    Ok(TimeSeries::new(frac_diff_values(x.values(), d))?
        .with_provenance(format!("frac_diff d={d}")))
}

pub(crate) fn frac_diff_values(x: &[f64], d: f64) -> Vec<f64> {
    causal_convolve(&FracDiffCoeffs::new(d, x.len()).coeffs, x)
}

fn first_diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn check_len(x: &[f64], needed: usize) -> Result<()> {
    if x.len() < needed {
        return Err(MirError::SeriesTooShort {
            needed,
            got: x.len(),
        });
    }
    Ok(())
}

/// Log-periodogram pilot on ΔX plus one, clipped at 1 - c.
pub fn dgm_pilot(x: &[f64], c: f64) -> Result<f64> {
    let dx = first_diff(x);
    let d = log_periodogram(&dx, default_bandwidth(dx.len()))? + 1.0;
    Ok(d.min(1.0 - c))
}

/// Student statistic of ΔX_t on Δ^{d̂}X_{t-1}, t = 2..N; rejects d = 1 in
/// the left tail.
pub fn dgm_test(x: &TimeSeries, level: f64, c: f64) -> Result<TestReport> {
    check_level(level)?;
    let v = x.values();
    check_len(v, 20)?;
    let dx = first_diff(v);
    let mean = dx.iter().sum::<f64>() / dx.len() as f64;
    let spread = dx.iter().map(|u| (u - mean).powi(2)).sum::<f64>();
    let size = dx.iter().map(|u| u * u).sum::<f64>();
    if !(spread > 1e-24 * size.max(f64::MIN_POSITIVE)) {
        return Err(MirError::Degenerate(
            "differenced series is constant".into(),
        ));
    }
    let d1 = dgm_pilot(v, c)?;
    let fd = frac_diff_values(v, d1);
    let reg = &fd[..v.len() - 1];
    let sxy: f64 = dx.iter().zip(reg).map(|(a, b)| a * b).sum();
    let sxx: f64 = reg.iter().map(|b| b * b).sum();
    if !(sxx > 0.0) {
        return Err(MirError::Degenerate("zero fractional regressor".into()));
    }
    let phi = sxy / sxx;
    let rss: f64 = dx.iter().zip(reg).map(|(a, b)| (a - phi * b).powi(2)).sum();
    let s2 = rss / v.len() as f64;
    if !(s2 > 0.0) {
        return Err(MirError::Degenerate("zero residual variance".into()));
    }
    let stat = sxy / (sxx * s2).sqrt();
    let mut report = TestReport::new(TestKind::Dgm, stat, -normal_quantile(1.0 - level), level);
    report.pilot_d = Some(d1);
    Ok(report)
}

/// z_t = (Δ^d X_t - ΔX_t)/(1 - d), written as Σ_{i≥1} c_i ΔX_{t-i} with
/// c_i = Π_{k=2}^{i} (k-1+e)/k and e = 1 - d, which stays finite at d = 1.
pub(crate) fn lv_regressor(x: &[f64], d: f64) -> Vec<f64> {
    let n = x.len();
    let e = 1.0 - d;
    let mut c = vec![0.0; n];
    if n > 1 {
        c[1] = 1.0;
    }
    for i in 2..n {
        c[i] = c[i - 1] * (i as f64 - 1.0 + e) / i as f64;
    }
    let mut dx = Vec::with_capacity(n);
    dx.push(x[0]);
    dx.extend(first_diff(x));
    causal_convolve(&c, &dx)
}

/// Two-step Wald statistic with `p_lags` autoregressive lags; rejects
/// d = 1 in the left tail.
pub fn lv_test(x: &TimeSeries, level: f64, p_lags: usize) -> Result<TestReport> {
    check_level(level)?;
    let v = x.values();
    let n = v.len();
    if p_lags == 0 || n <= 3 * p_lags + 10 {
        return Err(MirError::invalid(format!(
            "lag order {p_lags} needs N > {} (got {n})",
            3 * p_lags + 10
        )));
    }
    let dx = first_diff(v);
    let d = local_whittle(&dx, default_bandwidth(dx.len()))? + 1.0;
    let fd = frac_diff_values(v, d);
    let z = lv_regressor(v, d);

    // AR(p) filter fitted on Δ^{d̂}X
    let rows = n - p_lags;
    let lagged = DMatrix::from_fn(rows, p_lags, |r, k| fd[r + p_lags - 1 - k]);
    let target = DVector::from_fn(rows, |r, _| fd[r + p_lags]);
    let alpha = ols(&lagged, &target)?.coef;

    // ΔX_t on (z_t - Σ α_k z_{t-k}, ΔX_{t-1}, …, ΔX_{t-p}), t = p+1..N-1
    let start = p_lags + 1;
    let rows = n - start;
    let design = DMatrix::from_fn(rows, p_lags + 1, |r, k| {
        let t = r + start;
        if k == 0 {
            z[t] - (0..p_lags).map(|j| alpha[j] * z[t - 1 - j]).sum::<f64>()
        } else {
            v[t - k] - v[t - k - 1]
        }
    });
    let y = DVector::from_fn(rows, |r, _| v[r + start] - v[r + start - 1]);
    let fit = ols(&design, &y)?;
    let mut report = TestReport::new(
        TestKind::Lv,
        fit.t_stat(0),
        -normal_quantile(1.0 - level),
        level,
    );
    report.pilot_d = Some(d);
    report.lags = Some(p_lags);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{generate, ProcessSpec};
    use proptest::prelude::*;
    use statrs::function::gamma::ln_gamma;

    #[test]
    fn coefficient_examples() {
        assert_eq!(FracDiffCoeffs::new(0.0, 4).coeffs, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            FracDiffCoeffs::new(1.0, 4).coeffs,
            vec![1.0, -1.0, 0.0, 0.0]
        );
        let h = FracDiffCoeffs::new(0.5, 4).coeffs;
        for (a, b) in h.iter().zip([1.0, -0.5, -0.125, -0.0625]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn frac_diff_limits() {
        let x = TimeSeries::new(vec![1.0, 3.0, 6.0, 10.0]).unwrap();
        assert_eq!(frac_diff(&x, 0.0).unwrap().values(), x.values());
        assert_eq!(frac_diff(&x, 1.0).unwrap().values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn partial_sums_vanish() {
        // Σ_{i≤K} π_i(d) = Γ(K+1-d) / (Γ(K+1) Γ(1-d)) ~ K^{-d} / Γ(1-d)
        let k = 10_000;
        for d in [0.2, 0.5, 0.8] {
            let c = FracDiffCoeffs::new(d, k + 1).coeffs;
            let s: f64 = c.iter().sum();
            let exact =
                (ln_gamma(k as f64 + 1.0 - d) - ln_gamma(k as f64 + 1.0) - ln_gamma(1.0 - d)).exp();
            assert!((s - exact).abs() < 1e-10, "{d}: {s} vs {exact}");
            let early: f64 = c[..101].iter().sum();
            assert!(s < early);
            if d >= 0.5 {
                assert!(s.abs() < 1e-2);
            }
        }
    }

    #[test]
    fn fft_matches_direct() {
        let x: Vec<f64> = (0..3000)
            .map(|t| ((t * 7919) % 101) as f64 - 50.0)
            .collect();
        let c = FracDiffCoeffs::new(0.37, x.len()).coeffs;
        let fast = causal_convolve(&c, &x);
        for t in [0usize, 1, 100, 2999] {
            let direct: f64 = (0..=t).map(|i| c[i] * x[t - i]).sum();
            assert!((fast[t] - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn lv_regressor_matches_definition() {
        let x: Vec<f64> = (0..60)
            .map(|t| (t as f64 * 0.3).sin() + t as f64 * 0.1)
            .collect();
        for d in [0.3, 0.8, 1.4] {
            let z = lv_regressor(&x, d);
            let fd = frac_diff_values(&x, d);
            let mut dx = vec![x[0]];
            dx.extend(first_diff(&x));
            for t in 0..x.len() {
                let direct = (fd[t] - dx[t]) / (1.0 - d);
                assert!((z[t] - direct).abs() < 1e-10, "d={d} t={t}");
            }
        }
        let z = lv_regressor(&x, 1.0);
        assert!(z.iter().all(|v| v.is_finite()));
        // -log(1 - L) ΔX at d = 1
        let mut dx = vec![x[0]];
        dx.extend(first_diff(&x));
        let t = 10;
        let direct: f64 = (1..=t).map(|i| dx[t - i] / i as f64).sum();
        assert!((z[t] - direct).abs() < 1e-12);
    }

    #[test]
    fn ramp_is_degenerate() {
        let x = TimeSeries::new((0..200).map(|t| 2.0 * t as f64 + 1.0).collect()).unwrap();
        assert!(matches!(
            dgm_test(&x, 0.05, DGM_CLIP),
            Err(MirError::Degenerate(_))
        ));
    }

    #[test]
    fn lv_precondition() {
        let x = generate(&ProcessSpec::arfima(1.0, 40)).unwrap();
        assert!(lv_test(&x, 0.05, 10).is_err());
        assert!(lv_test(&x, 0.05, 0).is_err());
    }

    #[test]
    fn lv_at_unit_root_finite() {
        let x = generate(&ProcessSpec::arfima(1.0, 500).with_seed(3)).unwrap();
        let r = lv_test(&x, 0.05, 1).unwrap();
        assert!(r.statistic.is_finite());
        assert!(r.pilot_d.unwrap() > 0.7);
    }

    proptest! {
        #[test]
        fn coefficient_convolution(d1 in -0.9f64..1.4, d2 in -0.9f64..1.4) {
            let k = 201;
            let a = FracDiffCoeffs::new(d1, k).coeffs;
            let b = FracDiffCoeffs::new(d2, k).coeffs;
            let c = FracDiffCoeffs::new(d1 + d2, k).coeffs;
            for n in 0..k {
                let s: f64 = (0..=n).map(|i| a[i] * b[n - i]).sum();
                prop_assert!((s - c[n]).abs() < 1e-12, "k={} {} vs {}", n, s, c[n]);
            }
        }

        #[test]
        fn frac_diff_composes(d1 in -0.5f64..1.0, d2 in -0.5f64..1.0, seed in 0u64..100) {
            let x = generate(&ProcessSpec::arfima(0.2, 120).with_seed(seed)).unwrap();
            let ab = frac_diff(&frac_diff(&x, d1).unwrap(), d2).unwrap();
            let direct = frac_diff(&x, d1 + d2).unwrap();
            for (u, v) in ab.values().iter().zip(direct.values()) {
                prop_assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
            }
        }
    }
}
