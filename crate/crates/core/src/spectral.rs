//! Periodogram and frequency-domain memory estimators.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{MirError, Result};

/// Bracket searched by the local Whittle estimator.
pub const WHITTLE_BRACKET: (f64, f64) = (-1.0, 2.0);

/// Periodogram ordinates I(λ_j) = |Σ x_t e^{-itλ_j}|² / (2πN) for
/// j = 1, …, ⌊(N-1)/2⌋, with λ_j = 2πj/N and no taper.
pub fn periodogram(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    if n < 3 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = 2.0 * std::f64::consts::PI * n as f64;
    (1..=(n - 1) / 2)
        .map(|j| {
            let lambda = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (lambda, buf[j].norm_sqr() / norm)
        })
        .collect()
}

/// Default bandwidth ⌊N^0.65⌋.
pub fn default_bandwidth(n: usize) -> usize {
    ((n as f64).powf(0.65) + 1e-9).floor() as usize
}

fn check_bandwidth(n: usize, m: usize) -> Result<()> {
    if m < 2 || 2 * m >= n {
        return Err(MirError::invalid(format!(
            "bandwidth {m} must satisfy 2 ≤ m < N/2 = {}",
            n as f64 / 2.0
        )));
    }
    Ok(())
}

/// Profile objective R(d) = ln((1/m) Σ λ_j^{2d} I_j) - 2d (1/m) Σ ln λ_j.
fn whittle_objective(ords: &[(f64, f64)], mean_log: f64, d: f64) -> f64 {
    let m = ords.len() as f64;
    let g: f64 = ords.iter().map(|&(l, i)| l.powf(2.0 * d) * i).sum::<f64>() / m;
    g.ln() - 2.0 * d * mean_log
}

/// Local Whittle estimate of d on the first `bandwidth` ordinates, by
/// golden-section search on [-1, 2].
pub fn local_whittle(x: &[f64], bandwidth: usize) -> Result<f64> {
    check_bandwidth(x.len(), bandwidth)?;
    let ords: Vec<_> = periodogram(x).into_iter().take(bandwidth).collect();
    if ords.iter().all(|&(_, i)| i <= 0.0) {
        return Err(MirError::Optimization(
            "flat local Whittle objective".into(),
        ));
    }
    let mean_log = ords.iter().map(|&(l, _)| l.ln()).sum::<f64>() / ords.len() as f64;
    let f = |d: f64| whittle_objective(&ords, mean_log, d);
    let d = golden_section(f, WHITTLE_BRACKET.0, WHITTLE_BRACKET.1, 1e-9);
    if !f(d).is_finite() {
        return Err(MirError::Optimization(
            "non-finite local Whittle objective".into(),
        ));
    }
    Ok(d)
}

/// Log-periodogram regression of ln I_j on ln λ_j over the first
/// `bandwidth` ordinates; returns -slope/2.
pub fn log_periodogram(x: &[f64], bandwidth: usize) -> Result<f64> {
    check_bandwidth(x.len(), bandwidth)?;
    let ords: Vec<_> = periodogram(x).into_iter().take(bandwidth).collect();
    let scale = ords.iter().map(|&(_, i)| i).fold(0.0, f64::max);
    if !(scale > 0.0) || ords.iter().any(|&(_, i)| !(i > scale * 1e-30)) {
        return Err(MirError::Degenerate(
            "vanishing periodogram ordinate".into(),
        ));
    }
    let m = ords.len() as f64;
    let (sx, sy) = ords
        .iter()
        .fold((0.0, 0.0), |(a, b), &(l, i)| (a + l.ln(), b + i.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(l, i) in &ords {
        let dx = l.ln() - mx;
        sxy += dx * (i.ln() - my);
        sxx += dx * dx;
    }
    Ok(-0.5 * sxy / sxx)
}

pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
