use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Family, ProcessSpec};
use crate::error::{MirError, Result};
use crate::quadrature::rule;

/// γ(0), ..., γ(L-1) of a stationary process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovSequence {
    pub gamma: Vec<f64>,
}

/// Autocovariances of the stationary part of `spec` at lags 0..lags.
/// For d ≥ 1/2 this is the increment process with memory d - 1.
pub fn autocov(spec: &ProcessSpec, lags: usize) -> Result<AutocovSequence> {
    spec.validate()?;
    let ds = spec.stationary_d();
    let gamma = match spec.family {
        Family::Fgn => fgn_autocov(ds + 0.5, lags),
        Family::Arfima if spec.ar.is_empty() && spec.ma.is_empty() => arfima0_autocov(ds, lags),
        Family::Arfima => arfima_autocov(ds, &spec.ar, &spec.ma, lags)?,
        Family::Trend => arfima0_autocov(ds, lags),
        Family::SpectralF3 => {
            let (c1, beta) = (spec.c1, spec.beta);
            spectral_autocov(ds, lags, &[], move |l| {
                l.powf(-2.0 * ds) * (1.0 + c1 * l.powf(beta))
            })?
        }
        Family::SpectralF4 => spectral_autocov(ds, lags, &[1.0], move |l| {
            l.powf(-2.0 * ds) * (1.0 + l.ln().abs() * l)
        })?,
    };
    if !(gamma.first().copied().unwrap_or(0.0) > 0.0) || gamma.iter().any(|g| !g.is_finite()) {
        return Err(MirError::invalid("autocovariance is degenerate"));
    }
    Ok(AutocovSequence { gamma })
}

/// Fractional Gaussian noise with Hurst index `h`, unit variance.
pub fn fgn_autocov(h: f64, lags: usize) -> Vec<f64> {
    let e = 2.0 * h;
    (0..lags)
        .map(|k| {
            let k = k as f64;
            0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
        })
        .collect()
}

/// ARFIMA(0, d, 0) with unit innovation variance.
pub fn arfima0_autocov(d: f64, lags: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(lags);
    if lags == 0 {
        return g;
    }
    let g0 = if d == 0.0 {
        1.0
    } else {
        (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp()
    };
    g.push(g0);
    for k in 1..lags {
        let kf = k as f64;
        let prev = g[k - 1];
        g.push(prev * (kf - 1.0 + d) / (kf - d));
    }
    g
}

const PSI_MAX: usize = 100_000;

fn psi_weights(ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut psi = vec![1.0];
    let mut j = 1;
    loop {
        let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for (i, phi) in ar.iter().enumerate() {
            if j > i {
                v += phi * psi[j - 1 - i];
            }
        }
        psi.push(v);
        if j > ma.len() {
            let window = ar.len().max(1);
            let tail = psi[psi.len() - window..]
                .iter()
                .map(|x| x.abs())
                .fold(0.0, f64::max);
            if tail < 1e-17 || j >= PSI_MAX {
                break;
            }
        }
        j += 1;
    }
    psi
}

/// Autocovariance of the ARMA filter with unit innovations, 0 ≤ h < len.
pub fn arma_autocov(ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let psi = psi_weights(ar, ma);
    let len = psi.len();
    (0..len)
        .map(|h| (0..len - h).map(|j| psi[j] * psi[j + h]).sum())
        .collect()
}

/// ARFIMA(p, d, q) as the convolution of the ARMA and fractional autocovariances.
fn arfima_autocov(d: f64, ar: &[f64], ma: &[f64], lags: usize) -> Result<Vec<f64>> {
    let ga = arma_autocov(ar, ma);
    let h_max = ga.len() - 1;
    let gf = arfima0_autocov(d, lags + h_max + 1);
    let fi = |k: i64| gf[k.unsigned_abs() as usize];
    let out = (0..lags as i64)
        .map(|k| {
            let mut s = ga[0] * fi(k);
            for (h, g) in ga.iter().enumerate().skip(1) {
                let h = h as i64;
                s += g * (fi(k - h) + fi(k + h));
            }
            s
        })
        .collect();
    Ok(out)
}

/// (1/π) ∫_0^π f(λ) cos(kλ) dλ for a density with a |λ|^{-2d} pole at zero.
///
/// Panels end at the zeros of cos(kλ) rescaled to half periods, plus any
/// extra breakpoints where f has a kink. The first panel uses
/// λ = a u^r with r = 4/(1 - 2d), which turns λ^{-2d} dλ into u^3 du.
pub(crate) fn spectral_autocov(
    d: f64,
    lags: usize,
    breaks: &[f64],
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    if !(d > -0.5 && d < 0.5) {
        return Err(MirError::invalid(format!(
            "spectral density needs stationary memory in (-0.5, 0.5), got {d}"
        )));
    }
    let first = rule(48);
    let inner = rule(10);
    let r = 4.0 / (1.0 - 2.0 * d);
    let mut out = Vec::with_capacity(lags);
    let mut edges: Vec<f64> = Vec::new();
    for k in 0..lags {
        let kf = k as f64;
        let panels = k.max(1);
        let width = PI / panels as f64;
        edges.clear();
        edges.extend((0..=panels).map(|j| j as f64 * width));
        for &b in breaks {
            if b > 0.0 && b < PI && !edges.iter().any(|e| (e - b).abs() < 1e-12) {
                edges.push(b);
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let a0 = edges[1];
        let g = |l: f64| f(l) * (kf * l).cos();
        let mut total = first.integrate(0.0, 1.0, |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let l = a0 * u.powf(r);
            g(l) * a0 * r * u.powf(r - 1.0)
        });
        for w in edges.windows(2).skip(1) {
            total += inner.integrate(w[0], w[1], g);
        }
        let v = total / PI;
        if !v.is_finite() {
            return Err(MirError::invalid(format!("quadrature failed at lag {k}")));
        }
        out.push(v);
    }
    Ok(out)
}
