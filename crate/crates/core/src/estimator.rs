//! The adaptive multi-scale estimator of d.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::SigmaTable;
use crate::error::{MirError, Result};
use crate::ir::ir_vector;
use crate::lambda::lambda0_inverse;
use crate::linalg::{cholesky_with_ridge, gls_weights};
use crate::normal::normal_quantile;
use crate::series::TimeSeries;

use nalgebra::{DMatrix, DVector};

pub const MIN_LENGTH: usize = 50;

/// Default refinement of the exponent grid: points k / (a log N).
pub const DEFAULT_GRID_FACTOR: f64 = 2.0;

/// Number of scales as a step function of the sample size.
pub fn choose_p(n: usize) -> usize {
    match n {
        0..=119 => 5,
        120..=799 => 10,
        800..=9999 => 15,
        _ => 20,
    }
}

/// Candidate exponents {k / (a log N) : 2 ≤ k ≤ a log(N/p)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub n: usize,
    pub p: usize,
    pub factor: f64,
    pub alphas: Vec<f64>,
}

impl ScaleGrid {
    pub fn new(n: usize, p: usize, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(MirError::invalid("grid factor must be positive"));
        }
        if p == 0 || n <= p {
            return Err(MirError::EmptyGrid { n, p });
        }
        let ln_n = (n as f64).ln();
        let k_max = (factor * (n as f64 / p as f64).ln() + 1e-12).floor();
        let alphas: Vec<f64> = (2..)
            .map(|k| k as f64)
            .take_while(|&k| k <= k_max)
            .map(|k| k / (factor * ln_n))
            .collect();
        if alphas.is_empty() {
            return Err(MirError::EmptyGrid { n, p });
        }
        Ok(ScaleGrid {
            n,
            p,
            factor,
            alphas,
        })
    }

    /// Grid points whose base scale leaves room for p multiples.
    pub fn feasible(&self) -> Vec<f64> {
        self.alphas
            .iter()
            .copied()
            .filter(|&a| is_feasible(self.n, self.p, base_scale(self.n, a)))
            .collect()
    }
}

pub fn base_scale(n: usize, alpha: f64) -> usize {
    ((n as f64).powf(alpha) + 1e-9).floor() as usize
}

fn is_feasible(n: usize, p: usize, m: usize) -> bool {
    m >= 1 && n > 3 * p * m
}

/// Per-scale estimates Λ₀⁻¹(IR_N(jm)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimates {
    pub m: usize,
    pub d: Vec<f64>,
    pub clamped: bool,
}

pub fn estimate_d_at_scales(x: &TimeSeries, m: usize, p: usize) -> Result<ScaleEstimates> {
    let ir = ir_vector(x, m, p)?;
    let mut clamped = false;
    let d = ir
        .values
        .iter()
        .map(|&v| {
            let inv = lambda0_inverse(v);
            clamped |= inv.clamped;
            inv.d
        })
        .collect();
    Ok(ScaleEstimates { m, d, clamped })
}

/// GLS weights for a plug-in covariance.
pub fn pgls_weights(sigma_hat: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(gls_weights(sigma_hat)?.0.iter().copied().collect())
}

/// (JᵀΣ̂⁻¹J)⁻¹ JᵀΣ̂⁻¹ d̂.
pub fn pgls_estimate(d_hats: &[f64], sigma_hat: &DMatrix<f64>) -> Result<f64> {
    if d_hats.len() != sigma_hat.nrows() || !sigma_hat.is_square() {
        return Err(MirError::invalid(format!(
            "{} estimates for a {}×{} covariance",
            d_hats.len(),
            sigma_hat.nrows(),
            sigma_hat.ncols()
        )));
    }
    let w = pgls_weights(sigma_hat)?;
    Ok(w.iter().zip(d_hats).map(|(w, d)| w * d).sum())
}

struct ScaleFit {
    estimates: ScaleEstimates,
    d_tilde: f64,
    q: f64,
    clamped: bool,
}

fn fit_at_scale(x: &TimeSeries, m: usize, p: usize, table: &SigmaTable) -> Result<ScaleFit> {
    let estimates = estimate_d_at_scales(x, m, p)?;
    let sh = table.sigma_hat_matrix(estimates.d[0], p)?;
    let d_tilde = pgls_estimate(&estimates.d, &sh.matrix)?;
    let r = DVector::from_iterator(p, estimates.d.iter().map(|d| d - d_tilde));
    let (chol, _) = cholesky_with_ridge(&sh.matrix)?;
    let q = r.dot(&chol.solve(&r)).max(0.0);
    let clamped = estimates.clamped || sh.clamped;
    Ok(ScaleFit {
        estimates,
        d_tilde,
        q,
        clamped,
    })
}

/// Q_N(α): the generalized squared distance between the per-scale
/// estimates and their PGLS mean at m = ⌊N^α⌋.
pub fn qn_criterion(x: &TimeSeries, alpha: f64, p: usize, table: &SigmaTable) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MirError::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let m = base_scale(x.len(), alpha);
    if !is_feasible(x.len(), p, m) {
        return Err(MirError::invalid(format!(
            "scale too large: m = {m}, p = {p} needs N ≥ {}",
            3 * p * m + 1
        )));
    }
    Ok(fit_at_scale(x, m, p, table)?.q)
}

/// Minimiser of Q_N over the feasible grid; ties go to the smaller α.
pub fn select_alpha(
    x: &TimeSeries,
    p: usize,
    table: &SigmaTable,
    factor: f64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let grid = ScaleGrid::new(x.len(), p, factor)?;
    let alphas = grid.feasible();
    if alphas.is_empty() {
        return Err(MirError::EmptyGrid { n: x.len(), p });
    }
    let profile: Vec<(f64, f64)> = alphas
        .par_iter()
        .map(|&a| qn_criterion(x, a, p, table).map(|q| (a, q)))
        .collect::<Result<_>>()?;
    let mut best = profile[0];
    for &(a, q) in &profile[1..] {
        if q < best.1 {
            best = (a, q);
        }
    }
    Ok((best.0, profile))
}

/// α̃ = α̂ + 6α̂ / ((p - 2)(1 - α̂)) · log log N / log N.
pub fn corrected_alpha(alpha_hat: f64, p: usize, n: usize) -> f64 {
    let ln_n = (n as f64).ln();
    alpha_hat + 6.0 * alpha_hat / ((p as f64 - 2.0) * (1.0 - alpha_hat)) * ln_n.ln() / ln_n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Number of scales; `choose_p` when absent.
    pub p: Option<usize>,
    pub grid_factor: f64,
    pub ci_level: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            p: None,
            grid_factor: DEFAULT_GRID_FACTOR,
            ci_level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimateReport {
    pub n: usize,
    pub d_mir: f64,
    pub alpha_hat: f64,
    pub alpha_tilde: f64,
    pub m_tilde: usize,
    /// ⌊N^α̃⌋ was reduced to fit p scales into the sample.
    pub m_shrunk: bool,
    pub p: usize,
    pub grid_factor: f64,
    pub per_scale_d: Vec<f64>,
    pub q_profile: Vec<(f64, f64)>,
    pub sigma_p: f64,
    pub std_error: f64,
    pub ci_level: f64,
    pub ci: (f64, f64),
    pub clamped: bool,
}

pub fn mir_estimate(
    x: &TimeSeries,
    opts: &EstimatorOptions,
    table: &SigmaTable,
) -> Result<MemoryEstimateReport> {
    let n = x.len();
    if n < MIN_LENGTH {
        return Err(MirError::SeriesTooShort {
            needed: MIN_LENGTH,
            got: n,
        });
    }
    if !(opts.ci_level > 0.0 && opts.ci_level < 1.0) {
        return Err(MirError::invalid("ci_level must lie in (0, 1)"));
    }
    let p = opts.p.unwrap_or_else(|| choose_p(n));
    if p < 3 {
        return Err(MirError::invalid("at least three scales are needed"));
    }
    let (alpha_hat, q_profile) = select_alpha(x, p, table, opts.grid_factor)?;
    let alpha_tilde = corrected_alpha(alpha_hat, p, n);
    let mut m = base_scale(n, alpha_tilde).max(1);
    let mut m_shrunk = false;
    while !is_feasible(n, p, m) && m > 1 {
        m -= 1;
        m_shrunk = true;
    }
    let fit = fit_at_scale(x, m, p, table)?;
    let d_mir = fit.d_tilde;
    let sigma_p = table.sigma_p_of_d(p, d_mir)?;
    let std_error = sigma_p * (n as f64).powf((alpha_tilde - 1.0) / 2.0);
    let half = normal_quantile(0.5 + opts.ci_level / 2.0) * std_error;
    Ok(MemoryEstimateReport {
        n,
        d_mir,
        alpha_hat,
        alpha_tilde,
        m_tilde: m,
        m_shrunk,
        p,
        grid_factor: opts.grid_factor,
        per_scale_d: fit.estimates.d,
        q_profile,
        sigma_p,
        std_error,
        ci_level: opts.ci_level,
        ci: (d_mir - half, d_mir + half),
        clamped: fit.clamped,
    })
}
