//! Asymptotic covariance of the IR vector and the σ constants derived from it.
//!
//! Γ_p(d) is calibrated by simulation: R reference paths of length N_cal,
//! each reduced to its IR vector at base scale m_cal, and the sample
//! covariance rescaled by N_cal / m_cal. The shipped table holds the full
//! 20 × 20 matrices on a 0.05 grid of d; smaller p use leading blocks.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MirError, Result};
use crate::ir::ir_vector;
use crate::lambda::lambda0_prime;
use crate::linalg::{cholesky_with_ridge, gls_weights, symmetrize, RIDGE};
use crate::process::{ProcessSpec, Simulator};
use crate::rng::substream;
use crate::series::TimeSeries;

pub const GRID_MIN: f64 = -0.45;
pub const GRID_MAX: f64 = 1.20;
pub const FORMAT_VERSION: u32 = 1;
pub const SIGMA_TABLE_ENV: &str = "MIRLAB_SIGMA_TABLE";

static BUNDLED_TABLE: &str = include_str!("../data/sigma_table.json");

/// Cov(Z^(i)(0), Z^(j)(τ)) for the limiting normalised increment processes.
pub fn z_cross_covariance(d: f64, i: usize, j: usize, tau: f64) -> Result<f64> {
    if !(d > -0.5 && d < 1.25) || !d.is_finite() {
        return Err(MirError::invalid(format!("d = {d} outside (-0.5, 1.25)")));
    }
    if i == 0 || j == 0 || !tau.is_finite() {
        return Err(MirError::invalid("branch indices must be positive"));
    }
    let (fi, fj) = (i as f64, j as f64);
    if (d - 0.5).abs() < 1e-7 {
        // the two closed forms below lose all precision as |4^{d+1/2} - 4| → 0
        let g = |x: f64| if x == 0.0 { 0.0 } else { x * x * x.abs().ln() };
        let h = |x: f64| 0.5 * (g(x - 1.0) + g(x + 1.0) - 2.0 * g(x));
        // h is even, so at -τ this is the limit of the d > 1/2 branch
        let t = -tau;
        let v = -h(t + fi - fj) + h(t + fi) + h(t - fj) - h(t);
        return Ok(v / (4.0 * 2f64.ln()));
    }
    let norm = (4f64.powf(d + 0.5) - 4.0).abs();
    if d < 0.5 {
        // second differences of fBm with H = d + 1/2
        let e = 2.0 * d + 1.0;
        let w = [1.0, -2.0, 1.0];
        let mut s = 0.0;
        for (a, wa) in w.iter().enumerate() {
            for (b, wb) in w.iter().enumerate() {
                let diff = tau + b as f64 * fj - a as f64 * fi;
                s += wa * wb * diff.abs().powf(e);
            }
        }
        Ok(-0.5 * s / norm)
    } else {
        // unit-window averages of fBm increments with H = d - 1/2
        let e = 2.0 * d + 1.0;
        let k = |x: f64| (x + 1.0).abs().powf(e) - 2.0 * x.abs().powf(e) + (x - 1.0).abs().powf(e);
        let s = k(tau + fj - fi) - k(tau - fi) - k(tau + fj) + k(tau);
        Ok(-0.5 * s / norm)
    }
}

/// Settings of the path-simulation calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub replications: usize,
    pub n_cal: usize,
    pub m_cal: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            replications: 2000,
            n_cal: 20_000,
            m_cal: 50,
            seed: 20_240_601,
        }
    }
}

/// Reference process used for calibration at memory d.
pub fn reference_spec(d: f64, n: usize) -> ProcessSpec {
    ProcessSpec::arfima(d, n)
}

/// Monte-Carlo estimate of Γ_p(d).
pub fn gamma_p(d: f64, p: usize, cfg: &CalibrationConfig) -> Result<DMatrix<f64>> {
    if !(GRID_MIN - 1e-12..=GRID_MAX + 1e-12).contains(&d) {
        return Err(MirError::invalid(format!(
            "calibration d = {d} outside [{GRID_MIN}, {GRID_MAX}]"
        )));
    }
    if p == 0 || cfg.replications < 2 || cfg.m_cal == 0 {
        return Err(MirError::invalid("calibration needs p ≥ 1, R ≥ 2, m ≥ 1"));
    }
    if cfg.n_cal < 3 * p * cfg.m_cal + 1 {
        return Err(MirError::SeriesTooShort {
            needed: 3 * p * cfg.m_cal + 1,
            got: cfg.n_cal,
        });
    }
    let sim = Simulator::new(&reference_spec(d, cfg.n_cal))?;
    let key = format!("gamma:d={d:.6}");
    let rows: Vec<Vec<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let x = sim.sample(&mut substream(cfg.seed, &key, r as u64));
            let ts = TimeSeries::new(x)?;
            Ok(ir_vector(&ts, cfg.m_cal, p)?.values)
        })
        .collect::<Result<_>>()?;
    let r = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for row in &rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / r;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for row in &rows {
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let scale = cfg.n_cal as f64 / cfg.m_cal as f64 / (r - 1.0);
    for a in 0..p {
        for b in 0..=a {
            let v = cov[(a, b)] * scale;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(MirError::invalid(
            "calibration failed: non-finite covariance",
        ));
    }
    symmetrize(&mut cov);
    if nalgebra::Cholesky::new(cov.clone()).is_none() {
        cov += DMatrix::<f64>::identity(p, p) * RIDGE;
    }
    Ok(cov)
}

/// σ = (Λ₀'(d)⁻² (JᵀΓ⁻¹J)⁻¹)^{1/2}.
pub fn sigma_from_gamma(gamma: &DMatrix<f64>, d: f64) -> Result<f64> {
    let (_, precision) = gls_weights(gamma)?;
    let lp = lambda0_prime(d)?;
    Ok((1.0 / (lp * lp * precision)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub replications: usize,
    pub n_cal: usize,
    pub m_cal: usize,
    pub seed: u64,
    pub reference: String,
}

/// Γ_p(d) and σ_p(d) on a grid of d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTable {
    pub format_version: u32,
    pub p: usize,
    pub d_grid: Vec<f64>,
    /// One row-major p × p matrix per grid point.
    pub gamma: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub provenance: Provenance,
}

/// Grid `start:step:end`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            start: GRID_MIN,
            step: 0.05,
            end: GRID_MAX,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || self.end < self.start {
            return Err(MirError::invalid("grid needs step > 0 and end ≥ start"));
        }
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        let pts: Vec<f64> = (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e10).round() / 1e10)
            .collect();
        if pts[0] < GRID_MIN - 1e-12 || pts[pts.len() - 1] > GRID_MAX + 1e-12 {
            return Err(MirError::invalid(format!(
                "grid must lie within [{GRID_MIN}, {GRID_MAX}]"
            )));
        }
        Ok(pts)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = MirError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| MirError::invalid(format!("bad grid component {v:?}")))
        };
        match parts.as_slice() {
            [a, b, c] => Ok(GridSpec {
                start: num(a)?,
                step: num(b)?,
                end: num(c)?,
            }),
            [a] => {
                let v = num(a)?;
                Ok(GridSpec {
                    start: v,
                    step: 1.0,
                    end: v,
                })
            }
            _ => Err(MirError::invalid("grid must be start:step:end")),
        }
    }
}

/// Plug-in covariance Σ̂ with the value of d actually used.
#[derive(Debug, Clone)]
pub struct SigmaHat {
    pub matrix: DMatrix<f64>,
    pub d_used: f64,
    pub clamped: bool,
}

impl SigmaTable {
    pub fn build(p: usize, grid: &GridSpec, cfg: &CalibrationConfig) -> Result<Self> {
        let d_grid = grid.points()?;
        let gammas: Vec<DMatrix<f64>> = d_grid
            .par_iter()
            .map(|&d| gamma_p(d, p, cfg))
            .collect::<Result<_>>()?;
        let sigma = d_grid
            .iter()
            .zip(&gammas)
            .map(|(&d, g)| sigma_from_gamma(g, d))
            .collect::<Result<Vec<_>>>()?;
        let table = SigmaTable {
            format_version: FORMAT_VERSION,
            p,
            d_grid,
            gamma: gammas
                .iter()
                .map(|g| g.transpose().as_slice().to_vec())
                .collect(),
            sigma,
            provenance: Provenance {
                replications: cfg.replications,
                n_cal: cfg.n_cal,
                m_cal: cfg.m_cal,
                seed: cfg.seed,
                reference: "arfima(0,d,0); d >= 0.5 cumulates arfima(0,d-1,0)".into(),
            },
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: SigmaTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Full-size matrix stored at grid index `k`.
    pub fn gamma_at(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.p, self.p, &self.gamma[k])
    }

    pub fn covers_default_range(&self) -> bool {
        let (lo, hi) = (self.d_grid[0], self.d_grid[self.d_grid.len() - 1]);
        lo <= GRID_MIN + 1e-9 && hi >= GRID_MAX - 1e-9
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MirError::invalid(format!("sigma table: {msg}")));
        if self.format_version != FORMAT_VERSION {
            return bad(format!(
                "unsupported format version {}",
                self.format_version
            ));
        }
        let k = self.d_grid.len();
        if self.p == 0 || k == 0 || self.gamma.len() != k || self.sigma.len() != k {
            return bad("inconsistent dimensions".into());
        }
        if self.d_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("grid not strictly increasing".into());
        }
        if self.d_grid[0] < GRID_MIN - 1e-9 || self.d_grid[k - 1] > GRID_MAX + 1e-9 {
            return bad("grid outside [-0.45, 1.20]".into());
        }
        for (idx, g) in self.gamma.iter().enumerate() {
            if g.len() != self.p * self.p || g.iter().any(|v| !v.is_finite()) {
                return bad(format!("matrix {idx} has wrong size or non-finite entries"));
            }
            let m = self.gamma_at(idx);
            let scale = m.diagonal().abs().max();
            if (&m - m.transpose()).abs().max() > 1e-12 * scale {
                return bad(format!("matrix {idx} is not symmetric"));
            }
            if nalgebra::Cholesky::new(m.clone()).is_none() {
                return bad(format!("matrix {idx} is not positive definite"));
            }
            let s = sigma_from_gamma(&m, self.d_grid[idx])?;
            let stored = self.sigma[idx];
            if !(stored > 0.0) || (s - stored).abs() > 1e-12 * s.max(1.0) {
                return bad(format!("sigma {idx} does not match its matrix"));
            }
        }
        Ok(())
    }

    fn check_p(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.p {
            return Err(MirError::invalid(format!(
                "table missing p = {p} (holds p ≤ {})",
                self.p
            )));
        }
        Ok(())
    }

    /// Clamps d into the grid and returns (d_used, clamped).
    fn clamp(&self, d: f64) -> (f64, bool) {
        let lo = self.d_grid[0];
        let hi = self.d_grid[self.d_grid.len() - 1];
        if d.is_nan() {
            return (lo, true);
        }
        if d < lo {
            (lo, true)
        } else if d > hi {
            (hi, true)
        } else {
            (d, false)
        }
    }

    /// Γ_p(d) by linear interpolation on the grid (leading p × p block).
    pub fn gamma_interp(&self, p: usize, d: f64) -> Result<(DMatrix<f64>, f64, bool)> {
        self.check_p(p)?;
        let (du, clamped) = self.clamp(d);
        let k = self.d_grid.len();
        let hi = self.d_grid.partition_point(|&g| g < du).min(k - 1);
        let block = |idx: usize| self.gamma_at(idx).view((0, 0), (p, p)).into_owned();
        let m = if hi == 0 || self.d_grid[hi] == du {
            block(hi)
        } else {
            let lo = hi - 1;
            let t = (du - self.d_grid[lo]) / (self.d_grid[hi] - self.d_grid[lo]);
            block(lo) * (1.0 - t) + block(hi) * t
        };
        Ok((m, du, clamped))
    }

    /// σ_p(d) with Γ interpolated at the clamped d.
    pub fn sigma_p_of_d(&self, p: usize, d: f64) -> Result<f64> {
        let (g, du, _) = self.gamma_interp(p, d)?;
        sigma_from_gamma(&g, du)
    }

    /// Σ̂ = Λ₀'(d̂)⁻² Γ_p(d̂), ridged if needed.
    pub fn sigma_hat_matrix(&self, d_hat: f64, p: usize) -> Result<SigmaHat> {
        let (g, du, clamped) = self.gamma_interp(p, d_hat)?;
        let lp = lambda0_prime(du)?;
        let mut m = g / (lp * lp);
        let (_, ridge) = cholesky_with_ridge(&m)?;
        if ridge > 0.0 {
            m += DMatrix::<f64>::identity(p, p) * ridge;
        }
        Ok(SigmaHat {
            matrix: m,
            d_used: du,
            clamped,
        })
    }
}

/// The table named by MIRLAB_SIGMA_TABLE, or the bundled one.
pub fn default_table() -> Result<Arc<SigmaTable>> {
    static CACHE: OnceLock<std::result::Result<Arc<SigmaTable>, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let loaded = match std::env::var_os(SIGMA_TABLE_ENV) {
                Some(path) if !path.is_empty() => SigmaTable::load(Path::new(&path)),
                _ => SigmaTable::from_json(BUNDLED_TABLE),
            };
            loaded.map(Arc::new).map_err(|e| e.to_string())
        })
        .clone()
        .map_err(MirError::InvalidInput)
}

/// The table shipped with the crate, ignoring the environment.
pub fn bundled_table() -> Result<SigmaTable> {
    SigmaTable::from_json(BUNDLED_TABLE)
}

#[cfg(test)]
mod tests;
