//! Exact Gaussian simulation of the long-memory process families.

mod autocov;
mod circulant;

pub use autocov::{arfima0_autocov, arma_autocov, autocov, fgn_autocov, AutocovSequence};
pub use circulant::{CirculantSampler, MAX_EMBEDDING_GROWTH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MirError, Result};
use crate::rng::seeded;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Fractional Gaussian noise with H = d + 1/2, cumulated when d ≥ 1/2.
    Fgn,
    /// ARFIMA(p, d, q); d ≥ 1/2 cumulates ARFIMA(p, d - 1, q).
    Arfima,
    /// Spectral density |λ|^{-2d} (1 + c1 |λ|^β).
    SpectralF3,
    /// Spectral density |λ|^{-2d} (1 + |log λ| |λ|).
    SpectralF4,
    /// sin(2πt/n) + sqrt(2t/n) · ARFIMA(0, d, 0).
    Trend,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Fgn => "fgn",
            Family::Arfima => "arfima",
            Family::SpectralF3 => "spectral_f3",
            Family::SpectralF4 => "spectral_f4",
            Family::Trend => "trend",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = MirError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgn" => Ok(Family::Fgn),
            "arfima" => Ok(Family::Arfima),
            "spectral_f3" | "f3" => Ok(Family::SpectralF3),
            "spectral_f4" | "f4" => Ok(Family::SpectralF4),
            "trend" => Ok(Family::Trend),
            other => Err(MirError::invalid(format!(
                "unknown process family {other:?}"
            ))),
        }
    }
}

/// Declarative description of a simulated path.
///
/// AR and MA coefficients follow the convention
/// X_t = Σ φ_i X_{t-i} + ε_t + Σ θ_j ε_{t-j}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub family: Family,
    pub d: f64,
    #[serde(default)]
    pub ar: Vec<f64>,
    #[serde(default)]
    pub ma: Vec<f64>,
    #[serde(default)]
    pub c1: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta() -> f64 {
    1.0
}

impl ProcessSpec {
    pub fn new(family: Family, d: f64, n: usize) -> Self {
        ProcessSpec {
            family,
            d,
            ar: Vec::new(),
            ma: Vec::new(),
            c1: 0.0,
            beta: default_beta(),
            n,
            seed: 0,
        }
    }

    pub fn arfima(d: f64, n: usize) -> Self {
        Self::new(Family::Arfima, d, n)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_arma(mut self, ar: Vec<f64>, ma: Vec<f64>) -> Self {
        self.ar = ar;
        self.ma = ma;
        self
    }

    /// Whether the path is the partial sum of a stationary increment process.
    pub fn is_integrated(&self) -> bool {
        self.d >= 0.5
    }

    /// Memory parameter of the stationary process actually simulated.
    pub fn stationary_d(&self) -> f64 {
        if self.is_integrated() {
            self.d - 1.0
        } else {
            self.d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(MirError::invalid("length n must be positive"));
        }
        if !self.d.is_finite() || self.d <= -0.5 || self.d >= 1.5 {
            return Err(MirError::invalid(format!(
                "d = {} outside (-0.5, 1.5)",
                self.d
            )));
        }
        if matches!(self.family, Family::Fgn) && self.d == 0.5 {
            return Err(MirError::invalid(
                "fgn increments at d = 0.5 would need H = 0",
            ));
        }
        let arma_ok = matches!(self.family, Family::Arfima);
        if !arma_ok && (!self.ar.is_empty() || !self.ma.is_empty()) {
            return Err(MirError::invalid(format!(
                "family {} takes no ARMA coefficients",
                self.family.name()
            )));
        }
        if self.ar.iter().chain(&self.ma).any(|v| !v.is_finite()) {
            return Err(MirError::invalid("non-finite ARMA coefficient"));
        }
        if !ar_is_stationary(&self.ar) {
            return Err(MirError::invalid(
                "AR polynomial has a root on or inside the unit circle",
            ));
        }
        if matches!(self.family, Family::SpectralF3) {
            if !(self.beta > 0.0 && self.beta.is_finite()) {
                return Err(MirError::invalid("beta must be positive"));
            }
            if !(self.c1 >= 0.0 && self.c1.is_finite()) {
                return Err(MirError::invalid("c1 must be non-negative"));
            }
        }
        Ok(())
    }

    /// Human-readable label used as a table key.
    pub fn label(&self) -> String {
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        match self.family {
            Family::Arfima if self.ar.is_empty() && self.ma.is_empty() => "arfima(0,d,0)".into(),
            Family::Arfima => {
                let mut parts = Vec::new();
                if !self.ar.is_empty() {
                    parts.push(format!("ar={}", fmt(&self.ar)));
                }
                if !self.ma.is_empty() {
                    parts.push(format!("ma={}", fmt(&self.ma)));
                }
                format!(
                    "arfima({},d,{})[{}]",
                    self.ar.len(),
                    self.ma.len(),
                    parts.join(";")
                )
            }
            Family::SpectralF3 => format!("spectral_f3[c1={};beta={}]", self.c1, self.beta),
            f => f.name().into(),
        }
    }
}

/// Stability of 1 - φ_1 z - ... - φ_p z^p via the step-down recursion:
/// all partial autocorrelations must lie strictly inside (-1, 1).
pub fn ar_is_stationary(ar: &[f64]) -> bool {
    let mut a = ar.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1)
            .map(|i| (a[i] + k * a[p - 2 - i]) / denom)
            .collect();
        a = next;
    }
    true
}

/// Prepared generator: autocovariance and circulant factorisation are computed
/// once and reused across draws.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: ProcessSpec,
    sampler: CirculantSampler,
}

impl Simulator {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let gamma_spec = match spec.family {
            Family::Trend => ProcessSpec::arfima(spec.d, spec.n),
            _ => spec.clone(),
        };
        let sampler = CirculantSampler::new(&gamma_spec)?;
        Ok(Simulator {
            spec: spec.clone(),
            sampler,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn embedding_size(&self) -> usize {
        self.sampler.size()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = self.sampler.sample(rng);
        if self.spec.is_integrated() {
            let mut acc = 0.0;
            for v in x.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        if matches!(self.spec.family, Family::Trend) {
            let n = self.spec.n as f64;
            for (i, v) in x.iter_mut().enumerate() {
                let t = (i + 1) as f64;
                *v = (2.0 * std::f64::consts::PI * t / n).sin() + (2.0 * t / n).sqrt() * *v;
            }
        }
        x
    }
}

/// Draws one path using the spec's own seed.
pub fn generate(spec: &ProcessSpec) -> Result<TimeSeries> {
    let sim = Simulator::new(spec)?;
    let mut rng = seeded(spec.seed);
    let mut ts = TimeSeries::new(sim.sample(&mut rng))?;
    let mut prov = format!(
        "{} d={} n={} seed={}",
        spec.label(),
        spec.d,
        spec.n,
        spec.seed
    );
    if spec.is_integrated() {
        prov.push_str(" (cumulated stationary increments)");
    }
    ts.provenance = Some(prov);
    Ok(ts)
}

#[cfg(test)]
mod tests;
