use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{autocov, ProcessSpec};
use crate::error::{MirError, Result};

/// The embedding may grow to this multiple of its initial size.
pub const MAX_EMBEDDING_GROWTH: usize = 8;

const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// Davies–Harte sampler for a stationary Gaussian sequence of length n.
#[derive(Clone)]
pub struct CirculantSampler {
    n: usize,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    min_relative_eigenvalue: f64,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("n", &self.n)
            .field("size", &self.scale.len())
            .finish()
    }
}

fn smooth_size(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 2usize;
    while p2 < 2 * min.max(2) {
        let mut p3 = p2;
        while p3 < 2 * min.max(2) {
            let mut p5 = p3;
            while p5 < 2 * min.max(2) {
                if p5 >= min && p5 < best {
                    best = p5;
                }
                p5 *= 5;
            }
            p3 *= 3;
        }
        p2 *= 2;
    }
    best
}

/// Eigenvalues of the symmetric circulant whose first row is built from
/// gamma[0..=size/2].
pub(crate) fn circulant_eigenvalues(gamma: &[f64], size: usize) -> Vec<f64> {
    let half = size / 2;
    let mut row: Vec<Complex64> = (0..size)
        .map(|j| {
            let lag = if j <= half { j } else { size - j };
            Complex64::new(gamma[lag], 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

impl CirculantSampler {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        let n = spec.n;
        let initial = smooth_size((2 * n.saturating_sub(1)).max(2));
        let mut size = initial;
        loop {
            let gamma = autocov(spec, size / 2 + 1)?.gamma;
            let eig = circulant_eigenvalues(&gamma, size);
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            if min >= -NEGATIVE_TOLERANCE * max {
                let scale = eig
                    .iter()
                    .map(|&l| (l.max(0.0) / size as f64).sqrt())
                    .collect();
                let fft = FftPlanner::new().plan_fft_forward(size);
                return Ok(CirculantSampler {
                    n,
                    scale,
                    fft,
                    min_relative_eigenvalue: min / max,
                });
            }
            if size * 2 > initial * MAX_EMBEDDING_GROWTH {
                return Err(MirError::Embedding {
                    min_eigenvalue: min / max,
                    size,
                });
            }
            size *= 2;
        }
    }

    pub fn size(&self) -> usize {
        self.scale.len()
    }

    pub fn min_relative_eigenvalue(&self) -> f64 {
        self.min_relative_eigenvalue
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut w: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        self.fft.process(&mut w);
        w.truncate(self.n);
        w.into_iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(39998), 40000);
        assert_eq!(smooth_size(998), 1000);
        assert_eq!(smooth_size(2), 2);
        assert_eq!(smooth_size(7), 8);
        assert!(smooth_size(9998).is_multiple_of(2));
    }
}
