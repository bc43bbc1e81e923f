//! Increment ratio statistics.

use serde::{Deserialize, Serialize};

use crate::error::{MirError, Result};
use crate::series::TimeSeries;

const RECOMPUTE_EVERY: usize = 1 << 16;

/// IR statistics at scales m, 2m, ..., pm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrVector {
    pub m: usize,
    pub p: usize,
    pub values: Vec<f64>,
}

/// Minimum length for the statistic at scale `ell`.
pub fn min_length(ell: usize) -> usize {
    3 * ell + 1
}

/// IR_N(ℓ): the mean over k of |A_k + B_k| / (|A_k| + |B_k|), where A_k and
/// B_k are the sums of ℓ-lag increments over two adjacent windows of length ℓ.
pub fn ir_statistic(x: &TimeSeries, ell: usize) -> Result<f64> {
    ir_values(x.values(), ell)
}

pub(crate) fn ir_values(x: &[f64], ell: usize) -> Result<f64> {
    if ell == 0 {
        return Err(MirError::invalid("scale must be positive"));
    }
    let n = x.len();
    if n < min_length(ell) {
        return Err(MirError::SeriesTooShort {
            needed: min_length(ell),
            got: n,
        });
    }
    // inc[t] = X_{t+ℓ} - X_t (0-based), defined for t < n - ℓ
    let inc: Vec<f64> = (0..n - ell).map(|t| x[t + ell] - x[t]).collect();
    let window = |start: usize| inc[start..start + ell].iter().sum::<f64>();
    let terms = n - 3 * ell;
    let mut a = window(0);
    let mut b = window(ell);
    let mut total = 0.0;
    for k in 0..terms {
        if k > 0 {
            if k % RECOMPUTE_EVERY == 0 {
                a = window(k);
                b = window(k + ell);
            } else {
                a += inc[k + ell - 1] - inc[k - 1];
                b += inc[k + 2 * ell - 1] - inc[k + ell - 1];
            }
        }
        let den = a.abs() + b.abs();
        if den == 0.0 {
            return Err(MirError::DegenerateRatio {
                index: k,
                scale: ell,
            });
        }
        total += (a + b).abs() / den;
    }
    Ok(total / terms as f64)
}

/// The vector (IR_N(jm))_{1≤j≤p}.
pub fn ir_vector(x: &TimeSeries, m: usize, p: usize) -> Result<IrVector> {
    if m == 0 || p == 0 {
        return Err(MirError::invalid("scale and count must be positive"));
    }
    let needed = 3 * p * m + 1;
    if x.len() < needed {
        return Err(MirError::SeriesTooShort {
            needed,
            got: x.len(),
        });
    }
    let values = (1..=p)
        .map(|j| ir_values(x.values(), j * m))
        .collect::<Result<Vec<_>>>()?;
    Ok(IrVector { m, p, values })
}

/// Real-valued base scale, floored.
pub fn ir_vector_real(x: &TimeSeries, m: f64, p: usize) -> Result<IrVector> {
    if !(m >= 1.0) {
        return Err(MirError::invalid(format!("base scale {m} below 1")));
    }
    ir_vector(x, m.floor() as usize, p)
}
