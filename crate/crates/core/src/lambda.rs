//! The map between memory parameters and the limit of the increment ratio.
//!
//! `rho_of_d` gives the correlation of the limiting increments on the
//! fractional scale, `lambda_of_r` maps a correlation to the limiting mean
//! of one ratio term, and `lambda0_of_d` composes the two.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MirError, Result};

/// Guard band kept between the inversion search interval and the open
/// boundaries of the memory-parameter domain.
pub const INVERSE_GUARD: f64 = 1e-4;

pub const D_MIN: f64 = -0.5;
pub const D_MAX: f64 = 1.5;

const LN9: f64 = 2.1972245773362196;
const LN4: f64 = 1.3862943611198906;

/// Memory parameter restricted to the open interval (-0.5, 1.5).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MemoryParam(f64);

impl MemoryParam {
    pub fn new(d: f64) -> Result<Self> {
        check_d(d)?;
        Ok(MemoryParam(d))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Result of inverting the limit map; `clamped` is set when the target sat
/// outside the attainable range and the boundary value was returned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inverted {
    pub d: f64,
    pub clamped: bool,
}

fn check_d(d: f64) -> Result<()> {
    if d.is_finite() && d > D_MIN && d < D_MAX {
        Ok(())
    } else {
        Err(MirError::invalid(format!(
            "memory parameter {d} outside (-0.5, 1.5)"
        )))
    }
}

// expm1(x)/x and its derivative, with series near zero.
fn phi(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + x / 2.0
    } else {
        x.exp_m1() / x
    }
}

fn phi_prime(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        0.5 + x / 3.0 + x2 / 8.0 + x2 * x / 30.0 + x2 * x2 / 144.0 + x2 * x2 * x / 840.0
    } else {
        (x * x.exp() - x.exp_m1()) / (x * x)
    }
}

/// Λ(r), the limiting mean of |A + B| / (|A| + |B|) for a centred Gaussian
/// pair with unit variances and correlation r.
pub fn lambda_of_r(r: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(MirError::invalid(format!(
            "correlation {r} outside [-1, 1]"
        )));
    }
    Ok(lambda_unchecked(r))
}

fn lambda_unchecked(r: f64) -> f64 {
    if r >= 1.0 {
        return 1.0;
    }
    if r <= -1.0 {
        return 0.0;
    }
    let s = ((1.0 + r) / (1.0 - r)).sqrt();
    let log_term = ((1.0 - r) / (1.0 + r)).ln_1p();
    (2.0 / PI) * s.atan() + s * log_term / PI
}

/// dΛ/dr on (-1, 1).
pub fn lambda_prime_of_r(r: f64) -> Result<f64> {
    if !(r > -1.0 && r < 1.0) {
        return Err(MirError::invalid(format!(
            "correlation {r} outside (-1, 1)"
        )));
    }
    let log_term = ((1.0 - r) / (1.0 + r)).ln_1p();
    Ok(log_term / (PI * (1.0 - r).powf(1.5) * (1.0 + r).sqrt()))
}

/// ρ(d). Written as -2 + (9/8) (9^δ - 1)/(4^δ - 1) with δ = d - 1/2, which
/// has no cancellation at the removable point d = 1/2.
pub fn rho_of_d(d: f64) -> Result<f64> {
    check_d(d)?;
    Ok(rho_unchecked(d))
}

fn rho_unchecked(d: f64) -> f64 {
    let delta = d - 0.5;
    -2.0 + 9.0 / 8.0 * (LN9 / LN4) * phi(LN9 * delta) / phi(LN4 * delta)
}

/// dρ/dd.
pub fn rho_prime_of_d(d: f64) -> Result<f64> {
    check_d(d)?;
    Ok(rho_prime_unchecked(d))
}

fn rho_prime_unchecked(d: f64) -> f64 {
    let delta = d - 0.5;
    let (xa, xb) = (LN9 * delta, LN4 * delta);
    let (pa, pb) = (phi(xa), phi(xb));
    9.0 / 8.0 * (LN9 / LN4) * (LN9 * phi_prime(xa) * pb - LN4 * pa * phi_prime(xb)) / (pb * pb)
}

/// Λ₀(d) = Λ(ρ(d)).
pub fn lambda0_of_d(d: f64) -> Result<f64> {
    check_d(d)?;
    Ok(lambda0_unchecked(d))
}

pub(crate) fn lambda0_unchecked(d: f64) -> f64 {
    lambda_unchecked(rho_unchecked(d))
}

/// Λ₀'(d) by the chain rule.
pub fn lambda0_prime(d: f64) -> Result<f64> {
    check_d(d)?;
    let r = rho_unchecked(d);
    Ok(lambda_prime_of_r(r)? * rho_prime_unchecked(d))
}

/// Solves Λ₀(d) = x by bisection on [-0.5 + ε, 1.5 - ε].
pub fn lambda0_inverse(x: f64) -> Inverted {
    let mut lo = D_MIN + INVERSE_GUARD;
    let mut hi = D_MAX - INVERSE_GUARD;
    if x.is_nan() || x <= lambda0_unchecked(lo) {
        return Inverted {
            d: lo,
            clamped: true,
        };
    }
    if x >= lambda0_unchecked(hi) {
        return Inverted {
            d: hi,
            clamped: true,
        };
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if lambda0_unchecked(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Inverted {
        d: 0.5 * (lo + hi),
        clamped: false,
    }
}
