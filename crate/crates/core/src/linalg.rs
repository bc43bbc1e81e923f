//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{MirError, Result};

pub const RIDGE: f64 = 1e-8;

/// Cholesky factor of `a`, adding RIDGE·I (growing tenfold, at most six
/// times) when the plain factorisation fails. Returns the factor and the
/// ridge that was needed.
pub fn cholesky_with_ridge(a: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let n = a.nrows();
    let mut ridge = RIDGE;
    for _ in 0..6 {
        let shifted = a + DMatrix::<f64>::identity(n, n) * ridge;
        if let Some(c) = Cholesky::new(shifted) {
            return Ok((c, ridge));
        }
        ridge *= 10.0;
    }
    Err(MirError::NotPositiveDefinite)
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// GLS weights Σ⁻¹J / (JᵀΣ⁻¹J) for the constant regressor J = (1, ..., 1).
pub fn gls_weights(sigma: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let (chol, _) = cholesky_with_ridge(sigma)?;
    let ones = DVector::from_element(sigma.nrows(), 1.0);
    let s_inv_j = chol.solve(&ones);
    let precision = ones.dot(&s_inv_j);
    if !(precision > 0.0 && precision.is_finite()) {
        return Err(MirError::NotPositiveDefinite);
    }
    Ok((s_inv_j / precision, precision))
}

/// Ordinary least squares with classical standard errors.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub std_err: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Residual variance with n - k degrees of freedom.
    pub sigma2: f64,
}

impl OlsFit {
    pub fn t_stat(&self, i: usize) -> f64 {
        self.coef[i] / self.std_err[i]
    }
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(MirError::Degenerate(format!(
            "{n} observations for {k} regressors"
        )));
    }
    let xtx = x.transpose() * x;
    let chol =
        Cholesky::new(xtx).ok_or_else(|| MirError::Degenerate("collinear regressors".into()))?;
    let coef = chol.solve(&(x.transpose() * y));
    let residuals = y - x * &coef;
    let sigma2 = residuals.norm_squared() / (n - k) as f64;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(MirError::Degenerate("zero residual variance".into()));
    }
    let inv = chol.inverse();
    let std_err = DVector::from_iterator(k, (0..k).map(|i| (sigma2 * inv[(i, i)]).sqrt()));
    Ok(OlsFit {
        coef,
        std_err,
        residuals,
        sigma2,
    })
}
