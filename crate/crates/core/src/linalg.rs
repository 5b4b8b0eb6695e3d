//! Small dense complex helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Squared Frobenius norm.
pub fn fro_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `A Aᴴ + c I` for a K×M matrix `A`.
pub fn regularized_gram(a: &CMat, c: f64) -> CMat {
    let mut g = a * a.adjoint();
    for i in 0..g.nrows() {
        g[(i, i)] += Complex64::new(c, 0.0);
    }
    g
}

/// Cholesky of a Hermitian positive-definite matrix; `tag` is reported in
/// the failure.
pub fn cholesky(m: CMat, tag: f64) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    Cholesky::new(m).ok_or(Error::CholeskyFailure { lambda: tag })
}

pub fn check_same_shape(a: &CMat, b: &CMat, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Build a matrix from `(re, im)` rows; handy in tests and the demo.
pub fn from_rows(rows: &[&[(f64, f64)]]) -> CMat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(nrows, ncols, |i, j| {
        let (re, im) = rows[i][j];
        Complex64::new(re, im)
    })
}
