//! Thin wrappers over `nalgebra` for the dense solves used throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with partial pivoting. `a` is row-major `n x n`.
pub(crate) fn solve(n: usize, a: Vec<f64>, b: Vec<f64>, ctx: &'static str) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let m = DMatrix::from_row_slice(n, n, &a);
    let rhs = DVector::from_vec(b);
    let lu = m.lu();
    // LU succeeds numerically on nearly singular input; reject tiny pivots.
    let u = lu.u();
    let scale = u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    if (0..n).any(|i| u[(i, i)].abs() <= 1e-13 * scale) {
        return Err(Error::Singular(ctx));
    }
    let x = lu.solve(&rhs).ok_or(Error::Singular(ctx))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(ctx));
    }
    Ok(x.iter().copied().collect())
}

pub(crate) fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}
