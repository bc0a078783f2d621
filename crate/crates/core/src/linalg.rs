//! Small dense solves with conditioning checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reciprocal condition numbers below this are treated as singular.
pub const RCOND_FLOOR: f64 = 1e-14;

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !max.is_finite() || !min.is_finite() {
        return f64::INFINITY;
    }
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b` for a symmetric positive definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if a.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let condition = condition_number(a);
    if !(condition.is_finite() && 1.0 / condition > RCOND_FLOOR) {
        return Err(Error::Singular {
            what: what.to_string(),
            condition,
        });
    }
    match a.clone().cholesky() {
        Some(chol) => Ok(chol.solve(b)),
        None => Err(Error::Singular {
            what: what.to_string(),
            condition,
        }),
    }
}

/// Solves `a x = b` for a general square `a` with matrix right-hand side.
pub fn solve_general(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let condition = condition_number(a);
    if !(condition.is_finite() && 1.0 / condition > RCOND_FLOOR) {
        return Err(Error::Singular {
            what: what.to_string(),
            condition,
        });
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular {
        what: what.to_string(),
        condition,
    })
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
