use crate::error::{GflsrError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::canonicalize_sign;

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub u: Vector,
    pub v: Vector,
    pub s: f64,
    pub iterations: usize,
}

fn finish(c: &Matrix, u: Vector, v: Vector, iterations: usize) -> Result<SingularPair> {
    let (u, sign) = canonicalize_sign(&u)?;
    let v = v * sign;
    let s = u.dot(&(c * &v));
    Ok(SingularPair { u, v, s, iterations })
}

/// Top singular triple by alternating power iteration started from the
/// largest-norm column. `u` is sign-canonical and `v` follows it so `uᵀCv = s ≥ 0`.
pub fn leading_singular_pair(c: &Matrix, tol: f64, max_iter: usize) -> Result<SingularPair> {
    if c.nrows() == 0 || c.ncols() == 0 {
        return Err(GflsrError::Dimension("empty matrix".into()));
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(GflsrError::Dimension("matrix has non-finite entries".into()));
    }
    if linalg::max_abs(c) == 0.0 {
        return Err(GflsrError::NoDependenceSignal);
    }
    let start = (0..c.ncols())
        .max_by(|&a, &b| c.column(a).norm().total_cmp(&c.column(b).norm()))
        .unwrap_or(0);
    let mut u = linalg::normalize(&c.column(start).clone_owned())?;
    let mut s = 0.0;
    let vec_tol = 100.0 * tol;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let v = linalg::normalize(&(c.transpose() * &u))?;
        let cu = c * &v;
        let s_new = cu.norm();
        let u_new = linalg::normalize(&cu)?;
        let du = (&u_new - &u).norm();
        let ds = (s_new - s).abs();
        u = u_new;
        s = s_new;
        last_change = du;
        if ds <= tol * s && du <= vec_tol {
            return finish(c, u, v, it);
        }
    }
    Err(GflsrError::NoConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// Top singular triple from a full decomposition, same sign convention.
pub fn svd_leading_pair(c: &Matrix) -> Result<SingularPair> {
    if linalg::max_abs(c) == 0.0 {
        return Err(GflsrError::NoDependenceSignal);
    }
    let top = linalg::singular_triples(c, 0.0)
        .into_iter()
        .next()
        .ok_or(GflsrError::NoDependenceSignal)?;
    finish(c, linalg::normalize(&top.1)?, linalg::normalize(&top.2)?, 0)
}

/// Power iteration, falling back to the full decomposition if it stalls.
pub fn leading_pair(c: &Matrix, tol: f64, max_iter: usize) -> Result<SingularPair> {
    match leading_singular_pair(c, tol, max_iter) {
        Err(GflsrError::NoConvergence { .. }) => svd_leading_pair(c),
        other => other,
    }
}
