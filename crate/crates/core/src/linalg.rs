//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{GflsrError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn column_means(x: &Matrix) -> Vector {
    let n = x.nrows().max(1) as f64;
    Vector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

pub fn center_columns(x: &Matrix) -> (Matrix, Vector) {
    let means = column_means(x);
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (out, means)
}

pub fn add_row_vector(x: &Matrix, v: &Vector) -> Matrix {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(v[j]);
    }
    out
}

/// Sample covariance with the 1/n divisor. Columns are centred first.
pub fn covariance(x: &Matrix) -> Matrix {
    let (c, _) = center_columns(x);
    let n = x.nrows().max(1) as f64;
    c.transpose() * &c / n
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn normalize(v: &Vector) -> Result<Vector> {
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GflsrError::DegenerateDirection);
    }
    Ok(v / norm)
}

/// Singular triples (σ, u, v) of `a` with σ > `rel_tol`·σ_max, largest first.
///
/// Taken from the symmetric eigenproblem of [[0, A], [Aᵀ, 0]], whose eigenpairs
/// are (±σ, (u; ±v)/√2). nalgebra's bidiagonal SVD loses accuracy on matrices
/// with repeated singular values (projectors among them); the symmetric solver
/// does not.
pub fn singular_triples(a: &Matrix, rel_tol: f64) -> Vec<(f64, Vector, Vector)> {
    let (p, q) = a.shape();
    let mut jw = Matrix::zeros(p + q, p + q);
    jw.view_mut((0, p), (p, q)).copy_from(a);
    jw.view_mut((p, 0), (q, p)).copy_from(&a.transpose());
    let eig = jw.symmetric_eigen();
    let s_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * s_max;
    let mut out: Vec<(f64, Vector, Vector)> = (0..p + q)
        .filter(|&k| eig.eigenvalues[k] > cutoff && eig.eigenvalues[k] > 0.0)
        .map(|k| {
            let z = eig.eigenvectors.column(k);
            let scale = std::f64::consts::SQRT_2;
            (eig.eigenvalues[k], z.rows(0, p) * scale, z.rows(p, q) * scale)
        })
        .collect();
    out.sort_by(|x, y| y.0.total_cmp(&x.0));
    out
}

/// Moore-Penrose inverse, dropping singular values below `rel_tol * s_max`.
pub fn pinv(a: &Matrix, rel_tol: f64) -> Matrix {
    let mut out = Matrix::zeros(a.ncols(), a.nrows());
    for (s, u, v) in singular_triples(a, rel_tol) {
        out += v * u.transpose() / s;
    }
    out
}

/// Orthonormal basis of the complement of the span of `cols` (assumed orthonormal).
pub fn orthogonal_complement(dim: usize, cols: &[Vector]) -> Matrix {
    let mut basis: Vec<Vector> = cols.to_vec();
    let mut extra = Vec::new();
    for i in 0..dim {
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&e);
                e.axpy(-proj, b, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            e /= norm;
            basis.push(e.clone());
            extra.push(e);
        }
        if basis.len() == dim {
            break;
        }
    }
    if extra.is_empty() {
        return Matrix::zeros(dim, 0);
    }
    Matrix::from_columns(&extra)
}

/// Least-squares solve of `design * coef = target` through a truncated SVD.
pub fn least_squares(design: &Matrix, target: &Matrix) -> Matrix {
    pinv(design, 1e-12) * target
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Row-major nested vectors, the on-disk layout for matrices.
pub fn to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(GflsrError::Dimension("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) mod serde_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{from_rows, to_rows, Matrix};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod serde_vector {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_projector_is_itself() {
        let u = Vector::from_vec(vec![0.6, 0.8, 0.0]);
        let p = Matrix::identity(3, 3) - &u * u.transpose();
        let pi = pinv(&p, 1e-10);
        assert!(max_abs(&(pi - &p)) < 1e-12);
    }

    #[test]
    fn triples_reconstruct_a_projector_with_repeated_values() {
        let v = Matrix::from_row_slice(5, 2, &[0.6, 0.0, 0.8, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.8]);
        let p = Matrix::identity(5, 5) - &v * v.transpose();
        let t = singular_triples(&p, 1e-10);
        assert_eq!(t.len(), 3);
        let mut back = Matrix::zeros(5, 5);
        for (s, u, w) in &t {
            assert!((s - 1.0).abs() < 1e-12);
            back += u * w.transpose() * *s;
        }
        assert!(max_abs(&(back - p)) < 1e-12);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let u = Vector::from_vec(vec![1.0, 1.0, 0.0, 0.0]).normalize();
        let q = orthogonal_complement(4, std::slice::from_ref(&u));
        assert_eq!(q.ncols(), 3);
        assert!(max_abs(&(q.transpose() * &q - Matrix::identity(3, 3))) < 1e-12);
        assert!((q.transpose() * u).norm() < 1e-12);
    }

    #[test]
    fn covariance_uses_n_divisor() {
        let x = Matrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert!((covariance(&x)[(0, 0)] - 1.25).abs() < 1e-15);
    }
}
