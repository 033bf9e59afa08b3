//! Model parameters, datasets and the generators they are drawn from.

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GflsrError, Result};
use crate::linalg::{self, Matrix, Vector};

/// Covariance of a noise term. `Projected` is σ²(I − LLᵀ) for the loading matrix L
/// of the block it is attached to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum NoiseCase {
    Zero,
    Projected {
        sigma_sq: f64,
    },
    Isotropic {
        sigma_sq: f64,
    },
    General {
        #[serde(with = "linalg::serde_matrix")]
        cov: Matrix,
    },
}

impl NoiseCase {
    pub fn matrix(&self, loadings: &Matrix) -> Matrix {
        let d = loadings.nrows();
        match self {
            NoiseCase::Zero => Matrix::zeros(d, d),
            NoiseCase::Projected { sigma_sq } => (Matrix::identity(d, d) - loadings * loadings.transpose()) * *sigma_sq,
            NoiseCase::Isotropic { sigma_sq } => Matrix::identity(d, d) * *sigma_sq,
            NoiseCase::General { cov } => cov.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(with = "linalg::serde_matrix")]
    pub w: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub v: Matrix,
    /// Latent variances s²₁,ₕ (diagonal of Σ_ξ).
    pub s2: Vec<f64>,
    /// Link slopes b_h.
    pub b: Vec<f64>,
    pub sigma1_sq: f64,
    pub noise_x: NoiseCase,
    pub noise_y: NoiseCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Shape(String),
    NotOrthonormal { block: char, error: f64 },
    NonPositiveVariance { index: usize },
    NonPositiveSlope { index: usize },
    NotDecreasing { index: usize },
    NegativeNoise,
    NoiseNotPsd { block: char },
}

impl ModelParams {
    pub fn p(&self) -> usize {
        self.w.nrows()
    }
    pub fn q(&self) -> usize {
        self.v.nrows()
    }
    pub fn h(&self) -> usize {
        self.w.ncols()
    }
    pub fn sigma_x(&self) -> Matrix {
        self.noise_x.matrix(&self.w)
    }
    pub fn sigma_y(&self) -> Matrix {
        self.noise_y.matrix(&self.v)
    }
}

/// Checks every model constraint and reports all violations at once.
pub fn validate_params(params: &ModelParams) -> Result<()> {
    let mut out = Vec::new();
    let h = params.h();
    if params.v.ncols() != h || params.s2.len() != h || params.b.len() != h {
        out.push(Violation::Shape(format!(
            "W has {h} columns, V {}, s2 {}, b {}",
            params.v.ncols(),
            params.s2.len(),
            params.b.len()
        )));
        return Err(GflsrError::InvalidParams(out));
    }
    if h > params.p().min(params.q()) {
        out.push(Violation::Shape(format!(
            "H = {h} exceeds min(p, q) = {}",
            params.p().min(params.q())
        )));
    }
    for (block, m) in [('W', &params.w), ('V', &params.v)] {
        let err = linalg::max_abs(&(m.transpose() * m - Matrix::identity(h, h)));
        if err > 1e-8 {
            out.push(Violation::NotOrthonormal { block, error: err });
        }
    }
    for k in 0..h {
        if !(params.s2[k] > 0.0) {
            out.push(Violation::NonPositiveVariance { index: k });
        }
        if !(params.b[k] > 0.0) {
            out.push(Violation::NonPositiveSlope { index: k });
        }
        if k > 0 && !(params.s2[k] * params.b[k] < params.s2[k - 1] * params.b[k - 1]) {
            out.push(Violation::NotDecreasing { index: k });
        }
    }
    if params.sigma1_sq < 0.0 {
        out.push(Violation::NegativeNoise);
    }
    for (block, noise, dim) in [('X', &params.noise_x, params.p()), ('Y', &params.noise_y, params.q())] {
        match noise {
            NoiseCase::Zero => {}
            NoiseCase::Projected { sigma_sq } | NoiseCase::Isotropic { sigma_sq } => {
                if *sigma_sq < 0.0 {
                    out.push(Violation::NegativeNoise);
                }
            }
            NoiseCase::General { cov } => {
                if cov.nrows() != dim || cov.ncols() != dim {
                    out.push(Violation::Shape(format!("{block} noise covariance is not {dim}x{dim}")));
                } else {
                    let eig = linalg::symmetrize(cov).symmetric_eigenvalues();
                    let scale = eig.amax().max(1.0);
                    if eig.min() < -1e-10 * scale {
                        out.push(Violation::NoiseNotPsd { block });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(GflsrError::InvalidParams(out))
    }
}

/// Flips `u` so its largest-magnitude entry is non-negative (ties go to the
/// lowest index). Returns the vector and the sign applied.
pub fn canonicalize_sign(u: &Vector) -> Result<(Vector, f64)> {
    let mut best = 0usize;
    for (i, x) in u.iter().enumerate() {
        if !x.is_finite() {
            return Err(GflsrError::DegenerateDirection);
        }
        if x.abs() > u[best].abs() {
            best = i;
        }
    }
    if u.is_empty() || u[best] == 0.0 {
        return Err(GflsrError::DegenerateDirection);
    }
    let sign = if u[best] < 0.0 { -1.0 } else { 1.0 };
    Ok((u * sign, sign))
}

pub fn canonicalize_columns(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let (c, _) = canonicalize_sign(&col.clone_owned())?;
        col.copy_from(&c);
    }
    Ok(out)
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthonormal columns with canonical signs.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if cols > rows {
        return Err(GflsrError::Dimension(format!(
            "cannot draw {cols} orthonormal columns in dimension {rows}"
        )));
    }
    let g = standard_normal_matrix(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    canonicalize_columns(&q)
}

/// Inverse-Wishart draw via the Bartlett decomposition of the matching Wishart.
/// Needs `dof > dim - 1`; the mean `scale / (dof - dim - 1)` exists only when
/// `dof > dim + 1`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(scale: &Matrix, dof: f64, rng: &mut R) -> Result<Matrix> {
    let d = scale.nrows();
    if scale.ncols() != d {
        return Err(GflsrError::Dimension("scale matrix must be square".into()));
    }
    if !(dof > d as f64 - 1.0) {
        return Err(GflsrError::DofTooSmall {
            dof,
            min: d as f64 - 1.0,
        });
    }
    let chol = Cholesky::new(linalg::symmetrize(scale)).ok_or(GflsrError::NotPositiveDefinite)?;
    let inv_scale = chol.inverse();
    let l = Cholesky::new(linalg::symmetrize(&inv_scale))
        .ok_or(GflsrError::NotPositiveDefinite)?
        .l();
    let mut a = Matrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64).map_err(|_| GflsrError::DofTooSmall {
            dof,
            min: d as f64 - 1.0,
        })?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let wishart = &la * la.transpose();
    let inv = Cholesky::new(linalg::symmetrize(&wishart))
        .ok_or(GflsrError::NotPositiveDefinite)?
        .inverse();
    Ok(linalg::symmetrize(&inv))
}

/// A centred dataset together with the column means that were removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(with = "linalg::serde_matrix")]
    pub x: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub y: Matrix,
    #[serde(with = "linalg::serde_vector")]
    pub x_means: Vector,
    #[serde(with = "linalg::serde_vector")]
    pub y_means: Vector,
}

impl Dataset {
    pub fn from_raw(x: &Matrix, y: &Matrix) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(GflsrError::Dimension(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        let (xc, x_means) = linalg::center_columns(x);
        let (yc, y_means) = linalg::center_columns(y);
        Ok(Dataset {
            x: xc,
            y: yc,
            x_means,
            y_means,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn q(&self) -> usize {
        self.y.ncols()
    }
    pub fn raw_x(&self) -> Matrix {
        linalg::add_row_vector(&self.x, &self.x_means)
    }
    pub fn raw_y(&self) -> Matrix {
        linalg::add_row_vector(&self.y, &self.y_means)
    }
}

/// The latent draws behind a simulated dataset, centred the same way as the data,
/// so `x = xi Wᵀ + x_resid` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(with = "linalg::serde_matrix")]
    pub xi: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub omega: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub eps: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub x_resid: Matrix,
    /// Response noise Ỹ_H; the regression-form residual is `y_resid + eps Vᵀ`.
    #[serde(with = "linalg::serde_matrix")]
    pub y_resid: Matrix,
    pub params: Option<ModelParams>,
}

/// Population covariance blocks (Σ_XX, Σ_XY, Σ_YY) implied by the parameters.
pub fn model_covariance(params: &ModelParams) -> (Matrix, Matrix, Matrix) {
    let h = params.h();
    let s = Matrix::from_diagonal(&Vector::from_vec(params.s2.clone()));
    let b = Matrix::from_diagonal(&Vector::from_vec(params.b.clone()));
    let sxx = &params.w * &s * params.w.transpose() + params.sigma_x();
    let sxy = &params.w * &s * &b * params.v.transpose();
    let inner = &b * &b * &s + Matrix::identity(h, h) * params.sigma1_sq;
    let syy = &params.v * inner * params.v.transpose() + params.sigma_y();
    (sxx, sxy, syy)
}

/// Parameters recovered from population covariance blocks under isotropic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredParams {
    pub w: Matrix,
    pub v: Matrix,
    pub s2: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma_x_sq: f64,
    pub sigma_y_sq: f64,
    pub sigma1_sq: f64,
}

/// Inverts [`model_covariance`] for isotropic (or zero) noise with `h < min(p, q)`.
pub fn recover_params(sxx: &Matrix, sxy: &Matrix, syy: &Matrix, h: usize) -> Result<RecoveredParams> {
    let (p, q) = (sxy.nrows(), sxy.ncols());
    if h == 0 || h >= p.min(q) {
        return Err(GflsrError::Config(format!(
            "recovery needs 0 < H < min(p, q), got H = {h}"
        )));
    }
    let triples = linalg::singular_triples(sxy, 0.0);
    if triples.len() < h {
        return Err(GflsrError::NoDependenceSignal);
    }
    let mut w = Matrix::zeros(p, h);
    let mut v = Matrix::zeros(q, h);
    let mut d = vec![0.0; h];
    for (k, (s, uk, vk)) in triples.into_iter().take(h).enumerate() {
        let (uc, sign) = canonicalize_sign(&uk)?;
        w.set_column(k, &uc);
        v.set_column(k, &(vk * sign));
        d[k] = s;
    }
    let wsw = w.transpose() * sxx * &w;
    let vsv = v.transpose() * syy * &v;
    let sigma_x_sq = (sxx.trace() - wsw.trace()) / (p - h) as f64;
    let sigma_y_sq = (syy.trace() - vsv.trace()) / (q - h) as f64;
    let s2: Vec<f64> = (0..h).map(|k| wsw[(k, k)] - sigma_x_sq).collect();
    let b: Vec<f64> = (0..h).map(|k| d[k] / s2[k]).collect();
    let sigma1_sq = (0..h)
        .map(|k| vsv[(k, k)] - sigma_y_sq - b[k] * b[k] * s2[k])
        .sum::<f64>()
        / h as f64;
    Ok(RecoveredParams {
        w,
        v,
        s2,
        b,
        sigma_x_sq,
        sigma_y_sq,
        sigma1_sq,
    })
}
