//! Data generation for the generative model and the fixed scenarios S1 to S4.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GflsrError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{self, canonicalize_columns, Dataset, GroundTruth, ModelParams, NoiseCase};
use crate::psi::{inverse_normal_cdf, PsiFamily};

/// Distribution of the standardised latent draws ξ_h / s_h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentDist {
    /// Ψ(U_h) with an independent uniform per component, standardised by the
    /// family's exact moments.
    Psi { family: PsiFamily },
    /// One uniform U shared by all components, component h using the
    /// normalised Hermite polynomial of order h.
    SharedHermite,
    /// E - 1 with E ~ Exp(1).
    Exponential,
}

impl Default for LatentDist {
    fn default() -> Self {
        LatentDist::Psi {
            family: PsiFamily::InverseNormalCdf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimOptions {
    pub latent: LatentDist,
    /// Orthogonalise the centred latent scores and rescale them so their sample
    /// covariance is exactly diag(s²).
    #[serde(default)]
    pub exact_moments: bool,
}

fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let t: f64 = rng.random();
        if t > 0.0 {
            return t;
        }
    }
}

fn standard_latents<R: Rng + ?Sized>(latent: &LatentDist, n: usize, h: usize, rng: &mut R) -> Result<Matrix> {
    let mut z = Matrix::zeros(n, h);
    match latent {
        LatentDist::Psi { family } => {
            let (mean, var) = family.moments();
            if !(var > 0.0) {
                return Err(GflsrError::Config("latent family has zero variance".into()));
            }
            let sd = var.sqrt();
            for k in 0..h {
                for i in 0..n {
                    let t = uniform_open(rng);
                    z[(i, k)] = (family.of_normal(inverse_normal_cdf(t)?) - mean) / sd;
                }
            }
        }
        LatentDist::SharedHermite => {
            for i in 0..n {
                let g = inverse_normal_cdf(uniform_open(rng))?;
                for k in 0..h {
                    z[(i, k)] = PsiFamily::HermiteNormal { order: k + 1 }.of_normal(g);
                }
            }
        }
        LatentDist::Exponential => {
            for k in 0..h {
                for i in 0..n {
                    let e: f64 = Exp1.sample(rng);
                    z[(i, k)] = e - 1.0;
                }
            }
        }
    }
    Ok(z)
}

/// Rows drawn from N(0, cov). Works for singular PSD covariances.
pub fn gaussian_rows<R: Rng + ?Sized>(cov: &Matrix, n: usize, rng: &mut R) -> Matrix {
    let d = cov.nrows();
    let eig = linalg::symmetrize(cov).symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for (k, mut col) in root.column_iter_mut().enumerate() {
        col *= eig.eigenvalues[k].max(0.0).sqrt();
    }
    let z = model::standard_normal_matrix(n, d, rng);
    z * root.transpose()
}

fn noise_rows<R: Rng + ?Sized>(noise: &NoiseCase, loadings: &Matrix, n: usize, rng: &mut R) -> Matrix {
    let d = loadings.nrows();
    match noise {
        NoiseCase::Zero => Matrix::zeros(n, d),
        NoiseCase::Isotropic { sigma_sq } => model::standard_normal_matrix(n, d, rng) * sigma_sq.sqrt(),
        NoiseCase::Projected { sigma_sq } => {
            let proj = Matrix::identity(d, d) - loadings * loadings.transpose();
            model::standard_normal_matrix(n, d, rng) * proj * sigma_sq.sqrt()
        }
        NoiseCase::General { cov } => gaussian_rows(cov, n, rng),
    }
}

/// Gram-Schmidt on centred columns, then each column rescaled to (1/n)‖ξ_h‖² = target_h.
fn exact_moments(xi: &Matrix, target: &[f64]) -> Result<Matrix> {
    let n = xi.nrows() as f64;
    let mut cols: Vec<Vector> = Vec::with_capacity(xi.ncols());
    for k in 0..xi.ncols() {
        let mut c = xi.column(k).clone_owned();
        for _ in 0..2 {
            for prev in &cols {
                let proj = prev.dot(&c) / prev.dot(prev);
                c.axpy(-proj, prev, 1.0);
            }
        }
        let norm_sq = c.dot(&c) / n;
        if !(norm_sq > 0.0) {
            return Err(GflsrError::DegenerateDirection);
        }
        c *= (target[k] / norm_sq).sqrt();
        cols.push(c);
    }
    Ok(Matrix::from_columns(&cols))
}

/// Draws n observations from the generative model. The response is Vω + Ỹ_H,
/// which is also Θξ + Y_H with Y_H = Ỹ_H + εVᵀ.
pub fn simulate_pls<R: Rng + ?Sized>(
    params: &ModelParams,
    n: usize,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<(Dataset, GroundTruth)> {
    model::validate_params(params)?;
    let h = params.h();
    if n < 2 || (opts.exact_moments && n <= h) {
        return Err(GflsrError::Config(format!(
            "sample size {n} too small for {h} components"
        )));
    }
    let z = standard_latents(&opts.latent, n, h, rng)?;
    let mut xi = z;
    for (k, mut col) in xi.column_iter_mut().enumerate() {
        col *= params.s2[k].sqrt();
    }
    let (mut xi, _) = linalg::center_columns(&xi);
    if opts.exact_moments {
        xi = exact_moments(&xi, &params.s2)?;
    }
    let eps = model::standard_normal_matrix(n, h, rng) * params.sigma1_sq.sqrt();
    let x_resid = noise_rows(&params.noise_x, &params.w, n, rng);
    let y_resid = noise_rows(&params.noise_y, &params.v, n, rng);

    let b = Matrix::from_diagonal(&Vector::from_vec(params.b.clone()));
    let omega_raw = &xi * &b + &eps;
    let x_raw = &xi * params.w.transpose() + &x_resid;
    let y_raw = &omega_raw * params.v.transpose() + &y_resid;
    let data = Dataset::from_raw(&x_raw, &y_raw)?;

    let (eps, _) = linalg::center_columns(&eps);
    let (x_resid, _) = linalg::center_columns(&x_resid);
    let (y_resid, _) = linalg::center_columns(&y_resid);
    let omega = &xi * &b + &eps;
    let truth = GroundTruth {
        xi,
        omega,
        eps,
        x_resid,
        y_resid,
        params: Some(params.clone()),
    };
    Ok((data, truth))
}

/// Noise variances for a target noise proportion α: tr(Σ_X)/tr(Var X) = α,
/// σ₁²/Var(ω₁) = α and tr(Σ_Ỹ)/tr(Var Y) = α. Returns (σ²_x, σ²_y, σ₁²).
pub fn noise_rate_variances(p: usize, q: usize, s2: &[f64], b: &[f64], alpha: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0).contains(&alpha) || s2.is_empty() || s2.len() != b.len() {
        return Err(GflsrError::Config(format!("noise rate {alpha} must lie in [0, 1)")));
    }
    let odds = alpha / (1.0 - alpha);
    let signal_x: f64 = s2.iter().sum();
    let sigma_x_sq = odds * signal_x / p as f64;
    let sigma1_sq = odds * b[0] * b[0] * s2[0];
    let signal_y: f64 = s2.iter().zip(b).map(|(s, b)| b * b * s).sum::<f64>() + s2.len() as f64 * sigma1_sq;
    let sigma_y_sq = odds * signal_y / q as f64;
    Ok((sigma_x_sq, sigma_y_sq, sigma1_sq))
}

fn normal_density(x: f64, mean: f64) -> f64 {
    (-(x - mean) * (x - mean) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn orthonormalize(m: &Matrix) -> Result<Matrix> {
    let mut cols: Vec<Vector> = Vec::with_capacity(m.ncols());
    for k in 0..m.ncols() {
        let mut c = m.column(k).clone_owned();
        for _ in 0..2 {
            for prev in &cols {
                let proj = prev.dot(&c);
                c.axpy(-proj, prev, 1.0);
            }
        }
        cols.push(linalg::normalize(&c)?);
    }
    canonicalize_columns(&Matrix::from_columns(&cols))
}

/// Smooth bump loadings w_{j,k} = φ((1/2 + j/10)k; k/10), v_{j,k} = φ((3/5 + j/10)k; k/10)
/// with 1-based j, k and φ(x; m) the unit-variance normal density, orthonormalised.
pub fn sim3_loadings(p: usize, q: usize, h: usize) -> Result<(Matrix, Matrix)> {
    if h == 0 || h > p.min(q) {
        return Err(GflsrError::Config(format!("H = {h} must lie in 1..=min(p, q)")));
    }
    let make = |rows: usize, offset: f64| {
        Matrix::from_fn(rows, h, |j, k| {
            let (j, k) = ((j + 1) as f64, (k + 1) as f64);
            normal_density((offset + j / 10.0) * k, k / 10.0)
        })
    };
    Ok((orthonormalize(&make(p, 0.5))?, orthonormalize(&make(q, 0.6))?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GflsrScenario {
    S1LinearSingle,
    S2NonlinearSingle,
    S3LinearMulti,
    S4NonlinearMulti,
}

/// Fixed description of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    /// Column h holds the X loadings of ξ_h (not orthonormal).
    pub loadings: Matrix,
    pub x_noise_var: f64,
    pub y_noise_var: f64,
    /// Number of independent noise terms entering each response.
    pub y_noise_terms: Vec<usize>,
    pub q: usize,
}

impl GflsrScenario {
    pub fn spec(self) -> ScenarioSpec {
        use GflsrScenario::*;
        match self {
            S1LinearSingle => ScenarioSpec {
                loadings: Matrix::from_row_slice(2, 1, &[3.0, 2.0]),
                x_noise_var: 0.02,
                y_noise_var: 0.02,
                y_noise_terms: vec![1],
                q: 1,
            },
            S2NonlinearSingle => ScenarioSpec {
                loadings: Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 1.0]),
                x_noise_var: 1e-4,
                y_noise_var: 0.02,
                y_noise_terms: vec![1],
                q: 1,
            },
            S3LinearMulti => ScenarioSpec {
                loadings: Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]),
                x_noise_var: 1e-4,
                y_noise_var: 0.02,
                y_noise_terms: vec![2, 1],
                q: 2,
            },
            S4NonlinearMulti => ScenarioSpec {
                loadings: Matrix::from_row_slice(3, 3, &[3.0, 2.0, 3.0, 1.0, 6.0, 3.0, 2.0, 1.0, 1.0]),
                x_noise_var: 1e-4,
                y_noise_var: 0.02,
                y_noise_terms: vec![1, 1, 1],
                q: 3,
            },
        }
    }

    pub fn components(self) -> usize {
        self.spec().loadings.ncols()
    }

    /// Noise-free response f_H(ξ) for one observation.
    pub fn response(self, xi: &[f64]) -> Vec<f64> {
        use GflsrScenario::*;
        match self {
            S1LinearSingle => vec![2.0 * xi[0]],
            S2NonlinearSingle => vec![xi[0].exp() + xi[1] * xi[1]],
            S3LinearMulti => vec![3.0 * xi[1], 3.0 * xi[0] + 0.9 * xi[1]],
            S4NonlinearMulti => {
                let (a, b, c) = (xi[0], xi[1], xi[2]);
                vec![
                    a.powi(3) + b + c * c,
                    a + b * b + c.powi(3),
                    1.3 * a - 0.5 * a.powi(3) + 0.3 * b - 0.5 * b * b + 0.3 * c * c - 0.5 * c.powi(3),
                ]
            }
        }
    }
}

/// Draws a scenario dataset. With `noise = false` every noise term is zero and
/// Y equals f_H(ξ) before centring.
pub fn simulate_gflsr<R: Rng + ?Sized>(
    scenario: GflsrScenario,
    n: usize,
    noise: bool,
    rng: &mut R,
) -> Result<(Dataset, GroundTruth, Matrix)> {
    if n < 2 {
        return Err(GflsrError::Config("sample size must be at least 2".into()));
    }
    let spec = scenario.spec();
    let (p, h, q) = (spec.loadings.nrows(), spec.loadings.ncols(), spec.q);
    let mut xi = Matrix::zeros(n, h);
    for k in 0..h {
        for i in 0..n {
            xi[(i, k)] = inverse_normal_cdf(uniform_open(rng))?;
        }
    }
    let scale = if noise { 1.0 } else { 0.0 };
    let x_resid = model::standard_normal_matrix(n, p, rng) * (spec.x_noise_var.sqrt() * scale);
    let mut y_resid = Matrix::zeros(n, q);
    for (j, &terms) in spec.y_noise_terms.iter().enumerate() {
        for _ in 0..terms {
            for i in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                y_resid[(i, j)] += e * spec.y_noise_var.sqrt() * scale;
            }
        }
    }
    let mut f = Matrix::zeros(n, q);
    for i in 0..n {
        let row: Vec<f64> = xi.row(i).iter().copied().collect();
        for (j, v) in scenario.response(&row).into_iter().enumerate() {
            f[(i, j)] = v;
        }
    }
    let x_raw = &xi * spec.loadings.transpose() + &x_resid;
    let y_raw = &f + &y_resid;
    let data = Dataset::from_raw(&x_raw, &y_raw)?;
    let (xi_c, _) = linalg::center_columns(&xi);
    let (x_resid, _) = linalg::center_columns(&x_resid);
    let (y_resid, _) = linalg::center_columns(&y_resid);
    let truth = GroundTruth {
        omega: xi_c.clone(),
        xi: xi_c,
        eps: Matrix::zeros(n, h),
        x_resid,
        y_resid,
        params: None,
    };
    Ok((data, truth, spec.loadings))
}
