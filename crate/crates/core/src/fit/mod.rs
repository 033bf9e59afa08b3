//! Estimation: component-wise weight pairs, deflation, response maps and prediction.

mod gflsr;
mod pls;
mod svd;

pub use gflsr::{fit_gflsr, GflsrFitConfig, Optimizer, ResponseFamily};
pub use pls::fit_pls;
pub use svd::{leading_pair, leading_singular_pair, svd_leading_pair, SingularPair};

use serde::{Deserialize, Serialize};

use crate::error::{GflsrError, Result};
use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Response deflated by the regression part ξ̂θ̂ᵀ.
    PlsR,
    /// Response deflated symmetrically by ω̂v̂ᵀ.
    PlsSvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub components: usize,
    pub variant: Variant,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

pub(crate) fn default_tol() -> f64 {
    1e-12
}
pub(crate) fn default_max_iter() -> usize {
    10_000
}

impl FitConfig {
    pub fn new(components: usize, variant: Variant) -> Self {
        FitConfig {
            components,
            variant,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

/// How a fit was produced, kept so the bootstrap can refit with the same settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitSpec {
    Pls(FitConfig),
    Gflsr(GflsrFitConfig),
}

/// Map from latent scores to the centred response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseMap {
    /// Σ_h ξ_h θ_hᵀ with θ_h the columns of `theta_hat`.
    Linear,
    /// intercept + Σ_h Σ_k ξ_hᵏ c_{h,k}; row h·degree + k - 1 of `coefs` holds c_{h,k}.
    PolyAdditive {
        degree: usize,
        #[serde(with = "linalg::serde_vector")]
        intercept: Vector,
        #[serde(with = "linalg::serde_matrix")]
        coefs: Matrix,
    },
}

pub(crate) fn poly_design(xi: &Matrix, degree: usize, with_intercept: bool) -> Matrix {
    let (n, h) = (xi.nrows(), xi.ncols());
    let offset = usize::from(with_intercept);
    let mut d = Matrix::zeros(n, offset + h * degree);
    for i in 0..n {
        if with_intercept {
            d[(i, 0)] = 1.0;
        }
        for j in 0..h {
            let mut pw = 1.0;
            for k in 0..degree {
                pw *= xi[(i, j)];
                d[(i, offset + j * degree + k)] = pw;
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub variant: Variant,
    pub spec: FitSpec,
    /// Weight vectors û_h (orthonormal columns).
    #[serde(with = "linalg::serde_matrix")]
    pub u_hat: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub v_hat: Matrix,
    /// Square-loss X loadings used in deflation, X̂_{h-1}ᵀξ̂_h / ‖ξ̂_h‖².
    #[serde(with = "linalg::serde_matrix")]
    pub x_loadings: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub xi_hat: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub omega_hat: Matrix,
    pub b_hat: Vec<f64>,
    #[serde(with = "linalg::serde_matrix")]
    pub theta_hat: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub eps_hat: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub x_resid: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub y_resid: Matrix,
    #[serde(with = "linalg::serde_vector")]
    pub x_means: Vector,
    #[serde(with = "linalg::serde_vector")]
    pub y_means: Vector,
    pub response: ResponseMap,
}

impl FitResult {
    pub fn components(&self) -> usize {
        self.u_hat.ncols()
    }
    pub fn n(&self) -> usize {
        self.xi_hat.nrows()
    }

    /// Centred response predicted from latent scores.
    pub fn respond(&self, xi: &Matrix) -> Matrix {
        match &self.response {
            ResponseMap::Linear => xi * self.theta_hat.transpose(),
            ResponseMap::PolyAdditive {
                degree,
                intercept,
                coefs,
            } => {
                let mut out = poly_design(xi, *degree, false) * coefs;
                for mut row in out.row_iter_mut() {
                    row += intercept.transpose();
                }
                out
            }
        }
    }

    /// In-sample fitted values on the centred scale.
    pub fn fitted(&self) -> Matrix {
        self.respond(&self.xi_hat)
    }

    /// The model part of Y that `y_resid` is the remainder of.
    pub fn y_model_part(&self) -> Matrix {
        match (self.variant, &self.spec) {
            (Variant::PlsSvd, FitSpec::Pls(_)) => &self.omega_hat * self.v_hat.transpose(),
            _ => self.fitted(),
        }
    }

    pub fn x_model_part(&self) -> Matrix {
        &self.xi_hat * self.x_loadings.transpose()
    }

    /// Reconstructed centred training data.
    pub fn x0(&self) -> Matrix {
        self.x_model_part() + &self.x_resid
    }
    pub fn y0(&self) -> Matrix {
        self.y_model_part() + &self.y_resid
    }

    /// Flips the sign of component h everywhere it appears; the fit is unchanged.
    pub fn flip_component(&mut self, h: usize) {
        for m in [
            &mut self.u_hat,
            &mut self.v_hat,
            &mut self.x_loadings,
            &mut self.xi_hat,
            &mut self.omega_hat,
            &mut self.theta_hat,
            &mut self.eps_hat,
        ] {
            m.column_mut(h).neg_mut();
        }
        if let ResponseMap::PolyAdditive { degree, coefs, .. } = &mut self.response {
            for k in (0..*degree).step_by(2) {
                coefs.row_mut(h * *degree + k).neg_mut();
            }
        }
    }

    /// Scores of new (uncentred) rows under the fitted deflation recursion.
    pub fn scores(&self, x_new: &Matrix) -> Result<Matrix> {
        if x_new.ncols() != self.u_hat.nrows() {
            return Err(GflsrError::Dimension(format!(
                "expected {} predictor columns, got {}",
                self.u_hat.nrows(),
                x_new.ncols()
            )));
        }
        let mut x = linalg::add_row_vector(x_new, &-&self.x_means);
        let mut xi = Matrix::zeros(x_new.nrows(), self.components());
        for h in 0..self.components() {
            let t = &x * self.u_hat.column(h);
            x -= &t * self.x_loadings.column(h).transpose();
            xi.set_column(h, &t);
        }
        Ok(xi)
    }

    pub(crate) fn truncate(&self, h: usize) -> FitResult {
        let mut out = self.clone();
        out.u_hat = self.u_hat.columns(0, h).into_owned();
        out.v_hat = self.v_hat.columns(0, h).into_owned();
        out.x_loadings = self.x_loadings.columns(0, h).into_owned();
        out.xi_hat = self.xi_hat.columns(0, h).into_owned();
        out.omega_hat = self.omega_hat.columns(0, h).into_owned();
        out.theta_hat = self.theta_hat.columns(0, h).into_owned();
        out.eps_hat = self.eps_hat.columns(0, h).into_owned();
        out.b_hat.truncate(h);
        out
    }
}

/// Predicted responses for new rows, on the original scale.
pub fn predict(fit: &FitResult, x_new: &Matrix) -> Result<Matrix> {
    let xi = fit.scores(x_new)?;
    Ok(linalg::add_row_vector(&fit.respond(&xi), &fit.y_means))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceForm {
    /// (1/p)·√Σ(û − w)², minimised over the sign of û.
    Root,
    /// (1/p)·Σ(û − w)², minimised over the sign of û.
    MeanSquare,
}

pub fn loading_distance(u_hat: &Vector, w: &Vector, form: DistanceForm) -> Result<f64> {
    if u_hat.len() != w.len() || w.is_empty() {
        return Err(GflsrError::Dimension(format!(
            "loading lengths differ: {} vs {}",
            u_hat.len(),
            w.len()
        )));
    }
    let ss = (u_hat - w).norm_squared().min((u_hat + w).norm_squared());
    let p = w.len() as f64;
    Ok(match form {
        DistanceForm::Root => ss.sqrt() / p,
        DistanceForm::MeanSquare => ss / p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let a = Vector::from_vec(vec![1.0, 0.0]);
        let b = Vector::from_vec(vec![0.0, 1.0]);
        assert!((loading_distance(&a, &b, DistanceForm::Root).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(loading_distance(&a, &-&a, DistanceForm::Root).unwrap(), 0.0);
        assert!((loading_distance(&a, &b, DistanceForm::MeanSquare).unwrap() - 1.0).abs() < 1e-15);
    }
}
