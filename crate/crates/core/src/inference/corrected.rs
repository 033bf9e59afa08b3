use serde::{Deserialize, Serialize};

use crate::error::{GflsrError, Result};
use crate::fit::FitResult;
use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionCase {
    /// Σ_X = σ²I (or the projected σ²(I − WWᵀ)); one scalar per block.
    Isotropic,
    /// General PSD Σ_X recovered through the pseudo-inverse of the projector.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedEstimates {
    pub case: CorrectionCase,
    pub sigma_x_sq: f64,
    pub sigma_y_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
    pub sigma_x: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
    pub sigma_y: Option<Matrix>,
    pub s2: Vec<f64>,
    pub b_corrected: Vec<f64>,
    pub sigma1_sq_per_component: Vec<f64>,
    pub sigma1_sq: f64,
    /// Names of estimates that came out negative and were set to zero.
    pub clamped: Vec<String>,
}

mod opt_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::{from_rows, to_rows, Matrix};

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|rows| from_rows(&rows).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Measurement-error corrected slope ξ̂ᵀω̂ / (ξ̂ᵀξ̂ − n·τ), where τ is the noise
/// variance along the weight direction.
pub fn corrected_b(xi: &Vector, omega: &Vector, noise_along_u: f64) -> Result<f64> {
    if xi.len() != omega.len() || xi.len() < 2 {
        return Err(GflsrError::Dimension("score vectors must match and have n >= 2".into()));
    }
    let denom = xi.norm_squared() - xi.len() as f64 * noise_along_u;
    if !(denom > 0.0) {
        return Err(GflsrError::NoiseExceedsSignal(denom));
    }
    Ok(xi.dot(omega) / denom)
}

fn mean_diag(m: &Matrix) -> f64 {
    m.diagonal().mean()
}

fn projector(loadings: &Matrix) -> Matrix {
    let d = loadings.nrows();
    Matrix::identity(d, d) - loadings * loadings.transpose()
}

fn gram(x: &Matrix) -> Matrix {
    x.transpose() * x / x.nrows() as f64
}

pub fn corrected_estimates(fit: &FitResult, case: CorrectionCase) -> Result<CorrectedEstimates> {
    let h = fit.components();
    let x0 = fit.x0();
    let y0 = fit.y0();
    let var_x = gram(&x0);
    let var_y = gram(&y0);
    let x_h = &fit.x_resid;
    let y_h = &y0 - &fit.omega_hat * fit.v_hat.transpose();
    let px = projector(&fit.u_hat);
    let py = projector(&fit.v_hat);
    let (sx, sy) = (gram(x_h), gram(&y_h));

    let (sigma_x_sq, sigma_y_sq, sigma_x, sigma_y) = match case {
        CorrectionCase::Isotropic => (
            mean_diag(&sx) / mean_diag(&(&px * px.transpose())),
            mean_diag(&sy) / mean_diag(&(&py * py.transpose())),
            None,
            None,
        ),
        CorrectionCase::General => {
            let cx = linalg::symmetrize(&(linalg::pinv(&px, 1e-10) * &sx));
            let cy = linalg::symmetrize(&(linalg::pinv(&py, 1e-10) * &sy));
            (
                mean_diag(&cx) / mean_diag(&(&px * px.transpose())),
                mean_diag(&cy) / mean_diag(&(&py * py.transpose())),
                Some(cx),
                Some(cy),
            )
        }
    };
    let along = |m: &Option<Matrix>, scalar: f64, d: &Vector| match m {
        Some(m) => d.dot(&(m * d)),
        None => scalar,
    };

    let mut clamped = Vec::new();
    let mut s2 = Vec::with_capacity(h);
    let mut b_corrected = Vec::with_capacity(h);
    let mut sigma1 = Vec::with_capacity(h);
    for k in 0..h {
        let u = fit.u_hat.column(k).clone_owned();
        let v = fit.v_hat.column(k).clone_owned();
        let tau_x = along(&sigma_x, sigma_x_sq, &u);
        let tau_y = along(&sigma_y, sigma_y_sq, &v);
        let mut s = u.dot(&(&var_x * &u)) - tau_x;
        if s < 0.0 {
            clamped.push(format!("s2[{k}]"));
            s = 0.0;
        }
        let b = corrected_b(
            &fit.xi_hat.column(k).clone_owned(),
            &fit.omega_hat.column(k).clone_owned(),
            tau_x,
        )?;
        let mut s1 = v.dot(&(&var_y * &v)) - tau_y - b * b * s;
        if s1 < 0.0 {
            clamped.push(format!("sigma1_sq[{k}]"));
            s1 = 0.0;
        }
        s2.push(s);
        b_corrected.push(b);
        sigma1.push(s1);
    }
    let sigma1_sq = sigma1.iter().sum::<f64>() / h.max(1) as f64;
    Ok(CorrectedEstimates {
        case,
        sigma_x_sq,
        sigma_y_sq,
        sigma_x,
        sigma_y,
        s2,
        b_corrected,
        sigma1_sq_per_component: sigma1,
        sigma1_sq,
        clamped,
    })
}
