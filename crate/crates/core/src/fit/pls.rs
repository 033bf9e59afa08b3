use super::{leading_pair, FitConfig, FitResult, FitSpec, ResponseMap, Variant};
use crate::error::{GflsrError, Result};
use crate::linalg::{self, Matrix};
use crate::model::Dataset;

pub(super) fn check_dims(data: &Dataset, h: usize) -> Result<()> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    if data.y.nrows() != n {
        return Err(GflsrError::Dimension(format!(
            "X has {n} rows but Y has {}",
            data.y.nrows()
        )));
    }
    if h == 0 || h > p.min(q) || h >= n {
        return Err(GflsrError::Config(format!(
            "components H = {h} must satisfy 1 <= H <= min(p, q) = {} and H < n = {n}",
            p.min(q)
        )));
    }
    Ok(())
}

/// Empty result with room for `h` components.
pub(super) fn blank(data: &Dataset, h: usize, variant: Variant, spec: FitSpec) -> FitResult {
    let (n, p, q) = (data.n(), data.p(), data.q());
    FitResult {
        variant,
        spec,
        u_hat: Matrix::zeros(p, h),
        v_hat: Matrix::zeros(q, h),
        x_loadings: Matrix::zeros(p, h),
        xi_hat: Matrix::zeros(n, h),
        omega_hat: Matrix::zeros(n, h),
        b_hat: vec![0.0; h],
        theta_hat: Matrix::zeros(q, h),
        eps_hat: Matrix::zeros(n, h),
        x_resid: data.x.clone(),
        y_resid: data.y.clone(),
        x_means: data.x_means.clone(),
        y_means: data.y_means.clone(),
        response: ResponseMap::Linear,
    }
}

pub(super) fn insufficient(fit: &FitResult, reached: usize, requested: usize) -> GflsrError {
    GflsrError::InsufficientComponents {
        reached,
        requested,
        partial: Box::new(fit.truncate(reached)),
    }
}

/// Component-wise PLS: top singular pair of the deflated cross-covariance,
/// scores, slope, square-loss X deflation and the variant's Y deflation.
pub fn fit_pls(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    let h_max = cfg.components;
    check_dims(data, h_max)?;
    let n = data.n() as f64;
    let mut fit = blank(data, h_max, cfg.variant, FitSpec::Pls(cfg.clone()));
    let mut x = data.x.clone();
    let mut y = data.y.clone();
    let mut first_s = 0.0;
    for h in 0..h_max {
        let c = x.transpose() * &y / n;
        if h > 0 && linalg::max_abs(&c) <= 1e-12 * first_s {
            return Err(insufficient(&fit, h, h_max));
        }
        let pair = leading_pair(&c, cfg.tol, cfg.max_iter)?;
        if h == 0 {
            first_s = pair.s;
        } else if pair.s < 1e-12 * first_s {
            return Err(insufficient(&fit, h, h_max));
        }
        let xi = &x * &pair.u;
        let omega = &y * &pair.v;
        let xi_ss = xi.norm_squared();
        if !(xi_ss > 0.0) {
            return Err(insufficient(&fit, h, h_max));
        }
        let b = omega.dot(&xi) / xi_ss;
        let loading = x.transpose() * &xi / xi_ss;
        x -= &xi * loading.transpose();
        let theta = &pair.v * b;
        match cfg.variant {
            Variant::PlsR => y -= &xi * theta.transpose(),
            Variant::PlsSvd => y -= &omega * pair.v.transpose(),
        }
        fit.u_hat.set_column(h, &pair.u);
        fit.v_hat.set_column(h, &pair.v);
        fit.x_loadings.set_column(h, &loading);
        fit.xi_hat.set_column(h, &xi);
        fit.omega_hat.set_column(h, &omega);
        fit.eps_hat.set_column(h, &(&omega - &xi * b));
        fit.theta_hat.set_column(h, &theta);
        fit.b_hat[h] = b;
        fit.x_resid = x.clone();
        fit.y_resid = y.clone();
    }
    Ok(fit)
}
