use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pls::{blank, check_dims, insufficient};
use super::{default_max_iter, default_tol, leading_pair, poly_design, FitResult, FitSpec, ResponseMap, Variant};
use crate::error::{GflsrError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{canonicalize_sign, standard_normal_matrix, Dataset};
use crate::psi::{dependence, DependenceMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseFamily {
    /// θ_h = b_h v̂_h, the regression-form PLS response.
    Linear,
    /// Additive polynomial in each score up to `degree` (1 to 3) plus an intercept.
    PolyAdditive { degree: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    ClosedFormSvd,
    CoordinateAscent {
        restarts: usize,
        initial_step: f64,
        min_step: f64,
        max_sweeps: usize,
    },
}

impl Optimizer {
    pub fn coordinate_ascent() -> Self {
        Optimizer::CoordinateAscent {
            restarts: 5,
            initial_step: 0.5,
            min_step: 1e-7,
            max_sweeps: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GflsrFitConfig {
    pub components: usize,
    pub measure: DependenceMeasure,
    /// Weight η of the uᵀΣ̂u regulariser.
    #[serde(default)]
    pub eta: f64,
    pub family: ResponseFamily,
    pub optimizer: Optimizer,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl GflsrFitConfig {
    pub fn new(components: usize, measure: DependenceMeasure, family: ResponseFamily, optimizer: Optimizer) -> Self {
        GflsrFitConfig {
            components,
            measure,
            eta: 0.0,
            family,
            optimizer,
            seed: 0,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

struct Search<'a> {
    x: &'a Matrix,
    y: &'a Matrix,
    basis: &'a Matrix,
    sigma: Matrix,
    measure: DependenceMeasure,
    eta: f64,
}

impl Search<'_> {
    fn directions(&self, a: &Vector, v: &Vector) -> Option<(Vector, Vector)> {
        let u = self.basis * a;
        let (nu, nv) = (u.norm(), v.norm());
        if !(nu > 0.0 && nv > 0.0) {
            return None;
        }
        Some((u / nu, v / nv))
    }

    fn objective(&self, a: &Vector, v: &Vector) -> Option<f64> {
        let (u, v) = self.directions(a, v)?;
        let s = self.x * &u;
        let t = self.y * &v;
        let d = dependence(self.measure, s.as_slice(), t.as_slice()).ok()?;
        let f = d + self.eta * u.dot(&(&self.sigma * &u));
        f.is_finite().then_some(f)
    }
}

struct Ascent {
    a: Vector,
    v: Vector,
    value: f64,
    converged: bool,
    trace: Vec<f64>,
}

fn coordinate_ascent(
    search: &Search,
    a0: Vector,
    v0: Vector,
    step0: f64,
    min_step: f64,
    max_sweeps: usize,
) -> Option<Ascent> {
    let mut value = search.objective(&a0, &v0)?;
    let (mut a, mut v) = (a0, v0);
    let (ka, kv) = (a.len(), v.len());
    let mut step = step0;
    let mut trace = vec![value];
    for _ in 0..max_sweeps {
        let mut improved = false;
        for i in 0..ka + kv {
            for sign in [1.0, -1.0] {
                let (mut ca, mut cv) = (a.clone(), v.clone());
                if i < ka {
                    ca[i] += sign * step * ca.norm();
                } else {
                    cv[i - ka] += sign * step * cv.norm();
                }
                let (na, nv) = (ca.norm(), cv.norm());
                if !(na > 0.0 && nv > 0.0) {
                    continue;
                }
                ca /= na;
                cv /= nv;
                if let Some(f) = search.objective(&ca, &cv) {
                    if f > value + 1e-15 * value.abs().max(1e-300) {
                        a = ca;
                        v = cv;
                        value = f;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            trace.push(value);
            if step < min_step {
                return Some(Ascent {
                    a,
                    v,
                    value,
                    converged: true,
                    trace,
                });
            }
        }
    }
    Some(Ascent {
        a,
        v,
        value,
        converged: false,
        trace,
    })
}

/// Generalised fit: each component maximises D(X̂u, Ŷv) + η·uᵀΣ̂u over unit u
/// orthogonal to earlier weights, X is deflated by square loss and the response
/// is refitted on all scores so far.
pub fn fit_gflsr(data: &Dataset, cfg: &GflsrFitConfig) -> Result<FitResult> {
    let h_max = cfg.components;
    check_dims(data, h_max)?;
    if let ResponseFamily::PolyAdditive { degree } = cfg.family {
        if !(1..=3).contains(&degree) {
            return Err(GflsrError::Config(format!(
                "polynomial degree {degree} must be 1, 2 or 3"
            )));
        }
    }
    if cfg.optimizer == Optimizer::ClosedFormSvd && (cfg.measure != DependenceMeasure::Covariance || cfg.eta != 0.0) {
        return Err(GflsrError::Config(
            "the closed-form optimizer needs the covariance measure and eta = 0".into(),
        ));
    }
    let (n, p) = (data.n() as f64, data.p());
    let mut fit = blank(data, h_max, Variant::PlsR, FitSpec::Gflsr(cfg.clone()));
    let mut x = data.x.clone();
    let mut y = data.y.clone();
    let mut prev_u: Vec<Vector> = Vec::new();
    let x_scale = data.x.norm_squared();
    let mut first_s = 0.0;
    for h in 0..h_max {
        let c = x.transpose() * &y / n;
        let (u, v) = match cfg.optimizer {
            Optimizer::ClosedFormSvd => {
                if h > 0 && linalg::max_abs(&c) <= 1e-12 * first_s {
                    return Err(insufficient(&fit, h, h_max));
                }
                let pair = leading_pair(&c, cfg.tol, cfg.max_iter)?;
                if h == 0 {
                    first_s = pair.s;
                } else if pair.s < 1e-12 * first_s {
                    return Err(insufficient(&fit, h, h_max));
                }
                (pair.u, pair.v)
            }
            Optimizer::CoordinateAscent {
                restarts,
                initial_step,
                min_step,
                max_sweeps,
            } => {
                let basis = linalg::orthogonal_complement(p, &prev_u);
                if basis.ncols() == 0 {
                    return Err(insufficient(&fit, h, h_max));
                }
                let search = Search {
                    x: &x,
                    y: &y,
                    basis: &basis,
                    sigma: x.transpose() * &x / n,
                    measure: cfg.measure,
                    eta: cfg.eta,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(h as u64);
                let mut starts = Vec::new();
                if let Ok(pair) = leading_pair(&c, cfg.tol, cfg.max_iter) {
                    let a = basis.transpose() * &pair.u;
                    if a.norm() > 1e-8 {
                        starts.push((a, pair.v));
                    }
                }
                while starts.len() < restarts.max(1) {
                    let a = standard_normal_matrix(basis.ncols(), 1, &mut rng)
                        .column(0)
                        .into_owned();
                    let v = standard_normal_matrix(y.ncols(), 1, &mut rng).column(0).into_owned();
                    starts.push((a, v));
                }
                let mut best: Option<Ascent> = None;
                let mut trace = Vec::new();
                for (a0, v0) in starts {
                    if let Some(run) = coordinate_ascent(&search, a0, v0, initial_step, min_step, max_sweeps) {
                        trace.push(run.value);
                        if best.as_ref().is_none_or(|b| run.value > b.value) {
                            best = Some(run);
                        }
                    }
                }
                let best = match best {
                    Some(b) if b.converged => b,
                    Some(b) => {
                        let (u, v) = search.directions(&b.a, &b.v).unwrap_or_default();
                        return Err(GflsrError::OptimizerStagnation {
                            best_objective: b.value,
                            best_u: u.as_slice().to_vec(),
                            best_v: v.as_slice().to_vec(),
                            trace: b.trace,
                        });
                    }
                    None => {
                        return Err(GflsrError::OptimizerStagnation {
                            best_objective: f64::NEG_INFINITY,
                            best_u: Vec::new(),
                            best_v: Vec::new(),
                            trace,
                        })
                    }
                };
                let (u, v) = search
                    .directions(&best.a, &best.v)
                    .ok_or(GflsrError::DegenerateDirection)?;
                let (u, sign) = canonicalize_sign(&u)?;
                (u, v * sign)
            }
        };
        let xi = &x * &u;
        let xi_ss = xi.norm_squared();
        if !(xi_ss > 1e-24 * x_scale) {
            return Err(insufficient(&fit, h, h_max));
        }
        let omega = &y * &v;
        let b = omega.dot(&xi) / xi_ss;
        let loading = x.transpose() * &xi / xi_ss;
        x -= &xi * loading.transpose();
        prev_u.push(u.clone());

        fit.u_hat.set_column(h, &u);
        fit.v_hat.set_column(h, &v);
        fit.x_loadings.set_column(h, &loading);
        fit.xi_hat.set_column(h, &xi);
        fit.omega_hat.set_column(h, &omega);
        fit.eps_hat.set_column(h, &(&omega - &xi * b));
        fit.theta_hat.set_column(h, &(&v * b));
        fit.b_hat[h] = b;

        let scores = fit.xi_hat.columns(0, h + 1).into_owned();
        let model = match cfg.family {
            ResponseFamily::Linear => {
                fit.response = ResponseMap::Linear;
                &scores * fit.theta_hat.columns(0, h + 1).transpose()
            }
            ResponseFamily::PolyAdditive { degree } => {
                let design = poly_design(&scores, degree, true);
                let coef = linalg::least_squares(&design, &data.y);
                fit.response = ResponseMap::PolyAdditive {
                    degree,
                    intercept: coef.row(0).transpose(),
                    coefs: coef.rows(1, coef.nrows() - 1).into_owned(),
                };
                design * coef
            }
        };
        y = &data.y - model;
        fit.x_resid = x.clone();
        fit.y_resid = y.clone();
    }
    Ok(fit)
}
