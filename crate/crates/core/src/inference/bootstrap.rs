use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corrected::{corrected_estimates, CorrectionCase};
use crate::error::{GflsrError, Result};
use crate::exec::{map_indexed, Execution};
use crate::fit::{fit_gflsr, fit_pls, FitResult, FitSpec};
use crate::linalg::{self, Matrix};
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    WithReplacement,
    /// Every replicate reuses the original row order.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_resampling")]
    pub resampling: Resampling,
}

fn default_resampling() -> Resampling {
    Resampling::WithReplacement
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapConfig {
            replicates,
            seed,
            resampling: Resampling::WithReplacement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub base: FitResult,
    pub config: BootstrapConfig,
    pub replicates: Vec<Replicate>,
    pub failures: Vec<ReplicateFailure>,
}

fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn refit(spec: &FitSpec, data: &Dataset) -> Result<FitResult> {
    match spec {
        FitSpec::Pls(cfg) => fit_pls(data, cfg),
        FitSpec::Gflsr(cfg) => fit_gflsr(data, cfg),
    }
}

fn align(fit: &mut FitResult, base: &FitResult) {
    for h in 0..fit.components().min(base.components()) {
        if fit.u_hat.column(h).dot(&base.u_hat.column(h)) < 0.0 {
            fit.flip_component(h);
        }
    }
}

fn one_replicate(base: &FitResult, cfg: &BootstrapConfig, index: usize) -> Result<FitResult> {
    let n = base.n();
    let rows: Vec<usize> = match cfg.resampling {
        Resampling::Identity => (0..n).collect(),
        Resampling::WithReplacement => {
            let mut rng = replicate_rng(cfg.seed, index);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        }
    };
    let x_res = base.x_resid.select_rows(rows.iter());
    let y_res = base.y_resid.select_rows(rows.iter());
    let x = linalg::add_row_vector(&(base.x_model_part() + x_res), &base.x_means);
    let y = linalg::add_row_vector(&(base.y_model_part() + y_res), &base.y_means);
    let data = Dataset::from_raw(&x, &y)?;
    let mut fit = refit(&base.spec, &data)?;
    align(&mut fit, base);
    Ok(fit)
}

/// Residual bootstrap: residual rows of X and Y are resampled jointly, added back
/// to the fitted model parts and refitted with the base settings. Replicates get
/// independent substreams of the seed and are returned in index order.
pub fn residual_bootstrap(base: &FitResult, cfg: &BootstrapConfig, exec: Execution) -> Result<BootstrapResult> {
    if cfg.replicates == 0 {
        return Err(GflsrError::Config("bootstrap needs at least one replicate".into()));
    }
    let outcomes = map_indexed(cfg.replicates, exec, |i| one_replicate(base, cfg, i));
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (index, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(fit) => replicates.push(Replicate { index, fit }),
            Err(e) => failures.push(ReplicateFailure {
                index,
                error: e.to_string(),
            }),
        }
    }
    if failures.len() * 10 > cfg.replicates {
        return Err(GflsrError::BootstrapFailures {
            failed: failures.len(),
            total: cfg.replicates,
        });
    }
    Ok(BootstrapResult {
        base: base.clone(),
        config: cfg.clone(),
        replicates,
        failures,
    })
}

/// Linear interpolation between order statistics at position (N − 1)·prob.
pub fn percentile(sorted: &[f64], prob: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * prob;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// (lower, median, upper) of a central percentile interval.
pub fn percentile_interval(values: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(GflsrError::Config(format!("interval level {level} must lie in (0, 1)")));
    }
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(GflsrError::Config("interval needs finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        percentile(&sorted, tail),
        percentile(&sorted, 0.5),
        percentile(&sorted, 1.0 - tail),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub parameter: String,
    pub index: usize,
    pub estimate: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl IntervalRow {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTable {
    pub level: f64,
    pub replicates: usize,
    pub rows: Vec<IntervalRow>,
}

impl IntervalTable {
    pub fn get(&self, parameter: &str, index: usize) -> Option<&IntervalRow> {
        self.rows.iter().find(|r| r.parameter == parameter && r.index == index)
    }
}

struct Collector {
    level: f64,
    rows: Vec<IntervalRow>,
}

impl Collector {
    fn push(&mut self, parameter: String, index: usize, estimate: f64, values: &[f64]) -> Result<()> {
        let (lower, median, upper) = percentile_interval(values, self.level)?;
        self.rows.push(IntervalRow {
            parameter,
            index,
            estimate,
            lower,
            median,
            upper,
        });
        Ok(())
    }
}

/// Percentile intervals for every entry of Û, V̂ and b̂; with `correction`, also
/// for the corrected variances and slopes (replicates where the correction
/// fails are left out of those rows).
pub fn intervals(boot: &BootstrapResult, level: f64, correction: Option<CorrectionCase>) -> Result<IntervalTable> {
    let base = &boot.base;
    let fits: Vec<&FitResult> = boot.replicates.iter().map(|r| &r.fit).collect();
    if fits.is_empty() {
        return Err(GflsrError::Config("no successful replicates".into()));
    }
    let mut out = Collector {
        level,
        rows: Vec::new(),
    };
    for h in 0..base.components() {
        for (name, m, base_m) in [("u", 0, &base.u_hat), ("v", 1, &base.v_hat)] {
            for j in 0..base_m.nrows() {
                let vals: Vec<f64> = fits
                    .iter()
                    .map(|f| if m == 0 { f.u_hat[(j, h)] } else { f.v_hat[(j, h)] })
                    .collect();
                out.push(format!("{name}{}", h + 1), j, base_m[(j, h)], &vals)?;
            }
        }
        let vals: Vec<f64> = fits.iter().map(|f| f.b_hat[h]).collect();
        out.push("b".into(), h, base.b_hat[h], &vals)?;
    }
    if let Some(case) = correction {
        let base_c = corrected_estimates(base, case)?;
        let reps: Vec<_> = fits.iter().filter_map(|f| corrected_estimates(f, case).ok()).collect();
        if reps.is_empty() {
            return Err(GflsrError::Config(
                "corrected estimates failed on every replicate".into(),
            ));
        }
        let col = |f: &dyn Fn(&super::CorrectedEstimates) -> f64| reps.iter().map(f).collect::<Vec<_>>();
        out.push("sigma_x_sq".into(), 0, base_c.sigma_x_sq, &col(&|c| c.sigma_x_sq))?;
        out.push("sigma_y_sq".into(), 0, base_c.sigma_y_sq, &col(&|c| c.sigma_y_sq))?;
        out.push("sigma1_sq".into(), 0, base_c.sigma1_sq, &col(&|c| c.sigma1_sq))?;
        for h in 0..base.components() {
            out.push("s2".into(), h, base_c.s2[h], &col(&|c| c.s2[h]))?;
            out.push(
                "b_corrected".into(),
                h,
                base_c.b_corrected[h],
                &col(&|c| c.b_corrected[h]),
            )?;
        }
    }
    Ok(IntervalTable {
        level,
        replicates: fits.len(),
        rows: out.rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionIntervals {
    pub level: f64,
    #[serde(with = "linalg::serde_matrix")]
    pub lower: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub median: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub upper: Matrix,
    /// Interval for the conditional mean (replicate predictions without residual draws).
    #[serde(with = "linalg::serde_matrix")]
    pub mean_lower: Matrix,
    #[serde(with = "linalg::serde_matrix")]
    pub mean_upper: Matrix,
}

/// Each replicate predicts the new rows and adds one of its own prediction
/// residual rows (Ŷ₀ minus fitted values); bands are percentiles across replicates.
pub fn predict_interval(boot: &BootstrapResult, x_new: &Matrix, level: f64) -> Result<PredictionIntervals> {
    let reps = &boot.replicates;
    if reps.is_empty() {
        return Err(GflsrError::Config("no successful replicates".into()));
    }
    let m = x_new.nrows();
    let q = boot.base.y_resid.ncols();
    let mut means = Vec::with_capacity(reps.len());
    let mut draws = Vec::with_capacity(reps.len());
    for r in reps {
        let pred = crate::fit::predict(&r.fit, x_new)?;
        let mut rng = replicate_rng(boot.config.seed ^ 0x9E37_79B9_7F4A_7C15, r.index);
        let resid = r.fit.y0() - r.fit.fitted();
        let n = resid.nrows();
        let mut noisy = pred.clone();
        for i in 0..m {
            let k = rng.random_range(0..n);
            for j in 0..q {
                noisy[(i, j)] += resid[(k, j)];
            }
        }
        means.push(pred);
        draws.push(noisy);
    }
    let mut out = PredictionIntervals {
        level,
        lower: Matrix::zeros(m, q),
        median: Matrix::zeros(m, q),
        upper: Matrix::zeros(m, q),
        mean_lower: Matrix::zeros(m, q),
        mean_upper: Matrix::zeros(m, q),
    };
    for i in 0..m {
        for j in 0..q {
            let d: Vec<f64> = draws.iter().map(|p| p[(i, j)]).collect();
            let (lo, med, hi) = percentile_interval(&d, level)?;
            out.lower[(i, j)] = lo;
            out.median[(i, j)] = med;
            out.upper[(i, j)] = hi;
            let c: Vec<f64> = means.iter().map(|p| p[(i, j)]).collect();
            let (lo, _, hi) = percentile_interval(&c, level)?;
            out.mean_lower[(i, j)] = lo;
            out.mean_upper[(i, j)] = hi;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_oracle() {
        let v: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        let (lo, med, hi) = percentile_interval(&v, 0.95).unwrap();
        assert!((lo - 3.475).abs() < 1e-12);
        assert!((hi - 97.525).abs() < 1e-12);
        assert!((med - 50.5).abs() < 1e-12);
        assert!(percentile_interval(&v, 1.0).is_err());
    }
}
