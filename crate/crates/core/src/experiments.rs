//! Monte Carlo drivers for the simulation studies and the corn calibration
//! pipeline, plus the long-format reports they emit.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GflsrError, Result};
use crate::exec::{map_indexed, Execution};
use crate::fit::{fit_pls, loading_distance, DistanceForm, FitConfig, FitResult, Variant};
use crate::inference::{
    corrected_estimates, intervals, percentile_interval, predict_interval, residual_bootstrap, BootstrapConfig,
    CorrectionCase, IntervalTable,
};
use crate::io::{format_f64, read_table};
use crate::linalg::Matrix;
use crate::model::{random_orthonormal, sample_inverse_wishart, Dataset, ModelParams, NoiseCase};
use crate::simulate::{noise_rate_variances, sim3_loadings, simulate_pls, LatentDist, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sim1,
    Sim2,
    Sim3,
    Sim4,
    Corn,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sim1 => "sim1",
            ExperimentKind::Sim2 => "sim2",
            ExperimentKind::Sim3 => "sim3",
            ExperimentKind::Sim4 => "sim4",
            ExperimentKind::Corn => "corn",
        }
    }
    fn default_reps(self) -> usize {
        match self {
            ExperimentKind::Sim1 | ExperimentKind::Sim2 => 50,
            ExperimentKind::Sim3 => 100,
            ExperimentKind::Sim4 | ExperimentKind::Corn => 1,
        }
    }
    fn default_n_grid(self) -> Vec<usize> {
        match self {
            ExperimentKind::Sim1 => vec![50, 200, 1000, 5000],
            ExperimentKind::Sim2 => vec![50, 100, 1000, 5000, 10000],
            ExperimentKind::Sim3 => vec![50, 1000],
            ExperimentKind::Sim4 => vec![1000],
            ExperimentKind::Corn => Vec::new(),
        }
    }
}

fn default_seed() -> u64 {
    20240607
}
fn default_bootstrap() -> usize {
    100
}
fn default_level() -> f64 {
    0.95
}
fn default_true() -> bool {
    true
}

/// Declarative description of one experiment run. Unset fields take the
/// study's standard values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    /// Components to fit; only the corn pipeline lets this vary.
    #[serde(default)]
    pub components: Option<usize>,
    /// Bootstrap replicates (sim4 and corn; 0 disables the corn bootstrap).
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Simulate latent scores with exactly the target sample covariance.
    #[serde(default = "default_true")]
    pub exact_moments: bool,
    /// Keep every per-repetition value in the report.
    #[serde(default)]
    pub keep_raw: bool,
    #[serde(default)]
    pub x_path: Option<PathBuf>,
    #[serde(default)]
    pub y_path: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            seed: default_seed(),
            reps: None,
            n_grid: None,
            components: None,
            bootstrap: default_bootstrap(),
            level: default_level(),
            exact_moments: true,
            keep_raw: false,
            x_path: None,
            y_path: None,
            out_dir: None,
        }
    }

    pub fn reps(&self) -> usize {
        self.reps.unwrap_or_else(|| self.kind.default_reps())
    }

    pub fn n_grid(&self) -> Vec<usize> {
        self.n_grid.clone().unwrap_or_else(|| self.kind.default_n_grid())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps() == 0 {
            return Err(GflsrError::Config("repetitions must be at least 1".into()));
        }
        let grid = self.n_grid();
        if self.kind != ExperimentKind::Corn && grid.is_empty() {
            return Err(GflsrError::Config("sample-size grid is empty".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GflsrError::Config(format!(
                "sample-size grid {grid:?} must be strictly ascending"
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(GflsrError::Config(format!("level {} must lie in (0, 1)", self.level)));
        }
        if self.kind == ExperimentKind::Sim4 && self.bootstrap == 0 {
            return Err(GflsrError::Config("sim4 needs at least one bootstrap replicate".into()));
        }
        if self.components == Some(0) {
            return Err(GflsrError::Config("components must be at least 1".into()));
        }
        Ok(())
    }
}

/// One summary cell: a metric over the repetitions of one (config, n, noise) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config: String,
    pub n: usize,
    pub noise: String,
    pub metric: String,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    pub reps: usize,
    /// The 2.5% and 97.5% quantiles do not bracket the mean.
    pub skewed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawValue {
    pub config: String,
    pub n: usize,
    pub noise: String,
    pub metric: String,
    pub rep: usize,
    pub value: f64,
}

/// A point of a plot-ready series, e.g. a loading entry with its band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub series: String,
    pub x: f64,
    pub estimate: f64,
    pub lower: Option<f64>,
    pub median: Option<f64>,
    pub upper: Option<f64>,
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub reps: usize,
    pub rows: Vec<ReportRow>,
    pub raw: Vec<RawValue>,
    pub curves: Vec<CurvePoint>,
    pub intervals: Option<IntervalTable>,
    pub notes: Vec<String>,
}

impl Report {
    fn new(cfg: &ExperimentConfig) -> Self {
        Report {
            kind: cfg.kind,
            seed: cfg.seed,
            reps: cfg.reps(),
            rows: Vec::new(),
            raw: Vec::new(),
            curves: Vec::new(),
            intervals: None,
            notes: Vec::new(),
        }
    }

    pub fn row(&self, config: &str, n: usize, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.config == config && r.n == n && r.metric == metric)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("config,n,noise,metric,mean,q025,q975,reps,seed,skewed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.config,
                r.n,
                r.noise,
                r.metric,
                format_f64(r.mean),
                format_f64(r.q025),
                format_f64(r.q975),
                r.reps,
                self.seed,
                r.skewed
            ));
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
        let mut out = String::from("series,x,estimate,lower,median,upper,truth\n");
        for c in &self.curves {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.series,
                format_f64(c.x),
                format_f64(c.estimate),
                opt(c.lower),
                opt(c.median),
                opt(c.upper),
                opt(c.truth)
            ));
        }
        out
    }

    pub fn raw_csv(&self) -> String {
        let mut out = String::from("config,n,noise,metric,rep,value\n");
        for r in &self.raw {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.config,
                r.n,
                r.noise,
                r.metric,
                r.rep,
                format_f64(r.value)
            ));
        }
        out
    }

    /// Writes `<kind>_summary.csv`, `<kind>_report.json` and, when present, the
    /// curve, raw-value and interval tables. Returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let name = self.kind.name();
        let mut written = Vec::new();
        let mut put = |file: String, body: String| -> Result<()> {
            let path = dir.join(file);
            fs::File::create(&path)?.write_all(body.as_bytes())?;
            written.push(path);
            Ok(())
        };
        put(format!("{name}_summary.csv"), self.summary_csv())?;
        if !self.curves.is_empty() {
            put(format!("{name}_curves.csv"), self.curves_csv())?;
        }
        if !self.raw.is_empty() {
            put(format!("{name}_raw.csv"), self.raw_csv())?;
        }
        if let Some(t) = &self.intervals {
            let mut body = String::from("parameter,index,estimate,lower,median,upper\n");
            for r in &t.rows {
                body.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.parameter,
                    r.index,
                    format_f64(r.estimate),
                    format_f64(r.lower),
                    format_f64(r.median),
                    format_f64(r.upper)
                ));
            }
            put(format!("{name}_intervals.csv"), body)?;
        }
        put(
            format!("{name}_report.json"),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(written)
    }
}

/// Runs the experiment named by `cfg.kind`.
pub fn run(cfg: &ExperimentConfig, exec: Execution) -> Result<Report> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Sim1 => run_sim1(cfg, exec),
        ExperimentKind::Sim2 => run_sim2(cfg, exec),
        ExperimentKind::Sim3 => run_sim3(cfg, exec),
        ExperimentKind::Sim4 => run_sim4(cfg, exec),
        ExperimentKind::Corn => run_corn(cfg, exec),
    }
}

fn rep_rng(seed: u64, cell: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | rep as u64);
    rng
}

type Metrics = Vec<(String, f64)>;

struct Cell<'a> {
    config: &'a str,
    n: usize,
    noise: &'a str,
}

/// Summarises per-repetition metrics in first-seen order. Failed repetitions
/// are counted in the notes; a metric missing from a repetition lowers its count.
fn summarize(report: &mut Report, cell: Cell<'_>, outcomes: Vec<Result<Metrics>>, keep_raw: bool) -> Result<()> {
    let mut names: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut failed = 0;
    let mut first_error = None;
    for (rep, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(metrics) => {
                for (name, v) in metrics {
                    if !v.is_finite() {
                        continue;
                    }
                    let k = match names.iter().position(|m| *m == name) {
                        Some(k) => k,
                        None => {
                            names.push(name.clone());
                            values.push(Vec::new());
                            names.len() - 1
                        }
                    };
                    values[k].push(v);
                    if keep_raw {
                        report.raw.push(RawValue {
                            config: cell.config.into(),
                            n: cell.n,
                            noise: cell.noise.into(),
                            metric: name,
                            rep,
                            value: v,
                        });
                    }
                }
            }
            Err(e) => {
                failed += 1;
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    if let Some(e) = first_error {
        report.notes.push(format!(
            "{} n={} noise={}: {failed} repetition(s) failed, first error: {e}",
            cell.config, cell.n, cell.noise
        ));
    }
    for (name, vals) in names.into_iter().zip(values) {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let (q025, _, q975) = percentile_interval(&vals, 0.95)?;
        report.rows.push(ReportRow {
            config: cell.config.into(),
            n: cell.n,
            noise: cell.noise.into(),
            metric: name,
            mean,
            q025,
            q975,
            reps: vals.len(),
            skewed: !(q025 <= mean && mean <= q975),
        });
    }
    Ok(())
}

fn sorted_uniform<R: Rng + ?Sized>(k: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[derive(Debug, Clone, Copy)]
enum Sim1Noise {
    Isotropic(f64),
    InverseWishart(f64),
}

/// Random parameters for the p = q = 10, H = 2 study: orthonormal W and V,
/// s² ~ U(40, 90) and b ~ U(0.5, 2), both sorted decreasing.
fn sim1_params<R: Rng + ?Sized>(noise: Sim1Noise, rng: &mut R) -> Result<ModelParams> {
    let (p, q, h) = (10, 10, 2);
    let w = random_orthonormal(p, h, rng)?;
    let v = random_orthonormal(q, h, rng)?;
    let s2 = sorted_uniform(h, 40.0, 90.0, rng);
    let b = sorted_uniform(h, 0.5, 2.0, rng);
    let (noise_x, noise_y, sigma1_sq) = match noise {
        Sim1Noise::Isotropic(s) => (
            NoiseCase::Isotropic { sigma_sq: s },
            NoiseCase::Isotropic { sigma_sq: s },
            s,
        ),
        Sim1Noise::InverseWishart(s) => {
            let cx = sample_inverse_wishart(&(Matrix::identity(p, p) * s), (p + 1) as f64, rng)?;
            let cy = sample_inverse_wishart(&(Matrix::identity(q, q) * s), (q + 1) as f64, rng)?;
            (NoiseCase::General { cov: cx }, NoiseCase::General { cov: cy }, s)
        }
    };
    Ok(ModelParams {
        w,
        v,
        s2,
        b,
        sigma1_sq,
        noise_x,
        noise_y,
    })
}

/// Loading recovery of PLS-R on data from randomly drawn generative models,
/// for Gaussian latents under three noise types and for exponential latents.
pub fn run_sim1(cfg: &ExperimentConfig, exec: Execution) -> Result<Report> {
    check_kind(cfg, ExperimentKind::Sim1)?;
    let cases = [
        (
            "normal",
            "sigma2=0.01",
            LatentDist::default(),
            Sim1Noise::Isotropic(0.01),
        ),
        ("normal", "sigma2=2", LatentDist::default(), Sim1Noise::Isotropic(2.0)),
        (
            "normal",
            "inverse_wishart",
            LatentDist::default(),
            Sim1Noise::InverseWishart(2.0),
        ),
        (
            "exponential",
            "sigma2=0.1",
            LatentDist::Exponential,
            Sim1Noise::Isotropic(0.1),
        ),
    ];
    let mut report = Report::new(cfg);
    let grid = cfg.n_grid();
    for (ci, (config, label, latent, noise)) in cases.iter().enumerate() {
        let opts = SimOptions {
            latent: latent.clone(),
            exact_moments: cfg.exact_moments,
        };
        for (ni, &n) in grid.iter().enumerate() {
            let outcomes = map_indexed(cfg.reps(), exec, |rep| {
                let mut rng = rep_rng(cfg.seed, ci * 64 + ni, rep);
                let params = sim1_params(*noise, &mut rng)?;
                let (data, _) = simulate_pls(&params, n, &opts, &mut rng)?;
                let fit = fit_pls(&data, &FitConfig::new(2, Variant::PlsR))?;
                let mut m = Metrics::new();
                for h in 0..2 {
                    let d = loading_distance(
                        &fit.u_hat.column(h).clone_owned(),
                        &params.w.column(h).clone_owned(),
                        DistanceForm::Root,
                    )?;
                    m.push((format!("d_u{}", h + 1), d));
                }
                Ok(m)
            });
            summarize(
                &mut report,
                Cell {
                    config,
                    n,
                    noise: label,
                },
                outcomes,
                cfg.keep_raw,
            )?;
        }
    }
    Ok(report)
}

fn aligned_sign(u_hat: &Matrix, w: &Matrix, h: usize) -> f64 {
    if u_hat.column(h).dot(&w.column(h)) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Convergence of weights and latent scores for Σ_ξ = diag(5, 3, 2),
/// B = diag(9, 6, 4), p = q = 20 and isotropic noise σ² ∈ {1, 15}.
pub fn run_sim2(cfg: &ExperimentConfig, exec: Execution) -> Result<Report> {
    check_kind(cfg, ExperimentKind::Sim2)?;
    let (p, q, h) = (20, 20, 3);
    let mut report = Report::new(cfg);
    let grid = cfg.n_grid();
    let opts = SimOptions {
        latent: LatentDist::default(),
        exact_moments: cfg.exact_moments,
    };
    for (ci, sigma_sq) in [1.0, 15.0].into_iter().enumerate() {
        let label = format!("sigma2={sigma_sq}");
        for (ni, &n) in grid.iter().enumerate() {
            let outcomes = map_indexed(cfg.reps(), exec, |rep| {
                let mut rng = rep_rng(cfg.seed, ci * 64 + ni, rep);
                let params = ModelParams {
                    w: random_orthonormal(p, h, &mut rng)?,
                    v: random_orthonormal(q, h, &mut rng)?,
                    s2: vec![5.0, 3.0, 2.0],
                    b: vec![9.0, 6.0, 4.0],
                    sigma1_sq: sigma_sq,
                    noise_x: NoiseCase::Isotropic { sigma_sq },
                    noise_y: NoiseCase::Isotropic { sigma_sq },
                };
                let (data, truth) = simulate_pls(&params, n, &opts, &mut rng)?;
                let fit = fit_pls(&data, &FitConfig::new(h, Variant::PlsSvd))?;
                let mut m = Metrics::new();
                for k in 0..h {
                    let d = loading_distance(
                        &fit.u_hat.column(k).clone_owned(),
                        &params.w.column(k).clone_owned(),
                        DistanceForm::MeanSquare,
                    )?;
                    m.push((format!("d_u{}", k + 1), d));
                }
                for k in 0..h {
                    let sign = aligned_sign(&fit.u_hat, &params.w, k);
                    let diff = fit.xi_hat.column(k) * sign - truth.xi.column(k);
                    m.push((format!("d_xi{}", k + 1), diff.norm_squared() / n as f64));
                }
                Ok(m)
            });
            summarize(
                &mut report,
                Cell {
                    config: "generative_pls_svd",
                    n,
                    noise: &label,
                },
                outcomes,
                cfg.keep_raw,
            )?;
        }
    }
    Ok(report)
}

const SIM3_S2: [f64; 3] = [1.0, 0.9, 0.82];
const SIM3_B: [f64; 3] = [1.5, 1.11, 0.82];

fn sim3_params<R: Rng + ?Sized>(alpha: f64, general: bool, rng: &mut R) -> Result<ModelParams> {
    let (p, q, h) = (20, 20, 3);
    let (w, v) = sim3_loadings(p, q, h)?;
    let (sx, sy, s1) = noise_rate_variances(p, q, &SIM3_S2, &SIM3_B, alpha)?;
    let (noise_x, noise_y) = if general {
        let cx = sample_inverse_wishart(&(Matrix::identity(p, p) * sx), (p + 1) as f64, rng)?;
        let cy = sample_inverse_wishart(&(Matrix::identity(q, q) * sy), (q + 1) as f64, rng)?;
        (NoiseCase::General { cov: cx }, NoiseCase::General { cov: cy })
    } else {
        (
            NoiseCase::Isotropic { sigma_sq: sx },
            NoiseCase::Isotropic { sigma_sq: sy },
        )
    };
    Ok(ModelParams {
        w,
        v,
        s2: SIM3_S2.to_vec(),
        b: SIM3_B.to_vec(),
        sigma1_sq: s1,
        noise_x,
        noise_y,
    })
}

fn sim3_metrics(fit: &FitResult, params: &ModelParams, case: CorrectionCase) -> Result<Metrics> {
    let mut m = Metrics::new();
    let u1 = fit.u_hat.column(0).clone_owned();
    let w1 = params.w.column(0).clone_owned();
    m.push(("d_u1".into(), loading_distance(&u1, &w1, DistanceForm::MeanSquare)?));
    m.push(("d_u1_root".into(), loading_distance(&u1, &w1, DistanceForm::Root)?));
    let sign = aligned_sign(&fit.u_hat, &params.w, 0);
    for j in 0..u1.len() {
        m.push((format!("u1_{}", j + 1), sign * u1[j]));
    }
    for (k, b) in fit.b_hat.iter().enumerate() {
        m.push((format!("b_{}", k + 1), *b));
    }
    if let Ok(c) = corrected_estimates(fit, case) {
        for k in 0..c.s2.len() {
            m.push((format!("s2_{}", k + 1), c.s2[k]));
            m.push((format!("b_corr_{}", k + 1), c.b_corrected[k]));
        }
        m.push(("sigma_x_sq".into(), c.sigma_x_sq));
        m.push(("sigma_y_sq".into(), c.sigma_y_sq));
        m.push(("sigma1_sq".into(), c.sigma1_sq));
        let err = |b: &[f64]| b.iter().zip(&params.b).map(|(x, t)| (x - t) * (x - t)).sum::<f64>();
        let closer = err(&c.b_corrected) < err(&fit.b_hat);
        m.push(("b_corr_closer".into(), if closer { 1.0 } else { 0.0 }));
    }
    Ok(m)
}

/// Parameter recovery with the corrected estimators under isotropic noise
/// (case B, α ∈ {0.1, 0.5}) and inverse-Wishart noise (case C).
pub fn run_sim3(cfg: &ExperimentConfig, exec: Execution) -> Result<Report> {
    check_kind(cfg, ExperimentKind::Sim3)?;
    let mut report = Report::new(cfg);
    let grid = cfg.n_grid();
    let opts = SimOptions {
        latent: LatentDist::default(),
        exact_moments: cfg.exact_moments,
    };
    let cases = [
        ("case_b", "alpha=0.1", 0.1, false),
        ("case_b", "alpha=0.5", 0.5, false),
        ("case_c", "inverse_wishart", 0.5, true),
    ];
    for (ci, (config, label, alpha, general)) in cases.into_iter().enumerate() {
        let case = if general {
            CorrectionCase::General
        } else {
            CorrectionCase::Isotropic
        };
        for (ni, &n) in grid.iter().enumerate() {
            let outcomes = map_indexed(cfg.reps(), exec, |rep| {
                let mut rng = rep_rng(cfg.seed, ci * 64 + ni, rep);
                let params = sim3_params(alpha, general, &mut rng)?;
                let (data, _) = simulate_pls(&params, n, &opts, &mut rng)?;
                let fit = fit_pls(&data, &FitConfig::new(3, Variant::PlsSvd))?;
                sim3_metrics(&fit, &params, case)
            });
            let config = format!("{config}_{label}");
            summarize(
                &mut report,
                Cell {
                    config: &config,
                    n,
                    noise: label,
                },
                outcomes,
                cfg.keep_raw,
            )?;
        }
    }
    Ok(report)
}

const SIM4_TEST_POINTS: usize = 10;

struct Sim4Outcome {
    metrics: Metrics,
    table: IntervalTable,
    curves: Vec<CurvePoint>,
}

fn sim4_rep(cfg: &ExperimentConfig, n: usize, ni: usize, rep: usize, exec: Execution) -> Result<Sim4Outcome> {
    let mut rng = rep_rng(cfg.seed, ni * 2, rep);
    let params = sim3_params(0.1, false, &mut rng)?;
    let opts = SimOptions {
        latent: LatentDist::default(),
        exact_moments: cfg.exact_moments,
    };
    let (data, _) = simulate_pls(&params, n, &opts, &mut rng)?;
    let boot_seed: u64 = rng.random();
    let mut test_rng = rep_rng(cfg.seed, ni * 2 + 1, rep);
    let test_opts = SimOptions {
        latent: LatentDist::default(),
        exact_moments: false,
    };
    let (test, _) = simulate_pls(&params, SIM4_TEST_POINTS, &test_opts, &mut test_rng)?;
    let (x_test, y_test) = (test.raw_x(), test.raw_y());

    let fit = fit_pls(&data, &FitConfig::new(3, Variant::PlsR))?;
    let boot = residual_bootstrap(&fit, &BootstrapConfig::new(cfg.bootstrap, boot_seed), exec)?;
    let table = intervals(&boot, cfg.level, None)?;
    let pi = predict_interval(&boot, &x_test, cfg.level)?;

    let mut curves = Vec::new();
    let mut coverage = |name: &str, truth: &Matrix, est: &Matrix| -> Result<f64> {
        let sign = aligned_sign(est, truth, 0);
        let mut inside = 0;
        for j in 0..truth.nrows() {
            let row = table
                .get(name, j)
                .ok_or_else(|| GflsrError::Config(format!("missing interval {name}[{j}]")))?;
            let t = sign * truth[(j, 0)];
            if row.contains(t) {
                inside += 1;
            }
            curves.push(CurvePoint {
                series: name.into(),
                x: (j + 1) as f64,
                estimate: row.estimate,
                lower: Some(row.lower),
                median: Some(row.median),
                upper: Some(row.upper),
                truth: Some(t),
            });
        }
        Ok(inside as f64 / truth.nrows() as f64)
    };
    let cov_u = coverage("u1", &params.w, &fit.u_hat)?;
    let cov_v = coverage("v1", &params.v, &fit.v_hat)?;

    let (m, q) = (y_test.nrows(), y_test.ncols());
    let mut pi_in = 0;
    let mut pi_wider = 0;
    for i in 0..m {
        for j in 0..q {
            let y = y_test[(i, j)];
            if pi.lower[(i, j)] <= y && y <= pi.upper[(i, j)] {
                pi_in += 1;
            }
            if pi.upper[(i, j)] - pi.lower[(i, j)] >= pi.mean_upper[(i, j)] - pi.mean_lower[(i, j)] {
                pi_wider += 1;
            }
        }
    }
    for j in 0..q {
        curves.push(CurvePoint {
            series: "prediction_test1".into(),
            x: (j + 1) as f64,
            estimate: pi.median[(0, j)],
            lower: Some(pi.lower[(0, j)]),
            median: Some(pi.median[(0, j)]),
            upper: Some(pi.upper[(0, j)]),
            truth: Some(y_test[(0, j)]),
        });
    }
    let cells = (m * q) as f64;
    let metrics = vec![
        ("ci_coverage_u1".to_string(), cov_u),
        ("ci_coverage_v1".to_string(), cov_v),
        ("pi_coverage".to_string(), pi_in as f64 / cells),
        ("pi_wider_than_mean_band".to_string(), pi_wider as f64 / cells),
        ("bootstrap_failures".to_string(), boot.failures.len() as f64),
    ];
    Ok(Sim4Outcome { metrics, table, curves })
}

/// Bootstrap confidence intervals for the first weights and prediction
/// intervals for held-out points, on one dataset per repetition (α = 0.1).
pub fn run_sim4(cfg: &ExperimentConfig, exec: Execution) -> Result<Report> {
    check_kind(cfg, ExperimentKind::Sim4)?;
    let mut report = Report::new(cfg);
    let grid = cfg.n_grid();
    for (ni, &n) in grid.iter().enumerate() {
        let mut outcomes = Vec::with_capacity(cfg.reps());
        for rep in 0..cfg.reps() {
            match sim4_rep(cfg, n, ni, rep, exec) {
                Ok(out) => {
                    if report.intervals.is_none() {
                        report.intervals = Some(out.table);
                        report.curves = out.curves;
                    }
                    outcomes.push(Ok(out.metrics));
                }
                Err(e) => outcomes.push(Err(e)),
            }
        }
        summarize(
            &mut report,
            Cell {
                config: "generative_pls_r",
                n,
                noise: "alpha=0.1",
            },
            outcomes,
            cfg.keep_raw,
        )?;
    }
    Ok(report)
}

pub const CORN_SAMPLES: usize = 80;
pub const CORN_WAVELENGTHS: usize = 700;
pub const CORN_RESPONSES: usize = 4;

fn corn_shape_error(what: &str, path: &Path, detail: String) -> GflsrError {
    GflsrError::Load(format!(
        "{what} file {}: {detail}; expected {CORN_SAMPLES}x{CORN_WAVELENGTHS} spectra and {CORN_SAMPLES}x{CORN_RESPONSES} responses, each with a header row",
        path.display()
    ))
}

/// Wavelength axis from numeric column names, else 1100 nm in 2 nm steps.
fn wavelengths(header: &[String]) -> Vec<f64> {
    let parsed: Option<Vec<f64>> = header
        .iter()
        .map(|h| {
            h.trim()
                .trim_start_matches(|c: char| c.is_ascii_alphabetic() || c == '_')
                .parse()
                .ok()
        })
        .collect();
    parsed.unwrap_or_else(|| (0..header.len()).map(|k| 1100.0 + 2.0 * k as f64).collect())
}

/// Loads the corn spectra and responses, fits PLS-R, and reports per-response
/// fitting MSEs, corrected variance estimates, the first two weight vectors
/// against wavelength and, with `bootstrap > 0`, a percentile band for û₁.
pub fn run_corn(cfg: &ExperimentConfig, exec: Execution) -> Result<Report> {
    check_kind(cfg, ExperimentKind::Corn)?;
    let (x_path, y_path) = match (&cfg.x_path, &cfg.y_path) {
        (Some(x), Some(y)) => (x.clone(), y.clone()),
        _ => {
            return Err(GflsrError::Config(
                "corn needs x_path (spectra) and y_path (responses)".into(),
            ))
        }
    };
    let load = |what: &str, path: &Path| {
        if !path.exists() {
            return Err(corn_shape_error(what, path, "not found".into()));
        }
        read_table(path).map_err(|e| corn_shape_error(what, path, e.to_string()))
    };
    let (x_header, x) = load("spectra", &x_path)?;
    let (_, y) = load("response", &y_path)?;
    if x.shape() != (CORN_SAMPLES, CORN_WAVELENGTHS) {
        return Err(corn_shape_error(
            "spectra",
            &x_path,
            format!("found {}x{}", x.nrows(), x.ncols()),
        ));
    }
    if y.shape() != (CORN_SAMPLES, CORN_RESPONSES) {
        return Err(corn_shape_error(
            "response",
            &y_path,
            format!("found {}x{}", y.nrows(), y.ncols()),
        ));
    }
    let data = Dataset::from_raw(&x, &y)?;
    let h = cfg.components.unwrap_or(4);
    let fit = fit_pls(&data, &FitConfig::new(h, Variant::PlsR))?;

    let mut report = Report::new(cfg);
    let mut m = Metrics::new();
    let resid = &data.y - fit.fitted();
    for j in 0..resid.ncols() {
        m.push((
            format!("mse_{}", j + 1),
            resid.column(j).norm_squared() / resid.nrows() as f64,
        ));
    }
    let c = corrected_estimates(&fit, CorrectionCase::Isotropic)?;
    m.push(("sigma_x_sq".into(), c.sigma_x_sq));
    m.push(("sigma_y_sq".into(), c.sigma_y_sq));
    m.push(("sigma1_sq".into(), c.sigma1_sq));
    for k in 0..h {
        m.push((format!("s2_{}", k + 1), c.s2[k]));
        m.push((format!("b_corr_{}", k + 1), c.b_corrected[k]));
    }
    if !c.clamped.is_empty() {
        report.notes.push(format!("clamped at zero: {}", c.clamped.join(", ")));
    }

    let axis = wavelengths(&x_header);
    let mut band: Option<IntervalTable> = None;
    if cfg.bootstrap > 0 {
        let boot = residual_bootstrap(&fit, &BootstrapConfig::new(cfg.bootstrap, cfg.seed), exec)?;
        let table = intervals(&boot, cfg.level, None)?;
        let inside = (0..CORN_WAVELENGTHS)
            .filter(|&j| table.get("u1", j).is_some_and(|r| r.contains(r.estimate)))
            .count();
        m.push(("u1_in_band".into(), inside as f64 / CORN_WAVELENGTHS as f64));
        band = Some(table);
    }
    for k in 0..h.min(2) {
        let series = format!("u{}", k + 1);
        for (j, &wl) in axis.iter().enumerate() {
            let row = band.as_ref().and_then(|t| t.get(&series, j));
            report.curves.push(CurvePoint {
                series: series.clone(),
                x: wl,
                estimate: fit.u_hat[(j, k)],
                lower: row.map(|r| r.lower),
                median: row.map(|r| r.median),
                upper: row.map(|r| r.upper),
                truth: None,
            });
        }
    }
    report.intervals = band;
    summarize(
        &mut report,
        Cell {
            config: "generative_pls_r",
            n: data.n(),
            noise: "projected",
        },
        vec![Ok(m)],
        false,
    )?;
    Ok(report)
}

fn check_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(GflsrError::Config(format!(
            "config is for {}, not {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}
