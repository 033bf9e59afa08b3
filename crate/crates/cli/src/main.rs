use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gflsr::exec::Execution;
use gflsr::experiments::{self, ExperimentConfig, ExperimentKind};
use gflsr::fit::FitSpec;
use gflsr::inference::{intervals, predict_interval, residual_bootstrap, BootstrapConfig, CorrectionCase};
use gflsr::io::{load_dataset, load_json, read_table, save_dataset, save_json, write_table};
use gflsr::simulate::{simulate_pls, SimOptions};
use gflsr::{fit_gflsr, fit_pls, predict, FitConfig, FitResult, GflsrError, ModelParams, Variant};

#[derive(Parser)]
#[command(
    name = "gflsr",
    version,
    about = "Generative PLS: simulate, fit, bootstrap and run the simulation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from model parameters given as JSON.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Latent options as JSON (distribution and exact_moments).
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model to a CSV with columns x1..xp, y1..yq and write it as JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, short = 'H', default_value_t = 2)]
        components: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::PlsR)]
        variant: VariantArg,
        /// Full fit specification as JSON; overrides --components and --variant.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict responses for new predictor rows (CSV with x1..xp columns).
    Predict {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Residual bootstrap of a saved fit: parameter and, optionally, prediction intervals.
    Bootstrap {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, short = 'B', default_value_t = 100)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum)]
        correction: Option<CorrectionArg>,
        /// Predictor rows (x1..xp) for prediction intervals.
        #[arg(long)]
        predict: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the simulation studies.
    Bench {
        #[arg(value_enum)]
        study: Study,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Corn NIR calibration: 80x700 spectra CSV and 80x4 response CSV, both with header rows.
    Corn {
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct Overrides {
    /// Experiment config as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory for the report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run repetitions and replicates on one thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    PlsR,
    PlsSvd,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrectionArg {
    Isotropic,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Sim1,
    Sim2,
    Sim3,
    Sim4,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| c.downcast_ref::<GflsrError>().is_some_and(GflsrError::is_numerical));
            ExitCode::from(if numerical { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            params,
            n,
            seed,
            options,
            out,
        } => {
            let params: ModelParams = load_json(&params).with_context(|| format!("reading {}", params.display()))?;
            let opts: SimOptions = match options {
                Some(p) => load_json(&p).with_context(|| format!("reading {}", p.display()))?,
                None => SimOptions::default(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (data, _) = simulate_pls(&params, n, &opts, &mut rng)?;
            save_dataset(&out, &data)?;
            println!("wrote {} rows to {}", data.n(), out.display());
        }
        Command::Fit {
            data,
            components,
            variant,
            config,
            out,
        } => {
            let data = load_dataset(&data)?;
            let spec = match config {
                Some(p) => load_json(&p).with_context(|| format!("reading {}", p.display()))?,
                None => {
                    let variant = match variant {
                        VariantArg::PlsR => Variant::PlsR,
                        VariantArg::PlsSvd => Variant::PlsSvd,
                    };
                    FitSpec::Pls(FitConfig::new(components, variant))
                }
            };
            let fit = match &spec {
                FitSpec::Pls(cfg) => fit_pls(&data, cfg)?,
                FitSpec::Gflsr(cfg) => fit_gflsr(&data, cfg)?,
            };
            save_json(&out, &fit)?;
            println!("fitted {} component(s); b = {:?}", fit.components(), fit.b_hat);
        }
        Command::Predict { fit, data, out } => {
            let fit: FitResult = load_json(&fit).with_context(|| format!("reading {}", fit.display()))?;
            let x = read_predictors(&data)?;
            let pred = predict(&fit, &x)?;
            let header: Vec<String> = (1..=pred.ncols()).map(|j| format!("y{j}")).collect();
            write_table(&out, &header, &pred)?;
        }
        Command::Bootstrap {
            fit,
            replicates,
            seed,
            level,
            correction,
            predict,
            run,
            out,
        } => {
            let fit: FitResult = load_json(&fit).with_context(|| format!("reading {}", fit.display()))?;
            std::fs::create_dir_all(&out)?;
            let boot = residual_bootstrap(&fit, &BootstrapConfig::new(replicates, seed), run.exec())?;
            let correction = correction.map(|c| match c {
                CorrectionArg::Isotropic => CorrectionCase::Isotropic,
                CorrectionArg::General => CorrectionCase::General,
            });
            let table = intervals(&boot, level, correction)?;
            save_json(&out.join("intervals.json"), &table)?;
            if let Some(path) = predict {
                let x = read_predictors(&path)?;
                let pi = predict_interval(&boot, &x, level)?;
                save_json(&out.join("prediction.json"), &pi)?;
            }
            println!(
                "{} replicate(s), {} failure(s); wrote {}",
                boot.replicates.len(),
                boot.failures.len(),
                out.display()
            );
        }
        Command::Bench { study, overrides, run } => {
            let kind = match study {
                Study::Sim1 => ExperimentKind::Sim1,
                Study::Sim2 => ExperimentKind::Sim2,
                Study::Sim3 => ExperimentKind::Sim3,
                Study::Sim4 => ExperimentKind::Sim4,
            };
            let cfg = experiment_config(kind, &overrides)?;
            run_experiment(&cfg, run.exec())?;
        }
        Command::Corn { x, y, overrides, run } => {
            let mut cfg = experiment_config(ExperimentKind::Corn, &overrides)?;
            if x.is_some() {
                cfg.x_path = x;
            }
            if y.is_some() {
                cfg.y_path = y;
            }
            run_experiment(&cfg, run.exec())?;
        }
    }
    Ok(())
}

fn experiment_config(kind: ExperimentKind, o: &Overrides) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(p) => {
            let cfg: ExperimentConfig = load_json(p).with_context(|| format!("reading {}", p.display()))?;
            if cfg.kind != kind {
                bail!(GflsrError::Config(format!(
                    "{} holds a {} config, expected {}",
                    p.display(),
                    cfg.kind.name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if o.reps.is_some() {
        cfg.reps = o.reps;
    }
    if o.out.is_some() {
        cfg.out_dir = o.out.clone();
    }
    Ok(cfg)
}

fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> anyhow::Result<()> {
    let report = experiments::run(cfg, exec)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    for path in report.write(&dir)? {
        println!("wrote {}", path.display());
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    print!("{}", report.summary_csv());
    Ok(())
}

/// Predictor matrix from a CSV; y-prefixed columns, if any, are ignored.
fn read_predictors(path: &Path) -> anyhow::Result<gflsr::Matrix> {
    let (header, m) = read_table(path)?;
    let xs: Vec<usize> = (0..header.len()).filter(|&j| !header[j].starts_with('y')).collect();
    if xs.is_empty() {
        bail!(GflsrError::Load(format!("{}: no predictor columns", path.display())));
    }
    Ok(m.select_columns(xs.iter()))
}
