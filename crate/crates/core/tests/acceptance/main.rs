//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

#[path = "../common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use gflsr::exec::Execution;
use gflsr::experiments::{run_corn, run_sim1, run_sim2, run_sim3, run_sim4, ExperimentConfig, ExperimentKind, Report};
use gflsr::fit::{fit_gflsr, leading_singular_pair, GflsrFitConfig, Optimizer, ResponseFamily};
use gflsr::model::{canonicalize_sign, model_covariance, random_orthonormal, recover_params, NoiseCase};
use gflsr::psi::DependenceMeasure;
use gflsr::simulate::{simulate_pls, SimOptions};
use gflsr::{fit_pls, Dataset, FitConfig, FitResult, Matrix, ModelParams, Variant};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

type Criterion = (&'static str, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn cell(report: &Report, config: &str, noise: &str, n: usize, metric: &str) -> f64 {
    report
        .rows
        .iter()
        .find(|r| r.config == config && r.noise == noise && r.n == n && r.metric == metric)
        .unwrap_or_else(|| panic!("no row {config}/{noise}/n={n}/{metric}"))
        .mean
}

// Reference mean root distances at n = 50, 200, 1000, 5000: (config, noise, d_u1, d_u2).
const SIM1_GRID: [usize; 4] = [50, 200, 1000, 5000];
const SIM1_REFERENCE: [(&str, &str, [f64; 4], [f64; 4]); 4] = [
    (
        "normal",
        "sigma2=0.01",
        [0.0005, 0.0002, 0.0001, 4.8422e-5],
        [0.0005, 0.0003, 0.0001, 5.4177e-5],
    ),
    (
        "normal",
        "sigma2=2",
        [0.0075, 0.0039, 0.0024, 0.0006],
        [0.0095, 0.0045, 0.0027, 0.0012],
    ),
    (
        "normal",
        "inverse_wishart",
        [0.0041, 0.0053, 0.0008, 0.0008],
        [0.0089, 0.0062, 0.0020, 0.0094],
    ),
    (
        "exponential",
        "sigma2=0.1",
        [0.0014, 0.0009, 0.0004, 0.0002],
        [0.0016, 0.0011, 0.0004, 0.0004],
    ),
];
const SIM1_FACTOR: f64 = 3.0;
const SIM1_BUDGET: Duration = Duration::from_secs(300);

fn sim1_tables() -> Outcome {
    let cfg = ExperimentConfig::new(ExperimentKind::Sim1);
    let start = Instant::now();
    let report = run_sim1(&cfg, Execution::default()).unwrap();
    let elapsed = start.elapsed();
    let mut misses = Vec::new();
    let mut worst = 1.0f64;
    for (config, noise, u1, u2) in SIM1_REFERENCE {
        for (metric, refs) in [("d_u1", u1), ("d_u2", u2)] {
            for (k, &n) in SIM1_GRID.iter().enumerate() {
                let got = cell(&report, config, noise, n, metric);
                let ratio = got / refs[k];
                let off = ratio.max(1.0 / ratio);
                worst = worst.max(off);
                if off > SIM1_FACTOR {
                    misses.push(format!("{config}/{noise}/{metric}/n={n}: {got:.3e} vs {:.3e}", refs[k]));
                }
            }
        }
    }
    let detail = format!(
        "{} of 32 cells outside x{SIM1_FACTOR}, worst factor {worst:.2}, {:.1}s{}{}",
        misses.len(),
        elapsed.as_secs_f64(),
        if misses.is_empty() { "" } else { "; " },
        misses.join("; ")
    );
    verdict(misses.is_empty() && elapsed < SIM1_BUDGET, detail)
}

fn sim2_convergence() -> Outcome {
    let cfg = ExperimentConfig::new(ExperimentKind::Sim2);
    let report = run_sim2(&cfg, Execution::default()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma_sq in [1.0, 15.0] {
        let noise = format!("sigma2={sigma_sq}");
        for k in 1..=3 {
            let d_xi = cell(&report, "generative_pls_svd", &noise, 10_000, &format!("d_xi{k}"));
            let d_u = cell(&report, "generative_pls_svd", &noise, 10_000, &format!("d_u{k}"));
            ok &= (0.9 * sigma_sq..=1.1 * sigma_sq).contains(&d_xi) && d_u < 1e-4;
            parts.push(format!("σ²={sigma_sq} h={k}: d_xi {d_xi:.4} d_u {d_u:.2e}"));
        }
    }
    verdict(ok, parts.join("; "))
}

fn aligned_sign(a: &[f64], b: &[f64]) -> f64 {
    if a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn noiseless_recovery() -> Outcome {
    let mut worst = 0.0f64;
    for draw in 0..20u64 {
        let mut rng = common::rng(1000 + draw);
        let (p, q) = (rng.random_range(4..12), rng.random_range(3..9));
        let h = rng.random_range(1..=3usize.min(q - 1));
        let params = common::random_params(p, q, h, 0.0, &mut rng);
        let opts = SimOptions {
            exact_moments: true,
            ..SimOptions::default()
        };
        let (data, truth) = simulate_pls(&params, 80, &opts, &mut rng).unwrap();
        let fit = fit_pls(&data, &FitConfig::new(h, Variant::PlsR)).unwrap();
        for k in 0..h {
            let u: Vec<f64> = fit.u_hat.column(k).iter().copied().collect();
            let w: Vec<f64> = params.w.column(k).iter().copied().collect();
            let (cu, cw) = (common::canonical(&u), common::canonical(&w));
            let du = cu.iter().zip(&cw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let su = aligned_sign(&cu, &u);
            let sw = aligned_sign(&cw, &w);
            let dxi = (fit.xi_hat.column(k) * su - truth.xi.column(k) * sw).amax();
            worst = worst.max(du).max(dxi);
        }
    }
    verdict(worst < 1e-8, format!("20 draws, max gap {worst:.2e} (tol 1e-8)"))
}

fn singular_pair_oracle() -> Outcome {
    let mut rng = common::rng(4);
    let (mut ds_max, mut dv_max) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (p, q) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let c = common::uniform_matrix(p, q, &mut rng);
        let (u, v, s) = common::jacobi_top_triple(&common::to_vecs(&c));
        let pair = leading_singular_pair(&c, 1e-12, 100_000).unwrap();
        let lib_u: Vec<f64> = pair.u.iter().copied().collect();
        let sign = aligned_sign(&lib_u, &u);
        let du = pair
            .u
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - sign * b).abs())
            .fold(0.0, f64::max);
        let dv = pair
            .v
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - sign * b).abs())
            .fold(0.0, f64::max);
        ds_max = ds_max.max((pair.s - s).abs());
        dv_max = dv_max.max(du).max(dv);
    }
    verdict(
        ds_max < 1e-8 && dv_max < 1e-6,
        format!("200 matrices, value gap {ds_max:.2e} (tol 1e-8), vector gap {dv_max:.2e} (tol 1e-6)"),
    )
}

const SIM3_S2: [f64; 3] = [1.0, 0.9, 0.82];
const SIM3_B: [f64; 3] = [1.5, 1.11, 0.82];

fn sim3_corrections() -> Outcome {
    let cfg = ExperimentConfig::new(ExperimentKind::Sim3);
    let report = run_sim3(&cfg, Execution::default()).unwrap();
    let get = |config: &str, metric: &str| report.row(config, 1000, metric).unwrap().mean;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 0..3 {
        let s2 = get("case_b_alpha=0.1", &format!("s2_{}", k + 1));
        let b = get("case_b_alpha=0.1", &format!("b_corr_{}", k + 1));
        ok &= (s2 / SIM3_S2[k] - 1.0).abs() <= 0.15 && (b / SIM3_B[k] - 1.0).abs() <= 0.10;
        parts.push(format!("s2_{} {s2:.3} b_corr_{} {b:.3}", k + 1, k + 1));
    }
    // case C draws its noise at the α = 0.5 rate, so the matching case B row is the baseline
    let c = get("case_c_inverse_wishart", "d_u1_root");
    let base = get("case_b_alpha=0.5", "d_u1_root");
    let low = get("case_b_alpha=0.1", "d_u1_root");
    ok &= c <= 2.0 * base;
    parts.push(format!(
        "case C d_u1 {c:.2e} vs case B(α=0.5) {base:.2e}, ratio {:.2}",
        c / base
    ));
    let sq_ratio = get("case_c_inverse_wishart", "d_u1") / get("case_b_alpha=0.5", "d_u1");
    parts.push(format!(
        "info: squared-form ratio {sq_ratio:.2}, ratio to α=0.1 {:.2}",
        c / low
    ));
    verdict(ok, parts.join("; "))
}

fn sim4_outputs(dir: &std::path::Path) -> (Report, Vec<u8>, String) {
    let cfg = ExperimentConfig::new(ExperimentKind::Sim4);
    let report = run_sim4(&cfg, Execution::default()).unwrap();
    report.write(dir).unwrap();
    let csv = std::fs::read(dir.join("sim4_intervals.csv")).unwrap();
    let json = serde_json::to_string(&report.intervals).unwrap();
    (report, csv, json)
}

fn sim4_coverage() -> Outcome {
    let (a_dir, b_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (report, csv_a, json_a) = sim4_outputs(a_dir.path());
    let (_, csv_b, json_b) = sim4_outputs(b_dir.path());
    let get = |metric: &str| report.row("generative_pls_r", 1000, metric).unwrap().mean;
    let (cu, cv, pi) = (get("ci_coverage_u1"), get("ci_coverage_v1"), get("pi_coverage"));
    let same = csv_a == csv_b && json_a == json_b;
    verdict(
        cu >= 0.9 && cv >= 0.9 && pi >= 0.9 && same,
        format!("u1 {cu:.3}, v1 {cv:.3}, prediction {pi:.3} (floor 0.9), reruns byte-identical: {same}"),
    )
}

/// Flips columns so each weight's largest entry is nonnegative, carrying the sign to V.
fn canonical_loadings(w: &Matrix, v: &Matrix) -> (Matrix, Matrix) {
    let (mut w, mut v) = (w.clone(), v.clone());
    for k in 0..w.ncols() {
        let (c, sign) = canonicalize_sign(&w.column(k).clone_owned()).unwrap();
        w.set_column(k, &c);
        let flipped = v.column(k) * sign;
        v.set_column(k, &flipped);
    }
    (w, v)
}

fn params_gap(a: &ModelParams, b: &ModelParams) -> f64 {
    let (wa, va) = canonical_loadings(&a.w, &a.v);
    let (wb, vb) = canonical_loadings(&b.w, &b.v);
    let mut gap = max_abs(&(wa - wb)).max(max_abs(&(va - vb)));
    for (x, y) in a.s2.iter().zip(&b.s2).chain(a.b.iter().zip(&b.b)) {
        gap = gap.max((x - y).abs());
    }
    gap.max((a.sigma1_sq - b.sigma1_sq).abs())
        .max(max_abs(&(a.sigma_x() - b.sigma_x())))
        .max(max_abs(&(a.sigma_y() - b.sigma_y())))
}

fn blocks_gap(a: &ModelParams, b: &ModelParams) -> f64 {
    let (xa, ya, za) = model_covariance(a);
    let (xb, yb, zb) = model_covariance(b);
    max_abs(&(xa - xb)).max(max_abs(&(ya - yb))).max(max_abs(&(za - zb)))
}

fn identifiability() -> Outcome {
    let mut rng = common::rng(7);
    let mut failures = Vec::new();
    for pair in 0..20 {
        let (p, q, h) = (
            rng.random_range(4..10),
            rng.random_range(4..10),
            rng.random_range(1..=3),
        );
        let a = common::random_params(p, q, h, rng.random_range(0.1..1.0), &mut rng);

        // sign-equivalent: flip weight and response loading of a component together
        let mut same = a.clone();
        for k in 0..h {
            if rng.random::<bool>() {
                let (w, v) = (-same.w.column(k), -same.v.column(k));
                same.w.set_column(k, &w);
                same.v.set_column(k, &v);
            }
        }
        let (bg, pg) = (blocks_gap(&a, &same), params_gap(&a, &same));
        if !(bg < 1e-10 && pg < 1e-12) {
            failures.push(format!("pair {pair}: sign flip moved blocks by {bg:.1e}"));
        }

        // distinct: an independent draw, and a small change in one parameter
        let other = common::random_params(p, q, h, rng.random_range(0.1..1.0), &mut rng);
        let mut nudged = a.clone();
        match pair % 4 {
            0 => nudged.s2[0] *= 1.001,
            1 => nudged.b[h - 1] *= 0.999,
            2 => nudged.sigma1_sq += 1e-3,
            _ => nudged.w = random_orthonormal(p, h, &mut rng).unwrap(),
        }
        for (label, b) in [("independent", &other), ("perturbed", &nudged)] {
            let (bg, pg) = (blocks_gap(&a, b), params_gap(&a, b));
            if pg > 1e-12 && bg <= 1e-10 {
                failures.push(format!("pair {pair}: {label} params share blocks"));
            }
        }

        // the blocks determine the parameters: inverting them returns the canonical set
        if h < p.min(q) {
            let (sxx, sxy, syy) = model_covariance(&a);
            let r = recover_params(&sxx, &sxy, &syy, h).unwrap();
            let back = ModelParams {
                w: r.w,
                v: r.v,
                s2: r.s2,
                b: r.b,
                sigma1_sq: r.sigma1_sq,
                noise_x: NoiseCase::Isotropic { sigma_sq: r.sigma_x_sq },
                noise_y: NoiseCase::Isotropic { sigma_sq: r.sigma_y_sq },
            };
            let g = params_gap(&a, &back);
            if g > 1e-8 {
                failures.push(format!("pair {pair}: inversion off by {g:.1e}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        "20 pairs, both directions".to_string()
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

fn random_dataset(n: usize, p: usize, q: usize, seed: u64) -> Dataset {
    let mut rng = common::rng(seed);
    let x = common::uniform_matrix(n, p, &mut rng);
    let mix = common::uniform_matrix(p, q, &mut rng);
    let y = &x * mix + common::uniform_matrix(n, q, &mut rng) * 0.5;
    Dataset::from_raw(&x, &y).unwrap()
}

fn structural(data: &Dataset, fit: &FitResult) -> std::result::Result<(), TestCaseError> {
    let h = fit.components();
    let gram = fit.xi_hat.transpose() * &fit.xi_hat;
    let scale = data.x.norm_squared().max(1.0);
    for a in 0..h {
        for b in 0..a {
            prop_assert!(gram[(a, b)].abs() < 1e-8 * scale, "scores {a},{b}: {}", gram[(a, b)]);
        }
    }
    let ortho = max_abs(&(fit.u_hat.transpose() * &fit.u_hat - Matrix::identity(h, h)));
    prop_assert!(ortho < 1e-10, "weights {}", ortho);
    let recon = max_abs(&(fit.x0() - &data.x)) / max_abs(&data.x).max(1.0);
    prop_assert!(recon < 1e-10, "X reconstruction {}", recon);
    let recon_y = max_abs(&(fit.y0() - &data.y)) / max_abs(&data.y).max(1.0);
    prop_assert!(recon_y < 1e-10, "Y reconstruction {}", recon_y);
    Ok(())
}

const PROPERTY_CASES: u32 = 128;

fn structural_properties() -> Outcome {
    let mut runner = TestRunner::new(Config {
        failure_persistence: None,
        ..Config::with_cases(PROPERTY_CASES)
    });
    let mut failures = Vec::new();

    let shapes = (any::<u64>(), 12usize..60, 3usize..8, 2usize..5, any::<bool>());
    if let Err(e) = runner.run(&shapes, |(seed, n, p, q, svd)| {
        let data = random_dataset(n, p, q, seed);
        let variant = if svd { Variant::PlsSvd } else { Variant::PlsR };
        let fit = fit_pls(&data, &FitConfig::new(p.min(q).min(3), variant)).unwrap();
        structural(&data, &fit)
    }) {
        failures.push(format!("structural identities: {e}"));
    }

    // a unit-column U with UᵀW = I must equal an orthonormal W
    let dual = (any::<u64>(), 2usize..12, 1usize..4);
    if let Err(e) = runner.run(&dual, |(seed, p, h)| {
        prop_assume!(h <= p);
        let mut rng = common::rng(seed);
        let w = random_orthonormal(p, h, &mut rng).unwrap();
        let z = common::uniform_matrix(p, h, &mut rng);
        let perp = (Matrix::identity(p, p) - &w * w.transpose()) * z;
        let u = &w * (w.transpose() * &w).try_inverse().unwrap() + &perp;
        prop_assert!(max_abs(&(u.transpose() * &w - Matrix::identity(h, h))) < 1e-10);
        for k in 0..h {
            let extra = perp.column(k).norm_squared();
            prop_assert!((u.column(k).norm_squared() - 1.0 - extra).abs() < 1e-10);
            if extra < 1e-20 {
                prop_assert!((u.column(k) - w.column(k)).amax() < 1e-10);
            }
        }
        let min_norm = &w * (w.transpose() * &w).try_inverse().unwrap();
        prop_assert!(max_abs(&(min_norm - &w)) < 1e-10);
        Ok(())
    }) {
        failures.push(format!("dual weights: {e}"));
    }

    let equiv = (any::<u64>(), 12usize..60, 2usize..7, 2usize..5);
    if let Err(e) = runner.run(&equiv, |(seed, n, p, q)| {
        let data = random_dataset(n, p, q, seed);
        let h = p.min(q).min(3);
        let a = fit_pls(&data, &FitConfig::new(h, Variant::PlsR)).unwrap();
        let mut cfg = GflsrFitConfig::new(
            h,
            DependenceMeasure::Covariance,
            ResponseFamily::Linear,
            Optimizer::ClosedFormSvd,
        );
        cfg.eta = 0.0;
        let b = fit_gflsr(&data, &cfg).unwrap();
        let mut gap = max_abs(&(&a.u_hat - &b.u_hat))
            .max(max_abs(&(&a.v_hat - &b.v_hat)))
            .max(max_abs(&(&a.xi_hat - &b.xi_hat)))
            .max(max_abs(&(a.fitted() - b.fitted())));
        gap = a.b_hat.iter().zip(&b.b_hat).fold(gap, |g, (x, y)| g.max((x - y).abs()));
        prop_assert!(gap < 1e-8, "gap {}", gap);
        Ok(())
    }) {
        failures.push(format!("covariance fit vs PLS: {e}"));
    }

    let detail = if failures.is_empty() {
        format!("3 properties x {PROPERTY_CASES} cases")
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

const CORN_MSE: [f64; 4] = [0.0541, 0.0124, 0.0662, 0.3411];
const CORN_SIGMA_X_SQ: f64 = 2.2045e-6;

fn corn_pipeline() -> Outcome {
    let (Some(x), Some(y)) = (std::env::var_os("GFLSR_CORN_X"), std::env::var_os("GFLSR_CORN_Y")) else {
        return Outcome::Skip("set GFLSR_CORN_X and GFLSR_CORN_Y to the spectra and response CSVs".into());
    };
    let mut cfg = ExperimentConfig::new(ExperimentKind::Corn);
    cfg.x_path = Some(PathBuf::from(x));
    cfg.y_path = Some(PathBuf::from(y));
    cfg.bootstrap = 0;
    let report = run_corn(&cfg, Execution::default()).unwrap();
    let value = |metric: &str| report.rows.iter().find(|r| r.metric == metric).unwrap().mean;
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, target) in CORN_MSE.iter().enumerate() {
        let mse = value(&format!("mse_{}", j + 1));
        ok &= (mse / target - 1.0).abs() <= 0.10;
        parts.push(format!("mse_{} {mse:.4}", j + 1));
    }
    let sx = value("sigma_x_sq");
    ok &= (CORN_SIGMA_X_SQ / 10.0..=CORN_SIGMA_X_SQ * 10.0).contains(&sx);
    parts.push(format!("sigma_x_sq {sx:.3e}"));
    verdict(ok, parts.join("; "))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("sim1 loading recovery", sim1_tables),
        ("sim2 score convergence", sim2_convergence),
        ("noiseless recovery", noiseless_recovery),
        ("singular pair oracle", singular_pair_oracle),
        ("sim3 corrected estimators", sim3_corrections),
        ("sim4 bootstrap coverage", sim4_coverage),
        ("identifiability", identifiability),
        ("structural properties", structural_properties),
        ("corn pipeline", corn_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {} [{name}] {tag} ({secs:.1}s): {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
