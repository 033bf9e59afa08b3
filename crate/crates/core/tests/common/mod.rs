//! Test-side oracles written against plain arrays, independent of the library
//! solvers and of nalgebra's decompositions.
#![allow(dead_code, clippy::needless_range_loop)]

use gflsr::model::{random_orthonormal, ModelParams, NoiseCase};
use gflsr::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_vecs(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn uniform_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Top singular triple (u, v, s) by one-sided Jacobi rotations on the columns
/// of `a`, iterated until every column pair is orthogonal.
pub fn jacobi_top_triple(a: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, f64) {
    let p = a.len();
    let q = a[0].len();
    let mut u: Vec<Vec<f64>> = (0..q).map(|j| (0..p).map(|i| a[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..q)
        .map(|j| (0..q).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for j in 0..q {
            for k in j + 1..q {
                let alpha: f64 = u[j].iter().map(|x| x * x).sum();
                let beta: f64 = u[k].iter().map(|x| x * x).sum();
                let gamma: f64 = u[j].iter().zip(&u[k]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(1e-300));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..p {
                    let (x, y) = (u[j][i], u[k][i]);
                    u[j][i] = c * x - s * y;
                    u[k][i] = s * x + c * y;
                }
                for i in 0..q {
                    let (x, y) = (v[j][i], v[k][i]);
                    v[j][i] = c * x - s * y;
                    v[k][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let norms: Vec<f64> = u.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let top = (0..q).max_by(|&a, &b| norms[a].total_cmp(&norms[b])).unwrap();
    let s = norms[top];
    let uu: Vec<f64> = u[top].iter().map(|x| x / s).collect();
    (uu, v[top].clone(), s)
}

/// Flips a vector so its largest-magnitude entry (lowest index on ties) is nonnegative.
pub fn canonical(v: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

/// Classical NIPALS PLS2 weights for centred X (n×p) and Y (n×q).
pub fn nipals_weights(x: &[Vec<f64>], y: &[Vec<f64>], h: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let p = x[0].len();
    let q = y[0].len();
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    let mut weights = Vec::new();
    for _ in 0..h {
        let mut u: Vec<f64> = (0..n).map(|i| y[i].iter().sum::<f64>()).collect();
        let mut w = vec![0.0; p];
        for _ in 0..100_000 {
            let mut w_new: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[i][j] * u[i]).sum()).collect();
            let norm = w_new.iter().map(|a| a * a).sum::<f64>().sqrt();
            w_new.iter_mut().for_each(|a| *a /= norm);
            let t: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x[i][j] * w_new[j]).sum()).collect();
            let tt: f64 = t.iter().map(|a| a * a).sum();
            let c: Vec<f64> = (0..q)
                .map(|k| (0..n).map(|i| y[i][k] * t[i]).sum::<f64>() / tt)
                .collect();
            let cc: f64 = c.iter().map(|a| a * a).sum();
            u = (0..n)
                .map(|i| (0..q).map(|k| y[i][k] * c[k]).sum::<f64>() / cc)
                .collect();
            let change: f64 = w_new.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            w = w_new;
            if change < 1e-15 {
                break;
            }
        }
        let t: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x[i][j] * w[j]).sum()).collect();
        let tt: f64 = t.iter().map(|a| a * a).sum();
        let load: Vec<f64> = (0..p)
            .map(|j| (0..n).map(|i| x[i][j] * t[i]).sum::<f64>() / tt)
            .collect();
        let c: Vec<f64> = (0..q)
            .map(|k| (0..n).map(|i| y[i][k] * t[i]).sum::<f64>() / tt)
            .collect();
        for i in 0..n {
            for j in 0..p {
                x[i][j] -= t[i] * load[j];
            }
            for k in 0..q {
                y[i][k] -= t[i] * c[k];
            }
        }
        weights.push(canonical(&w));
    }
    weights
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Random valid parameters: orthonormal loadings, s² and b drawn and sorted so
/// that s²·b strictly decreases.
pub fn random_params<R: Rng>(p: usize, q: usize, h: usize, noise: f64, rng: &mut R) -> ModelParams {
    let w = random_orthonormal(p, h, rng).unwrap();
    let v = random_orthonormal(q, h, rng).unwrap();
    let mut s2: Vec<f64> = (0..h).map(|_| rng.random_range(1.0..10.0)).collect();
    let mut b: Vec<f64> = (0..h).map(|_| rng.random_range(0.5..3.0)).collect();
    s2.sort_by(|a, b| b.total_cmp(a));
    b.sort_by(|a, b| b.total_cmp(a));
    for k in 1..h {
        if s2[k] * b[k] >= s2[k - 1] * b[k - 1] {
            s2[k] = 0.9 * s2[k - 1] * b[k - 1] / b[k];
        }
    }
    let case = if noise > 0.0 {
        NoiseCase::Isotropic { sigma_sq: noise }
    } else {
        NoiseCase::Zero
    };
    ModelParams {
        w,
        v,
        s2,
        b,
        sigma1_sq: noise,
        noise_x: case.clone(),
        noise_y: case,
    }
}
