//! Latent transforms Ψ and the dependence measures used by the generalized fit.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{GflsrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    /// Normalised probabilists' Hermite polynomial of the given order applied to Φ⁻¹(t).
    HermiteNormal {
        order: usize,
    },
    InverseNormalCdf,
    ExpOfInverseNormalCdf,
    /// Σ cₖ zᵏ with z = Φ⁻¹(t).
    PolynomialOfInverseNormalCdf {
        coeffs: Vec<f64>,
    },
}

/// Φ(x) through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.38357751867269e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Φ⁻¹(t): Acklam's rational approximation polished by one Halley step.
pub fn inverse_normal_cdf(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(GflsrError::QuantileSingularity(t));
    }
    let p_low = 0.02425;
    let x = if t < p_low {
        let q = (-2.0 * t.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if t <= 1.0 - p_low {
        let q = t - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - t).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - t;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// He_n(x) by the three-term recurrence.
pub fn hermite(order: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if order == 0 {
        return prev;
    }
    for k in 1..order {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl PsiFamily {
    pub fn of_normal(&self, z: f64) -> f64 {
        match self {
            PsiFamily::HermiteNormal { order } => hermite(*order, z) / factorial(*order).sqrt(),
            PsiFamily::InverseNormalCdf => z,
            PsiFamily::ExpOfInverseNormalCdf => z.exp(),
            PsiFamily::PolynomialOfInverseNormalCdf { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c),
        }
    }

    /// Exact mean and variance of Ψ(U) for U ~ Uniform(0, 1).
    pub fn moments(&self) -> (f64, f64) {
        match self {
            PsiFamily::HermiteNormal { order: 0 } => (1.0, 0.0),
            PsiFamily::HermiteNormal { .. } | PsiFamily::InverseNormalCdf => (0.0, 1.0),
            PsiFamily::ExpOfInverseNormalCdf => {
                let e = std::f64::consts::E;
                (e.sqrt(), e * (e - 1.0))
            }
            PsiFamily::PolynomialOfInverseNormalCdf { coeffs } => {
                // E[z^k] = (k-1)!! for even k, 0 for odd k.
                let moment = |k: usize| -> f64 {
                    if k % 2 == 1 {
                        0.0
                    } else {
                        (1..k).step_by(2).map(|j| j as f64).product()
                    }
                };
                let mean: f64 = coeffs.iter().enumerate().map(|(k, c)| c * moment(k)).sum();
                let mut second = 0.0;
                for (i, ci) in coeffs.iter().enumerate() {
                    for (j, cj) in coeffs.iter().enumerate() {
                        second += ci * cj * moment(i + j);
                    }
                }
                (mean, second - mean * mean)
            }
        }
    }
}

pub fn psi_eval(family: &PsiFamily, t: f64) -> Result<f64> {
    Ok(family.of_normal(inverse_normal_cdf(t)?))
}

/// Mean, variance and cross moment with `other` of Ψ(U), U ~ Uniform(0, 1).
/// The integral over t is taken after the substitution t = Φ(z), as a midpoint
/// rule in z on [-8, 8] weighted by φ(z); each node still goes through Φ⁻¹(t).
pub fn quadrature_moments(family: &PsiFamily, other: &PsiFamily, points: usize) -> Result<(f64, f64, f64)> {
    let (lo, hi) = (-8.0, 8.0);
    let step = (hi - lo) / points as f64;
    let (mut m1, mut m2, mut cross) = (0.0, 0.0, 0.0);
    for k in 0..points {
        let z0: f64 = lo + (k as f64 + 0.5) * step;
        let weight = (-z0 * z0 / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * step;
        let t = normal_cdf(z0);
        let a = psi_eval(family, t)?;
        let b = psi_eval(other, t)?;
        m1 += a * weight;
        m2 += a * a * weight;
        cross += a * b * weight;
    }
    Ok((m1, m2 - m1 * m1, cross))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceMeasure {
    Covariance,
    Pearson,
    Spearman,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let vx = covariance(x, x);
    let vy = covariance(y, y);
    let floor = |v: &[f64]| 1e-24 * v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64;
    if !(vx > floor(x)) || !(vy > floor(y)) {
        return Err(GflsrError::ZeroVariance);
    }
    Ok(covariance(x, y) / (vx * vy).sqrt())
}

/// Ranks starting at 1, tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn dependence(measure: DependenceMeasure, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(GflsrError::Dimension(format!(
            "dependence needs equal non-empty samples, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    match measure {
        DependenceMeasure::Covariance => Ok(covariance(x, y)),
        DependenceMeasure::Pearson => pearson(x, y),
        DependenceMeasure::Spearman => pearson(&average_ranks(x), &average_ranks(y)),
    }
}
