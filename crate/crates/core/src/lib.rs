//! Generative latent structure regression.
//!
//! Simulation from the generative PLS model, component-wise estimation with
//! covariance or general dependence measures, measurement-error corrected
//! variance and slope estimates, and a residual bootstrap for intervals.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod experiments;
pub mod fit;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod psi;
pub mod simulate;

pub use error::{GflsrError, Result};
pub use fit::{fit_gflsr, fit_pls, predict, FitConfig, FitResult, Variant};
pub use linalg::{Matrix, Vector};
pub use model::{Dataset, GroundTruth, ModelParams, NoiseCase};
