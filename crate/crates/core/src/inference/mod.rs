//! Corrected variance and slope estimates, residual bootstrap and percentile intervals.

mod bootstrap;
mod corrected;

pub use bootstrap::{
    intervals, percentile, percentile_interval, predict_interval, residual_bootstrap, BootstrapConfig, BootstrapResult,
    IntervalRow, IntervalTable, PredictionIntervals, Replicate, ReplicateFailure, Resampling,
};
pub use corrected::{corrected_b, corrected_estimates, CorrectedEstimates, CorrectionCase};
