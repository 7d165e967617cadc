//! Nonparametric Bayesian estimation of a time-dependent diffusion coefficient.
//!
//! Observations `X_0, ..., X_n` of `dX_t = b(t, X_t) dt + s(t) dW_t` on a fixed
//! horizon are fitted with a histogram-type prior: `s^2` is piecewise constant
//! on `N` bins with independent inverse-gamma levels. Ignoring the drift makes
//! the likelihood Gaussian and the posterior conjugate, so everything here is
//! closed form except for the Monte Carlo experiment harness.
//!
//! Module map:
//!
//! - [`specfn`]: log-gamma, digamma, incomplete gamma, inverse-gamma law.
//! - [`sde`]: Euler simulation, subsampling, benchmark coefficients.
//! - [`partition`]: bins and per-bin squared-increment sums.
//! - [`posterior`]: the conjugate posterior, bands, draws, distances.
//! - [`selection`]: DIC and marginal-likelihood scans over the bin count.
//! - [`experiments`]: contraction-rate and drift-robustness studies.
//! - [`cli`]: CSV ingestion and the command-line front end.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod parallel;
pub mod partition;
pub mod posterior;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod selection;
pub mod specfn;

pub use error::{Error, Result};
pub use experiments::{
    bins_rule, drift_robustness, run_contraction, ContractionConfig, ContractionReport, PathMode,
    RobustnessReport,
};
pub use partition::{histogramise, make_partition, BinPartition};
pub use posterior::{
    credible_band, distance_to_truth, fit, mean_field, sample_field, DispersionEstimate, Norm,
    PosteriorField, PriorSpec, Target, TruthProfile,
};
pub use sde::{
    bench_b1, bench_s1, bench_s2, euler_simulate, subsample, Dispersion, Drift, ObservedPath,
    SimConfig,
};
pub use selection::{dic_score, log_ml, select, Criterion, SelectionResult};
pub use specfn::IgDist;
