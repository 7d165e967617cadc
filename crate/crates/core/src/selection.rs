//! Choosing the number of bins: DIC-based expected log predictive density
//! and the log marginal likelihood, scanned over a grid of candidate `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::partition::{make_partition, BinPartition};
use crate::posterior::PriorSpec;
use crate::sde::ObservedPath;
use crate::specfn::{digamma, log_gamma};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Dic,
    Ml,
}

/// The two pieces of `elpd_DIC = log L_n(M) - ν_DIC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DicTerms {
    /// Log pseudo-likelihood at the posterior mean of `s^2`.
    pub log_lik_at_mean: f64,
    /// Effective number of parameters.
    pub nu: f64,
}

impl DicTerms {
    pub fn elpd(&self) -> f64 {
        self.log_lik_at_mean - self.nu
    }
}

fn posterior_params<'a>(part: &'a BinPartition, prior: &PriorSpec) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
    let dt = part.horizon() / part.n() as f64;
    let (alpha, beta) = (prior.alpha, prior.beta);
    part.counts().iter().zip(part.sums()).map(move |(&m, &z)| {
        let m = m as f64;
        (m, alpha + 0.5 * m, beta + 0.5 * z / dt)
    })
}

/// Closed-form DIC terms for an existing partition.
pub fn dic_terms_for(part: &BinPartition, prior: &PriorSpec) -> Result<DicTerms> {
    PriorSpec::new(prior.alpha, prior.beta)?;
    let n = part.n() as f64;
    let horizon = part.horizon();
    let mut log_lik = -0.5 * n * LN_2PI - 0.5 * n * (horizon / n).ln();
    let mut nu = 0.0;
    for ((m, shape, scale), &z) in posterior_params(part, prior).zip(part.sums()) {
        if shape <= 1.0 {
            return Err(Error::UndefinedMoment(format!(
                "posterior shape {shape} <= 1 in a bin of {m} increments"
            )));
        }
        let s1 = shape - 1.0;
        log_lik -= 0.5 * m * (scale / s1).ln() + 0.5 * n / horizon * z * s1 / scale;
        nu += n / horizon * z / scale - m * (digamma(shape)? - s1.ln());
    }
    Ok(DicTerms { log_lik_at_mean: log_lik, nu })
}

pub fn dic_terms(path: &ObservedPath, bins: usize, prior: &PriorSpec) -> Result<DicTerms> {
    dic_terms_for(&make_partition(path, bins)?, prior)
}

/// `elpd_DIC` for `bins` bins; larger is better.
pub fn dic_score(path: &ObservedPath, bins: usize, prior: &PriorSpec) -> Result<f64> {
    dic_terms(path, bins, prior).map(|t| t.elpd())
}

/// Complete log marginal likelihood, normalising constants included.
pub fn log_ml_for(part: &BinPartition, prior: &PriorSpec) -> Result<f64> {
    PriorSpec::new(prior.alpha, prior.beta)?;
    let n = part.n() as f64;
    let ln_unit_var = (part.horizon() / n).ln() + LN_2PI;
    let prior_norm = prior.alpha * prior.beta.ln() - log_gamma(prior.alpha)?;
    let mut total = 0.0;
    for (m, shape, scale) in posterior_params(part, prior) {
        total += -0.5 * m * ln_unit_var + prior_norm + log_gamma(shape)? - shape * scale.ln();
    }
    Ok(total)
}

pub fn log_ml(path: &ObservedPath, bins: usize, prior: &PriorSpec) -> Result<f64> {
    log_ml_for(&make_partition(path, bins)?, prior)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub criterion: Criterion,
    pub grid: Vec<usize>,
    pub scores: Vec<f64>,
    pub best: usize,
}

/// Score every `N` in `grid` and pick the maximiser (smaller `N` on ties).
pub fn select(
    path: &ObservedPath,
    grid: &[usize],
    prior: &PriorSpec,
    criterion: Criterion,
) -> Result<SelectionResult> {
    if grid.is_empty() {
        return Err(Error::domain("bin grid is empty"));
    }
    if let Some(&bad) = grid.iter().find(|&&b| b == 0 || b > path.n()) {
        return Err(Error::domain(format!(
            "bin count {bad} outside 1..={} for this path",
            path.n()
        )));
    }
    let scores = parallel::try_map_indexed(grid.len(), |i| {
        let part = make_partition(path, grid[i])?;
        let score = match criterion {
            Criterion::Dic => dic_terms_for(&part, prior)?.elpd(),
            Criterion::Ml => log_ml_for(&part, prior)?,
        };
        if score.is_finite() {
            Ok(score)
        } else {
            Err(Error::NonConvergence(format!("non-finite score for N = {}", grid[i])))
        }
    })?;
    let best = argmax_prefer_smaller(grid, &scores);
    Ok(SelectionResult { criterion, grid: grid.to_vec(), scores, best })
}

fn argmax_prefer_smaller(grid: &[usize], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        let better = scores[i] > scores[best];
        let tie_smaller = scores[i] == scores[best] && grid[i] < grid[best];
        if better || tie_smaller {
            best = i;
        }
    }
    grid[best]
}
