//! Monte Carlo studies: empirical posterior contraction rates and the effect
//! of ignoring a strong drift.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::posterior::{credible_band, fit, sample_field, DispersionEstimate, Norm, PriorSpec, Target, TruthProfile};
use crate::rng::{derive_seed, stream_rng};
use crate::sde::{euler_simulate, subsample, Dispersion, DispersionHandle, Drift, DriftHandle, SimConfig, ZeroDrift};

const PATH_TAG: u64 = 0x9A74;
const DRAW_TAG: u64 = 0xD4A3;

/// Number of bins from the smoothness-based rule
/// `N_n = round(5 n^{1/(2λ+1)})` (L2) or `round(5 (n / ln n)^{1/(2λ+1)})`
/// (sup norm), clamped to `[1, n]`.
pub fn bins_rule(n: usize, lambda: f64, norm: Norm) -> usize {
    let nf = n as f64;
    let base = match norm {
        Norm::L2 => nf,
        Norm::Linf => nf / nf.ln(),
    };
    let bins = (5.0 * base.powf(1.0 / (2.0 * lambda + 1.0))).round();
    if bins.is_finite() {
        (bins as usize).clamp(1, n.max(1))
    } else {
        1
    }
}

/// Empirical quantile as the order statistic at 1-based index `ceil(q * len)`.
pub fn order_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[idx - 1])
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; needs at least three points.
    pub slope_se: Option<f64>,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let k = xs.len();
    if k < 2 || ys.len() != k {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (k > 2).then(|| {
        let ssr: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (ssr / (k - 2) as f64 / sxx).sqrt()
    });
    Some(LineFit { slope, intercept, slope_se })
}

/// How observation sets for different `n` relate within one realisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    /// One fine path per realisation, subsampled for every `n`.
    Nested,
    /// A fresh fine path for every `n`.
    Independent,
}

#[derive(Clone)]
pub struct ContractionConfig {
    pub dispersion: DispersionHandle,
    pub drift: DriftHandle,
    /// Hölder exponent used by the bin rule, in `(0, 1]`.
    pub lambda: f64,
    /// Increment counts, strictly increasing.
    pub n_list: Vec<usize>,
    pub draws: usize,
    pub quantile: f64,
    pub norm: Norm,
    pub target: Target,
    pub realisations: usize,
    pub mode: PathMode,
    pub base_seed: u64,
    /// Fine-grid settings; its seed is replaced per realisation.
    pub sim: SimConfig,
}

impl ContractionConfig {
    /// Laptop-sized study: `n` up to 40 000 increments, 500 draws, one path.
    pub fn desk(dispersion: DispersionHandle, lambda: f64, norm: Norm, base_seed: u64) -> Self {
        ContractionConfig {
            dispersion,
            drift: Arc::new(ZeroDrift),
            lambda,
            n_list: vec![5_000, 10_000, 20_000, 40_000],
            draws: 500,
            quantile: 0.9,
            norm,
            target: Target::S,
            realisations: 1,
            mode: PathMode::Nested,
            base_seed,
            sim: SimConfig::default(),
        }
    }

    /// Full-size study: `n = 2500 * 2^j`, `j = 1..=5`, 2000 draws, four paths.
    pub fn full_scale(dispersion: DispersionHandle, lambda: f64, norm: Norm, base_seed: u64) -> Self {
        ContractionConfig {
            n_list: (1..=5).map(|j| 2500usize << j).collect(),
            draws: 2000,
            realisations: 4,
            ..Self::desk(dispersion, lambda, norm, base_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::domain(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("n_list must be non-empty and strictly increasing"));
        }
        if self.n_list[0] < 2 {
            return Err(Error::domain("every n must be at least 2"));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::domain(format!("quantile must lie in (0, 1), got {}", self.quantile)));
        }
        if self.draws == 0 || self.realisations == 0 {
            return Err(Error::domain("draws and realisations must be at least 1"));
        }
        Ok(())
    }

    fn abscissa(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.norm {
            Norm::L2 => nf.ln(),
            Norm::Linf => (nf / nf.ln()).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub n: usize,
    pub bins: usize,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealisationReport {
    pub index: usize,
    pub path_seed: u64,
    pub rows: Vec<ContractionRow>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub norm: Norm,
    pub lambda: f64,
    pub target: Target,
    pub quantile: f64,
    pub draws: usize,
    pub seed: u64,
    pub realisations: Vec<RealisationReport>,
    /// Slope of `log q` on `log n` (or `log(n / log n)`) pooled over realisations.
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
}

fn quantile_for(
    cfg: &ContractionConfig,
    prior: &PriorSpec,
    fine: &[f64],
    realisation: usize,
    n: usize,
) -> Result<ContractionRow> {
    let path = subsample(fine, n, cfg.sim.horizon)?;
    let bins = bins_rule(n, cfg.lambda, cfg.norm);
    let post = fit(&path, bins, prior)?;
    let profile = TruthProfile::new(cfg.dispersion.as_ref(), post.partition(), cfg.target)?;
    let seed = derive_seed(cfg.base_seed, &[realisation as u64, n as u64, DRAW_TAG]);
    let distances = parallel::try_map_indexed(cfg.draws, |j| {
        let mut rng = stream_rng(seed, j as u64);
        let draw = sample_field(&post, &mut rng);
        profile.distance(&draw, cfg.norm)
    })?;
    Ok(ContractionRow { n, bins, q: order_quantile(&distances, cfg.quantile)? })
}

fn run_realisation(cfg: &ContractionConfig, prior: &PriorSpec, index: usize) -> Result<RealisationReport> {
    let path_seed = derive_seed(cfg.base_seed, &[index as u64, PATH_TAG]);
    let rows = match cfg.mode {
        PathMode::Nested => {
            let sim = SimConfig { seed: path_seed, ..cfg.sim };
            let fine = euler_simulate(&sim, cfg.drift.as_ref(), cfg.dispersion.as_ref())?;
            cfg.n_list
                .iter()
                .map(|&n| quantile_for(cfg, prior, &fine, index, n))
                .collect::<Result<Vec<_>>>()?
        }
        PathMode::Independent => cfg
            .n_list
            .iter()
            .map(|&n| {
                let sim = SimConfig { seed: derive_seed(path_seed, &[n as u64]), ..cfg.sim };
                let fine = euler_simulate(&sim, cfg.drift.as_ref(), cfg.dispersion.as_ref())?;
                quantile_for(cfg, prior, &fine, index, n)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let xs: Vec<f64> = rows.iter().map(|r| cfg.abscissa(r.n)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.q.ln()).collect();
    let line = fit_line(&xs, &ys);
    Ok(RealisationReport {
        index,
        path_seed,
        rows,
        slope: line.map(|l| l.slope),
        slope_se: line.and_then(|l| l.slope_se),
    })
}

/// Empirical contraction study: for each realisation and each `n`, fit the
/// posterior with the rule-based bin count, draw `draws` fields, take the
/// `quantile` of their distances to the truth, and regress `log q` on
/// `log n`. Deterministic for a given `base_seed`.
pub fn run_contraction(cfg: &ContractionConfig, prior: &PriorSpec) -> Result<ContractionReport> {
    cfg.validate()?;
    let realisations = parallel::try_map_indexed(cfg.realisations, |r| run_realisation(cfg, prior, r))?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = realisations
        .iter()
        .flat_map(|r| r.rows.iter().map(|row| (cfg.abscissa(row.n), row.q.ln())))
        .unzip();
    let pooled = fit_line(&xs, &ys);
    Ok(ContractionReport {
        norm: cfg.norm,
        lambda: cfg.lambda,
        target: cfg.target,
        quantile: cfg.quantile,
        draws: cfg.draws,
        seed: cfg.base_seed,
        realisations,
        slope: pooled.map(|l| l.slope),
        slope_se: pooled.and_then(|l| l.slope_se),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub without_drift: DispersionEstimate,
    pub with_drift: DispersionEstimate,
    /// `max_k |mean_k(drift) - mean_k(no drift)| / mean_k(no drift)`.
    pub max_rel_mean_diff: f64,
}

/// Fit the same bins to two paths driven by identical Wiener increments,
/// one with zero drift and one with `drift`, and compare posterior means.
pub fn drift_robustness(
    dispersion: &dyn Dispersion,
    drift: &dyn Drift,
    sim: &SimConfig,
    n: usize,
    bins: usize,
    prior: &PriorSpec,
    level: f64,
) -> Result<RobustnessReport> {
    if sim.kappa.is_nan() || sim.kappa <= 0.0 {
        return Err(Error::domain("drift comparison needs a dispersion bounded below by kappa > 0"));
    }
    let estimate = |b: &dyn Drift| -> Result<DispersionEstimate> {
        let fine = euler_simulate(sim, b, dispersion)?;
        let path = subsample(&fine, n, sim.horizon)?;
        credible_band(&fit(&path, bins, prior)?, level)
    };
    let without_drift = estimate(&ZeroDrift)?;
    let with_drift = estimate(drift)?;
    let mut max_rel_mean_diff: f64 = 0.0;
    for (a, b) in without_drift.mean.iter().zip(&with_drift.mean) {
        match (a, b) {
            (Some(a), Some(b)) => max_rel_mean_diff = max_rel_mean_diff.max((b - a).abs() / a),
            _ => return Err(Error::UndefinedMoment("posterior mean undefined in some bin".into())),
        }
    }
    Ok(RobustnessReport { without_drift, with_drift, max_rel_mean_diff })
}
