//! Conjugate inverse-gamma posterior for the histogram prior.
//!
//! With independent `IG(α, β)` levels `θ_k` and the drift-free Gaussian
//! pseudo-likelihood (increment variance `θ_k Δ`, `Δ = T / n`), the levels
//! stay independent a posteriori with
//!
//! ```text
//! θ_k | data ~ IG(α + m_k / 2, β + Z_k / (2Δ))
//! ```
//!
//! which on the unit horizon is `IG(α + m_k/2, β + n Z_k / 2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::partition::{make_partition, BinPartition};
use crate::sde::{Dispersion, ObservedPath, EXTREME_SCAN_POINTS};
use crate::specfn::IgDist;

/// Independent `IG(alpha, beta)` prior on every bin level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl PriorSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "prior needs alpha > 0 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(PriorSpec { alpha, beta })
    }

    /// `IG(0.1, 0.1)`, used for the simulation studies.
    pub fn simulation() -> Self {
        PriorSpec { alpha: 0.1, beta: 0.1 }
    }

    /// `IG(0.001, 0.001)`, used on real data.
    pub fn vague() -> Self {
        PriorSpec { alpha: 0.001, beta: 0.001 }
    }
}

/// Per-bin posterior laws of `θ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorField {
    part: BinPartition,
    dists: Vec<IgDist>,
}

impl PosteriorField {
    pub fn partition(&self) -> &BinPartition {
        &self.part
    }

    pub fn dists(&self) -> &[IgDist] {
        &self.dists
    }

    pub fn bins(&self) -> usize {
        self.dists.len()
    }
}

/// Posterior of the histogram prior with `bins` bins given `path`.
pub fn fit(path: &ObservedPath, bins: usize, prior: &PriorSpec) -> Result<PosteriorField> {
    let part = make_partition(path, bins)?;
    fit_partition(part, prior)
}

/// Posterior for an already-built partition.
pub fn fit_partition(part: BinPartition, prior: &PriorSpec) -> Result<PosteriorField> {
    PriorSpec::new(prior.alpha, prior.beta)?;
    let dt = part.horizon() / part.n() as f64;
    let dists = part
        .counts()
        .iter()
        .zip(part.sums())
        .map(|(&m, &z)| IgDist::new(prior.alpha + 0.5 * m as f64, prior.beta + 0.5 * z / dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorField { part, dists })
}

/// Posterior means `E[θ_k | data]`; fails if any shape is `<= 1`.
pub fn mean_field(post: &PosteriorField) -> Result<Vec<f64>> {
    post.dists.iter().map(IgDist::mean).collect()
}

/// Posterior variances; fails if any shape is `<= 2`.
pub fn variance_field(post: &PosteriorField) -> Result<Vec<f64>> {
    post.dists.iter().map(IgDist::variance).collect()
}

/// Piecewise-constant estimate of `s^2` with per-bin (marginal) credible
/// intervals. The intervals are not a simultaneous band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionEstimate {
    pub part: BinPartition,
    /// Posterior means, `None` where the posterior shape is `<= 1`.
    pub mean: Vec<Option<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

/// One output row of a [`DispersionEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub bin_start: f64,
    pub bin_end: f64,
    pub post_mean: Option<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl DispersionEstimate {
    pub fn rows(&self) -> Vec<EstimateRow> {
        (0..self.part.bins())
            .map(|k| {
                let (bin_start, bin_end) = self.part.bin_bounds(k);
                EstimateRow {
                    bin_start,
                    bin_end,
                    post_mean: self.mean[k],
                    lower: self.lower[k],
                    upper: self.upper[k],
                }
            })
            .collect()
    }

    /// Fraction of bins whose interval contains `values[k]`.
    pub fn coverage(&self, values: &[f64]) -> f64 {
        let hits = values
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(v, (lo, hi))| **lo <= **v && **v <= **hi)
            .count();
        hits as f64 / values.len().max(1) as f64
    }
}

/// Central per-bin intervals at `level`: quantiles `(1 - level)/2` and
/// `1 - (1 - level)/2` of each posterior `θ_k`.
pub fn credible_band(post: &PosteriorField, level: f64) -> Result<DispersionEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("credible level must lie in (0, 1), got {level}")));
    }
    let tail = 0.5 * (1.0 - level);
    let bounds = parallel::try_map_indexed(post.bins(), |k| {
        let d = &post.dists[k];
        Ok::<_, Error>((d.quantile(tail)?, d.quantile(1.0 - tail)?))
    })?;
    let (lower, upper) = bounds.into_iter().unzip();
    Ok(DispersionEstimate {
        part: post.part.clone(),
        mean: post.dists.iter().map(|d| d.mean().ok()).collect(),
        lower,
        upper,
        level,
    })
}

/// One joint draw of `(θ_1, ..., θ_N)` from the posterior.
pub fn sample_field<R: Rng + ?Sized>(post: &PosteriorField, rng: &mut R) -> Vec<f64> {
    post.dists.iter().map(|d| d.sample(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "sup")]
    Linf,
}

/// Whether a draw is compared on the scale of `s` (via `√θ_k`) or of `s^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "s")]
    S,
    #[serde(rename = "s2")]
    SSquared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BinMoments {
    width: f64,
    first: f64,
    second: f64,
    min: f64,
    max: f64,
}

/// Per-bin summaries of the truth that make distances to piecewise-constant
/// draws cost `O(N)`.
///
/// For a level `c` on bin `B`, `∫_B (c - g)^2 = c^2 |B| - 2c ∫_B g + ∫_B g^2`,
/// and `sup_B |c - g| = max(c - min g, max g - c)` over the scan grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthProfile {
    target: Target,
    bins: Vec<BinMoments>,
}

impl TruthProfile {
    pub fn new(truth: &dyn Dispersion, part: &BinPartition, target: Target) -> Result<Self> {
        let bins = parallel::try_map_indexed(part.bins(), |k| {
            let (a, b) = part.bin_bounds(k);
            let (lo, hi) = truth.extremes(a, b, EXTREME_SCAN_POINTS);
            let m = match target {
                Target::S => BinMoments {
                    width: b - a,
                    first: truth.integral_pow(a, b, 1)?,
                    second: truth.integral_pow(a, b, 2)?,
                    min: lo,
                    max: hi,
                },
                Target::SSquared => {
                    let sq_min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { (lo * lo).min(hi * hi) };
                    BinMoments {
                        width: b - a,
                        first: truth.integral_pow(a, b, 2)?,
                        second: truth.integral_pow(a, b, 4)?,
                        min: sq_min,
                        max: (lo * lo).max(hi * hi),
                    }
                }
            };
            Ok::<_, Error>(m)
        })?;
        Ok(TruthProfile { target, bins })
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// Distance between the step function given by the `θ` draw and the truth.
    pub fn distance(&self, draw: &[f64], norm: Norm) -> Result<f64> {
        if draw.len() != self.bins.len() {
            return Err(Error::domain(format!(
                "draw has {} levels for {} bins",
                draw.len(),
                self.bins.len()
            )));
        }
        if let Some(v) = draw.iter().find(|v| v.is_nan() || **v < 0.0 || v.is_infinite()) {
            return Err(Error::domain(format!("draw contains invalid level {v}")));
        }
        let level = |theta: f64| match self.target {
            Target::S => theta.sqrt(),
            Target::SSquared => theta,
        };
        Ok(match norm {
            Norm::L2 => draw
                .iter()
                .zip(&self.bins)
                .map(|(&th, m)| {
                    let c = level(th);
                    (c * c * m.width - 2.0 * c * m.first + m.second).max(0.0)
                })
                .sum::<f64>()
                .sqrt(),
            Norm::Linf => draw
                .iter()
                .zip(&self.bins)
                .map(|(&th, m)| {
                    let c = level(th);
                    (c - m.min).max(m.max - c)
                })
                .fold(0.0, f64::max),
        })
    }
}

/// Distance of a `θ` draw on `part` to `truth` in the chosen norm and scale.
pub fn distance_to_truth(
    draw: &[f64],
    part: &BinPartition,
    truth: &dyn Dispersion,
    norm: Norm,
    target: Target,
) -> Result<f64> {
    TruthProfile::new(truth, part, target)?.distance(draw, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::histogramise_pow;
    use crate::rng::rng_from_seed;
    use crate::sde::{bench_s1, BenchS1, ConstantDispersion};

    fn path_from_increments(incs: &[f64]) -> ObservedPath {
        let mut v = vec![0.0];
        for y in incs {
            v.push(v.last().unwrap() + y);
        }
        ObservedPath::new(v, 1.0).unwrap()
    }

    #[test]
    fn posterior_parameters_example() {
        // n = 8, N = 2, first bin Z = 0.5.
        let incs = [0.5f64.sqrt(), 0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 0.4];
        let post = fit(&path_from_increments(&incs), 2, &PriorSpec::new(0.1, 0.1).unwrap()).unwrap();
        let d = post.dists()[0];
        assert!((d.shape() - 2.1).abs() < 1e-15);
        assert!((d.scale() - 2.1).abs() < 1e-14);
        let mean = mean_field(&post).unwrap()[0];
        assert!((mean - 2.1 / 1.1).abs() < 1e-13);
    }

    #[test]
    fn constant_path_posterior_is_prior_shifted() {
        let p = ObservedPath::new(vec![1.0; 11], 1.0).unwrap();
        let post = fit(&p, 3, &PriorSpec::new(0.4, 0.7).unwrap()).unwrap();
        let shapes: Vec<f64> = post.dists().iter().map(|d| d.shape()).collect();
        assert_eq!(shapes, vec![1.9, 1.9, 2.4]);
        assert!(post.dists().iter().all(|d| d.scale() == 0.7));
    }

    #[test]
    fn undefined_moments_fail() {
        let p = ObservedPath::new(vec![0.0, 1.0, 0.5], 1.0).unwrap();
        let post = fit(&p, 2, &PriorSpec::new(0.1, 0.1).unwrap()).unwrap();
        assert!(mean_field(&post).is_err());
        assert!(variance_field(&post).is_err());
        let band = credible_band(&post, 0.9).unwrap();
        assert!(band.mean.iter().all(Option::is_none));
        assert!(credible_band(&post, 1.0).is_err());
        assert!(PriorSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn mean_is_monotone_in_z() {
        let prior = PriorSpec::simulation();
        let mut prev = (0.0, 0.0, 0.0);
        for scale in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let incs: Vec<f64> = (0..20).map(|i| scale * ((i % 3) as f64 - 1.0)).collect();
            let post = fit(&path_from_increments(&incs), 1, &prior).unwrap();
            let band = credible_band(&post, 0.9).unwrap();
            let cur = (band.mean[0].unwrap(), band.lower[0], band.upper[0]);
            assert!(cur.0 > prev.0 && cur.1 > prev.1 && cur.2 > prev.2);
            prev = cur;
        }
    }

    #[test]
    fn band_quantiles() {
        let incs: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let post = fit(&path_from_increments(&incs), 4, &PriorSpec::simulation()).unwrap();
        let band = credible_band(&post, 0.98).unwrap();
        for (k, d) in post.dists().iter().enumerate() {
            assert!((d.cdf(band.lower[k]).unwrap() - 0.01).abs() < 1e-8);
            assert!((d.cdf(band.upper[k]).unwrap() - 0.99).abs() < 1e-8);
            let median = d.quantile(0.5).unwrap();
            assert!(band.lower[k] < median && median < band.upper[k]);
            let m = band.mean[k].unwrap();
            assert!(band.lower[k] <= m && m <= band.upper[k]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let incs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let post = fit(&path_from_increments(&incs), 3, &PriorSpec::simulation()).unwrap();
        let a = sample_field(&post, &mut rng_from_seed(4));
        let b = sample_field(&post, &mut rng_from_seed(4));
        assert_eq!(a, b);
        let single = fit(&path_from_increments(&incs), 1, &PriorSpec::simulation()).unwrap();
        let draw = sample_field(&single, &mut rng_from_seed(8));
        let direct = single.dists()[0].sample(&mut rng_from_seed(8));
        assert_eq!(draw, vec![direct]);
    }

    #[test]
    fn mean_matches_monte_carlo() {
        let incs: Vec<f64> = (0..12).map(|i| 0.3 * (i as f64 * 1.7).cos()).collect();
        let post = fit(&path_from_increments(&incs), 1, &PriorSpec::simulation()).unwrap();
        let d = post.dists()[0];
        let mut rng = rng_from_seed(21);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - d.mean().unwrap()).abs() < 5.0 * se);
    }

    #[test]
    fn sample_field_ks_per_bin() {
        let incs: Vec<f64> = (0..60).map(|i| 0.2 * (i as f64 * 0.9).sin()).collect();
        let post = fit(&path_from_increments(&incs), 3, &PriorSpec::simulation()).unwrap();
        let mut rng = rng_from_seed(1);
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_field(&post, &mut rng)).collect();
        for (k, d) in post.dists().iter().enumerate() {
            let mut xs: Vec<f64> = draws.iter().map(|v| v[k]).collect();
            xs.sort_by(f64::total_cmp);
            let ks = xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
                let f = d.cdf(x).unwrap();
                acc.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs())
            });
            assert!(ks < 1.628 / (n as f64).sqrt(), "bin {k}: {ks}");
        }
    }

    #[test]
    fn distance_examples() {
        let p = ObservedPath::new(vec![0.0; 101], 1.0).unwrap();
        let part = make_partition(&p, 7).unwrap();
        let truth = ConstantDispersion(1.5);
        let hist = histogramise_pow(&truth, &part, 2).unwrap();
        for norm in [Norm::L2, Norm::Linf] {
            let d = distance_to_truth(&hist, &part, &truth, norm, Target::SSquared).unwrap();
            assert!(d < 1e-12);
        }
        let draw = vec![3.0; 7];
        for norm in [Norm::L2, Norm::Linf] {
            let d = distance_to_truth(&draw, &part, &truth, norm, Target::SSquared).unwrap();
            assert!((d - 0.75).abs() < 1e-12, "{d}");
            let d = distance_to_truth(&draw, &part, &truth, norm, Target::S).unwrap();
            assert!((d - (3f64.sqrt() - 1.5)).abs() < 1e-12, "{d}");
        }
        assert!(distance_to_truth(&[-1.0; 7], &part, &truth, Norm::L2, Target::S).is_err());
        assert!(distance_to_truth(&[1.0; 6], &part, &truth, Norm::L2, Target::S).is_err());
    }

    #[test]
    fn distance_s1_against_riemann_sum() {
        let p = ObservedPath::new(vec![0.0; 4001], 1.0).unwrap();
        let part = make_partition(&p, 23).unwrap();
        let mut rng = rng_from_seed(1);
        let draw: Vec<f64> = (0..23).map(|_| 0.5 + 10.0 * rng.random::<f64>()).collect();
        for target in [Target::S, Target::SSquared] {
            let ours = distance_to_truth(&draw, &part, &BenchS1, Norm::L2, target).unwrap();
            let m = 1_000_000;
            let h = 1.0 / m as f64;
            let mut acc = 0.0;
            for i in 0..m {
                let t = (i as f64 + 0.5) * h;
                let k = part.bin_of(t).unwrap();
                let (c, g) = match target {
                    Target::S => (draw[k].sqrt(), bench_s1(t)),
                    Target::SSquared => (draw[k], bench_s1(t).powi(2)),
                };
                acc += (c - g).powi(2) * h;
            }
            assert!((ours - acc.sqrt()).abs() < 1e-4, "{target:?}: {ours} vs {}", acc.sqrt());
        }
    }

    #[test]
    fn sup_dominates_l2_on_unit_interval() {
        let p = ObservedPath::new(vec![0.0; 1001], 1.0).unwrap();
        let part = make_partition(&p, 17).unwrap();
        let profile = TruthProfile::new(&BenchS1, &part, Target::S).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let draw: Vec<f64> = (0..17).map(|_| 12.0 * rng.random::<f64>()).collect();
            let l2 = profile.distance(&draw, Norm::L2).unwrap();
            let sup = profile.distance(&draw, Norm::Linf).unwrap();
            assert!(sup >= l2 - 1e-12);
        }
    }
}
