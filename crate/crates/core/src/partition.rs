//! Bin partition of the observation grid and per-bin sufficient statistics.
//!
//! With `n` increments and `N` bins we take `m = floor(n / N)` increments per
//! bin and let the last bin absorb the remainder `r = n - mN`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{Dispersion, ObservedPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    n: usize,
    base: usize,
    remainder: usize,
    counts: Vec<usize>,
    edges: Vec<f64>,
    sums: Vec<f64>,
    horizon: f64,
}

/// Neumaier-compensated sum in iteration order.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Split `path` into `bins` bins and accumulate `Z_k = Σ_{i ∈ B_k} Y_i^2`.
pub fn make_partition(path: &ObservedPath, bins: usize) -> Result<BinPartition> {
    let n = path.n();
    if bins == 0 || bins > n {
        return Err(Error::Partition(format!(
            "bin count must lie in 1..={n}, got {bins}"
        )));
    }
    let base = n / bins;
    let remainder = n - base * bins;
    if base == 1 && bins > 1 {
        log::warn!("one increment per bin (n = {n}, N = {bins}): posterior variances may be undefined");
    }

    let mut counts = vec![base; bins];
    counts[bins - 1] += remainder;

    let horizon = path.horizon();
    let mut edges: Vec<f64> = (0..bins)
        .map(|k| horizon * (k * base) as f64 / n as f64)
        .collect();
    edges.push(horizon);

    let incs: Vec<f64> = path.increments().collect();
    let mut sums = Vec::with_capacity(bins);
    let mut start = 0;
    for &c in &counts {
        sums.push(compensated_sum(incs[start..start + c].iter().map(|y| y * y)));
        start += c;
    }

    Ok(BinPartition { n, base, remainder, counts, edges, sums, horizon })
}

impl BinPartition {
    /// Number of increments.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of bins `N`.
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Base bin size `m`.
    pub fn base(&self) -> usize {
        self.base
    }

    pub fn remainder(&self) -> usize {
        self.remainder
    }

    /// Increments per bin, `m_k`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `a_0 = 0 < a_1 < ... < a_N = T`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Per-bin squared-increment sums `Z_k`.
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn bin_bounds(&self, k: usize) -> (f64, f64) {
        (self.edges[k], self.edges[k + 1])
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    /// Index of the bin containing `t`; the last bin is closed at `T`.
    pub fn bin_of(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0 && t <= self.horizon) {
            return None;
        }
        let k = self.edges[1..].partition_point(|&e| e <= t);
        Some(k.min(self.bins() - 1))
    }
}

/// Bin averages `(1 / |B_k|) ∫_{B_k} s(t) dt`.
pub fn histogramise(s: &dyn Dispersion, part: &BinPartition) -> Result<Vec<f64>> {
    histogramise_pow(s, part, 1)
}

/// Bin averages of `s^power`, e.g. `power = 2` for the diffusion coefficient.
pub fn histogramise_pow(s: &dyn Dispersion, part: &BinPartition, power: i32) -> Result<Vec<f64>> {
    (0..part.bins())
        .map(|k| {
            let (a, b) = part.bin_bounds(k);
            Ok(s.integral_pow(a, b, power)? / (b - a))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{bench_s1, BenchS1, ConstantDispersion, FnDispersion, TabulatedDispersion};
    use proptest::prelude::*;

    fn path_from_increments(incs: &[f64]) -> ObservedPath {
        let mut v = vec![0.0];
        for y in incs {
            v.push(v.last().unwrap() + y);
        }
        ObservedPath::new(v, 1.0).unwrap()
    }

    #[test]
    fn counts_examples() {
        let p = path_from_increments(&[1.0; 10]);
        let part = make_partition(&p, 3).unwrap();
        assert_eq!((part.base(), part.remainder()), (3, 1));
        assert_eq!(part.counts(), &[3, 3, 4]);
        assert_eq!(part.sums(), &[3.0, 3.0, 4.0]);
        let p8 = path_from_increments(&[1.0; 8]);
        assert_eq!(make_partition(&p8, 4).unwrap().counts(), &[2, 2, 2, 2]);
        assert!(make_partition(&p8, 0).is_err());
        assert!(make_partition(&p8, 9).is_err());
        let one = make_partition(&p8, 8).unwrap();
        assert_eq!((one.base(), one.remainder()), (1, 0));
    }

    #[test]
    fn constant_path_has_zero_sums() {
        let p = ObservedPath::new(vec![2.5; 21], 1.0).unwrap();
        let part = make_partition(&p, 4).unwrap();
        assert!(part.sums().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn edges_and_lookup() {
        let p = ObservedPath::new(vec![0.0; 11], 2.0).unwrap();
        let part = make_partition(&p, 3).unwrap();
        assert_eq!(part.edges(), &[0.0, 0.6, 1.2, 2.0]);
        assert_eq!(part.bin_of(0.0), Some(0));
        assert_eq!(part.bin_of(0.6), Some(1));
        assert_eq!(part.bin_of(2.0), Some(2));
        assert_eq!(part.bin_of(2.1), None);
    }

    #[test]
    fn histogramise_examples() {
        let p = ObservedPath::new(vec![0.0; 101], 1.0).unwrap();
        let part = make_partition(&p, 5).unwrap();
        let c = histogramise(&ConstantDispersion(1.7), &part).unwrap();
        assert!(c.iter().all(|&v| (v - 1.7).abs() < 1e-15));
        let lin = FnDispersion { name: "t".into(), f: |t: f64| t };
        let v = histogramise(&lin, &part).unwrap();
        for (k, x) in v.iter().enumerate() {
            let (a, b) = part.bin_bounds(k);
            assert!((x - 0.5 * (a + b)).abs() < 1e-14);
        }
    }

    #[test]
    fn histogramise_s1_against_simpson() {
        let p = ObservedPath::new(vec![0.0; 8001], 1.0).unwrap();
        let part = make_partition(&p, 40).unwrap();
        let v = histogramise(&BenchS1, &part).unwrap();
        for (k, x) in v.iter().enumerate() {
            let (a, b) = part.bin_bounds(k);
            let m = 2000;
            let h = (b - a) / m as f64;
            let mut s = bench_s1(a) + bench_s1(b);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * bench_s1(a + i as f64 * h);
            }
            let oracle = s * h / 3.0 / (b - a);
            assert!((x - oracle).abs() < 1e-6, "bin {k}");
        }
    }

    #[test]
    fn histogramise_of_aligned_step_function_is_identity() {
        let p = ObservedPath::new(vec![0.0; 9], 1.0).unwrap();
        let part = make_partition(&p, 4).unwrap();
        let levels = [1.0, 4.0, 2.0, 3.0];
        let step = FnDispersion {
            name: "step".into(),
            f: move |t: f64| levels[((t * 4.0).floor() as usize).min(3)],
        };
        let v = histogramise(&step, &part).unwrap();
        for (a, b) in v.iter().zip(levels) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let tab = TabulatedDispersion::new("flat", 1.0, vec![2.0; 5]).unwrap();
        assert!(histogramise(&tab, &part).unwrap().iter().all(|&x| x == 2.0));
    }

    proptest! {
        #[test]
        fn layout_reconstructs(n in 1usize..100_000, frac in 0.0f64..1.0) {
            let bins = 1 + ((n - 1) as f64 * frac) as usize;
            let p = ObservedPath::new(vec![0.0; n + 1], 1.0).unwrap();
            let part = make_partition(&p, bins).unwrap();
            let (m, r) = (part.base(), part.remainder());
            prop_assert_eq!(m * bins + r, n);
            prop_assert!(m >= 1 && r < bins);
            prop_assert_eq!(part.counts().iter().sum::<usize>(), n);
            // Whenever N arises from some m as floor(n / m), r < m holds.
            if n / m == bins {
                prop_assert!(r < m);
            }
            prop_assert!(part.edges().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn sums_add_up(incs in proptest::collection::vec(-10.0f64..10.0, 1..300), frac in 0.0f64..1.0) {
            let p = path_from_increments(&incs);
            let n = p.n();
            let bins = 1 + ((n - 1) as f64 * frac) as usize;
            let part = make_partition(&p, bins).unwrap();
            let total = compensated_sum(p.increments().map(|y| y * y));
            let binned: f64 = part.sums().iter().sum();
            prop_assert!((binned - total).abs() <= 1e-12 * total.max(1.0));
            prop_assert!(part.sums().iter().all(|&z| z >= 0.0));
        }
    }
}
