//! Euler-Maruyama simulation of `dX_t = b(t, X_t) dt + s(t) dW_t`,
//! subsampling to coarse observations, and the benchmark coefficients.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::{derive_seed, rng_from_seed};

/// Number of grid points used when scanning a bin for extremes.
pub const EXTREME_SCAN_POINTS: usize = 201;

const S2_SEED_TAG: u64 = 0x5EED_0052;
const S2_MAX_ATTEMPTS: usize = 10_000;

/// A time-dependent dispersion coefficient `s(t)`.
///
/// The integral and extreme hooks have generic defaults (adaptive quadrature
/// and a dense scan); tabulated paths override them with exact versions.
pub trait Dispersion: Send + Sync {
    fn eval(&self, t: f64) -> f64;

    fn name(&self) -> String {
        "custom".to_string()
    }

    /// `∫_a^b s(t)^power dt`.
    fn integral_pow(&self, a: f64, b: f64, power: i32) -> Result<f64> {
        quad::integrate(|t| self.eval(t).powi(power), a, b, 1e-11, 1e-300)
    }

    /// Minimum and maximum of `s` over `points` equispaced nodes of `[a, b]`.
    fn extremes(&self, a: f64, b: f64, points: usize) -> (f64, f64) {
        let points = points.max(2);
        let h = (b - a) / (points - 1) as f64;
        (0..points)
            .map(|i| self.eval(if i + 1 == points { b } else { a + i as f64 * h }))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// A drift coefficient `b(t, x)`.
pub trait Drift: Send + Sync {
    fn eval(&self, t: f64, x: f64) -> f64;

    fn name(&self) -> String {
        "custom".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDispersion(pub f64);

impl Dispersion for ConstantDispersion {
    fn eval(&self, _t: f64) -> f64 {
        self.0
    }

    fn name(&self) -> String {
        format!("const:{}", self.0)
    }

    fn integral_pow(&self, a: f64, b: f64, power: i32) -> Result<f64> {
        Ok(self.0.powi(power) * (b - a))
    }

    fn extremes(&self, _a: f64, _b: f64, _points: usize) -> (f64, f64) {
        (self.0, self.0)
    }
}

/// `s1(t) = 3/2 + sin(2(4t - 2)) + 2 exp(-16 (4t - 2)^2)`.
pub fn bench_s1(t: f64) -> f64 {
    let u = 4.0 * t - 2.0;
    1.5 + (2.0 * u).sin() + 2.0 * (-16.0 * u * u).exp()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BenchS1;

impl Dispersion for BenchS1 {
    fn eval(&self, t: f64) -> f64 {
        bench_s1(t)
    }

    fn name(&self) -> String {
        "s1".to_string()
    }
}

/// `b1(x) = -10 x + 20`.
pub fn bench_b1(x: f64) -> f64 {
    -10.0 * x + 20.0
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn eval(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }

    fn name(&self) -> String {
        "zero".to_string()
    }
}

/// `b(t, x) = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDrift {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineDrift {
    pub fn b1() -> Self {
        AffineDrift { slope: -10.0, intercept: 20.0 }
    }
}

impl Drift for AffineDrift {
    fn eval(&self, _t: f64, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    fn name(&self) -> String {
        if *self == AffineDrift::b1() {
            "b1".to_string()
        } else {
            format!("affine:{},{}", self.slope, self.intercept)
        }
    }
}

/// Closure-backed dispersion.
pub struct FnDispersion<F> {
    pub name: String,
    pub f: F,
}

impl<F: Fn(f64) -> f64 + Send + Sync> Dispersion for FnDispersion<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Closure-backed drift.
pub struct FnDrift<F> {
    pub name: String,
    pub f: F,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> Drift for FnDrift<F> {
    fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Piecewise-linear function on an equispaced grid of `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDispersion {
    name: String,
    horizon: f64,
    values: Vec<f64>,
}

impl TabulatedDispersion {
    pub fn new(name: impl Into<String>, horizon: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("tabulated function needs at least 2 nodes"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(TabulatedDispersion { name: name.into(), horizon, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn step(&self) -> f64 {
        self.horizon / (self.values.len() - 1) as f64
    }

    /// Segment index and fractional position for time `t`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.values.len() - 2;
        let u = (t / self.step()).max(0.0);
        let i = (u.floor() as usize).min(last);
        (i, (u - i as f64).clamp(0.0, 1.0))
    }

    fn segment_pow(y0: f64, y1: f64, width: f64, power: i32) -> f64 {
        // ∫ of the p-th power of a linear segment: width * Σ y0^{p-j} y1^j / (p+1).
        let p = power.max(0) as usize;
        let mut sum = 0.0;
        for j in 0..=p {
            sum += y0.powi((p - j) as i32) * y1.powi(j as i32);
        }
        width * sum / (p + 1) as f64
    }
}

impl Dispersion for TabulatedDispersion {
    fn eval(&self, t: f64) -> f64 {
        let (i, w) = self.locate(t);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn integral_pow(&self, a: f64, b: f64, power: i32) -> Result<f64> {
        if power < 0 {
            return quad::integrate(|t| self.eval(t).powi(power), a, b, 1e-11, 1e-300);
        }
        if b < a {
            return self.integral_pow(b, a, power).map(|v| -v);
        }
        let h = self.step();
        let (ia, _) = self.locate(a);
        let (ib, _) = self.locate(b);
        let mut total = 0.0;
        for i in ia..=ib {
            let lo = a.max(i as f64 * h);
            let hi = b.min((i + 1) as f64 * h);
            if hi <= lo {
                continue;
            }
            total += Self::segment_pow(self.eval(lo), self.eval(hi), hi - lo, power);
        }
        Ok(total)
    }

    fn extremes(&self, a: f64, b: f64, _points: usize) -> (f64, f64) {
        // Piecewise linear: extremes sit on knots or on the endpoints.
        let h = self.step();
        let (ia, _) = self.locate(a);
        let (ib, _) = self.locate(b);
        let mut lo = self.eval(a).min(self.eval(b));
        let mut hi = self.eval(a).max(self.eval(b));
        for k in ia + 1..=ib {
            let t = k as f64 * h;
            if t > a && t < b {
                lo = lo.min(self.values[k]);
                hi = hi.max(self.values[k]);
            }
        }
        (lo, hi)
    }
}

/// Fine-grid simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fine_grid_points: usize,
    pub horizon: f64,
    pub x0: f64,
    pub seed: u64,
    /// Lower bound the dispersion must respect on the grid. Zero admits
    /// degenerate (noise-free) runs.
    pub kappa: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            fine_grid_points: 800_001,
            horizon: 1.0,
            x0: 0.0,
            seed: 0,
            kappa: 1e-10,
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        SimConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fine_grid_points < 2 {
            return Err(Error::domain("fine grid needs at least 2 points"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !self.x0.is_finite() {
            return Err(Error::domain("initial value must be finite"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.fine_grid_points - 1) as f64
    }
}

/// Equispaced observations `X_{t_0}, ..., X_{t_n}` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPath {
    values: Vec<f64>,
    horizon: f64,
}

impl ObservedPath {
    pub fn new(values: Vec<f64>, horizon: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("a path needs at least two observations"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite observation at index {i}")));
        }
        Ok(ObservedPath { values, horizon })
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n() as f64
    }

    /// `Y_i = X_{t_i} - X_{t_{i-1}}`, `i = 1..=n`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        ObservedPath::new(self.values.iter().map(|v| v * c).collect(), self.horizon)
    }
}

/// Euler-Maruyama on the fine grid of `cfg`.
///
/// `X_{k+1} = X_k + b(t_k, X_k) Δ + s(t_k) √Δ ξ_k`. One standard normal is
/// drawn per step in grid order, so two runs with the same seed share their
/// noise regardless of drift or dispersion.
pub fn euler_simulate(cfg: &SimConfig, drift: &dyn Drift, dispersion: &dyn Dispersion) -> Result<Vec<f64>> {
    cfg.validate()?;
    let steps = cfg.fine_grid_points - 1;
    let dt = cfg.step();
    let sqrt_dt = dt.sqrt();

    let mut disp = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * dt;
        let s = dispersion.eval(t);
        if !s.is_finite() || s < cfg.kappa {
            return Err(Error::domain(format!(
                "dispersion {} = {s} at t = {t} violates the lower bound {}",
                dispersion.name(),
                cfg.kappa
            )));
        }
        disp.push(s);
    }

    let mut rng = rng_from_seed(cfg.seed);
    let mut path = Vec::with_capacity(cfg.fine_grid_points);
    let mut x = cfg.x0;
    path.push(x);
    for (k, s) in disp.into_iter().enumerate() {
        let t = k as f64 * dt;
        let xi: f64 = rng.sample(StandardNormal);
        x += drift.eval(t, x) * dt + s * sqrt_dt * xi;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k + 1, t: t + dt, x });
        }
        path.push(x);
    }
    Ok(path)
}

/// Keep every `(len - 1) / n`-th point, both endpoints included.
pub fn subsample(fine: &[f64], n: usize, horizon: f64) -> Result<ObservedPath> {
    if fine.len() < 2 || n == 0 {
        return Err(Error::domain("subsample needs a fine path of >= 2 points and n >= 1"));
    }
    let steps = fine.len() - 1;
    if !steps.is_multiple_of(n) {
        return Err(Error::domain(format!(
            "{steps} fine steps are not divisible into {n} observation intervals"
        )));
    }
    let stride = steps / n;
    ObservedPath::new(fine.iter().step_by(stride).copied().collect(), horizon)
}

/// A frozen Wiener path started at 1 (`W_t + 1`), tabulated on the fine
/// grid of `cfg` and redrawn until it stays above `cfg.kappa` (and zero).
pub fn bench_s2(cfg: &SimConfig) -> Result<TabulatedDispersion> {
    cfg.validate()?;
    let floor = cfg.kappa.max(0.0);
    let sqrt_dt = cfg.step().sqrt();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[S2_SEED_TAG]));
    for _ in 0..S2_MAX_ATTEMPTS {
        let mut values = Vec::with_capacity(cfg.fine_grid_points);
        let mut w = 1.0;
        values.push(w);
        let mut ok = true;
        for _ in 1..cfg.fine_grid_points {
            let xi: f64 = rng.sample(StandardNormal);
            w += sqrt_dt * xi;
            if w <= floor {
                ok = false;
                break;
            }
            values.push(w);
        }
        if ok {
            return TabulatedDispersion::new("s2", cfg.horizon, values);
        }
    }
    Err(Error::NonConvergence(format!(
        "no Wiener path above {floor} in {S2_MAX_ATTEMPTS} attempts"
    )))
}

/// Shared handle types used across experiment configurations.
pub type DispersionHandle = Arc<dyn Dispersion>;
pub type DriftHandle = Arc<dyn Drift>;
