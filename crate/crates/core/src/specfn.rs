//! Special functions and the inverse-gamma distribution.
//!
//! Everything is self-contained: log-gamma via a shifted Stirling series,
//! digamma via recurrence plus asymptotic expansion, the regularized
//! incomplete gamma via series / continued fraction, and its inverse by
//! bracketed Halley-Newton iteration.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_SERIES_ITERS: usize = 1_000_000;
const MAX_NEWTON_ITERS: usize = 200;

// Stirling series B_{2k} / (2k (2k - 1)), k = 1..8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// Digamma asymptotic series B_{2k} / (2k), k = 1..7.
const DIGAMMA_ASYMP: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]` for `x >= 10`.
fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} requires a positive finite argument, got {x}")))
    }
}

/// Natural logarithm of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x);
    }
    // Γ(x) = Γ(x + k) / (x (x+1) ... (x+k-1))
    let mut z = x;
    let mut prod = 1.0;
    while z < 10.0 {
        prod *= z;
        z += 1.0;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_tail(z) - prod.ln()
}

/// The digamma function `Ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    let mut z = x;
    let mut acc = 0.0;
    while z < 6.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut series = 0.0;
    for c in DIGAMMA_ASYMP.iter().rev() {
        series = series * inv2 + c;
    }
    Ok(acc + z.ln() - 0.5 / z - series * inv2)
}

/// `a ln x - x - ln Γ(a)`, the log of the gamma density kernel times `x`.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    if a >= 10.0 {
        // Rewritten around x = a to avoid cancelling two large terms.
        let u = (x - a) / a;
        a * (u.ln_1p() - u) + 0.5 * a.ln() - HALF_LN_2PI - stirling_tail(a)
    } else {
        a * x.ln() - x - ln_gamma_unchecked(a)
    }
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    check_positive("incomplete gamma shape", a)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    Ok(())
}

fn series_p(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_SERIES_ITERS {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            return Ok(sum * ln_prefactor(a, x).exp());
        }
    }
    Err(Error::NonConvergence(format!("gamma series at a={a}, x={x}")))
}

fn continued_fraction_q(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_SERIES_ITERS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h * ln_prefactor(a, x).exp());
        }
    }
    Err(Error::NonConvergence(format!("gamma continued fraction at a={a}, x={x}")))
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_cdf_reg(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        series_p(a, x).map(|p| p.min(1.0))
    } else {
        continued_fraction_q(a, x).map(|q| (1.0 - q).clamp(0.0, 1.0))
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, computed
/// directly in the tail so small values keep their relative precision.
pub fn gamma_sf_reg(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        series_p(a, x).map(|p| (1.0 - p).clamp(0.0, 1.0))
    } else {
        continued_fraction_q(a, x).map(|q| q.min(1.0))
    }
}

fn initial_guess(a: f64, p: f64) -> f64 {
    if a > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        let w = 1.0 - 1.0 / (9.0 * a) - z / (3.0 * a.sqrt());
        (a * w * w * w).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            (p / t).powf(1.0 / a)
        } else {
            1.0 - (1.0 - (p - t) / (1.0 - t)).ln()
        }
    }
}

/// Solve `P(a, x) = p` (or `Q(a, x) = p` when `upper`).
fn invert_gamma(a: f64, p: f64, upper: bool) -> Result<f64> {
    check_positive("gamma quantile shape", a)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("gamma quantile requires 0 < p < 1, got {p}")));
    }
    let lower_p = if upper { 1.0 - p } else { p };
    // Near zero P(a, x) ~ x^a / Γ(a + 1).
    let ln_small = (lower_p.ln() + ln_gamma_unchecked(a + 1.0)) / a;
    if ln_small < f64::MIN_POSITIVE.ln() {
        return Err(Error::domain(format!(
            "gamma quantile at a={a}, lower tail {lower_p} is below the smallest positive double"
        )));
    }
    // Iterate on u = ln x, where dP/du = x^a e^{-x} / Γ(a) stays well scaled
    // for tiny quantiles.
    let mut u = initial_guess(a, lower_p).ln();
    if !u.is_finite() {
        u = ln_small;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..MAX_NEWTON_ITERS {
        let x = u.exp();
        // err > 0 means x lies above the root.
        let err = if upper {
            p - gamma_sf_reg(a, x)?
        } else {
            gamma_cdf_reg(a, x)? - p
        };
        if err == 0.0 {
            return Ok(x);
        }
        if err > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let slope = ln_prefactor(a, x).exp();
        let mut next = f64::NAN;
        if slope > 0.0 && slope.is_finite() {
            let t = err / slope;
            let halley = t * (a - x);
            next = u - t / (1.0 - 0.5 * halley.clamp(-1.0, 1.0));
        }
        if !(next > lo && next < hi) {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + lo.abs().max(1.0),
                _ => hi - hi.abs().max(1.0),
            };
        }
        let step = (next - u).abs();
        u = next;
        let tol = 8.0 * f64::EPSILON * u.abs().max(1.0);
        if step <= tol || hi - lo <= tol {
            return Ok(u.exp());
        }
    }
    Err(Error::NonConvergence(format!(
        "gamma quantile at a={a}, p={p} after {MAX_NEWTON_ITERS} iterations"
    )))
}

/// Quantile of the unit-scale gamma law: `x` with `P(a, x) = p`.
pub fn gamma_quantile_reg(a: f64, p: f64) -> Result<f64> {
    invert_gamma(a, p, false)
}

/// Inverse of the upper tail: `x` with `Q(a, x) = q`.
pub fn gamma_quantile_upper(a: f64, q: f64) -> Result<f64> {
    invert_gamma(a, q, true)
}

/// Draw from Gamma(shape, 1), returned on the log scale.
///
/// Marsaglia-Tsang squeeze for `shape >= 1`; for `shape < 1` the draw is
/// boosted from `shape + 1` by a uniform power.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>();
        return ln_gamma_variate(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = 1.0 - rng.random::<f64>();
        let z2 = z * z;
        if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// Draw from Gamma(shape, 1).
pub fn gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    ln_gamma_variate(shape, rng).exp()
}

/// Inverse-gamma law with density proportional to `x^{-(shape+1)} e^{-scale/x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgDist {
    shape: f64,
    scale: f64,
}

impl IgDist {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        check_positive("inverse-gamma shape", shape)?;
        check_positive("inverse-gamma scale", scale)?;
        Ok(IgDist { shape, scale })
    }

    #[inline]
    pub fn shape(&self) -> f64 {
        self.shape
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `scale / (shape - 1)`, defined for `shape > 1`.
    pub fn mean(&self) -> Result<f64> {
        if self.shape > 1.0 {
            Ok(self.scale / (self.shape - 1.0))
        } else {
            Err(Error::UndefinedMoment(format!(
                "inverse-gamma mean needs shape > 1, got {}",
                self.shape
            )))
        }
    }

    /// `scale^2 / ((shape - 1)^2 (shape - 2))`, defined for `shape > 2`.
    pub fn variance(&self) -> Result<f64> {
        if self.shape > 2.0 {
            let s1 = self.shape - 1.0;
            Ok(self.scale * self.scale / (s1 * s1 * (self.shape - 2.0)))
        } else {
            Err(Error::UndefinedMoment(format!(
                "inverse-gamma variance needs shape > 2, got {}",
                self.shape
            )))
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma_unchecked(self.shape)
            - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// `Pr(X <= x) = Q(shape, scale / x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        gamma_sf_reg(self.shape, self.scale / x)
    }

    /// Quantile function, `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        ig_quantile(self, p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        ig_sample(self, rng)
    }
}

/// `q` with `Pr(X <= q) = p` for `X ~ d`.
pub fn ig_quantile(d: &IgDist, p: f64) -> Result<f64> {
    let g = gamma_quantile_upper(d.shape, p)?;
    Ok(d.scale / g)
}

/// One draw from `d`, as `scale / Gamma(shape, 1)`.
pub fn ig_sample<R: Rng + ?Sized>(d: &IgDist, rng: &mut R) -> f64 {
    (d.scale.ln() - ln_gamma_variate(d.shape, rng)).exp()
}
