//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 2000;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrate `f` over `[a, b]` until the estimated error is below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("infinite interval [{a}, {b}]")));
    }
    let (i0, e0) = kronrod(&f, a, b);
    let mut pieces = vec![(a, b, i0, e0)];
    let mut total = i0;
    let mut err = e0;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}]: estimate {total}, error {err}"
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, iv, ev) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (il, el) = kronrod(&f, lo, mid);
        let (ir, er) = kronrod(&f, mid, hi);
        total += il + ir - iv;
        err += el + er - ev;
        pieces.push((lo, mid, il, el));
        pieces.push((mid, hi, ir, er));
    }
    // Re-sum to shed the drift of the running update.
    Ok(pieces.iter().map(|p| p.2).sum())
}
