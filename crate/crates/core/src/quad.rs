//! Adaptive Gauss–Kronrod quadrature on intervals and boxes.

use std::cell::Cell;

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
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Maximum bisection depth for one-dimensional integrals.
pub const MAX_DEPTH: u32 = 40;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: (f64, f64),
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let (value, err) = whole;
    if !value.is_finite() {
        return Err(Error::QuadratureDidNotConverge(depth));
    }
    if err <= tol || (b - a) < 1e-15 {
        return Ok(value);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::QuadratureDidNotConverge(depth));
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    Ok(adapt(f, a, m, left, 0.5 * tol, depth + 1)? + adapt(f, m, b, right, 0.5 * tol, depth + 1)?)
}

/// `int_a^b f` to `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let whole = gk15(&f, a, b);
    let tol = abs_tol.max(rel_tol * whole.0.abs());
    adapt(&f, a, b, whole, tol, 0)
}

/// Iterated integral of `f` over the box `[lo, hi]`.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], tol: f64) -> Result<f64> {
    assert_eq!(lo.len(), hi.len());
    nested(f, lo, hi, tol, &[])
}

fn nested<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], tol: f64, prefix: &[f64]) -> Result<f64> {
    let axis = prefix.len();
    let with = |x: f64| {
        let mut p = prefix.to_vec();
        p.push(x);
        p
    };
    if axis + 1 == lo.len() {
        return integrate(|x| f(&with(x)), lo[axis], hi[axis], tol, tol);
    }
    let failed = Cell::new(false);
    let value = integrate(
        |x| {
            nested(f, lo, hi, 0.1 * tol, &with(x)).unwrap_or_else(|_| {
                failed.set(true);
                f64::NAN
            })
        },
        lo[axis],
        hi[axis],
        tol,
        tol,
    );
    if failed.get() {
        return Err(Error::QuadratureDidNotConverge(MAX_DEPTH));
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        let v = integrate(|x| 1.0 / (1e-3 + x * x), -1.0, 1.0, 1e-12, 1e-12).unwrap();
        let want = 2.0 * (1.0 / 1e-3f64.sqrt()) * (1.0 / 1e-3f64.sqrt()).atan();
        assert!((v - want).abs() < 1e-8 * want);
    }

    #[test]
    fn box_integral() {
        let f = |p: &[f64]| p[0] * p[1].exp();
        let v = integrate_box(&f, &[0.0, 0.0], &[1.0, 1.0], 1e-12).unwrap();
        assert!((v - 0.5 * (1f64.exp() - 1.0)).abs() < 1e-11);
    }
}
