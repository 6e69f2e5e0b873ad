//! Compactly supported father wavelets and their periodized dilates on `[0, 1]`.
//!
//! A [`FatherWavelet`] carries its refinement filter together with a dyadic table
//! of exact values at the points `i / 2^L` of its support `[0, B]`, produced by
//! [`cascade_refine`]. Off-grid values are interpolated linearly (Daubechies) or
//! read as a right-open step function (Haar).
//!
//! Translates follow the 1-based convention `k = 1..=2^j`, where translate `k`
//! is anchored at `(k - 1) / 2^j`; with periodization the family is the same
//! set of functions as any other labelling of the shifts.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default cascade depth.
pub const DEFAULT_TABLE_LEVEL: u32 = 12;

/// How values between dyadic nodes are read from the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Piecewise constant, right-open cells (Haar).
    Step,
    /// Piecewise linear between nodes.
    Linear,
}

/// Supported scaling functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletKind {
    Haar,
    Daubechies(usize),
}

impl WaveletKind {
    pub fn build(self) -> Result<FatherWavelet> {
        match self {
            WaveletKind::Haar => Ok(haar_father()),
            WaveletKind::Daubechies(order) => daubechies_father(order),
        }
    }
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveletKind::Haar => write!(f, "haar"),
            WaveletKind::Daubechies(n) => write!(f, "db{n}"),
        }
    }
}

impl FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "haar" || lower == "db1" {
            return Ok(WaveletKind::Haar);
        }
        let digits = lower
            .strip_prefix("daubechies")
            .or_else(|| lower.strip_prefix("db"))
            .or_else(|| lower.strip_prefix('d'))
            .ok_or_else(|| Error::Parse(format!("unknown wavelet '{s}'")))?;
        let order: usize = digits
            .parse()
            .map_err(|_| Error::Parse(format!("unknown wavelet '{s}'")))?;
        match order {
            1 => Ok(WaveletKind::Haar),
            2..=4 => Ok(WaveletKind::Daubechies(order)),
            _ => Err(Error::UnsupportedOrder(order)),
        }
    }
}

/// Values of a scaling function at the dyadic points `i / 2^level` of `[0, B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicTable {
    pub level: u32,
    pub values: Vec<f64>,
}

impl DyadicTable {
    /// Number of table nodes per unit length.
    pub fn nodes_per_unit(&self) -> usize {
        1usize << self.level
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.nodes_per_unit() as f64
    }
}

/// A compactly supported father wavelet with support `[0, support_end]`.
#[derive(Debug, Clone)]
pub struct FatherWavelet {
    pub name: String,
    pub kind: WaveletKind,
    pub filter: Vec<f64>,
    pub support_end: usize,
    pub vanishing_moments: usize,
    pub table: DyadicTable,
    pub interpolation: Interpolation,
    sup_abs: f64,
}

/// The Haar scaling function `1_[0,1)`.
pub fn haar_father() -> FatherWavelet {
    haar_father_at(DEFAULT_TABLE_LEVEL)
}

pub fn haar_father_at(level: u32) -> FatherWavelet {
    let filter = vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2];
    let table = cascade_refine(&filter, level).expect("Haar filter is valid");
    FatherWavelet::from_parts("haar", WaveletKind::Haar, filter, 1, table, Interpolation::Step)
}

/// Extremal-phase Daubechies scaling function with `order` vanishing moments.
pub fn daubechies_father(order: usize) -> Result<FatherWavelet> {
    daubechies_father_at(order, DEFAULT_TABLE_LEVEL)
}

pub fn daubechies_father_at(order: usize, level: u32) -> Result<FatherWavelet> {
    let filter = daubechies_filter(order)?;
    let table = cascade_refine(&filter, level)?;
    Ok(FatherWavelet::from_parts(
        &format!("db{order}"),
        WaveletKind::Daubechies(order),
        filter,
        order,
        table,
        Interpolation::Linear,
    ))
}

/// Refinement filter `h_0..h_{2N-1}` normalized to `sum h = sqrt(2)`, from the
/// minimum-phase spectral factorization (high-precision values).
pub fn daubechies_filter(order: usize) -> Result<Vec<f64>> {
    match order {
        2 => {
            let s3 = 3f64.sqrt();
            let norm = 4.0 * SQRT_2;
            Ok(vec![(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm, (1.0 - s3) / norm])
        }
        3 => Ok(vec![
            0.332_670_552_950_082_616,
            0.806_891_509_311_092_576_5,
            0.459_877_502_118_491_570_1,
            -0.135_011_020_010_254_588_7,
            -0.085_441_273_882_026_661_69,
            0.035_226_291_885_709_536_6,
        ]),
        4 => Ok(vec![
            0.230_377_813_308_896_500_9,
            0.714_846_570_552_915_647_1,
            0.630_880_767_929_858_907_9,
            -0.027_983_769_416_859_854_21,
            -0.187_034_811_719_093_084_1,
            0.030_841_381_835_560_763_63,
            0.032_883_011_666_885_199_74,
            -0.010_597_401_785_069_032_11,
        ]),
        _ => Err(Error::UnsupportedOrder(order)),
    }
}
/// Tabulates the scaling function of `filter` at spacing `2^-level`.
///
/// Integer-point values come from the eigenvector of the refinement matrix at
/// eigenvalue 1 (normalized to sum to one); each further level fills the odd
/// dyadic points through the two-scale relation.
pub fn cascade_refine(filter: &[f64], level: u32) -> Result<DyadicTable> {
    if filter.len() < 2 {
        return Err(Error::InvalidFilter("need at least two coefficients".into()));
    }
    if level < 1 || level > 24 {
        return Err(Error::InvalidFilter(format!("table level {level} outside 1..=24")));
    }
    let sum: f64 = filter.iter().sum();
    if (sum - SQRT_2).abs() > 1e-10 {
        return Err(Error::InvalidFilter(format!("coefficients sum to {sum}, not sqrt(2)")));
    }
    let support = filter.len() - 1;
    let integer_values = integer_point_values(filter)?;

    let per_unit = 1usize << level;
    let len = support * per_unit + 1;
    let mut values = vec![0.0; len];
    for (k, v) in integer_values.iter().enumerate() {
        values[k * per_unit] = *v;
    }
    for l in 1..=level {
        let step = 1usize << (level - l);
        let mut i = step;
        while i < len {
            let mut acc = 0.0;
            for (k, h) in filter.iter().enumerate() {
                let idx = 2 * i as i64 - (k * per_unit) as i64;
                if idx >= 0 && (idx as usize) < len {
                    acc += two_scale_weight(*h) * values[idx as usize];
                }
            }
            values[i] = acc;
            i += 2 * step;
        }
    }
    Ok(DyadicTable { level, values })
}

/// `phi(0), .., phi(B-1)`; `phi(B)` is zero under the right-open convention.
fn integer_point_values(filter: &[f64]) -> Result<Vec<f64>> {
    let b = filter.len() - 1;
    let mut a = DMatrix::<f64>::zeros(b + 1, b);
    for k in 0..b {
        for i in 0..b {
            let m = 2 * k as i64 - i as i64;
            if m >= 0 && (m as usize) < filter.len() {
                a[(k, i)] = two_scale_weight(filter[m as usize]);
            }
        }
        a[(k, k)] -= 1.0;
    }
    for i in 0..b {
        a[(b, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(b + 1);
    rhs[b] = 1.0;
    let svd = a.clone().svd(true, true);
    let v = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidFilter(e.to_string()))?;
    let residual = (&a * &v - &rhs).amax();
    if !residual.is_finite() || residual > 1e-9 {
        return Err(Error::InvalidFilter(
            "refinement matrix has no eigenvalue-1 eigenvector".into(),
        ));
    }
    let total: f64 = v.iter().sum();
    Ok(v.iter().map(|x| x / total).collect())
}

impl FatherWavelet {
    fn from_parts(
        name: &str,
        kind: WaveletKind,
        filter: Vec<f64>,
        vanishing_moments: usize,
        table: DyadicTable,
        interpolation: Interpolation,
    ) -> Self {
        let support_end = filter.len() - 1;
        let sup_abs = table.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        FatherWavelet {
            name: name.to_string(),
            kind,
            filter,
            support_end,
            vanishing_moments,
            table,
            interpolation,
            sup_abs,
        }
    }

    /// `phi(x)`; zero outside `[0, B)`.
    pub fn eval(&self, x: f64) -> f64 {
        let b = self.support_end as f64;
        if !(0.0..b).contains(&x) {
            return 0.0;
        }
        let pos = x * self.table.nodes_per_unit() as f64;
        let i = pos.floor() as usize;
        match self.interpolation {
            Interpolation::Step => self.table.values[i],
            Interpolation::Linear => {
                let t = pos - i as f64;
                let v = &self.table.values;
                if t == 0.0 {
                    v[i]
                } else {
                    v[i] * (1.0 - t) + v[i + 1] * t
                }
            }
        }
    }

    /// Left limit `phi(x-)`; differs from [`eval`](Self::eval) only at the jumps of a step function.
    pub fn eval_left(&self, x: f64) -> f64 {
        let b = self.support_end as f64;
        match self.interpolation {
            Interpolation::Linear => self.eval(x),
            Interpolation::Step => {
                if x <= 0.0 || x > b {
                    return 0.0;
                }
                let pos = x * self.table.nodes_per_unit() as f64;
                let i = pos.ceil() as usize - 1;
                self.table.values[i]
            }
        }
    }

    /// `sup |phi|` over the table.
    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    /// Visits every shift `s` in `0..period` with `phi_per(x - s) != 0`, where
    /// `phi_per` is the `period`-periodization of `phi`. Shifts may repeat when
    /// the support is longer than the period; callers accumulate.
    ///
    /// With `left_limit`, values are left limits in `x`.
    #[inline]
    pub fn for_each_translate<F: FnMut(usize, f64)>(
        &self,
        x: f64,
        period: usize,
        left_limit: bool,
        mut f: F,
    ) {
        let left = left_limit && self.interpolation == Interpolation::Step;
        let base = if left { x.ceil() - 1.0 } else { x.floor() };
        let frac = x - base;
        let p = period as i64;
        let base = base as i64;
        for b in 0..self.support_end {
            let z = frac + b as f64;
            let v = if left { self.eval_left(z) } else { self.eval(z) };
            if v != 0.0 {
                let s = (base - b as i64).rem_euclid(p) as usize;
                f(s, v);
            }
        }
    }

    /// Collects [`for_each_translate`](Self::for_each_translate) into one entry per shift.
    #[inline]
    pub fn translates(&self, x: f64, period: usize, left_limit: bool) -> Translates {
        let mut t = Translates::new();
        self.for_each_translate(x, period, left_limit, |s, v| t.add(s, v));
        t
    }

    /// `phi_per(x - shift)` for a 0-based shift.
    pub fn periodized(&self, x: f64, period: usize, shift: usize, left_limit: bool) -> f64 {
        self.translates(x, period, left_limit).value_at(shift)
    }

    /// `phi_{j,k}(u) = 2^{j/2} phi_per(2^j u - (k - 1))` for `k` in `1..=2^j`.
    ///
    /// At `u = 1` the left limit is taken, so the value 1 belongs to the last
    /// dyadic cell.
    pub fn phi_jk(&self, j: u32, k: usize, u: f64) -> Result<f64> {
        let period = 1usize << j;
        if k < 1 || k > period {
            return Err(Error::TranslateOutOfRange { k, max: period });
        }
        let x = u * period as f64;
        Ok(half_power_of_two(j) * self.periodized(x, period, k - 1, u >= 1.0))
    }

    /// `theta(x) = sum_k |phi(x - k)|` over all integer shifts.
    pub fn theta_phi(&self, x: f64) -> f64 {
        let frac = x - x.floor();
        (0..self.support_end).map(|b| self.eval(frac + b as f64).abs()).sum()
    }

    /// Largest violation of the two-scale relation over the table nodes.
    pub fn two_scale_residual(&self) -> f64 {
        let per_unit = self.table.nodes_per_unit();
        let v = &self.table.values;
        let mut worst = 0.0f64;
        for i in 0..v.len() {
            let mut acc = 0.0;
            for (k, h) in self.filter.iter().enumerate() {
                let idx = 2 * i as i64 - (k * per_unit) as i64;
                if idx >= 0 && (idx as usize) < v.len() {
                    acc += two_scale_weight(*h) * v[idx as usize];
                }
            }
            worst = worst.max((v[i] - acc).abs());
        }
        worst
    }

    /// `int phi` by the periodic trapezoid rule on the table.
    pub fn integral(&self) -> f64 {
        let v = &self.table.values;
        v[..v.len() - 1].iter().sum::<f64>() * self.table.spacing()
    }

    /// Gram matrix `int_0^1 phi_{j,k} phi_{j,k'}` by the periodic trapezoid rule at
    /// spacing `2^-(L + j)`, i.e. on the table nodes.
    pub fn gram_matrix(&self, j: u32) -> Vec<Vec<f64>> {
        let period = 1usize << j;
        let per_unit = self.table.nodes_per_unit();
        let nodes = period * per_unit;
        let mut gram = vec![vec![0.0; period]; period];
        for i in 0..nodes {
            let x = i as f64 / per_unit as f64;
            let active = self.translates(x, period, false);
            for &(a, va) in active.as_slice() {
                for &(b, vb) in active.as_slice() {
                    gram[a][b] += va * vb;
                }
            }
        }
        // 2^j from the squared normalization, 2^-(L+j) from the node spacing.
        let weight = 1.0 / per_unit as f64;
        for row in &mut gram {
            for g in row.iter_mut() {
                *g *= weight;
            }
        }
        gram
    }
}

/// Shifts with a nonzero periodized value at one point, at most one entry per shift.
#[derive(Debug, Clone, Copy)]
pub struct Translates {
    items: [(usize, f64); MAX_SUPPORT],
    len: usize,
}

/// Longest support handled (Daubechies order 4 has `B = 7`).
pub const MAX_SUPPORT: usize = 8;

impl Translates {
    fn new() -> Self {
        Translates { items: [(0, 0.0); MAX_SUPPORT], len: 0 }
    }

    fn add(&mut self, s: usize, v: f64) {
        if let Some(e) = self.items[..self.len].iter_mut().find(|e| e.0 == s) {
            e.1 += v;
        } else {
            self.items[self.len] = (s, v);
            self.len += 1;
        }
    }

    pub fn as_slice(&self) -> &[(usize, f64)] {
        &self.items[..self.len]
    }

    pub fn value_at(&self, shift: usize) -> f64 {
        self.as_slice().iter().find(|e| e.0 == shift).map_or(0.0, |e| e.1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// `sqrt(2) * h`, written as `2h / sqrt(2)` so that the Haar weight is exactly one.
#[inline]
fn two_scale_weight(h: f64) -> f64 {
    2.0 * h / SQRT_2
}

/// `2^{e/2}`, exact whenever `e` is even.
pub fn half_power_of_two(e: u32) -> f64 {
    let whole = (2f64).powi((e / 2) as i32);
    if e % 2 == 0 {
        whole
    } else {
        whole * SQRT_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_eval_convention() {
        let h = haar_father();
        assert_eq!(h.eval(0.5), 1.0);
        assert_eq!(h.eval(1.0), 0.0);
        assert_eq!(h.eval(-0.1), 0.0);
        assert_eq!(h.eval(0.0), 1.0);
        assert_eq!(h.eval_left(1.0), 1.0);
        assert_eq!(h.eval_left(0.0), 0.0);
        assert_eq!(h.support_end, 1);
        assert_eq!(h.vanishing_moments, 1);
    }

    #[test]
    fn haar_cascade_is_indicator() {
        let f = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        let t = cascade_refine(&f, 3).unwrap();
        assert_eq!(t.values.len(), 9);
        assert!(t.values[..8].iter().all(|&v| v == 1.0));
        assert_eq!(t.values[8], 0.0);
    }

    #[test]
    fn invalid_filters_rejected() {
        assert!(cascade_refine(&[0.0, 0.0, 0.0, 0.0], 4).is_err());
        assert!(cascade_refine(&[1.0], 4).is_err());
        assert!(matches!(daubechies_father(5), Err(Error::UnsupportedOrder(5))));
        assert!(matches!(daubechies_father(1), Err(Error::UnsupportedOrder(1))));
    }

    #[test]
    fn filters_sum_to_sqrt2_and_are_orthonormal() {
        for order in 2..=4 {
            let h = daubechies_filter(order).unwrap();
            let s: f64 = h.iter().sum();
            assert!((s - SQRT_2).abs() < 1e-12, "order {order}: {s}");
            for shift in 0..order {
                let dot: f64 = (0..h.len())
                    .filter(|&k| k + 2 * shift < h.len())
                    .map(|k| h[k] * h[k + 2 * shift])
                    .sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "order {order} shift {shift}: {dot}");
            }
        }
    }

    #[test]
    fn db2_integer_values_match_eigenproblem() {
        // 2x2 block of the refinement matrix on phi(1), phi(2):
        // [sqrt2 h1, sqrt2 h0; sqrt2 h3, sqrt2 h2]; phi(0) = 0.
        let h = daubechies_filter(2).unwrap();
        let (a, b) = (SQRT_2 * h[1] - 1.0, SQRT_2 * h[0]);
        // (a) v1 + b v2 = 0 with v1 + v2 = 1
        let v1 = b / (b - a);
        let v2 = 1.0 - v1;
        let w = daubechies_father(2).unwrap();
        let per = w.table.nodes_per_unit();
        assert!(w.table.values[0].abs() < 1e-14);
        assert!((w.table.values[per] - v1).abs() < 1e-12);
        assert!((w.table.values[2 * per] - v2).abs() < 1e-12);
        assert!((v1 - (1.0 + 3f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn db2_integral_and_partition_of_unity() {
        let w = daubechies_father(2).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-6);
        let x = 0.37;
        let s: f64 = (-3..=3).map(|k| w.eval(x - k as f64)).sum();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn cascade_satisfies_two_scale_relation() {
        for order in 2..=4 {
            let w = daubechies_father(order).unwrap();
            assert!(w.two_scale_residual() < 1e-8, "order {order}");
            assert_eq!(w.table.values.len(), w.support_end * (1 << 12) + 1);
        }
        assert_eq!(haar_father().two_scale_residual(), 0.0);
    }

    #[test]
    fn phi_jk_examples() {
        let h = haar_father();
        assert_eq!(h.phi_jk(2, 2, 0.3).unwrap(), 2.0);
        assert_eq!(h.phi_jk(2, 1, 0.3).unwrap(), 0.0);
        assert_eq!(h.phi_jk(0, 1, 0.5).unwrap(), 1.0);
        assert_eq!(h.phi_jk(2, 4, 1.0).unwrap(), 2.0);
        assert_eq!(h.phi_jk(2, 1, 1.0).unwrap(), 0.0);
        assert!(h.phi_jk(2, 0, 0.3).is_err());
        assert!(h.phi_jk(2, 5, 0.3).is_err());
    }

    #[test]
    fn phi_jk_matches_brute_force_periodization() {
        let w = daubechies_father(3).unwrap();
        for &j in &[1u32, 2, 3] {
            let p = 1i64 << j;
            for k in 1..=p as usize {
                for &u in &[0.03, 0.2, 0.5, 0.77, 0.99] {
                    let x = u * p as f64 - (k as f64 - 1.0);
                    let brute: f64 = (-10..=10).map(|m| w.eval(x + (m * p) as f64)).sum();
                    let want = (2f64).powf(j as f64 / 2.0) * brute;
                    let got = w.phi_jk(j, k, u).unwrap();
                    assert!((got - want).abs() < 1e-12, "j={j} k={k} u={u}");
                }
            }
        }
    }

    #[test]
    fn theta_phi_values() {
        let h = haar_father();
        for &x in &[0.5, -3.2, 7.0, 0.0, 0.999] {
            assert_eq!(h.theta_phi(x), 1.0);
        }
        let w = daubechies_father(2).unwrap();
        let t = w.theta_phi(0.25);
        assert!(t.is_finite() && t <= w.support_end as f64 * w.sup_abs());
        assert!(t >= 1.0 - 1e-12);
    }

    #[test]
    fn gram_haar_exact_identity() {
        let h = haar_father();
        let g = h.gram_matrix(3);
        for (a, row) in g.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                assert_eq!(*v, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn parses_wavelet_names() {
        assert_eq!("haar".parse::<WaveletKind>().unwrap(), WaveletKind::Haar);
        assert_eq!("db3".parse::<WaveletKind>().unwrap(), WaveletKind::Daubechies(3));
        assert_eq!("Daubechies4".parse::<WaveletKind>().unwrap(), WaveletKind::Daubechies(4));
        assert!("db9".parse::<WaveletKind>().is_err());
        assert!("sym2".parse::<WaveletKind>().is_err());
    }
}
