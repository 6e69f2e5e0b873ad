//! Projection kernels built from a periodized father wavelet.
//!
//! `K~(x, y) = sum_s phi_P(x - s) phi_P(y - s)` with period `P = 2^j`, its
//! scaled form `2^j K~(2^j x, 2^j y)` on the unit interval, the tensor product
//! over coordinates, and the projection of a density onto the level-`j` space.

use std::sync::Arc;

use crate::copula::Density;
use crate::error::{Error, Result};
use crate::estimator::CoefficientField;
use crate::quad;
use crate::wavelet::{half_power_of_two, FatherWavelet, Interpolation, Translates};

/// Relative change below which the dyadic node sums are accepted.
pub const PROJECTION_REL_TOL: f64 = 1e-6;

/// First node refinement tried by the projection.
const FIRST_REFINEMENT: u32 = 3;

#[derive(Debug, Clone)]
pub struct ProjectionKernel {
    wavelet: Arc<FatherWavelet>,
    level: u32,
    dim: usize,
}

impl ProjectionKernel {
    pub fn new(wavelet: Arc<FatherWavelet>, level: u32, dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        assert!(level < 31, "level too large");
        ProjectionKernel { wavelet, level, dim }
    }

    pub fn wavelet(&self) -> &Arc<FatherWavelet> {
        &self.wavelet
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `P = 2^j`.
    pub fn period(&self) -> usize {
        1usize << self.level
    }

    fn active(&self, x: f64, left_limit: bool) -> Translates {
        self.wavelet.translates(x, self.period(), left_limit)
    }

    /// `K~(x, y)` in kernel-argument scale.
    pub fn ktilde(&self, x: f64, y: f64) -> f64 {
        pair_sum(&self.active(x, false), &self.active(y, false))
    }

    /// `2^j K~(2^j x, 2^j y)` for `x, y` in `[0, 1]`; coordinates equal to 1
    /// use left limits.
    pub fn ktilde_j(&self, x: f64, y: f64) -> f64 {
        let p = self.period() as f64;
        let a = self.active(x * p, x >= 1.0);
        let b = self.active(y * p, y >= 1.0);
        p * pair_sum(&a, &b)
    }

    /// `prod_m 2^j K~(2^j x_m, 2^j y_m)`.
    pub fn kernel_tensor_j(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        x.iter().zip(y).map(|(&a, &b)| self.ktilde_j(a, b)).product()
    }

    /// `int K~(x, y) dx` over one period by the trapezoid rule on the table nodes.
    pub fn kernel_l1(&self, y: f64) -> f64 {
        let ay = self.active(y, false);
        let per_unit = self.wavelet.table.nodes_per_unit();
        let nodes = self.period() * per_unit;
        let mut acc = 0.0;
        for i in 0..nodes {
            let x = i as f64 / per_unit as f64;
            acc += pair_sum(&self.active(x, false), &ay);
        }
        acc / per_unit as f64
    }

    /// `int K~(x, y)^2 dx` over the support of `x -> K~(x, y)`, or one period
    /// when that support wraps.
    pub fn kernel_l2_1d(&self, y: f64) -> f64 {
        let b = self.wavelet.support_end as i64;
        let p = self.period() as i64;
        let per_unit = self.wavelet.table.nodes_per_unit() as i64;
        let width = 2 * b + 1;
        let (start, len) = if width < p { (y.floor() as i64 - b, width) } else { (0, p) };
        let ay = self.active(y, false);
        let mut acc = 0.0;
        for i in 0..len * per_unit {
            let node = start * per_unit + i;
            let x = node.rem_euclid(p * per_unit) as f64 / per_unit as f64;
            let k = pair_sum(&self.active(x, false), &ay);
            acc += k * k;
        }
        acc / per_unit as f64
    }

    /// `int K(x, 2^j u)^2 dx` as a product of univariate integrals.
    pub fn kernel_l2(&self, u: &[f64]) -> f64 {
        let p = self.period() as f64;
        u.iter().map(|&um| self.kernel_l2_1d(um * p)).product()
    }

    /// `||phi||_inf * max theta_phi` estimated on the table nodes of one unit interval.
    pub fn kernel_bound(&self) -> f64 {
        let per_unit = self.wavelet.table.nodes_per_unit();
        let theta = (0..per_unit)
            .map(|i| self.wavelet.theta_phi(i as f64 / per_unit as f64))
            .fold(0.0f64, f64::max);
        self.wavelet.sup_abs() * theta
    }

    /// `E c~(u) = int K_j(v, u) c(v) dv`.
    ///
    /// Haar uses the cell average of `c` over the dyadic cell of `u`. Other
    /// wavelets approximate each coefficient by a dyadic node sum, refined
    /// until the value changes by less than [`PROJECTION_REL_TOL`].
    pub fn project_density(&self, c: &dyn Density, u: &[f64]) -> Result<f64> {
        self.check_dim(c, u.len())?;
        if self.wavelet.interpolation == Interpolation::Step {
            let (lo, hi) = self.cell_of(u);
            return haar_cell_average(c, &lo, &hi);
        }
        let p = self.period() as f64;
        let active: Vec<Translates> = u.iter().map(|&x| self.active(x * p, x >= 1.0)).collect();
        let value_at = |q: u32| -> f64 {
            let mut acc = 0.0;
            for_each_combination(&active, |shifts, weight| {
                acc += weight * self.node_sum(c, shifts, q);
            });
            acc
        };
        self.refine(|q| Ok(vec![value_at(q)])).map(|v| v[0])
    }

    /// All coefficients `alpha_{j,k} = int c phi_{j,k}` of the projection.
    pub fn projection_coefficients(&self, c: &dyn Density) -> Result<CoefficientField> {
        self.check_dim(c, self.dim)?;
        let p = self.period();
        let d = self.dim;
        let total = p.checked_pow(d as u32).filter(|&t| t <= 1 << 26).ok_or(Error::LevelTooLarge {
            level: self.level,
            dim: d,
        })?;
        let scale = half_power_of_two(self.level * d as u32);
        let mut shifts = vec![0usize; d];
        let alpha = if self.wavelet.interpolation == Interpolation::Step {
            let mut alpha = Vec::with_capacity(total);
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            for idx in 0..total {
                unflatten(idx, p, &mut shifts);
                for m in 0..d {
                    lo[m] = shifts[m] as f64 / p as f64;
                    hi[m] = (shifts[m] + 1) as f64 / p as f64;
                }
                alpha.push(haar_cell_average(c, &lo, &hi)? / scale);
            }
            alpha
        } else {
            self.refine(|q| {
                Ok((0..total)
                    .map(|idx| {
                        let mut s = vec![0usize; d];
                        unflatten(idx, p, &mut s);
                        self.node_sum(c, &s, q) / scale
                    })
                    .collect())
            })?
        };
        Ok(CoefficientField::from_parts(self.wavelet.clone(), self.level, d, alpha))
    }

    fn check_dim(&self, c: &dyn Density, got: usize) -> Result<()> {
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: c.dim() });
        }
        if got != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    /// Dyadic cell `[lo, hi)` containing `u`; 1 belongs to the last cell.
    fn cell_of(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.period();
        let idx: Vec<usize> = u.iter().map(|&x| ((x * p as f64).floor() as usize).min(p - 1)).collect();
        let lo = idx.iter().map(|&i| i as f64 / p as f64).collect();
        let hi = idx.iter().map(|&i| (i + 1) as f64 / p as f64).collect();
        (lo, hi)
    }

    /// `sum_t c(v(t)) prod_m phi(t_m) 2^-q` over nodes `t_m = i / 2^q` of the
    /// support, with `v_m = (s_m + t_m) / P` taken modulo 1. Equals
    /// `2^{jd/2} alpha_{j,s}` up to the node-sum error.
    fn node_sum(&self, c: &dyn Density, shifts: &[usize], q: u32) -> f64 {
        let table = &self.wavelet.table;
        let stride = 1usize << (table.level - q);
        let per_q = 1usize << q;
        let count = self.wavelet.support_end * per_q;
        let h = 1.0 / per_q as f64;
        let p = self.period() as f64;
        let axes: Vec<Vec<(f64, f64)>> = shifts
            .iter()
            .map(|&s| {
                let mut axis = Vec::with_capacity(count + 1);
                for i in 0..count {
                    let w = table.values[i * stride] * h;
                    if w == 0.0 {
                        continue;
                    }
                    let v = (s as f64 + i as f64 * h) / p;
                    let wrapped = v - v.floor();
                    if wrapped == 0.0 {
                        // The periodic integrand jumps here; use both one-sided values.
                        axis.push((0.0, 0.5 * w));
                        axis.push((1.0, 0.5 * w));
                    } else {
                        axis.push((wrapped, w));
                    }
                }
                axis
            })
            .collect();
        let d = axes.len();
        let mut point = vec![0.0; d];
        let mut pos = vec![0usize; d];
        if axes.iter().any(|a| a.is_empty()) {
            return 0.0;
        }
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for m in 0..d {
                let (v, wm) = axes[m][pos[m]];
                point[m] = v;
                w *= wm;
            }
            acc += w * c.density(&point);
            let mut m = d;
            loop {
                if m == 0 {
                    return acc;
                }
                m -= 1;
                pos[m] += 1;
                if pos[m] < axes[m].len() {
                    break;
                }
                pos[m] = 0;
            }
        }
    }

    /// Doubles the node refinement, extrapolating the second-order node-sum
    /// error away, until every entry changes by less than the relative tolerance.
    fn refine<F>(&self, mut eval: F) -> Result<Vec<f64>>
    where
        F: FnMut(u32) -> Result<Vec<f64>>,
    {
        let max_q = self.wavelet.table.level;
        let extrapolate = |fine: &[f64], coarse: &[f64]| -> Vec<f64> {
            fine.iter().zip(coarse).map(|(f, c)| f + (f - c) / 3.0).collect()
        };
        let mut q = FIRST_REFINEMENT.min(max_q - 1);
        let mut coarse = eval(q)?;
        q += 1;
        let mut fine = eval(q)?;
        let mut prev = extrapolate(&fine, &coarse);
        while q < max_q {
            q += 1;
            coarse = fine;
            fine = eval(q)?;
            let next = extrapolate(&fine, &coarse);
            let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let change = next.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prev = next;
            if change <= PROJECTION_REL_TOL * scale {
                return Ok(prev);
            }
        }
        Err(Error::QuadratureDidNotConverge(max_q))
    }
}

fn pair_sum(a: &Translates, b: &Translates) -> f64 {
    let mut acc = 0.0;
    for &(s, va) in a.as_slice() {
        for &(t, vb) in b.as_slice() {
            if s == t {
                acc += va * vb;
            }
        }
    }
    acc
}

fn haar_cell_average(c: &dyn Density, lo: &[f64], hi: &[f64]) -> Result<f64> {
    if let Some(v) = c.analytic_cell_average(lo, hi) {
        return Ok(v);
    }
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let integral = quad::integrate_box(&|v: &[f64]| c.density(v), lo, hi, 1e-10 * volume)?;
    Ok(integral / volume)
}

/// Row-major multi-index of `idx` with base `p`, first coordinate slowest.
pub(crate) fn unflatten(mut idx: usize, p: usize, out: &mut [usize]) {
    for m in (0..out.len()).rev() {
        out[m] = idx % p;
        idx /= p;
    }
}

/// Visits every tensor combination of per-coordinate translates with the
/// product of their values.
pub(crate) fn for_each_combination<F: FnMut(&[usize], f64)>(axes: &[Translates], mut f: F) {
    let d = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; d];
    let mut shifts = vec![0usize; d];
    loop {
        let mut w = 1.0;
        for m in 0..d {
            let (s, v) = axes[m].as_slice()[pos[m]];
            shifts[m] = s;
            w *= v;
        }
        f(&shifts, w);
        let mut m = d;
        loop {
            if m == 0 {
                return;
            }
            m -= 1;
            pos[m] += 1;
            if pos[m] < axes[m].len() {
                break;
            }
            pos[m] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{CopulaModel, FnDensity};
    use crate::wavelet::{daubechies_father, WaveletKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(kind: WaveletKind, level: u32, dim: usize) -> ProjectionKernel {
        ProjectionKernel::new(Arc::new(kind.build().unwrap()), level, dim)
    }

    /// `sum_l phi_per(x - l) phi_per(y - l)` by direct summation over shifts and periods.
    fn brute_ktilde(phi: &FatherWavelet, period: usize, x: f64, y: f64) -> f64 {
        let p = period as i64;
        let per = |z: f64| (-20..=20).map(|r| phi.eval(z + (r * p) as f64)).sum::<f64>();
        (0..p).map(|l| per(x - l as f64) * per(y - l as f64)).sum()
    }

    #[test]
    fn haar_ktilde_cells() {
        let k = kernel(WaveletKind::Haar, 3, 1);
        assert_eq!(k.ktilde(0.3, 0.6), 1.0);
        assert_eq!(k.ktilde(0.3, 1.6), 0.0);
        let k2 = kernel(WaveletKind::Haar, 3, 2);
        assert_eq!(k2.kernel_tensor_j(&[0.26, 0.51], &[0.3, 0.62]), 64.0);
        assert_eq!(k2.kernel_tensor_j(&[0.26, 0.51], &[0.3, 0.63]), 0.0);
    }

    #[test]
    fn ktilde_matches_direct_sum() {
        for (order, level) in [(2, 3), (2, 1), (3, 2), (4, 0)] {
            let phi = daubechies_father(order).unwrap();
            let k = ProjectionKernel::new(Arc::new(phi.clone()), level, 1);
            let p = k.period() as f64;
            for &(x, y) in &[(1.2, 1.7), (0.05, 0.9), (3.3, 0.4)] {
                let (x, y) = (x % p, y % p);
                let want = brute_ktilde(&phi, k.period(), x, y);
                assert!((k.ktilde(x, y) - want).abs() < 1e-12, "db{order} j={level}");
            }
        }
    }

    #[test]
    fn ktilde_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [WaveletKind::Haar, WaveletKind::Daubechies(2), WaveletKind::Daubechies(4)] {
            let k = kernel(kind, 3, 1);
            let bound = k.kernel_bound();
            for _ in 0..100 {
                let x = rng.random::<f64>() * 8.0;
                let y = rng.random::<f64>() * 8.0;
                assert!((k.ktilde(x, y) - k.ktilde(y, x)).abs() < 1e-12);
                assert!(k.ktilde(x, y).abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn ktilde_j_reduces_tensor_in_one_dimension() {
        let k = kernel(WaveletKind::Daubechies(3), 2, 1);
        assert_eq!(k.kernel_tensor_j(&[0.31], &[0.4]), k.ktilde_j(0.31, 0.4));
    }

    #[test]
    fn kernel_l1_is_one() {
        assert_eq!(kernel(WaveletKind::Haar, 3, 1).kernel_l1(5.5), 1.0);
        assert!((kernel(WaveletKind::Daubechies(2), 3, 1).kernel_l1(2.37) - 1.0).abs() < 1e-6);
        assert!((kernel(WaveletKind::Daubechies(3), 2, 1).kernel_l1(0.1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kernel_l2_haar_and_tensor() {
        let h = kernel(WaveletKind::Haar, 4, 3);
        assert_eq!(h.kernel_l2(&[0.1, 0.5, 0.97]), 1.0);
        let k1 = kernel(WaveletKind::Daubechies(2), 3, 1);
        let k2 = kernel(WaveletKind::Daubechies(2), 3, 2);
        let a = k1.kernel_l2(&[0.37]);
        assert!((k2.kernel_l2(&[0.37, 0.37]) - a * a).abs() < 1e-10);
    }

    #[test]
    fn kernel_l2_bounded_above_and_below() {
        let k = kernel(WaveletKind::Daubechies(2), 3, 1);
        let vals: Vec<f64> = (1..50).map(|i| k.kernel_l2(&[i as f64 / 50.0])).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.3 && hi < 2.0 + 1e-5, "{lo} {hi}");
        // Orthonormal translates: the integral is sum_s phi_per(y - s)^2.
        for y in [0.0, 0.4, 2.71, 7.9] {
            let want: f64 = (0..8).map(|s| k.wavelet.periodized(y, 8, s, false).powi(2)).sum();
            assert!((k.kernel_l2_1d(y) - want).abs() < 1e-5, "y={y}: {} vs {want}", k.kernel_l2_1d(y));
        }
        // Full-period window agrees with the local window when both apply.
        let wide = kernel(WaveletKind::Daubechies(2), 2, 1);
        let direct: f64 = (0..4 * 4096).map(|i| wide.ktilde(i as f64 / 4096.0, 1.3).powi(2)).sum::<f64>() / 4096.0;
        assert!((wide.kernel_l2_1d(1.3) - direct).abs() < 1e-12);
    }

    #[test]
    fn constant_is_reproduced() {
        let one = FnDensity::new(2, |_: &[f64]| 1.0);
        for kind in [WaveletKind::Haar, WaveletKind::Daubechies(2), WaveletKind::Daubechies(3)] {
            let k = kernel(kind, 2, 2);
            for i in 1..=9 {
                for j in 1..=9 {
                    let u = [i as f64 / 10.0, j as f64 / 10.0];
                    assert!((k.project_density(&one, &u).unwrap() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn linear_reproduced_by_db2() {
        let line = FnDensity::new(1, |v: &[f64]| v[0]);
        let k = kernel(WaveletKind::Daubechies(2), 3, 1);
        for u in [0.45, 0.5, 0.55] {
            assert!((k.project_density(&line, &[u]).unwrap() - u).abs() < 1e-4);
        }
        let quad = FnDensity::new(1, |v: &[f64]| v[0] * v[0]);
        let k3 = kernel(WaveletKind::Daubechies(3), 3, 1);
        assert!((k3.project_density(&quad, &[0.5]).unwrap() - 0.25).abs() < 1e-4);
    }

    #[test]
    fn projection_matches_quadrature_oracle() {
        let c = FnDensity::new(1, |v: &[f64]| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * v[0]).sin());
        let k = kernel(WaveletKind::Daubechies(2), 3, 1);
        for u in [0.05, 0.4, 0.93] {
            let mut want = 0.0;
            for cell in 0..64 {
                let (a, b) = (cell as f64 / 64.0, (cell + 1) as f64 / 64.0);
                want += quad::integrate(|v| k.ktilde_j(v, u) * c.density(&[v]), a, b, 1e-13, 1e-13).unwrap();
            }
            let got = k.project_density(&c, &[u]).unwrap();
            assert!((got - want).abs() < 1e-5, "u={u}: {got} vs {want}");
        }
    }

    #[test]
    fn haar_projection_is_cell_average() {
        let m = CopulaModel::fgm(0.75).unwrap();
        let k = kernel(WaveletKind::Haar, 1, 2);
        assert_eq!(k.project_density(&m, &[0.2, 0.3]).unwrap(), 1.0 + 0.75 / 4.0);
        let frank = CopulaModel::frank(5.0).unwrap();
        let k3 = kernel(WaveletKind::Haar, 3, 2);
        let got = k3.project_density(&frank, &[0.3, 0.6]).unwrap();
        let cdf = |u: f64, v: f64| {
            let t = 5.0f64;
            -((-t * u).exp_m1() * (-t * v).exp_m1() / (-t).exp_m1()).ln_1p() / t
        };
        let (a, b, c, d) = (0.25, 0.375, 0.5, 0.625);
        let want = (cdf(b, d) - cdf(a, d) - cdf(b, c) + cdf(a, c)) * 64.0;
        assert!((got - want).abs() < 1e-8);
    }

    #[test]
    fn projection_coefficients_agree_with_pointwise_projection() {
        let m = CopulaModel::frank(3.0).unwrap();
        for kind in [WaveletKind::Haar, WaveletKind::Daubechies(2)] {
            let k = kernel(kind, 2, 2);
            let cf = k.projection_coefficients(&m).unwrap();
            assert!((cf.mass() - 1.0).abs() < 1e-6);
            for u in [[0.1, 0.2], [0.55, 0.9]] {
                let a = crate::estimator::estimate_linear(&cf, &u);
                let b = k.project_density(&m, &u).unwrap();
                assert!((a - b).abs() < 1e-5, "{kind}: {a} vs {b}");
            }
        }
    }
}
