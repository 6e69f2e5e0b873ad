//! Copula families with closed-form densities and exact samplers.
//!
//! These are the ground-truth models for the experiments. FGM and Frank have
//! bounded, smooth densities; Clayton and the Gaussian copula with `rho != 0`
//! are unbounded near the corners and are flagged as such.

use std::fmt;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::quad;

/// A density on the unit cube, as consumed by the projection routines.
pub trait Density: Sync {
    fn dim(&self) -> usize;

    fn density(&self, u: &[f64]) -> f64;

    /// Exact average over the box `[lo, hi]`, when available in closed form.
    fn analytic_cell_average(&self, _lo: &[f64], _hi: &[f64]) -> Option<f64> {
        None
    }
}

/// Wraps a closure as a [`Density`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDensity { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Density for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self, u: &[f64]) -> f64 {
        (self.f)(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CopulaKind {
    Independence { dim: usize },
    Fgm { theta: f64 },
    Frank { theta: f64 },
    Clayton { theta: f64 },
    Gaussian { rho: f64 },
}

/// A validated copula model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaModel {
    kind: CopulaKind,
}

impl fmt::Display for CopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            CopulaKind::Independence { dim } => write!(f, "independence(d={dim})"),
            CopulaKind::Fgm { theta } => write!(f, "fgm(theta={theta})"),
            CopulaKind::Frank { theta } => write!(f, "frank(theta={theta})"),
            CopulaKind::Clayton { theta } => write!(f, "clayton(theta={theta})"),
            CopulaKind::Gaussian { rho } => write!(f, "gaussian(rho={rho})"),
        }
    }
}

impl CopulaModel {
    pub fn new(kind: CopulaKind) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match kind {
            CopulaKind::Independence { dim } if dim == 0 => return bad("dimension must be >= 1".into()),
            CopulaKind::Fgm { theta } if !(theta.abs() <= 1.0) => {
                return bad(format!("FGM requires |theta| <= 1, got {theta}"))
            }
            CopulaKind::Frank { theta } if theta == 0.0 || !theta.is_finite() => {
                return bad(format!("Frank requires theta != 0, got {theta}"))
            }
            CopulaKind::Clayton { theta } if !(theta > 0.0) || !theta.is_finite() => {
                return bad(format!("Clayton requires theta > 0, got {theta}"))
            }
            CopulaKind::Gaussian { rho } if !(rho.abs() < 1.0) => {
                return bad(format!("Gaussian requires |rho| < 1, got {rho}"))
            }
            _ => {}
        }
        Ok(CopulaModel { kind })
    }

    pub fn independence(dim: usize) -> Result<Self> {
        Self::new(CopulaKind::Independence { dim })
    }

    pub fn fgm(theta: f64) -> Result<Self> {
        Self::new(CopulaKind::Fgm { theta })
    }

    pub fn frank(theta: f64) -> Result<Self> {
        Self::new(CopulaKind::Frank { theta })
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(CopulaKind::Clayton { theta })
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        Self::new(CopulaKind::Gaussian { rho })
    }

    /// Builds a model from a family name and its parameter.
    pub fn from_name(family: &str, param: Option<f64>, dim: usize) -> Result<Self> {
        let need = |p: Option<f64>| {
            p.ok_or_else(|| Error::InvalidParameter(format!("family '{family}' needs a parameter")))
        };
        let two_d = |m: Result<Self>| {
            if dim != 2 {
                Err(Error::InvalidParameter(format!("family '{family}' is bivariate, got d={dim}")))
            } else {
                m
            }
        };
        match family.to_ascii_lowercase().as_str() {
            "independence" | "indep" | "product" => Self::independence(dim),
            "fgm" => two_d(Self::fgm(need(param)?)),
            "frank" => two_d(Self::frank(need(param)?)),
            "clayton" => two_d(Self::clayton(need(param)?)),
            "gaussian" | "normal" => two_d(Self::gaussian(need(param)?)),
            other => Err(Error::InvalidParameter(format!("unknown copula family '{other}'"))),
        }
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            CopulaKind::Independence { dim } => dim,
            _ => 2,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self.kind {
            CopulaKind::Independence { .. } | CopulaKind::Fgm { .. } | CopulaKind::Frank { .. } => true,
            CopulaKind::Clayton { .. } => false,
            CopulaKind::Gaussian { rho } => rho == 0.0,
        }
    }

    /// Smoothness of the density on the closed cube; all families here are
    /// infinitely differentiable where bounded.
    pub fn regularity(&self) -> f64 {
        f64::INFINITY
    }

    /// Density at `u`. Unbounded families return `+inf` on the corners they blow up at.
    pub fn density(&self, u: &[f64]) -> f64 {
        match self.kind {
            CopulaKind::Independence { .. } => 1.0,
            CopulaKind::Fgm { theta } => 1.0 + theta * (1.0 - 2.0 * u[0]) * (1.0 - 2.0 * u[1]),
            CopulaKind::Frank { theta } => frank_density(theta, u[0], u[1]),
            CopulaKind::Clayton { theta } => {
                let (a, b) = (u[0], u[1]);
                let s = a.powf(-theta) + b.powf(-theta) - 1.0;
                (1.0 + theta) * (a * b).powf(-theta - 1.0) * s.powf(-2.0 - 1.0 / theta)
            }
            CopulaKind::Gaussian { rho } => {
                if rho == 0.0 {
                    return 1.0;
                }
                let n = Normal::standard();
                let x = n.inverse_cdf(u[0]);
                let y = n.inverse_cdf(u[1]);
                let q = 1.0 - rho * rho;
                (-(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * q)).exp() / q.sqrt()
            }
        }
    }

    /// Density with domain checks: `u` must lie in the closed cube, and in the
    /// open cube for unbounded families.
    pub fn checked_density(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        if u.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParameter("point outside the unit cube".into()));
        }
        if !self.is_bounded() && u.iter().any(|&x| x == 0.0 || x == 1.0) {
            return Err(Error::BoundaryEvaluation);
        }
        Ok(self.density(u))
    }

    /// `sup_u c(u)`.
    pub fn sup_norm(&self) -> Result<f64> {
        match self.kind {
            CopulaKind::Independence { .. } => Ok(1.0),
            CopulaKind::Fgm { theta } => Ok(1.0 + theta.abs()),
            CopulaKind::Frank { .. } => Ok(grid_search_max(|u| self.density(u))),
            CopulaKind::Gaussian { rho } if rho == 0.0 => Ok(1.0),
            _ => Err(Error::Unbounded(self.to_string())),
        }
    }

    /// Average of the density over the box `[lo, hi]`: closed form for the
    /// polynomial families, adaptive quadrature otherwise.
    pub fn cell_average(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        if let Some(v) = self.analytic_cell_average(lo, hi) {
            return Ok(v);
        }
        let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let integral = quad::integrate_box(&|u: &[f64]| self.density(u), lo, hi, 1e-11)?;
        Ok(integral / volume)
    }

    /// Draws `n` observations from the copula.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Sample {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            match self.kind {
                CopulaKind::Independence { dim } => {
                    for _ in 0..dim {
                        data.push(rng.sample(Open01));
                    }
                }
                CopulaKind::Fgm { theta } => {
                    let u: f64 = rng.sample(Open01);
                    let w: f64 = rng.sample(Open01);
                    data.push(u);
                    data.push(fgm_conditional_inverse(theta, u, w));
                }
                CopulaKind::Frank { theta } => {
                    let u: f64 = rng.sample(Open01);
                    let w: f64 = rng.sample(Open01);
                    data.push(u);
                    data.push(frank_conditional_inverse(theta, u, w));
                }
                CopulaKind::Clayton { theta } => {
                    let frailty = Gamma::new(1.0 / theta, 1.0).expect("theta > 0");
                    let v: f64 = frailty.sample(rng);
                    for _ in 0..2 {
                        let e: f64 = Exp1.sample(rng);
                        data.push((1.0 + e / v).powf(-1.0 / theta));
                    }
                }
                CopulaKind::Gaussian { rho } => {
                    let z1: f64 = StandardNormal.sample(rng);
                    let z2: f64 = StandardNormal.sample(rng);
                    let x2 = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                    data.push(std_normal_cdf(z1));
                    data.push(std_normal_cdf(x2));
                }
            }
        }
        Sample::from_parts_unchecked(n, d, data)
    }
}

impl Density for CopulaModel {
    fn dim(&self) -> usize {
        CopulaModel::dim(self)
    }

    fn density(&self, u: &[f64]) -> f64 {
        CopulaModel::density(self, u)
    }

    fn analytic_cell_average(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        match self.kind {
            CopulaKind::Independence { .. } => Some(1.0),
            CopulaKind::Gaussian { rho } if rho == 0.0 => Some(1.0),
            // Mean of 1 - 2u over [a, b] is 1 - (a + b).
            CopulaKind::Fgm { theta } => {
                Some(1.0 + theta * (1.0 - (lo[0] + hi[0])) * (1.0 - (lo[1] + hi[1])))
            }
            _ => None,
        }
    }
}

fn frank_density(theta: f64, u: f64, v: f64) -> f64 {
    let a = (-theta).exp_m1();
    let eu = (-theta * u).exp_m1();
    let ev = (-theta * v).exp_m1();
    let denom = a + eu * ev;
    -theta * a * (-theta * (u + v)).exp() / (denom * denom)
}

/// Solves `v + theta (1 - 2u) v (1 - v) = w` for `v` in `[0, 1]`.
fn fgm_conditional_inverse(theta: f64, u: f64, w: f64) -> f64 {
    let a = theta * (1.0 - 2.0 * u);
    if a == 0.0 {
        return w;
    }
    let b = 1.0 + a;
    2.0 * w / (b + (b * b - 4.0 * a * w).sqrt())
}

/// Inverts the conditional distribution `dC/du (v | u) = w` in closed form.
fn frank_conditional_inverse(theta: f64, u: f64, w: f64) -> f64 {
    let g = (-theta).exp_m1();
    let a = (-theta * u).exp();
    -(w * g / (w + (1.0 - w) * a)).ln_1p() / theta
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Maximum of a bivariate function on `[0, 1]^2` by a 101x101 grid followed by
/// compass search from the best node.
fn grid_search_max<F: Fn(&[f64]) -> f64>(f: F) -> f64 {
    let g = 100;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for i in 0..=g {
        for j in 0..=g {
            let p = [i as f64 / g as f64, j as f64 / g as f64];
            let v = f(&p);
            if v > best.0 {
                best = (v, p);
            }
        }
    }
    let (mut value, mut p) = best;
    let mut step = 1.0 / g as f64;
    while step > 1e-9 {
        let mut moved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let q = [(p[0] + dx * step).clamp(0.0, 1.0), (p[1] + dy * step).clamp(0.0, 1.0)];
            let v = f(&q);
            if v > value {
                value = v;
                p = q;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    value
}

/// Spearman's rho of the FGM copula, `theta / 3`.
pub fn fgm_spearman(theta: f64) -> f64 {
    theta / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn parameter_validation() {
        assert!(CopulaModel::fgm(1.5).is_err());
        assert!(CopulaModel::fgm(-1.0).is_ok());
        assert!(CopulaModel::frank(0.0).is_err());
        assert!(CopulaModel::clayton(0.0).is_err());
        assert!(CopulaModel::clayton(-1.0).is_err());
        assert!(CopulaModel::gaussian(1.0).is_err());
        assert!(CopulaModel::independence(0).is_err());
        assert!(CopulaModel::from_name("fgm", Some(0.5), 3).is_err());
        assert!(CopulaModel::from_name("gumbel", Some(2.0), 2).is_err());
        assert!(CopulaModel::from_name("frank", None, 2).is_err());
    }

    #[test]
    fn independence_density_and_sup() {
        let m = CopulaModel::independence(3).unwrap();
        assert_eq!(m.density(&[0.2, 0.9, 0.4]), 1.0);
        assert_eq!(m.sup_norm().unwrap(), 1.0);
    }

    #[test]
    fn fgm_density_matches_mixed_partial_of_cdf() {
        let theta = 1.0;
        let cdf = |u: f64, v: f64| u * v * (1.0 + theta * (1.0 - u) * (1.0 - v));
        let (u, v, h) = (0.01, 0.01, 1e-4);
        let fd = (cdf(u + h, v + h) - cdf(u + h, v - h) - cdf(u - h, v + h) + cdf(u - h, v - h))
            / (4.0 * h * h);
        let m = CopulaModel::fgm(theta).unwrap();
        assert!((m.density(&[u, v]) - fd).abs() < 1e-3);
        let eps = 1e-12;
        assert!((m.density(&[eps, eps]) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sup_norms() {
        assert_eq!(CopulaModel::fgm(0.75).unwrap().sup_norm().unwrap(), 1.75);
        assert!(matches!(CopulaModel::clayton(1.0).unwrap().sup_norm(), Err(Error::Unbounded(_))));
        assert!(CopulaModel::gaussian(0.3).unwrap().sup_norm().is_err());
        assert_eq!(CopulaModel::gaussian(0.0).unwrap().sup_norm().unwrap(), 1.0);
        for theta in [5.0, -3.0] {
            let m = CopulaModel::frank(theta).unwrap();
            // Maximum sits on the corners, where c = |theta| / (1 - e^{-|theta|}).
            let want = theta.abs() / (1.0 - (-theta.abs()).exp());
            let got = m.sup_norm().unwrap();
            assert!(((got - want) / want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn clayton_blows_up_on_the_diagonal() {
        let m = CopulaModel::clayton(1.0).unwrap();
        let near = m.density(&[1e-3, 1e-3]);
        let nearer = m.density(&[1e-5, 1e-5]);
        assert!(nearer > 50.0 * near);
        assert!(matches!(m.checked_density(&[0.0, 0.5]), Err(Error::BoundaryEvaluation)));
    }

    #[test]
    fn fgm_cell_average_closed_form() {
        let m = CopulaModel::fgm(0.6).unwrap();
        assert!((m.cell_average(&[0.0, 0.0], &[0.5, 0.5]).unwrap() - 1.15).abs() < 1e-15);
        let quad = quad::integrate_box(&|u: &[f64]| m.density(u), &[0.1, 0.3], &[0.4, 0.35], 1e-13)
            .unwrap()
            / (0.3 * 0.05);
        assert!((m.cell_average(&[0.1, 0.3], &[0.4, 0.35]).unwrap() - quad).abs() < 1e-10);
    }

    #[test]
    fn conditional_inverses_invert() {
        for &(theta, u, w) in &[(0.75, 0.2, 0.3), (-1.0, 0.9, 0.7), (0.4, 0.5, 0.5)] {
            let v = fgm_conditional_inverse(theta, u, w);
            let cond = v + theta * (1.0 - 2.0 * u) * v * (1.0 - v);
            assert!((cond - w).abs() < 1e-14);
        }
        for &(theta, u, w) in &[(5.0, 0.2, 0.3), (-4.0, 0.9, 0.7), (12.0, 0.5, 0.01)] {
            let v = frank_conditional_inverse(theta, u, w);
            let a = (-theta * u).exp();
            let cond = a * (-theta * v).exp_m1()
                / ((-theta).exp_m1() + (-theta * u).exp_m1() * (-theta * v).exp_m1());
            assert!((cond - w).abs() < 1e-12, "theta {theta}: {cond} vs {w}");
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let m = CopulaModel::frank(5.0).unwrap();
        let a = m.sample(100, &mut rng::stream(11, 0));
        let b = m.sample(100, &mut rng::stream(11, 0));
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|&x| x > 0.0 && x < 1.0));
    }
}
