//! Basis and kernel property suites, as run by `copwave check-basis` and
//! `copwave check-kernel`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::copula::FnDensity;
use crate::error::Result;
use crate::kernel::ProjectionKernel;
use crate::rng;
use crate::wavelet::{FatherWavelet, WaveletKind};

/// One named check with its measured value and tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {:<44} {:>12.3e}  (tol {:.0e})", self.name, self.value, self.tolerance)
    }
}

/// Wavelets covered by the suites.
pub fn default_wavelets() -> Vec<WaveletKind> {
    vec![WaveletKind::Haar, WaveletKind::Daubechies(2), WaveletKind::Daubechies(3), WaveletKind::Daubechies(4)]
}

/// Largest entrywise deviation of the level-`j` Gram matrix from the identity.
pub fn gram_deviation(phi: &FatherWavelet, level: u32) -> f64 {
    let gram = phi.gram_matrix(level);
    let mut worst = 0.0f64;
    for (a, row) in gram.iter().enumerate() {
        for (b, &g) in row.iter().enumerate() {
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - want).abs());
        }
    }
    worst
}

/// Gram identity, two-scale relation, unit integral and partition of unity.
pub fn basis_suite(kinds: &[WaveletKind], level: u32) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &kind in kinds {
        let phi = kind.build()?;
        let gram_tol = if kind == WaveletKind::Haar { 0.0 } else { 5e-4 };
        out.push(Check::at_most(format!("{kind}: Gram identity at j={level}"), gram_deviation(&phi, level), gram_tol));
        out.push(Check::at_most(format!("{kind}: two-scale residual"), phi.two_scale_residual(), 1e-8));
        out.push(Check::at_most(format!("{kind}: |integral - 1|"), (phi.integral() - 1.0).abs(), 1e-6));
        let per_unit = phi.table.nodes_per_unit();
        let pou = (0..per_unit)
            .map(|i| {
                let x = i as f64 / per_unit as f64;
                let s: f64 = (0..phi.support_end).map(|b| phi.eval(x + b as f64)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0f64, f64::max);
        out.push(Check::at_most(format!("{kind}: partition of unity"), pou, 1e-6));
    }
    Ok(out)
}

/// Kernel normalization at 25 random `y`, symmetry on 100 random pairs,
/// constant reproduction on a `9^2` grid, and the range of `int K^2`.
pub fn kernel_suite(kinds: &[WaveletKind], level: u32, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut r = rng::stream(seed, 0);
    let one = FnDensity::new(2, |_: &[f64]| 1.0);
    for &kind in kinds {
        let phi = Arc::new(kind.build()?);
        let k = ProjectionKernel::new(phi.clone(), level, 2);
        let p = k.period() as f64;
        let l1 = (0..25)
            .map(|_| (k.kernel_l1(r.random::<f64>() * p) - 1.0).abs())
            .fold(0.0f64, f64::max);
        out.push(Check::at_most(format!("{kind}: max |int K(x,y) dx - 1|"), l1, 1e-6));
        let sym = (0..100)
            .map(|_| {
                let (x, y) = (r.random::<f64>() * p, r.random::<f64>() * p);
                (k.ktilde(x, y) - k.ktilde(y, x)).abs()
            })
            .fold(0.0f64, f64::max);
        out.push(Check::at_most(format!("{kind}: max |K(x,y) - K(y,x)|"), sym, 1e-12));
        let mut repro = 0.0f64;
        for i in 1..=9 {
            for j in 1..=9 {
                let u = [i as f64 / 10.0, j as f64 / 10.0];
                repro = repro.max((k.project_density(&one, &u)? - 1.0).abs());
            }
        }
        out.push(Check::at_most(format!("{kind}: constant reproduction on 9^2 grid"), repro, 1e-9));
        let k1 = ProjectionKernel::new(phi, level, 1);
        let l2: Vec<f64> = (1..100).map(|i| k1.kernel_l2(&[i as f64 / 100.0])).collect();
        let lo = l2.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = l2.iter().cloned().fold(0.0f64, f64::max);
        out.push(Check {
            name: format!("{kind}: int K^2 in [{lo:.4}, {hi:.4}], lower bound"),
            value: lo,
            tolerance: 0.0,
            passed: lo > 0.0 && hi.is_finite(),
        });
    }
    Ok(out)
}
