//! Goodness-of-fit checks for the copula models.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::copula::CopulaModel;
use crate::error::Result;
use crate::estimator::Sample;
use crate::quad;
use crate::rng;

/// Kolmogorov–Smirnov statistic of `values` against Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        d.max((i + 1) as f64 / n - x).max(x - i as f64 / n)
    })
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Pearson chi-square statistic, degrees of freedom and upper-tail p-value.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize, f64) {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = observed.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).expect("df >= 1").cdf(stat);
    (stat, df, p)
}

/// Spearman's rank correlation of the first two columns.
pub fn spearman_rho(s: &Sample) -> f64 {
    let ranks = |m: usize| {
        let mut idx: Vec<usize> = (0..s.n()).collect();
        idx.sort_by(|&a, &b| s.row(a)[m].total_cmp(&s.row(b)[m]));
        let mut r = vec![0.0; s.n()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    };
    let (a, b) = (ranks(0), ranks(1));
    let mean = (s.n() - 1) as f64 / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sab += (x - mean) * (y - mean);
        saa += (x - mean).powi(2);
        sbb += (y - mean).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Outcome of the model consistency suite.
#[derive(Debug, Clone, Serialize)]
pub struct ModelCheck {
    pub model: String,
    pub mass: f64,
    pub min_density: f64,
    pub ks: Vec<f64>,
    pub ks_critical: f64,
    pub chi_square: f64,
    pub chi_square_df: usize,
    pub chi_square_p: f64,
}

impl ModelCheck {
    pub fn mass_ok(&self) -> bool {
        (self.mass - 1.0).abs() <= 1e-6
    }

    pub fn nonnegative(&self) -> bool {
        self.min_density >= 0.0
    }

    pub fn margins_ok(&self) -> bool {
        self.ks.iter().all(|&d| d < self.ks_critical)
    }

    pub fn sampler_ok(&self) -> bool {
        self.chi_square_p > 0.01
    }

    pub fn passed(&self) -> bool {
        self.mass_ok() && self.nonnegative() && self.margins_ok() && self.sampler_ok()
    }
}

/// Sample sizes used by [`check_model`].
pub const KS_SAMPLE: usize = 10_000;
pub const CHI_SQUARE_SAMPLE: usize = 100_000;

/// Mass by quadrature, nonnegativity on the `41^d` grid `i/42`, per-margin KS
/// on `10^4` draws and chi-square over `8^d` cells on `10^5` draws. Bounded
/// models only; the suite is meant for `d <= 2`.
pub fn check_model(model: &CopulaModel, seed: u64) -> Result<ModelCheck> {
    let d = model.dim();
    let lo = vec![0.0; d];
    let hi = vec![1.0; d];
    let mass = quad::integrate_box(&|u: &[f64]| model.density(u), &lo, &hi, 1e-10)?;

    let axis: Vec<f64> = (1..=41).map(|i| i as f64 / 42.0).collect();
    let grid = crate::estimator::EvalGrid::product(&axis, d);
    let min_density = grid.iter().map(|u| model.density(u)).fold(f64::INFINITY, f64::min);

    let s = model.sample(KS_SAMPLE, &mut rng::stream(seed, 0));
    let ks = (0..d)
        .map(|m| ks_uniform(&s.rows().map(|r| r[m]).collect::<Vec<_>>()))
        .collect();

    let g = 8usize;
    let cells = g.pow(d as u32);
    let big = model.sample(CHI_SQUARE_SAMPLE, &mut rng::stream(seed, 1));
    let mut observed = vec![0u64; cells];
    for row in big.rows() {
        let idx = row
            .iter()
            .fold(0, |acc, &x| acc * g + ((x * g as f64).floor() as usize).min(g - 1));
        observed[idx] += 1;
    }
    let mut expected = Vec::with_capacity(cells);
    let mut pos = vec![0usize; d];
    let mut clo = vec![0.0; d];
    let mut chi = vec![0.0; d];
    let volume = (g as f64).powi(d as i32).recip();
    for idx in 0..cells {
        crate::kernel::unflatten(idx, g, &mut pos);
        for m in 0..d {
            clo[m] = pos[m] as f64 / g as f64;
            chi[m] = (pos[m] + 1) as f64 / g as f64;
        }
        expected.push(model.cell_average(&clo, &chi)? * volume * CHI_SQUARE_SAMPLE as f64);
    }
    let (chi_square, chi_square_df, chi_square_p) = self::chi_square(&observed, &expected);

    Ok(ModelCheck {
        model: model.to_string(),
        mass,
        min_density,
        ks,
        ks_critical: ks_critical_1pct(KS_SAMPLE),
        chi_square,
        chi_square_df,
        chi_square_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_quantiles() {
        let v: Vec<f64> = (1..=10).map(|i| (i as f64 - 0.5) / 10.0).collect();
        assert!((ks_uniform(&v) - 0.05).abs() < 1e-15);
        assert!((ks_uniform(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi_square_reference_values() {
        let (stat, df, p) = chi_square(&[10, 10, 10, 10], &[10.0; 4]);
        assert_eq!((stat, df), (0.0, 3));
        assert!((p - 1.0).abs() < 1e-12);
        // P(chi2_1 > 4) = erfc(sqrt 2).
        let (_, _, p) = chi_square(&[60, 40], &[50.0, 50.0]);
        assert!((p - 0.04550026389635842).abs() < 1e-9);
    }

    #[test]
    fn spearman_of_monotone_pairs() {
        let s = Sample::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 9.0]]).unwrap();
        assert!((spearman_rho(&s) - 1.0).abs() < 1e-15);
        let t = Sample::from_rows(&[vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert!((spearman_rho(&t) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fgm_spearman_matches_copula_integral() {
        let theta = 0.75;
        let cdf = |u: &[f64]| u[0] * u[1] * (1.0 + theta * (1.0 - u[0]) * (1.0 - u[1]));
        let integral = quad::integrate_box(&cdf, &[0.0, 0.0], &[1.0, 1.0], 1e-13).unwrap();
        let rho = 12.0 * integral - 3.0;
        assert!((rho - crate::copula::fgm_spearman(theta)).abs() < 1e-12);

        let m = CopulaModel::fgm(theta).unwrap();
        let n = 10_000;
        let s = m.sample(n, &mut rng::stream(2024, 0));
        // Standard error of Spearman's rho under near-independence, about 1/sqrt(n - 1).
        let se = 1.0 / ((n - 1) as f64).sqrt();
        assert!((spearman_rho(&s) - theta / 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn frank_mass_by_quadrature() {
        let m = CopulaModel::frank(5.0).unwrap();
        let mass = quad::integrate_box(&|u: &[f64]| m.density(u), &[0.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn frank_cell_average_matches_cdf_rectangle() {
        let t = 5.0f64;
        let cdf = |u: f64, v: f64| -((-t * u).exp_m1() * (-t * v).exp_m1() / (-t).exp_m1()).ln_1p() / t;
        let m = CopulaModel::frank(t).unwrap();
        let (a, b, c, d) = (0.1, 0.35, 0.6, 0.9);
        let want = (cdf(b, d) - cdf(a, d) - cdf(b, c) + cdf(a, c)) / ((b - a) * (d - c));
        assert!((m.cell_average(&[a, c], &[b, d]).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn independence_margins_pass_ks() {
        let m = CopulaModel::independence(2).unwrap();
        let s = m.sample(KS_SAMPLE, &mut rng::stream(99, 0));
        for col in 0..2 {
            let v: Vec<f64> = s.rows().map(|r| r[col]).collect();
            assert!(ks_uniform(&v) < ks_critical_1pct(KS_SAMPLE));
        }
    }
}
