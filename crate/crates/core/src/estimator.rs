//! Rank-based linear wavelet estimator of a copula density.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{for_each_combination, ProjectionKernel};
use crate::wavelet::{half_power_of_two, FatherWavelet, Translates};

/// Largest supported `j * d`.
pub const MAX_LEVEL_DIM: u32 = 26;

/// Raw observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSample("dimension must be >= 1".into()));
        }
        if n < 2 {
            return Err(Error::InvalidSample(format!("need at least 2 observations, got {n}")));
        }
        if data.len() != n * d {
            return Err(Error::InvalidSample(format!("expected {} values, got {}", n * d, data.len())));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "non-finite value in row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Sample { n, d, data })
    }

    pub(crate) fn from_parts_unchecked(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        Sample { n, d, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: rows[i].len() });
        }
        Self::new(rows.len(), d, rows.concat())
    }

    /// Parses a headerless CSV with one observation per row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let row = record
                .iter()
                .map(|field| {
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("line {}: '{field}' is not a number", line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidSample("input contains no observations".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    /// Applies `f` to every entry of column `m`.
    pub fn map_column<F: Fn(f64) -> f64>(&self, m: usize, f: F) -> Result<Self> {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.d) {
            row[m] = f(row[m]);
        }
        Self::new(self.n, self.d, data)
    }
}

/// Denominator of the rank transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RankScaling {
    #[default]
    #[serde(rename = "n")]
    N,
    #[serde(rename = "n+1")]
    NPlusOne,
}

impl FromStr for RankScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(RankScaling::N),
            "n+1" | "n1" => Ok(RankScaling::NPlusOne),
            other => Err(Error::Parse(format!("unknown rank scaling '{other}' (use n or n+1)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Equal values are ranked by input order.
    #[default]
    Break,
    Reject,
}

impl FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "break" => Ok(TiePolicy::Break),
            "reject" => Ok(TiePolicy::Reject),
            other => Err(Error::Parse(format!("unknown tie policy '{other}' (use break or reject)"))),
        }
    }
}

/// Points in `(0, 1]^d`: pseudo-observations, or true copula draws on the oracle path.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    n: usize,
    d: usize,
    points: Vec<f64>,
}

impl PseudoSample {
    /// Wraps draws that already have uniform margins.
    pub fn from_uniforms(sample: &Sample) -> Result<Self> {
        if sample.data.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidSample("uniform draws must lie in (0, 1]".into()));
        }
        Ok(PseudoSample { n: sample.n, d: sample.d, points: sample.data.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.d)
    }
}

/// Column ranks divided by `n` or `n + 1`.
pub fn pseudo_observations(s: &Sample, scaling: RankScaling, ties: TiePolicy) -> Result<PseudoSample> {
    let (n, d) = (s.n, s.d);
    let denom = match scaling {
        RankScaling::N => n as f64,
        RankScaling::NPlusOne => (n + 1) as f64,
    };
    let mut points = vec![0.0; n * d];
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..d {
        let col = |i: usize| s.data[i * d + m];
        order.sort_by(|&a, &b| col(a).total_cmp(&col(b)).then(a.cmp(&b)));
        if ties == TiePolicy::Reject && order.windows(2).any(|w| col(w[0]) == col(w[1])) {
            return Err(Error::TieRejected { column: m + 1 });
        }
        for (rank, &i) in order.iter().enumerate() {
            points[i * d + m] = (rank + 1) as f64 / denom;
        }
    }
    Ok(PseudoSample { n, d, points })
}

/// Wavelet, level and dimension of a linear estimator.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub wavelet: Arc<FatherWavelet>,
    pub level: u32,
    pub dim: usize,
    pub scaling: RankScaling,
    /// Smoothness used by [`resolution_rule`].
    pub regularity: Option<f64>,
}

impl EstimatorConfig {
    pub fn new(wavelet: Arc<FatherWavelet>, level: u32, dim: usize) -> Result<Self> {
        check_level(level, dim)?;
        Ok(EstimatorConfig { wavelet, level, dim, scaling: RankScaling::N, regularity: None })
    }

    pub fn with_scaling(mut self, scaling: RankScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn kernel(&self) -> ProjectionKernel {
        ProjectionKernel::new(self.wavelet.clone(), self.level, self.dim)
    }
}

fn check_level(level: u32, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if (level as u64) * (dim as u64) > MAX_LEVEL_DIM as u64 {
        return Err(Error::LevelTooLarge { level, dim });
    }
    Ok(())
}

/// Dense scaling coefficients `alpha_{j,k}` for `k` in `{1..2^j}^d`, first
/// coordinate slowest.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    wavelet: Arc<FatherWavelet>,
    level: u32,
    dim: usize,
    alpha: Vec<f64>,
}

impl CoefficientField {
    pub(crate) fn from_parts(wavelet: Arc<FatherWavelet>, level: u32, dim: usize, alpha: Vec<f64>) -> Self {
        debug_assert_eq!(alpha.len(), 1usize << (level as usize * dim));
        CoefficientField { wavelet, level, dim, alpha }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn wavelet(&self) -> &Arc<FatherWavelet> {
        &self.wavelet
    }

    /// `alpha_{j,k}` for a 1-based multi-index.
    pub fn get(&self, k: &[usize]) -> Result<f64> {
        let p = 1usize << self.level;
        if k.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: k.len() });
        }
        let mut idx = 0;
        for &km in k {
            if km < 1 || km > p {
                return Err(Error::TranslateOutOfRange { k: km, max: p });
            }
            idx = idx * p + (km - 1);
        }
        Ok(self.alpha[idx])
    }

    /// `sum_k alpha_k 2^{-jd/2}`, the integral of the expansion.
    pub fn mass(&self) -> f64 {
        self.alpha.iter().sum::<f64>() / half_power_of_two(self.level * self.dim as u32)
    }
}

fn flat_index(shifts: &[usize], p: usize) -> usize {
    shifts.iter().fold(0, |idx, &s| idx * p + s)
}

fn translates_at(phi: &FatherWavelet, level: u32, u: &[f64]) -> Vec<Translates> {
    let p = 1usize << level;
    u.iter().map(|&x| phi.translates(x * p as f64, p, x >= 1.0)).collect()
}

/// `alpha_{j,k} = (1/n) sum_i prod_m phi_{j,k_m}(U_im)`.
pub fn scaling_coefficients(ps: &PseudoSample, cfg: &EstimatorConfig) -> Result<CoefficientField> {
    if ps.d != cfg.dim {
        return Err(Error::DimensionMismatch { expected: cfg.dim, got: ps.d });
    }
    check_level(cfg.level, cfg.dim)?;
    let p = 1usize << cfg.level;
    let total = 1usize << (cfg.level as usize * cfg.dim);
    let mut sums = vec![0.0; total];
    for row in ps.rows() {
        let axes = translates_at(&cfg.wavelet, cfg.level, row);
        for_each_combination(&axes, |shifts, w| sums[flat_index(shifts, p)] += w);
    }
    let scale = half_power_of_two(cfg.level * cfg.dim as u32);
    let n = ps.n as f64;
    let alpha = sums.into_iter().map(|s| s * scale / n).collect();
    Ok(CoefficientField::from_parts(cfg.wavelet.clone(), cfg.level, cfg.dim, alpha))
}

/// Coefficients from true copula draws; the same formula as [`scaling_coefficients`].
pub fn oracle_coefficients(us: &PseudoSample, cfg: &EstimatorConfig) -> Result<CoefficientField> {
    scaling_coefficients(us, cfg)
}

/// `sum_k alpha_k phi_{j,k}(u)` over the translates active at `u`.
pub fn estimate_linear(cf: &CoefficientField, u: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), cf.dim);
    let p = 1usize << cf.level;
    let axes = translates_at(&cf.wavelet, cf.level, u);
    let mut acc = 0.0;
    for_each_combination(&axes, |shifts, w| acc += cf.alpha[flat_index(shifts, p)] * w);
    acc * half_power_of_two(cf.level * cf.dim as u32)
}

/// `(1/n) sum_i prod_m 2^j K~(2^j U_im, 2^j u_m)`.
pub fn estimate_kernel_form(ps: &PseudoSample, cfg: &EstimatorConfig, u: &[f64]) -> f64 {
    let kernel = cfg.kernel();
    let sum: f64 = ps.rows().map(|row| kernel.kernel_tensor_j(row, u)).sum();
    sum / ps.n as f64
}

/// `round(log2((n / ln n)^{1/(2t+d)}))`, at least 1.
pub fn resolution_rule(n: usize, t: f64, d: usize) -> u32 {
    let n = n.max(3) as f64;
    let j = ((n / n.ln()).log2() / (2.0 * t + d as f64)).round();
    if j.is_finite() && j >= 1.0 {
        j as u32
    } else {
        1
    }
}

/// `max(1, ceil(log2(n) / (d + 2)))`.
pub fn h4_level(n: usize, d: usize) -> u32 {
    let j = ((n as f64).log2() / (d + 2) as f64).ceil();
    if j >= 1.0 {
        j as u32
    } else {
        1
    }
}

/// `min(t, vanishing moments)`.
pub fn effective_regularity(model_t: f64, wavelet: &FatherWavelet) -> f64 {
    model_t.min(wavelet.vanishing_moments as f64)
}

/// Sup-norms of the rank, stochastic and bias terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    pub sup_r: f64,
    pub sup_d: f64,
    pub sup_b: f64,
}

/// `sup|c^ - c~|`, `sup|c~ - E c~|` and `sup|E c~ - c|` over matching value lists.
pub fn decompose_error(c_hat: &[f64], c_tilde: &[f64], projected: &[f64], c_true: &[f64]) -> ErrorDecomposition {
    assert!(c_hat.len() == c_tilde.len() && c_hat.len() == projected.len() && c_hat.len() == c_true.len());
    ErrorDecomposition {
        sup_r: sup_diff(c_hat, c_tilde),
        sup_d: sup_diff(c_tilde, projected),
        sup_b: sup_diff(projected, c_true),
    }
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Evaluation points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    dim: usize,
    points: Vec<f64>,
}

impl EvalGrid {
    /// `g^d` points with coordinates `i / (g + 1)`, `i = 1..=g`.
    pub fn uniform(g: usize, dim: usize) -> Self {
        let axis: Vec<f64> = (1..=g).map(|i| i as f64 / (g + 1) as f64).collect();
        Self::product(&axis, dim)
    }

    /// Centers of the `2^{jd}` dyadic cells.
    pub fn cell_centers(level: u32, dim: usize) -> Self {
        let p = 1usize << level;
        let axis: Vec<f64> = (0..p).map(|i| (2 * i + 1) as f64 / (2 * p) as f64).collect();
        Self::product(&axis, dim)
    }

    /// Cartesian power of one axis, first coordinate slowest.
    pub fn product(axis: &[f64], dim: usize) -> Self {
        let total = axis.len().pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        for t in 0..total {
            crate::kernel::unflatten(t, axis.len(), &mut idx);
            points.extend(idx.iter().map(|&i| axis[i]));
        }
        EvalGrid { dim, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }
}

/// Estimator values on a grid.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub wavelet: String,
    pub level: u32,
    pub grid: EvalGrid,
    pub values: Vec<f64>,
}

impl DensityEstimate {
    pub fn evaluate(cf: &CoefficientField, grid: EvalGrid) -> Self {
        let values = grid.iter().map(|u| estimate_linear(cf, u)).collect();
        DensityEstimate { wavelet: cf.wavelet.name.clone(), level: cf.level, grid, values }
    }

    /// Clips negative values to 0 and rescales so that the grid mean is 1.
    pub fn clip_and_normalize(&mut self) {
        for v in &mut self.values {
            *v = v.max(0.0);
        }
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        if mean > 0.0 {
            for v in &mut self.values {
                *v /= mean;
            }
        }
    }

    /// CSV with header `u1,...,ud,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.grid.dim();
        let header: Vec<String> = (1..=d).map(|m| format!("u{m}")).chain(["value".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for (u, v) in self.grid.iter().zip(&self.values) {
            for x in u {
                write!(w, "{x},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

impl fmt::Display for RankScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankScaling::N => "n",
            RankScaling::NPlusOne => "n+1",
        })
    }
}
