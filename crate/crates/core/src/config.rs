//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::copula::{CopulaKind, CopulaModel};
use crate::error::{Error, Result};
use crate::estimator::MAX_LEVEL_DIM;
use crate::wavelet::WaveletKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: CopulaKind,
    #[serde(default = "default_wavelet")]
    pub wavelet: String,
    pub dim: usize,
    pub n_list: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub levels: LevelPolicy,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub criteria: CriteriaSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_wavelet() -> String {
    "haar".into()
}

/// How `j_n` is chosen for each `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum LevelPolicy {
    /// `resolution_rule(n, t, d)`; `t` defaults to the effective regularity.
    Rule {
        #[serde(default)]
        t: Option<f64>,
    },
    /// `max(1, ceil(log2(n) / (d + 2)))`.
    H4,
    Explicit { list: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Points per axis of the uniform grid used for non-Haar wavelets.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Subdivisions per axis of each dyadic cell when a Haar error involves `c`.
    #[serde(default = "default_lattice")]
    pub haar_lattice: usize,
}

fn default_points() -> usize {
    101
}

fn default_lattice() -> usize {
    4
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: default_points(), haar_lattice: default_lattice() }
    }
}

/// Thresholds of the pass/fail lines in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSpec {
    /// Sample size at which the band and ratio checks are read; defaults to the largest `n`.
    #[serde(default)]
    pub reference_n: Option<usize>,
    /// Band for the median normalized deviation, as multiples of its limit.
    #[serde(default = "default_band")]
    pub s_band: [f64; 2],
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "default_ratio_max")]
    pub ratio_max: f64,
    /// Allowed increases in a column that should be non-increasing.
    #[serde(default = "default_violations")]
    pub max_violations: usize,
}

fn default_band() -> [f64; 2] {
    [0.6, 1.5]
}

fn default_slope_tolerance() -> f64 {
    0.12
}

fn default_ratio_max() -> f64 {
    0.5
}

fn default_violations() -> usize {
    1
}

impl Default for CriteriaSpec {
    fn default() -> Self {
        CriteriaSpec {
            reference_n: None,
            s_band: default_band(),
            slope_tolerance: default_slope_tolerance(),
            ratio_max: default_ratio_max(),
            max_violations: default_violations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_curves")]
    pub curves: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_curves() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir(), curves: default_curves() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn model(&self) -> Result<CopulaModel> {
        CopulaModel::new(self.model).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn wavelet_kind(&self) -> Result<WaveletKind> {
        self.wavelet.parse().map_err(|e: Error| Error::InvalidConfig(e.to_string()))
    }

    /// Structural checks that do not depend on the experiment kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let model = self.model()?;
        if model.dim() != self.dim {
            return bad(format!("model {model} has dimension {}, config says {}", model.dim(), self.dim));
        }
        self.wavelet_kind()?;
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list[0] < 3 {
            return bad("every n must be at least 3".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_list must be strictly increasing".into());
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        match &self.levels {
            LevelPolicy::Rule { t: Some(t) } if !(*t > 0.0) => return bad(format!("regularity t must be > 0, got {t}")),
            LevelPolicy::Explicit { list } if list.len() != self.n_list.len() => {
                return bad(format!("{} explicit levels for {} sample sizes", list.len(), self.n_list.len()))
            }
            LevelPolicy::Explicit { list } if list.iter().any(|&j| j as usize * self.dim > MAX_LEVEL_DIM as usize) => {
                return bad(format!("explicit level exceeds the guard j*d <= {MAX_LEVEL_DIM}"))
            }
            _ => {}
        }
        if self.grid.points == 0 || self.grid.haar_lattice == 0 {
            return bad("grid sizes must be positive".into());
        }
        if let Some(r) = self.criteria.reference_n {
            if !self.n_list.contains(&r) {
                return bad(format!("reference_n {r} is not in n_list"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
model = { family = "fgm", theta = 0.75 }
dim = 2
n_list = [1024, 2048]
replications = 3
seed = 7
levels = { policy = "rule", t = 1.0 }
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.wavelet, "haar");
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.levels, LevelPolicy::Rule { t: Some(1.0) });
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            BASE.replace("[1024, 2048]", "[2048, 1024]"),
            BASE.replace("[1024, 2048]", "[]"),
            BASE.replace("replications = 3", "replications = 0"),
            BASE.replace("dim = 2", "dim = 3"),
            BASE.replace("theta = 0.75", "theta = 2.0"),
            BASE.replace("t = 1.0", "t = -1.0"),
            BASE.replace("seed = 7", "seed = 7\nunknown = 1"),
            BASE.replace("policy = \"rule\", t = 1.0", "policy = \"explicit\", list = [2]"),
            format!("{BASE}wavelet = \"db9\"\n"),
        ];
        for text in cases {
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::InvalidConfig(_))), "{text}");
        }
    }
}
