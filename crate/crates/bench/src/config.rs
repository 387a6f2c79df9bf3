//! Experiment configuration: JSON-file format, per-experiment defaults and
//! validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shapemat::{OutlierDiagSpec, ScaleLaw};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Four-estimator comparison on banded-decay shapes.
    EstimatorGrid,
    /// Error and runtime of the thresholded regularized estimator across
    /// regularization levels.
    AlphaSweep,
    /// Same study with the dimension fixed and the sample size swept.
    AlphaVsN,
    /// Contaminated data: weight screening before re-estimation.
    OutlierScreening,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::EstimatorGrid => "estimator-grid",
            ExperimentKind::AlphaSweep => "alpha-sweep",
            ExperimentKind::AlphaVsN => "alpha-vs-n",
            ExperimentKind::OutlierScreening => "outlier-screening",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One regularization level or a list of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    One(f64),
    Many(Vec<f64>),
}

impl AlphaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaSpec::One(a) => vec![*a],
            AlphaSpec::Many(v) => v.clone(),
        }
    }
}

/// Outlier shape profile selector for the screening experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierModelName {
    /// Diffuse outliers: i.i.d. uniform diagonal on `[1, 5]`.
    Uniform,
    /// Outliers near a random 2-d subspace.
    Spiked,
}

impl OutlierModelName {
    pub fn diag_spec(&self) -> OutlierDiagSpec {
        match self {
            OutlierModelName::Uniform => OutlierDiagSpec::uniform_1_5(),
            OutlierModelName::Spiked => OutlierDiagSpec::Spiked,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutlierModelName::Uniform => "uniform",
            OutlierModelName::Spiked => "spiked",
        }
    }
}

fn default_realizations() -> usize {
    20
}
fn default_seed() -> u64 {
    1
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    1400
}
fn default_threshold_multiplier() -> f64 {
    1.0
}
fn default_r_target() -> f64 {
    0.5
}
fn default_rho() -> f64 {
    0.7
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_alpha() -> AlphaSpec {
    AlphaSpec::One(10.0)
}

/// Full description of one experiment run. Serialized as JSON; every field
/// is optional in the file and falls back to the experiment's defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Dimension-to-sample ratios; `p = round(ratio * n)`.
    #[serde(default)]
    pub p_over_n: Vec<f64>,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub u_laws: Vec<ScaleLaw>,
    #[serde(default = "default_alpha")]
    pub alpha: AlphaSpec,
    /// Target convergence ratio for diagnostic level recommendations.
    #[serde(rename = "R_target", default = "default_r_target")]
    pub r_target: f64,
    #[serde(default = "default_threshold_multiplier")]
    pub threshold_multiplier: f64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Decay of the ground-truth shape `rho^{|i-j|}`.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Contamination fractions (outlier-screening only).
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Outlier shape profiles (outlier-screening only).
    #[serde(default)]
    pub outlier_models: Vec<OutlierModelName>,
    /// Fixed dimension for the alpha-vs-n experiment.
    #[serde(default)]
    pub p_fixed: Option<usize>,
    /// Run regularization levels at or below the existence bound; such rows
    /// are flagged as forced.
    #[serde(default)]
    pub force_alpha: bool,
    /// Draw 2n samples and difference consecutive pairs before estimating,
    /// the location-removal device. Off by default: the generated models are
    /// centered, so differencing only costs samples. Not available for the
    /// outlier-screening experiment, whose labels would not survive.
    #[serde(default)]
    pub pre_symmetrize: bool,
    /// Write each realization's dataset to `data/` (CSV, one row per
    /// sample). Estimator-grid only.
    #[serde(default)]
    pub dump_data: bool,
    /// Write each estimate matrix to `matrices/` (dense CSV, one row per
    /// matrix row, 17 significant digits). Estimator-grid only.
    #[serde(default)]
    pub dump_matrices: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            p_over_n: Vec::new(),
            n_values: Vec::new(),
            u_laws: Vec::new(),
            alpha: default_alpha(),
            r_target: default_r_target(),
            threshold_multiplier: default_threshold_multiplier(),
            realizations: default_realizations(),
            master_seed: default_seed(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            output_dir: default_output_dir(),
            rho: default_rho(),
            epsilons: Vec::new(),
            outlier_models: Vec::new(),
            p_fixed: None,
            force_alpha: false,
            pre_symmetrize: false,
            dump_data: false,
            dump_matrices: false,
        };
        cfg.fill_defaults();
        cfg
    }

    /// Fills empty list fields with the experiment's defaults; called after
    /// loading a config file so partial files stay short.
    pub fn fill_defaults(&mut self) {
        match self.experiment {
            ExperimentKind::EstimatorGrid => {
                if self.p_over_n.is_empty() {
                    self.p_over_n = vec![0.5, 1.0, 2.0];
                }
                if self.n_values.is_empty() {
                    self.n_values = vec![100, 200];
                }
                if self.u_laws.is_empty() {
                    self.u_laws = vec![ScaleLaw::Constant, ScaleLaw::Laplace, ScaleLaw::Cauchy];
                }
            }
            ExperimentKind::AlphaSweep => {
                if self.p_over_n.is_empty() {
                    self.p_over_n = vec![2.0];
                }
                if self.n_values.is_empty() {
                    self.n_values = vec![100, 200];
                }
                if self.u_laws.is_empty() {
                    self.u_laws = vec![ScaleLaw::Constant];
                }
                if matches!(self.alpha, AlphaSpec::One(a) if a == 10.0) {
                    self.alpha =
                        AlphaSpec::Many(vec![0.5, 0.8, 1.0, 1.2, 2.0, 3.0, 5.0, 10.0, 20.0]);
                }
                self.force_alpha = true;
            }
            ExperimentKind::AlphaVsN => {
                if self.n_values.is_empty() {
                    self.n_values = vec![30, 50, 75, 100, 150];
                }
                if self.u_laws.is_empty() {
                    self.u_laws = vec![ScaleLaw::Constant];
                }
                if self.p_fixed.is_none() {
                    self.p_fixed = Some(240);
                }
                if matches!(self.alpha, AlphaSpec::One(a) if a == 10.0) {
                    self.alpha = AlphaSpec::Many(vec![1.0, 2.0, 3.0, 4.0]);
                }
                self.force_alpha = true;
            }
            ExperimentKind::OutlierScreening => {
                if self.p_over_n.is_empty() {
                    self.p_over_n = vec![0.5];
                }
                if self.n_values.is_empty() {
                    self.n_values = vec![200];
                }
                if self.u_laws.is_empty() {
                    self.u_laws = vec![ScaleLaw::Constant];
                }
                if self.epsilons.is_empty() {
                    self.epsilons = vec![0.0, 0.1, 0.2, 0.3, 0.4];
                }
                if self.outlier_models.is_empty() {
                    self.outlier_models = vec![OutlierModelName::Uniform, OutlierModelName::Spiked];
                }
                if self.realizations == default_realizations() {
                    self.realizations = 10;
                }
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Io(format!("reading {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("parsing {}: {e}", path.display())))?;
        cfg.fill_defaults();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.realizations == 0 {
            return fail("realizations must be at least 1".into());
        }
        if self.n_values.is_empty() {
            return fail("n_values must not be empty".into());
        }
        for &n in &self.n_values {
            if n < 4 {
                return fail(format!("n = {n} below the minimum of 4"));
            }
        }
        match self.experiment {
            ExperimentKind::AlphaVsN => {
                let p = self
                    .p_fixed
                    .ok_or_else(|| BenchError::Config("alpha-vs-n needs p_fixed".into()))?;
                if p < 2 {
                    return fail(format!("p_fixed = {p} below the minimum of 2"));
                }
            }
            _ => {
                if self.p_over_n.is_empty() {
                    return fail("p_over_n must not be empty".into());
                }
                for &ratio in &self.p_over_n {
                    for &n in &self.n_values {
                        let p = (ratio * n as f64).round() as i64;
                        if p < 2 {
                            return fail(format!(
                                "ratio {ratio} with n = {n} resolves to p = {p} < 2"
                            ));
                        }
                    }
                }
            }
        }
        let r_valid = self.r_target > 0.0 && self.r_target < 1.0;
        if !r_valid {
            return fail(format!("R_target = {} outside (0, 1)", self.r_target));
        }
        if self.rho.is_nan() || self.rho.abs() >= 1.0 {
            return fail(format!("rho = {} outside (-1, 1)", self.rho));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return fail("tol must be positive and max_iter nonzero".into());
        }
        if self.threshold_multiplier.is_nan() || self.threshold_multiplier <= 0.0 {
            return fail("threshold_multiplier must be positive".into());
        }
        for &eps in &self.epsilons {
            if !(0.0..1.0).contains(&eps) {
                return fail(format!("epsilon = {eps} outside [0, 1)"));
            }
        }
        for a in self.alpha.values() {
            if a.is_nan() || a <= 0.0 {
                return fail(format!("alpha = {a} must be positive"));
            }
        }
        if self.pre_symmetrize && self.experiment == ExperimentKind::OutlierScreening {
            return fail("pre_symmetrize is not available for outlier-screening".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [
            ExperimentKind::EstimatorGrid,
            ExperimentKind::AlphaSweep,
            ExperimentKind::AlphaVsN,
            ExperimentKind::OutlierScreening,
        ] {
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{ "experiment": "estimator-grid", "n_values": [50], "master_seed": 9 }"#,
        )
        .unwrap();
        let mut cfg = cfg;
        cfg.fill_defaults();
        assert_eq!(cfg.n_values, vec![50]);
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.p_over_n, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.realizations, 20);
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::EstimatorGrid);
        cfg.realizations = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(ExperimentKind::EstimatorGrid);
        cfg.n_values = vec![3];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(ExperimentKind::EstimatorGrid);
        cfg.p_over_n = vec![0.001];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(ExperimentKind::OutlierScreening);
        cfg.epsilons = vec![1.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn alpha_spec_accepts_scalar_and_list() {
        let one: AlphaSpec = serde_json::from_str("10.0").unwrap();
        assert_eq!(one.values(), vec![10.0]);
        let many: AlphaSpec = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(many.values(), vec![1.0, 2.0]);
    }
}
