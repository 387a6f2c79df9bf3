//! `bench`: command-line runner for the shape-matrix estimation experiments.
//!
//! Usage: `bench <experiment> [--config file.json] [overrides...]`. Each
//! experiment ships desk-scale defaults; a JSON config file (fields mirror
//! the `ExperimentConfig` names) plus command-line overrides refine them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use shapemat_bench::config::{ExperimentConfig, ExperimentKind};
use shapemat_bench::{run_experiment, AlphaSpec};

#[derive(Parser, Debug)]
#[command(
    name = "bench",
    about = "Monte-Carlo benchmarks for robust sparse shape-matrix estimation",
    version
)]
struct Cli {
    /// Which experiment to run.
    #[arg(value_enum)]
    experiment: ExperimentKind,

    /// JSON configuration file; omitted fields fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Number of Monte-Carlo realizations per grid point.
    #[arg(long)]
    realizations: Option<usize>,

    /// Regularization level(s); repeat the flag for a sweep.
    #[arg(long)]
    alpha: Vec<f64>,

    /// Sample size(s); repeat the flag for several.
    #[arg(long)]
    n: Vec<usize>,

    /// Dimension-to-sample ratio(s) p/n; repeat the flag for several.
    #[arg(long)]
    ratio: Vec<f64>,

    /// Threshold multiplier in t = m * sqrt(ln p / n).
    #[arg(long = "threshold-mult")]
    threshold_mult: Option<f64>,

    /// Solver stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Solver iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,

    /// Allow regularization levels at or below the existence bound.
    #[arg(long = "force-alpha")]
    force_alpha: bool,

    /// Difference consecutive sample pairs before estimating.
    #[arg(long = "pre-symmetrize")]
    pre_symmetrize: bool,

    /// Write each realization's dataset as CSV (one row per sample).
    #[arg(long = "dump-data")]
    dump_data: bool,

    /// Write each estimate matrix as CSV (17 significant digits).
    #[arg(long = "dump-matrices")]
    dump_matrices: bool,
}

impl Cli {
    fn into_config(self) -> Result<ExperimentConfig, shapemat_bench::BenchError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path)?;
                if cfg.experiment != self.experiment {
                    return Err(shapemat_bench::BenchError::Config(format!(
                        "config file describes {} but {} was requested",
                        cfg.experiment, self.experiment
                    )));
                }
                cfg
            }
            None => ExperimentConfig::default_for(self.experiment),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = self.out {
            cfg.output_dir = out;
        }
        if let Some(realizations) = self.realizations {
            cfg.realizations = realizations;
        }
        if !self.alpha.is_empty() {
            cfg.alpha = AlphaSpec::Many(self.alpha);
        }
        if !self.n.is_empty() {
            cfg.n_values = self.n;
        }
        if !self.ratio.is_empty() {
            cfg.p_over_n = self.ratio;
        }
        if let Some(m) = self.threshold_mult {
            cfg.threshold_multiplier = m;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            cfg.max_iter = max_iter;
        }
        if self.force_alpha {
            cfg.force_alpha = true;
        }
        if self.pre_symmetrize {
            cfg.pre_symmetrize = true;
        }
        if self.dump_data {
            cfg.dump_data = true;
        }
        if self.dump_matrices {
            cfg.dump_matrices = true;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.into_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    eprintln!(
        "running {} (seed {}, {} realizations) -> {}",
        cfg.experiment,
        cfg.master_seed,
        cfg.realizations,
        cfg.output_dir.display()
    );
    match run_experiment(&cfg) {
        Ok(artifacts) => {
            let failures = artifacts
                .rows
                .iter()
                .filter(|r| r.status.starts_with("err:"))
                .count();
            eprintln!(
                "wrote {} rows to {} ({} tagged failures)",
                artifacts.rows.len(),
                artifacts.rows_path.display(),
                failures
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
