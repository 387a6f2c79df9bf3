//! Experiment runners. Each realization draws its dataset from the stream
//! `(master_seed, realization_index)`, so any subset of realizations can be
//! recomputed independently with identical results; solver failures become
//! tagged rows instead of aborting the run.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use shapemat::{
    ar_shape, contaminate, lre, pair_differences, regtme_shape, relative_spectral_error,
    sample_elliptical, ContaminationSpec, DataSet, EllipticalModel, Error as CoreError, RegConfig,
    RegSolution, ScreeningReport, ShapeMatrix, StreamKey, ThresholdSchedule, XiMode,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{self, LreRecord, Row};
use crate::BenchError;

const ESTIMATOR_SAMP_COV: &str = "SampCov";
const ESTIMATOR_TH_SAMP_COV: &str = "th-SampCov";
const ESTIMATOR_REG_TME: &str = "RegTME";
const ESTIMATOR_TH_REG_TME: &str = "th-RegTME";
const ESTIMATOR_TH_REG_TME_SCREENED: &str = "th-RegTME-screened";

/// Where a finished run left its files.
#[derive(Debug)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub rows_path: PathBuf,
    pub lre_path: PathBuf,
    pub metadata_path: PathBuf,
    pub rows: Vec<Row>,
}

fn error_tag(e: &CoreError) -> String {
    let tag = match e {
        CoreError::Existence { .. } => "existence",
        CoreError::AlphaTooSmall { .. } => "alpha-existence",
        CoreError::DegenerateIterate { .. } => "degenerate",
        CoreError::ScreeningFailed { .. } => "screening",
        CoreError::DegenerateDensity(_) => "kde",
        CoreError::AllIdentity => "identity",
        CoreError::NotConverged => "not-converged",
        _ => "other",
    };
    format!("err:{tag}")
}

fn solution_status(sol: &RegSolution) -> String {
    match (sol.guaranteed, sol.converged) {
        (true, true) => "ok".into(),
        (false, true) => "forced".into(),
        (true, false) => "maxiter".into(),
        (false, false) => "forced-maxiter".into(),
    }
}

fn reg_config(cfg: &ExperimentConfig, alpha: f64) -> RegConfig {
    let mut rc = RegConfig::new(alpha)
        .with_tol(cfg.tol)
        .with_max_iter(cfg.max_iter);
    if cfg.force_alpha {
        rc = rc.forced();
    }
    rc
}

fn schedule(cfg: &ExperimentConfig) -> ThresholdSchedule {
    ThresholdSchedule::with_multiplier(cfg.threshold_multiplier)
}

struct RowScope {
    experiment: &'static str,
    n: usize,
    p: usize,
    u_law: &'static str,
    alpha: Option<f64>,
    realization: u64,
    seed: u64,
}

impl RowScope {
    fn row(
        &self,
        estimator: &'static str,
        rel: Option<f64>,
        iterations: Option<usize>,
        wall: f64,
        status: String,
    ) -> Row {
        Row {
            experiment: self.experiment,
            estimator,
            n: self.n,
            p: self.p,
            u_law: self.u_law,
            alpha: self.alpha,
            realization: self.realization,
            seed: self.seed,
            rel_spec_error: rel,
            iterations,
            wall_time_s: wall,
            status,
        }
    }
}

/// The regularized solve shared by the RegTME and th-RegTME rows: one solve,
/// the identity part stripped, then thresholded. Computed estimate matrices
/// are offered to `matrix_sink` (a no-op unless dumping was requested).
#[allow(clippy::too_many_arguments)]
fn reg_rows(
    scope: &RowScope,
    data: &DataSet,
    truth: &ShapeMatrix,
    rc: &RegConfig,
    sched: &ThresholdSchedule,
    include_unthresholded: bool,
    rows: &mut Vec<Row>,
    matrix_sink: &mut dyn FnMut(&'static str, &nalgebra::DMatrix<f64>),
) {
    let start = Instant::now();
    let outcome = shapemat::reg_tyler(data, rc).and_then(|sol| {
        let shape = regtme_shape(&sol)?;
        Ok((sol, shape))
    });
    let solve_wall = start.elapsed().as_secs_f64();
    match outcome {
        Ok((sol, shape)) => {
            let status = solution_status(&sol);
            if include_unthresholded {
                let rel = relative_spectral_error(&shape, truth).ok();
                matrix_sink(ESTIMATOR_REG_TME, &shape);
                rows.push(scope.row(
                    ESTIMATOR_REG_TME,
                    rel,
                    Some(sol.iterations),
                    solve_wall,
                    status.clone(),
                ));
            }
            let t0 = Instant::now();
            let t = shapemat::resolve_threshold(data.p(), data.n(), sched);
            let thresholded = shapemat::hard_threshold(&shape, t);
            let rel = relative_spectral_error(&thresholded, truth).ok();
            matrix_sink(ESTIMATOR_TH_REG_TME, &thresholded);
            rows.push(scope.row(
                ESTIMATOR_TH_REG_TME,
                rel,
                Some(sol.iterations),
                solve_wall + t0.elapsed().as_secs_f64(),
                status,
            ));
        }
        Err(e) => {
            let status = error_tag(&e);
            if include_unthresholded {
                rows.push(scope.row(ESTIMATOR_REG_TME, None, None, solve_wall, status.clone()));
            }
            rows.push(scope.row(ESTIMATOR_TH_REG_TME, None, None, solve_wall, status));
        }
    }
}

/// Swallows matrices when dumping is off.
fn no_sink(_: &'static str, _: &nalgebra::DMatrix<f64>) {}

fn sample_cov_rows(
    scope: &RowScope,
    data: &DataSet,
    truth: &ShapeMatrix,
    sched: &ThresholdSchedule,
    rows: &mut Vec<Row>,
    matrix_sink: &mut dyn FnMut(&'static str, &nalgebra::DMatrix<f64>),
) {
    let scope = RowScope {
        alpha: None,
        ..*scope
    };
    let start = Instant::now();
    match shapemat::scaled_sample_cov(data) {
        Ok(cov) => {
            let wall = start.elapsed().as_secs_f64();
            let rel = relative_spectral_error(cov.matrix(), truth).ok();
            matrix_sink(ESTIMATOR_SAMP_COV, cov.matrix());
            rows.push(scope.row(ESTIMATOR_SAMP_COV, rel, Some(0), wall, "ok".into()));

            let t0 = Instant::now();
            let t = shapemat::resolve_threshold(data.p(), data.n(), sched);
            let thresholded = shapemat::hard_threshold(cov.matrix(), t);
            let rel = relative_spectral_error(&thresholded, truth).ok();
            matrix_sink(ESTIMATOR_TH_SAMP_COV, &thresholded);
            rows.push(scope.row(
                ESTIMATOR_TH_SAMP_COV,
                rel,
                Some(0),
                wall + t0.elapsed().as_secs_f64(),
                "ok".into(),
            ));
        }
        Err(e) => {
            let wall = start.elapsed().as_secs_f64();
            let status = error_tag(&e);
            rows.push(scope.row(ESTIMATOR_SAMP_COV, None, None, wall, status.clone()));
            rows.push(scope.row(ESTIMATOR_TH_SAMP_COV, None, None, wall, status));
        }
    }
}

/// Samples one realization's dataset, pre-differencing pairs when asked.
fn draw_dataset(
    model: &EllipticalModel,
    n: usize,
    key: StreamKey,
    pre_symmetrize: bool,
) -> Result<DataSet, CoreError> {
    if pre_symmetrize {
        let raw = sample_elliptical(model, 2 * n, key)?;
        pair_differences(&raw)
    } else {
        sample_elliptical(model, n, key)
    }
}

fn run_estimator_grid(
    cfg: &ExperimentConfig,
    out_dir: &std::path::Path,
    rows: &mut Vec<Row>,
) -> Result<(), BenchError> {
    let sched = schedule(cfg);
    let alphas = cfg.alpha.values();
    let dump_dir = |sub: &str| -> Result<std::path::PathBuf, BenchError> {
        let dir = out_dir.join(sub);
        std::fs::create_dir_all(&dir)
            .map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    };
    let data_dir = cfg.dump_data.then(|| dump_dir("data")).transpose()?;
    let matrix_dir = cfg
        .dump_matrices
        .then(|| dump_dir("matrices"))
        .transpose()?;

    for &u_law in &cfg.u_laws {
        for &ratio in &cfg.p_over_n {
            for &n in &cfg.n_values {
                let p = (ratio * n as f64).round() as usize;
                let truth = ar_shape(p, cfg.rho).map_err(BenchError::Core)?;
                let model =
                    EllipticalModel::centered(truth.clone(), XiMode::StandardGaussian, u_law);
                for r in 0..cfg.realizations as u64 {
                    let key = StreamKey::new(cfg.master_seed, r);
                    let data = draw_dataset(&model, n, key, cfg.pre_symmetrize)
                        .map_err(BenchError::Core)?;
                    if let Some(dir) = &data_dir {
                        let path = dir.join(format!("n{n}_p{p}_{}_r{r}.csv", u_law.name()));
                        // One row per sample.
                        output::write_matrix_csv(&path, &data.samples().transpose())?;
                    }
                    for &alpha in &alphas {
                        let scope = RowScope {
                            experiment: cfg.experiment.name(),
                            n,
                            p,
                            u_law: u_law.name(),
                            alpha: Some(alpha),
                            realization: r,
                            seed: cfg.master_seed,
                        };
                        let mut dumped: Vec<(String, nalgebra::DMatrix<f64>)> = Vec::new();
                        {
                            let mut sink = |estimator: &'static str, m: &nalgebra::DMatrix<f64>| {
                                if matrix_dir.is_some() {
                                    let name = format!(
                                        "{estimator}_n{n}_p{p}_{}_alpha{alpha}_r{r}.csv",
                                        u_law.name()
                                    );
                                    dumped.push((name, m.clone()));
                                }
                            };
                            if alpha == alphas[0] {
                                sample_cov_rows(&scope, &data, &truth, &sched, rows, &mut sink);
                            }
                            reg_rows(
                                &scope,
                                &data,
                                &truth,
                                &reg_config(cfg, alpha),
                                &sched,
                                true,
                                rows,
                                &mut sink,
                            );
                        }
                        if let Some(dir) = &matrix_dir {
                            for (name, m) in &dumped {
                                output::write_matrix_csv(&dir.join(name), m)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn run_alpha_sweep(cfg: &ExperimentConfig, rows: &mut Vec<Row>) -> Result<(), BenchError> {
    let sched = schedule(cfg);
    for &u_law in &cfg.u_laws {
        for &ratio in &cfg.p_over_n {
            for &n in &cfg.n_values {
                let p = (ratio * n as f64).round() as usize;
                let truth = ar_shape(p, cfg.rho).map_err(BenchError::Core)?;
                let model =
                    EllipticalModel::centered(truth.clone(), XiMode::StandardGaussian, u_law);
                for r in 0..cfg.realizations as u64 {
                    let key = StreamKey::new(cfg.master_seed, r);
                    let data = draw_dataset(&model, n, key, cfg.pre_symmetrize)
                        .map_err(BenchError::Core)?;
                    for alpha in cfg.alpha.values() {
                        let scope = RowScope {
                            experiment: cfg.experiment.name(),
                            n,
                            p,
                            u_law: u_law.name(),
                            alpha: Some(alpha),
                            realization: r,
                            seed: cfg.master_seed,
                        };
                        reg_rows(
                            &scope,
                            &data,
                            &truth,
                            &reg_config(cfg, alpha),
                            &sched,
                            false,
                            rows,
                            &mut no_sink,
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

fn run_alpha_vs_n(cfg: &ExperimentConfig, rows: &mut Vec<Row>) -> Result<(), BenchError> {
    let sched = schedule(cfg);
    let p = cfg.p_fixed.expect("validated");
    let truth = ar_shape(p, cfg.rho).map_err(BenchError::Core)?;
    for &u_law in &cfg.u_laws {
        let model = EllipticalModel::centered(truth.clone(), XiMode::StandardGaussian, u_law);
        for &n in &cfg.n_values {
            for r in 0..cfg.realizations as u64 {
                let key = StreamKey::new(cfg.master_seed, r);
                let data =
                    draw_dataset(&model, n, key, cfg.pre_symmetrize).map_err(BenchError::Core)?;
                for alpha in cfg.alpha.values() {
                    let scope = RowScope {
                        experiment: cfg.experiment.name(),
                        n,
                        p,
                        u_law: u_law.name(),
                        alpha: Some(alpha),
                        realization: r,
                        seed: cfg.master_seed,
                    };
                    reg_rows(
                        &scope,
                        &data,
                        &truth,
                        &reg_config(cfg, alpha),
                        &sched,
                        false,
                        rows,
                        &mut no_sink,
                    );
                }
            }
        }
    }
    Ok(())
}

/// Sidecar JSON written for every screening realization.
#[derive(Serialize)]
struct ScreeningDump<'a> {
    experiment: &'static str,
    outlier_model: &'static str,
    epsilon: f64,
    n: usize,
    p: usize,
    alpha: f64,
    realization: u64,
    seed: u64,
    /// Indices the generator labeled as outliers; exactly `round(eps * n)`.
    true_outliers: Vec<usize>,
    report: &'a ScreeningReport,
}

fn run_outlier_screening(
    cfg: &ExperimentConfig,
    out_dir: &std::path::Path,
    rows: &mut Vec<Row>,
) -> Result<(), BenchError> {
    let sched = schedule(cfg);
    let screening_dir = out_dir.join("screening");
    std::fs::create_dir_all(&screening_dir)
        .map_err(|e| BenchError::Io(format!("{}: {e}", screening_dir.display())))?;
    let alpha = cfg.alpha.values()[0];
    for model_name in &cfg.outlier_models {
        for &eps in &cfg.epsilons {
            for &ratio in &cfg.p_over_n {
                for &n in &cfg.n_values {
                    let p = (ratio * n as f64).round() as usize;
                    let truth = ar_shape(p, cfg.rho).map_err(BenchError::Core)?;
                    for r in 0..cfg.realizations as u64 {
                        let key = StreamKey::new(cfg.master_seed, r);
                        let u_law = cfg.u_laws[0];
                        let spec = ContaminationSpec {
                            epsilon: eps,
                            inlier: EllipticalModel::centered(
                                truth.clone(),
                                XiMode::StandardGaussian,
                                u_law,
                            ),
                            outlier_diag: model_name.diag_spec(),
                        };
                        let data = contaminate(&spec, n, key).map_err(BenchError::Core)?;
                        let scope = RowScope {
                            experiment: cfg.experiment.name(),
                            n,
                            p,
                            u_law: u_law.name(),
                            alpha: Some(alpha),
                            realization: r,
                            seed: cfg.master_seed,
                        };
                        let rc = reg_config(cfg, alpha);

                        reg_rows(
                            &scope,
                            &data,
                            &truth,
                            &rc,
                            &sched,
                            false,
                            rows,
                            &mut no_sink,
                        );

                        let start = Instant::now();
                        match shapemat::screen_and_reestimate(&data, &rc, &sched, 0.7) {
                            Ok((report, estimate)) => {
                                let wall = start.elapsed().as_secs_f64();
                                let rel = relative_spectral_error(&estimate, &truth).ok();
                                rows.push(scope.row(
                                    ESTIMATOR_TH_REG_TME_SCREENED,
                                    rel,
                                    None,
                                    wall,
                                    "ok".into(),
                                ));
                                let true_outliers: Vec<usize> = data
                                    .labels()
                                    .map(|l| {
                                        l.iter()
                                            .enumerate()
                                            .filter(|(_, is_out)| **is_out)
                                            .map(|(i, _)| i)
                                            .collect()
                                    })
                                    .unwrap_or_default();
                                let dump = ScreeningDump {
                                    experiment: cfg.experiment.name(),
                                    outlier_model: model_name.name(),
                                    epsilon: eps,
                                    n,
                                    p,
                                    alpha,
                                    realization: r,
                                    seed: cfg.master_seed,
                                    true_outliers,
                                    report: &report,
                                };
                                let path = screening_dir
                                    .join(format!("eps{eps}_{}_r{r}.json", model_name.name()));
                                output::write_json(&path, &dump)?;
                            }
                            Err(e) => {
                                let wall = start.elapsed().as_secs_f64();
                                rows.push(scope.row(
                                    ESTIMATOR_TH_REG_TME_SCREENED,
                                    None,
                                    None,
                                    wall,
                                    error_tag(&e),
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Groups rows by `(estimator, n, p, u_law, alpha)` in first-seen order and
/// aggregates the log relative error over successful realizations.
fn aggregate_lre(rows: &[Row]) -> Vec<LreRecord> {
    type GridPoint = (&'static str, usize, usize, &'static str, Option<u64>);
    let mut order: Vec<(&'static str, usize, usize, &'static str, Option<f64>)> = Vec::new();
    let mut buckets: std::collections::HashMap<GridPoint, Vec<f64>> =
        std::collections::HashMap::new();
    let keyed = |alpha: Option<f64>| alpha.map(f64::to_bits);
    for row in rows {
        let key = (row.estimator, row.n, row.p, row.u_law, keyed(row.alpha));
        let bucket = buckets.entry(key).or_insert_with(|| {
            order.push((row.estimator, row.n, row.p, row.u_law, row.alpha));
            Vec::new()
        });
        if let Some(err) = row.rel_spec_error {
            bucket.push(err);
        }
    }
    let experiment = rows.first().map(|r| r.experiment).unwrap_or("");
    order
        .into_iter()
        .filter_map(|(estimator, n, p, u_law, alpha)| {
            let errs = &buckets[&(estimator, n, p, u_law, keyed(alpha))];
            lre(errs).ok().map(|value| LreRecord {
                experiment,
                estimator,
                n,
                p,
                u_law,
                alpha,
                lre: value,
                used_realizations: errs.len(),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    rng: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct RunInfo {
    started_unix_ms: u128,
    elapsed_s: f64,
}

/// Runs the configured experiment and writes `rows.csv`, `lre.csv`,
/// `metadata.json` (all deterministic given the config; wall-time fields in
/// `rows.csv` excepted) plus the volatile `runinfo.json` timing sidecar.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, BenchError> {
    cfg.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_millis();
    let timer = Instant::now();

    let out_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| BenchError::Io(format!("{}: {e}", out_dir.display())))?;

    let mut rows = Vec::new();
    match cfg.experiment {
        ExperimentKind::EstimatorGrid => run_estimator_grid(cfg, &out_dir, &mut rows)?,
        ExperimentKind::AlphaSweep => run_alpha_sweep(cfg, &mut rows)?,
        ExperimentKind::AlphaVsN => run_alpha_vs_n(cfg, &mut rows)?,
        ExperimentKind::OutlierScreening => run_outlier_screening(cfg, &out_dir, &mut rows)?,
    }

    let rows_path = out_dir.join("rows.csv");
    output::write_rows(&rows_path, &rows)?;

    let lre_path = out_dir.join("lre.csv");
    output::write_lre(&lre_path, &aggregate_lre(&rows))?;

    let metadata_path = out_dir.join("metadata.json");
    output::write_json(
        &metadata_path,
        &Metadata {
            config: cfg,
            rng: "chacha12; stream index = realization * 8 + role",
            version: env!("CARGO_PKG_VERSION"),
        },
    )?;

    output::write_json(
        &out_dir.join("runinfo.json"),
        &RunInfo {
            started_unix_ms: started,
            elapsed_s: timer.elapsed().as_secs_f64(),
        },
    )?;

    Ok(RunArtifacts {
        output_dir: out_dir,
        rows_path,
        lre_path,
        metadata_path,
        rows,
    })
}
