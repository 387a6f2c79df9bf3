//! CSV and JSON writers. Data files are written with deterministic
//! formatting (shortest round-trip float representation) so reruns with the
//! same configuration are byte-identical; wall-clock fields are the only
//! values that vary between reruns.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::BenchError;

pub const ROWS_HEADER: &str =
    "experiment,estimator,n,p,u_law,alpha,realization,seed,rel_spec_error,iterations,wall_time_s,status";

pub const LRE_HEADER: &str = "experiment,estimator,n,p,u_law,alpha,lre,used_realizations";

/// One result record, one line of `rows.csv`.
#[derive(Debug, Clone)]
pub struct Row {
    pub experiment: &'static str,
    pub estimator: &'static str,
    pub n: usize,
    pub p: usize,
    pub u_law: &'static str,
    pub alpha: Option<f64>,
    pub realization: u64,
    pub seed: u64,
    pub rel_spec_error: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
    pub status: String,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Row {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.estimator,
            self.n,
            self.p,
            self.u_law,
            opt_f64(self.alpha),
            self.realization,
            self.seed,
            opt_f64(self.rel_spec_error),
            opt_usize(self.iterations),
            self.wall_time_s,
            self.status
        )
    }
}

/// Aggregated log relative error for one grid point and estimator.
#[derive(Debug, Clone)]
pub struct LreRecord {
    pub experiment: &'static str,
    pub estimator: &'static str,
    pub n: usize,
    pub p: usize,
    pub u_law: &'static str,
    pub alpha: Option<f64>,
    pub lre: f64,
    pub used_realizations: usize,
}

fn io_err(path: &Path, e: std::io::Error) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<(), BenchError> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(ROWS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn write_lre(path: &Path, records: &[LreRecord]) -> Result<(), BenchError> {
    let mut out = String::new();
    out.push_str(LRE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.estimator,
            r.n,
            r.p,
            r.u_law,
            opt_f64(r.alpha),
            r.lre,
            r.used_realizations
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Dense matrix as CSV, one line per matrix row, 17 significant digits.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<(), BenchError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.16e}", m[(i, j)]))
            .collect();
        writeln!(file, "{}", line.join(",")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}
