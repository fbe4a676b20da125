//! Parameter sweeps over the (Ω, J) plane and their CSV/JSON emission.
//!
//! Grid points are independent. They are evaluated on a bounded worker pool,
//! gathered in grid order (drive index outer, hopping index inner) and
//! optionally appended to a JSON-lines log as they finish, so that a rerun of
//! the same configuration skips every point already in the log.

mod config;
mod emit;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    Axis, Format, Grid, ModelSection, ObservableSection, OutputSection, SolverKind, SolverSection, SweepConfig,
};
pub use emit::{csv_header, read_csv, read_json, write_csv, write_json, SweepDocument};

use crate::dense::{steady_state, DenseState, SolveMethod};
use crate::error::{Error, Result};
use crate::model::build_liouvillian;
use crate::momentum::resonant_modes;
use crate::mpdo::{relax_to_steady, MpdoState};
use crate::observables::{
    density, fit_correlation_length, g1_row, g2_row, variance, Expectation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    /// The solver succeeded but some requested observable is undefined.
    Partial,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Partial => "partial",
            Self::Failed => "failed",
        }
    }
}

/// Solver-specific diagnostics; fields that do not apply are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Option<String>,
    pub converged: Option<bool>,
    pub residual: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_second: Option<f64>,
    pub t_reached: Option<f64>,
    pub drift: Option<f64>,
    pub truncation_error: Option<f64>,
    pub max_bond_used: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub drive_index: usize,
    pub hopping_index: usize,
    pub drive: f64,
    pub hopping: f64,
    pub status: PointStatus,
    pub error: Option<String>,
    pub diagnostics: Diagnostics,
    pub density: Vec<f64>,
    pub variance: Vec<f64>,
    pub g1_re: Vec<f64>,
    pub g1_im: Vec<f64>,
    pub g2: Vec<f64>,
    pub lambda: Option<f64>,
    pub lambda_amplitude: Option<f64>,
    pub fit_residual: Option<f64>,
    pub fit_points: Option<usize>,
    pub mode_detunings: Vec<f64>,
    pub resonant_modes: Vec<usize>,
}

impl PointRecord {
    fn empty(config: &SweepConfig, drive_index: usize, hopping_index: usize) -> Self {
        Self {
            index: drive_index * config.grid.hopping.count + hopping_index,
            drive_index,
            hopping_index,
            drive: config.grid.drive.values()[drive_index],
            hopping: config.grid.hopping.values()[hopping_index],
            status: PointStatus::Ok,
            error: None,
            diagnostics: Diagnostics::default(),
            density: Vec::new(),
            variance: Vec::new(),
            g1_re: Vec::new(),
            g1_im: Vec::new(),
            g2: Vec::new(),
            lambda: None,
            lambda_amplitude: None,
            fit_residual: None,
            fit_points: None,
            mode_detunings: Vec::new(),
            resonant_modes: Vec::new(),
        }
    }

    fn note(&mut self, status: PointStatus, message: String) {
        if status == PointStatus::Failed || self.status == PointStatus::Ok {
            self.status = status;
        }
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {message}"),
            None => message,
        });
    }

    fn all_finite(&self) -> bool {
        let d = &self.diagnostics;
        [&self.density, &self.variance, &self.g1_re, &self.g1_im, &self.g2, &self.mode_detunings]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
            && [d.residual, d.sigma_min, d.sigma_second, d.t_reached, d.drift, d.truncation_error]
                .iter()
                .chain([self.lambda, self.lambda_amplitude, self.fit_residual].iter())
                .all(|x| x.map_or(true, f64::is_finite))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub records: Vec<PointRecord>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.status == PointStatus::Failed).count()
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one.
    pub threads: usize,
    /// JSON-lines log of finished points; existing entries are reused.
    pub log: Option<PathBuf>,
    /// Evaluation order as a permutation of grid indices. Only the order of
    /// work changes; results are always returned in grid order.
    pub order: Option<Vec<usize>>,
}

/// Evaluates one grid point with the configured solver.
pub fn evaluate_point(config: &SweepConfig, drive_index: usize, hopping_index: usize) -> PointRecord {
    let mut record = PointRecord::empty(config, drive_index, hopping_index);
    let params = config.params_at(drive_index, hopping_index);
    let obs = &config.observables;
    if obs.modes {
        match resonant_modes(config.lattice.n_sites(), params.delta, params.hopping, obs.mode_tol) {
            Ok(spectrum) => {
                record.mode_detunings = spectrum.detunings;
                record.resonant_modes = spectrum.resonant;
            }
            Err(e) => record.note(PointStatus::Partial, format!("modes: {e}")),
        }
    }
    let needs_state = obs.density || obs.variance || obs.g1_row || obs.g2_row || obs.fit;
    if !needs_state {
        return record;
    }
    match config.solver.kind {
        SolverKind::Dense => {
            let solved = build_liouvillian(&config.lattice, &params)
                .and_then(|l| steady_state(&l, &config.solver.dense));
            match solved {
                Ok((state, report)) => {
                    let [s0, s1] = report.smallest_singular_values;
                    record.diagnostics = Diagnostics {
                        method: Some(
                            match report.method {
                                SolveMethod::NullSpace => "null-space",
                                SolveMethod::TimeMarch => "time-march",
                            }
                            .into(),
                        ),
                        converged: Some(true),
                        residual: Some(report.residual),
                        sigma_min: s0.is_finite().then_some(s0),
                        sigma_second: s1.is_finite().then_some(s1),
                        ..Diagnostics::default()
                    };
                    measure::<DenseState>(config, &state, &mut record);
                }
                Err(e) => record.note(PointStatus::Failed, e.to_string()),
            }
        }
        SolverKind::Mpdo => match relax_to_steady(&config.lattice, &params, &config.solver.mpdo) {
            Ok((state, report)) => {
                record.diagnostics = Diagnostics {
                    method: Some("tebd".into()),
                    converged: Some(report.converged),
                    t_reached: Some(report.t_reached),
                    drift: Some(report.observable_drift),
                    truncation_error: Some(report.final_truncation_error),
                    max_bond_used: Some(report.max_bond_used),
                    ..Diagnostics::default()
                };
                measure::<MpdoState>(config, &state, &mut record);
            }
            Err(e) => record.note(PointStatus::Failed, e.to_string()),
        },
    }
    if !record.all_finite() {
        let mut failed = PointRecord::empty(config, drive_index, hopping_index);
        failed.note(PointStatus::Failed, "non-finite observable".into());
        return failed;
    }
    record
}

fn measure<S: Expectation>(config: &SweepConfig, state: &S, record: &mut PointRecord) {
    let obs = &config.observables;
    let sites = 0..config.lattice.n_sites();
    if obs.density {
        match sites.clone().map(|j| density(state, j)).collect::<Result<Vec<_>>>() {
            Ok(v) => record.density = v,
            Err(e) => record.note(PointStatus::Partial, format!("density: {e}")),
        }
    }
    if obs.variance {
        match sites.clone().map(|j| variance(state, j)).collect::<Result<Vec<_>>>() {
            Ok(v) => record.variance = v,
            Err(e) => record.note(PointStatus::Partial, format!("variance: {e}")),
        }
    }
    let anchor = config.anchor();
    if obs.g1_row || obs.fit {
        match g1_row(state, anchor) {
            Ok(row) => {
                if obs.g1_row {
                    record.g1_re = row.values.iter().map(|g| g.re).collect();
                    record.g1_im = row.values.iter().map(|g| g.im).collect();
                }
                if obs.fit {
                    match fit_correlation_length(&row, &obs.fit_options) {
                        Ok(fit) => {
                            record.fit_residual = Some(fit.rms_residual);
                            record.fit_points = Some(fit.n_points);
                            if fit.success {
                                record.lambda = Some(fit.lambda);
                                record.lambda_amplitude = Some(fit.amplitude);
                            }
                        }
                        Err(e) => log::debug!("point {}: {e}", record.index),
                    }
                }
            }
            Err(e) => record.note(PointStatus::Partial, format!("g1: {e}")),
        }
    }
    if obs.g2_row {
        match g2_row(state, anchor, obs.g2_imag_tol) {
            Ok(v) => record.g2 = v,
            Err(e) => record.note(PointStatus::Partial, format!("g2: {e}")),
        }
    }
}

fn log_header(config: &SweepConfig) -> Result<String> {
    serde_json::to_string(&serde_json::json!({ "config": config })).map_err(|e| Error::Config(e.to_string()))
}

/// Reads finished points from `path`, dropping a torn final line.
fn read_log(path: &Path, config: &SweepConfig) -> Result<BTreeMap<usize, PointRecord>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let bytes = std::fs::read(path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    if complete < bytes.len() {
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    let mut lines = BufReader::new(&bytes[..complete]).lines();
    match lines.next() {
        None => return Ok(done),
        Some(header) => {
            if header? != log_header(config)? {
                return Err(Error::Config(format!("{} was written by a different configuration", path.display())));
            }
        }
    }
    for line in lines {
        let record: PointRecord =
            serde_json::from_str(&line?).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        done.insert(record.index, record);
    }
    Ok(done)
}

pub fn run_sweep(config: &SweepConfig, opts: &RunOptions) -> Result<SweepResult> {
    config.validate()?;
    let total = config.grid.len();
    if config.observables.is_empty() {
        return Ok(SweepResult { config: config.clone(), records: Vec::new() });
    }
    let order = match &opts.order {
        Some(order) => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..total).collect::<Vec<_>>() {
                return Err(Error::Config("evaluation order must be a permutation of the grid".into()));
            }
            order.clone()
        }
        None => (0..total).collect(),
    };

    let mut done = BTreeMap::new();
    let log = match &opts.log {
        Some(path) => {
            done = read_log(path, config)?;
            let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                writeln!(file, "{}", log_header(config)?)?;
            }
            Some(Mutex::new(file))
        }
        None => None,
    };
    let pending: Vec<usize> = order.into_iter().filter(|i| !done.contains_key(i)).collect();
    log::info!("{} of {total} grid points to evaluate", pending.len());

    let hop = config.grid.hopping.count;
    let work = |index: usize| -> Result<PointRecord> {
        let record = evaluate_point(config, index / hop, index % hop);
        if let Some(file) = &log {
            let line = serde_json::to_string(&record).map_err(|e| Error::Checkpoint(e.to_string()))?;
            let mut file: std::sync::MutexGuard<'_, File> = file.lock().expect("log writer poisoned");
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        log::debug!("point {index} ({}, {}): {}", record.drive, record.hopping, record.status.as_str());
        Ok(record)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let fresh: Vec<PointRecord> = pool.install(|| pending.par_iter().map(|&i| work(i)).collect::<Result<_>>())?;
    for record in fresh {
        done.insert(record.index, record);
    }
    Ok(SweepResult { config: config.clone(), records: done.into_values().collect() })
}

/// Runs the sweep with the resume log in the output directory and writes the
/// requested formats there. Returns the result and the files written.
pub fn run_and_emit(config: &SweepConfig, threads: usize) -> Result<(SweepResult, Vec<PathBuf>)> {
    config.validate()?;
    let out = &config.output;
    std::fs::create_dir_all(&out.dir)?;
    let log = out.resume.then(|| out.dir.join(format!("{}.points.jsonl", out.stem)));
    let result = run_sweep(config, &RunOptions { threads, log, order: None })?;
    let mut written = Vec::new();
    for format in &out.formats {
        let path = match format {
            Format::Csv => out.dir.join(format!("{}.csv", out.stem)),
            Format::Json => out.dir.join(format!("{}.json", out.stem)),
        };
        let file = std::io::BufWriter::new(File::create(&path)?);
        match format {
            Format::Csv => write_csv(&result, file)?,
            Format::Json => write_json(&result, file)?,
        }
        written.push(path);
    }
    Ok((result, written))
}
