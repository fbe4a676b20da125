//! CSV and JSON writers and readers for sweep results.
//!
//! CSV layout: one row per grid point, columns
//! `index, drive_index, hopping_index, drive, hopping, status, error, method,
//! converged, residual, sigma_min, sigma_second, t_reached, drift,
//! truncation_error, max_bond_used`, followed by the requested observables:
//! `density_<j>`, `variance_<j>`, `g1_re_<j>`, `g1_im_<j>`, `g2_<j>` for every
//! site `j`, then `lambda, lambda_amplitude, fit_residual, fit_points`, then
//! `detuning_<k>` for every mode and `resonant_modes` (`;`-separated). Floats
//! are written as the shortest decimal that parses back to the same value;
//! absent values (failed points, failed fits) are empty cells.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Diagnostics, PointRecord, PointStatus, SweepConfig, SweepResult};
use crate::error::{Error, Result};

const FIXED: [&str; 16] = [
    "index",
    "drive_index",
    "hopping_index",
    "drive",
    "hopping",
    "status",
    "error",
    "method",
    "converged",
    "residual",
    "sigma_min",
    "sigma_second",
    "t_reached",
    "drift",
    "truncation_error",
    "max_bond_used",
];

const FIT: [&str; 4] = ["lambda", "lambda_amplitude", "fit_residual", "fit_points"];

fn site_groups(config: &SweepConfig) -> Vec<&'static str> {
    let obs = &config.observables;
    let mut groups = Vec::new();
    if obs.density {
        groups.push("density");
    }
    if obs.variance {
        groups.push("variance");
    }
    if obs.g1_row {
        groups.extend(["g1_re", "g1_im"]);
    }
    if obs.g2_row {
        groups.push("g2");
    }
    groups
}

pub fn csv_header(config: &SweepConfig) -> Vec<String> {
    let n = config.lattice.n_sites();
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    for group in site_groups(config) {
        header.extend((0..n).map(|j| format!("{group}_{j}")));
    }
    if config.observables.fit {
        header.extend(FIT.iter().map(|s| s.to_string()));
    }
    if config.observables.modes {
        header.extend((0..n).map(|k| format!("detuning_{k}")));
        header.push("resonant_modes".into());
    }
    header
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

fn opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

fn site_values<'a>(record: &'a PointRecord, group: &str) -> &'a [f64] {
    match group {
        "density" => &record.density,
        "variance" => &record.variance,
        "g1_re" => &record.g1_re,
        "g1_im" => &record.g1_im,
        _ => &record.g2,
    }
}

pub fn write_csv(result: &SweepResult, out: impl Write) -> Result<()> {
    let config = &result.config;
    let n = config.lattice.n_sites();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(config)).map_err(csv_error)?;
    for r in &result.records {
        let d = &r.diagnostics;
        let mut row = vec![
            r.index.to_string(),
            r.drive_index.to_string(),
            r.hopping_index.to_string(),
            float(r.drive),
            float(r.hopping),
            r.status.as_str().to_string(),
            r.error.clone().unwrap_or_default(),
            d.method.clone().unwrap_or_default(),
            opt(d.converged, |b| b.to_string()),
            opt(d.residual, float),
            opt(d.sigma_min, float),
            opt(d.sigma_second, float),
            opt(d.t_reached, float),
            opt(d.drift, float),
            opt(d.truncation_error, float),
            opt(d.max_bond_used, |b| b.to_string()),
        ];
        for group in site_groups(config) {
            let values = site_values(r, group);
            row.extend((0..n).map(|j| values.get(j).map(|&x| float(x)).unwrap_or_default()));
        }
        if config.observables.fit {
            row.push(opt(r.lambda, float));
            row.push(opt(r.lambda_amplitude, float));
            row.push(opt(r.fit_residual, float));
            row.push(opt(r.fit_points, |p| p.to_string()));
        }
        if config.observables.modes {
            row.extend((0..n).map(|k| r.mode_detunings.get(k).map(|&x| float(x)).unwrap_or_default()));
            row.push(r.resonant_modes.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn parse<T: std::str::FromStr>(cell: &str, column: &str) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| Error::Config(format!("bad value `{cell}` in column `{column}`")))
}

/// Parses a CSV written by [`write_csv`] for the same configuration.
pub fn read_csv(input: impl Read, config: &SweepConfig) -> Result<Vec<PointRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
    if header != csv_header(config) {
        return Err(Error::Config("CSV header does not match the configuration".into()));
    }
    let col: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let n = config.lattice.n_sites();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let cell = |name: &str| row.get(col[name]).unwrap_or("");
        let required = |name: &str| -> Result<String> {
            let v = cell(name);
            if v.is_empty() {
                Err(Error::Config(format!("missing value in column `{name}`")))
            } else {
                Ok(v.to_string())
            }
        };
        let vector = |group: &str| -> Result<Vec<f64>> {
            if !header.iter().any(|h| h == &format!("{group}_0")) {
                return Ok(Vec::new());
            }
            let cells: Vec<Option<f64>> = (0..n)
                .map(|j| {
                    let name = format!("{group}_{j}");
                    parse::<f64>(cell(&name), &name)
                })
                .collect::<Result<_>>()?;
            Ok(cells.into_iter().flatten().collect())
        };
        let status = match cell("status") {
            "ok" => PointStatus::Ok,
            "partial" => PointStatus::Partial,
            "failed" => PointStatus::Failed,
            other => return Err(Error::Config(format!("unknown status `{other}`"))),
        };
        let error = Some(cell("error").to_string()).filter(|s| !s.is_empty());
        let has = |name: &str| col.contains_key(name);
        records.push(PointRecord {
            index: required("index")?.parse().map_err(|_| Error::Config("bad index".into()))?,
            drive_index: parse(cell("drive_index"), "drive_index")?.unwrap_or_default(),
            hopping_index: parse(cell("hopping_index"), "hopping_index")?.unwrap_or_default(),
            drive: parse(&required("drive")?, "drive")?.unwrap_or_default(),
            hopping: parse(&required("hopping")?, "hopping")?.unwrap_or_default(),
            status,
            error,
            diagnostics: Diagnostics {
                method: Some(cell("method").to_string()).filter(|s| !s.is_empty()),
                converged: parse(cell("converged"), "converged")?,
                residual: parse(cell("residual"), "residual")?,
                sigma_min: parse(cell("sigma_min"), "sigma_min")?,
                sigma_second: parse(cell("sigma_second"), "sigma_second")?,
                t_reached: parse(cell("t_reached"), "t_reached")?,
                drift: parse(cell("drift"), "drift")?,
                truncation_error: parse(cell("truncation_error"), "truncation_error")?,
                max_bond_used: parse(cell("max_bond_used"), "max_bond_used")?,
            },
            density: vector("density")?,
            variance: vector("variance")?,
            g1_re: vector("g1_re")?,
            g1_im: vector("g1_im")?,
            g2: vector("g2")?,
            lambda: if has("lambda") { parse(cell("lambda"), "lambda")? } else { None },
            lambda_amplitude: if has("lambda") { parse(cell("lambda_amplitude"), "lambda_amplitude")? } else { None },
            fit_residual: if has("lambda") { parse(cell("fit_residual"), "fit_residual")? } else { None },
            fit_points: if has("lambda") { parse(cell("fit_points"), "fit_points")? } else { None },
            mode_detunings: vector("detuning")?,
            resonant_modes: if has("resonant_modes") && !cell("resonant_modes").is_empty() {
                cell("resonant_modes")
                    .split(';')
                    .map(|k| k.parse().map_err(|_| Error::Config(format!("bad mode index `{k}`"))))
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            },
        });
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

/// The JSON output: software version, resolved configuration and records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDocument {
    pub software: Software,
    pub config: SweepConfig,
    pub records: Vec<PointRecord>,
}

pub fn write_json(result: &SweepResult, mut out: impl Write) -> Result<()> {
    let doc = SweepDocument {
        software: Software { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() },
        config: result.config.clone(),
        records: result.records.clone(),
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json(input: impl Read) -> Result<SweepDocument> {
    serde_json::from_reader(input).map_err(|e| Error::Config(format!("json: {e}")))
}
