use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::SolverOptions;
use crate::error::{Error, Result};
use crate::fock::LatticeSpec;
use crate::linalg::C64;
use crate::model::{resonant_detuning, ModelParams};
use crate::mpdo::RelaxOptions;
use crate::observables::{FitOptions, G2_IMAG_TOL};

/// Model section of a sweep file. Every rate and energy is a multiple of
/// `rate_unit` (the fast decay rate γ1, 1 by default).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub rate_unit: f64,
    /// `gammas[m]` is the decay rate of `|m+1> -> |m>`.
    pub gammas: Vec<f64>,
    pub interaction: f64,
    /// Defaults to the two-photon resonance `−U/2`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Drive phase in radians; grid values set the magnitude.
    #[serde(default)]
    pub drive_phase: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn fixed(value: f64) -> Self {
        Self { min: value, max: value, count: 1 }
    }

    /// Evenly spaced values from `min` to `max` inclusive.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Drive magnitude |Ω| (outer index).
    pub drive: Axis,
    /// Hopping J (inner index).
    pub hopping: Axis,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.drive.count * self.hopping.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Dense,
    Mpdo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub dense: SolverOptions,
    pub mpdo: RelaxOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableSection {
    pub density: bool,
    pub variance: bool,
    pub g1_row: bool,
    pub g2_row: bool,
    pub fit: bool,
    pub modes: bool,
    /// Reference site of correlation rows; the middle site when absent.
    pub anchor: Option<usize>,
    pub fit_options: FitOptions,
    /// Largest imaginary part of a `g2` numerator accepted as rounding.
    pub g2_imag_tol: f64,
    /// Tolerance for the resonant-mode flag.
    pub mode_tol: f64,
}

impl Default for ObservableSection {
    fn default() -> Self {
        Self {
            density: true,
            variance: true,
            g1_row: false,
            g2_row: false,
            fit: false,
            modes: false,
            anchor: None,
            fit_options: FitOptions::default(),
            g2_imag_tol: G2_IMAG_TOL,
            mode_tol: 1e-12,
        }
    }
}

impl ObservableSection {
    pub fn none() -> Self {
        Self { density: false, variance: false, ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        !(self.density || self.variance || self.g1_row || self.g2_row || self.fit || self.modes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// File stem of `<stem>.csv`, `<stem>.json` and the `<stem>.points.jsonl`
    /// resume log.
    pub stem: String,
    pub formats: Vec<Format>,
    /// Keep the per-point log so an interrupted run can resume.
    pub resume: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), stem: "sweep".into(), formats: vec![Format::Csv, Format::Json], resume: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lattice: LatticeSpec,
    pub model: ModelSection,
    pub grid: Grid,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub observables: ObservableSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The fully resolved document, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("drive", &self.grid.drive), ("hopping", &self.grid.hopping)] {
            if axis.count == 0 {
                return Err(Error::Config(format!("grid axis `{name}` needs count >= 1")));
            }
            if !axis.min.is_finite() || !axis.max.is_finite() {
                return Err(Error::Config(format!("grid axis `{name}` has non-finite bounds")));
            }
        }
        if !(self.model.rate_unit > 0.0) {
            return Err(Error::Config("rate_unit must be positive".into()));
        }
        if let Some(anchor) = self.observables.anchor {
            self.lattice.check_site(anchor).map_err(|e| Error::Config(e.to_string()))?;
        }
        for (i, j) in [(0, 0), (self.grid.drive.count - 1, self.grid.hopping.count - 1)] {
            self.params_at(i, j).validate(&self.lattice).map_err(|e| Error::Config(e.to_string()))?;
        }
        match self.solver.kind {
            SolverKind::Dense => {
                let dim = self.lattice.hilbert_dim();
                if dim > self.solver.dense.max_dim {
                    return Err(Error::Config(format!(
                        "dense solver needs Hilbert dimension {dim} <= max_dim {}",
                        self.solver.dense.max_dim
                    )));
                }
            }
            SolverKind::Mpdo => {
                if crate::mpdo::MpdoState::vacuum(&self.lattice, 1, 0.0).is_err() {
                    return Err(Error::Config("mpdo solver needs an open chain".into()));
                }
                let m = &self.solver.mpdo;
                if !(m.dt > 0.0 && m.t_max > 0.0 && m.check_interval > 0.0) || m.max_bond == 0 {
                    return Err(Error::Config("mpdo options need positive dt, t_max, check_interval, max_bond".into()));
                }
            }
        }
        Ok(())
    }

    pub fn anchor(&self) -> usize {
        self.observables.anchor.unwrap_or_else(|| self.lattice.middle_site())
    }

    /// Grid point `(drive index, hopping index)` in solver units.
    pub fn params_at(&self, drive_index: usize, hopping_index: usize) -> ModelParams {
        let unit = self.model.rate_unit;
        let m = &self.model;
        let omega = self.grid.drive.values()[drive_index];
        let hopping = self.grid.hopping.values()[hopping_index];
        ModelParams {
            delta: m.delta.unwrap_or_else(|| resonant_detuning(m.interaction)) * unit,
            interaction: m.interaction * unit,
            hopping: hopping * unit,
            drive: C64::from_polar(omega * unit, m.drive_phase),
            gammas: m.gammas.iter().map(|g| g * unit).collect(),
        }
    }
}
