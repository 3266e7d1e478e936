//! Run configuration.
//!
//! A run is described by a TOML file (or the JSON copy embedded in every
//! `summary.json`); command-line flags override individual fields. Unknown
//! keys are rejected and every field is validated before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bloch::BlochVector;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::frames::CascadeConfig;
use crate::integrator::IntegratorConfig;
use crate::schedule::{ConstantSchedule, DriveSchedule, LZParams, LzSchedule};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Sweep,
    Frames,
    Qfactor,
    Map,
    Sensitivity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveKind {
    #[default]
    LandauZener,
    Constant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eigenstate {
    #[default]
    Ground,
    Excited,
}

/// Initial polarization: an eigenstate of `H(t_i)` or an explicit vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Eigen(Eigenstate),
    Bloch([f64; 3]),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Eigen(Eigenstate::Ground)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub kind: DriveKind,
    pub epsilon: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Field of the constant drive.
    pub field: [f64; 3],
    pub initial: InitialState,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            kind: DriveKind::LandauZener,
            epsilon: 0.34,
            t_start: -100.0,
            t_end: 100.0,
            field: [2.0, 0.0, 0.0],
            initial: InitialState::default(),
        }
    }
}

impl DriveConfig {
    pub fn lz_params(&self) -> Result<LZParams> {
        LZParams::new(self.epsilon, self.t_start, self.t_end)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn schedule(&self) -> Result<Box<dyn DriveSchedule>> {
        Ok(match self.kind {
            DriveKind::LandauZener => Box::new(LzSchedule::new(self.lz_params()?)),
            DriveKind::Constant => Box::new(ConstantSchedule::new(self.field.into())?),
        })
    }

    /// Initial polarization for `schedule`.
    pub fn initial_state(&self, schedule: &dyn DriveSchedule) -> Result<BlochVector> {
        match self.initial {
            InitialState::Bloch(p) => Ok(p.into()),
            InitialState::Eigen(which) => {
                let h = schedule
                    .field(self.t_start)
                    .unit()
                    .ok_or_else(|| Error::Config("eigenstate start needs a nonzero field at t_start".into()))?;
                Ok(match which {
                    Eigenstate::Ground => -h,
                    Eigenstate::Excited => h,
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FramesConfig {
    /// Frames traced by the `frames` scenario; 0 is the lab frame.
    pub list: Vec<usize>,
}

impl Default for FramesConfig {
    fn default() -> Self {
        Self { list: vec![0, 1, 2, 3, 4] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSettings {
    pub resolution: usize,
    pub frame: usize,
    /// Endpoint shift of the `sensitivity` scenario.
    pub delta: f64,
    /// With `panel_t_shifts`, the `map` scenario emits one map per
    /// `(epsilon, t_start shift)` pair.
    pub panel_epsilons: Vec<f64>,
    pub panel_t_shifts: Vec<f64>,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self { resolution: 2048, frame: 0, delta: 0.1, panel_epsilons: Vec::new(), panel_t_shifts: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub out: PathBuf,
    /// Worker threads for maps; `None` uses every logical processor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub drive: DriveConfig,
    pub integrator: IntegratorConfig,
    pub cascade: CascadeConfig,
    pub frames: FramesConfig,
    pub map: MapSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            out: PathBuf::from("out"),
            workers: None,
            drive: DriveConfig::default(),
            integrator: IntegratorConfig::default(),
            cascade: CascadeConfig::default(),
            frames: FramesConfig::default(),
            map: MapSettings::default(),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file has a `.json` extension. A
    /// `summary.json` from an earlier run is accepted as well.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.extension().is_some_and(|x| x == "json"))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> std::result::Result<Self, String> {
        if json {
            // A run summary carries its resolved config under `config`.
            let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            if value.get("schema_version").is_some() {
                if let Some(inner) = value.get_mut("config") {
                    value = inner.take();
                }
            }
            serde_json::from_value(value).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn execution(&self) -> Execution {
        Execution::from_workers(self.workers)
    }

    /// Checks every field; all failures are reported as configuration errors.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let d = &self.drive;
        if !(d.t_start.is_finite() && d.t_end.is_finite() && d.t_start < d.t_end) {
            return Err(Error::Config(format!("need t_start < t_end, got [{}, {}]", d.t_start, d.t_end)));
        }
        match d.kind {
            DriveKind::LandauZener => {
                d.lz_params().map_err(cfg)?;
            }
            DriveKind::Constant => {
                if !d.field.iter().all(|v| v.is_finite()) {
                    return Err(Error::Config("constant field must be finite".into()));
                }
            }
        }
        if let InitialState::Bloch(p) = d.initial {
            let p = BlochVector::from(p);
            if !p.is_finite() || p.norm() > 1.0 + crate::bloch::NORM_TOLERANCE {
                return Err(Error::Config(format!("initial Bloch vector has |P| = {} > 1", p.norm())));
            }
        }
        self.integrator.validate().map_err(cfg)?;
        self.cascade.validate().map_err(cfg)?;
        if self.frames.list.is_empty() {
            return Err(Error::Config("frames.list is empty".into()));
        }
        if let Some(&n) = self.frames.list.iter().find(|&&n| n > self.cascade.n_max) {
            return Err(Error::Config(format!("frame {n} exceeds cascade.n_max = {}", self.cascade.n_max)));
        }
        let m = &self.map;
        if m.resolution < crate::analysis::MIN_MAP_RESOLUTION {
            return Err(Error::Config(format!(
                "map.resolution must be at least {}, got {}",
                crate::analysis::MIN_MAP_RESOLUTION,
                m.resolution
            )));
        }
        if m.frame > self.cascade.n_max {
            return Err(Error::Config(format!("map.frame {} exceeds cascade.n_max", m.frame)));
        }
        if !(m.delta.is_finite() && m.delta >= 0.0) {
            return Err(Error::Config(format!("map.delta must be non-negative, got {}", m.delta)));
        }
        if m.panel_epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Config("map.panel_epsilons must be positive".into()));
        }
        if m.panel_t_shifts.iter().any(|s| !(s.is_finite() && d.t_start + s < d.t_end)) {
            return Err(Error::Config("map.panel_t_shifts must keep t_start < t_end".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if matches!(self.scenario, Scenario::Map | Scenario::Sensitivity) && d.kind != DriveKind::LandauZener {
            return Err(Error::Config("entropy maps need the landau_zener drive".into()));
        }
        Ok(())
    }
}
