//! Command-line runner.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{self, EntropyMap, MapConfig};
use crate::config::{DriveKind, RunConfig, Scenario};
use crate::error::{Error, Result};
use crate::frames::{self, FrameCascade};
use crate::integrator::{self, OutputGrid};
use crate::output::{self, finite_or_null, fmt_f64};
use crate::schedule::{self, DriveSchedule, LZParams};

pub const SCHEMA_VERSION: u32 = 1;

const UNITS: &str = "All quantities are dimensionless: hbar = k_B = 1, energies in units of the \
off-diagonal Hamiltonian element H_12 = 1, entropies in nats. The Landau-Zener drive is \
H(t) = (2, 0, 2 epsilon t) in Bloch-vector form.";

#[derive(Debug, Parser)]
#[command(name = "qubit-thermo", version, about = "Entropy production of driven qubits", long_about = UNITS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario named in the config file.
    Run,
    /// Lab-frame trajectory, entropy trace and Landau-Zener comparison.
    Sweep,
    /// Entropy traces in superadiabatic frames.
    Frames,
    /// Frame cascade and adiabaticity factors only.
    Qfactor,
    /// Entropy map over a hemisphere of initial states.
    Map,
    /// Map sensitivity to shifting the sweep start and end.
    Sensitivity,
}

/// Flags that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML run config, or a summary.json from an earlier run.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Sweep-rate parameter.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Sweep start time.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t_start: Option<f64>,
    /// Sweep end time.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Comma-separated frame list, 0 for the lab frame.
    #[arg(long, global = true, value_delimiter = ',')]
    pub frames: Option<Vec<usize>>,
    /// Deepest superadiabatic frame to build.
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Number of map cells on the hemisphere.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Frame in which map entropies are evaluated.
    #[arg(long, global = true)]
    pub frame: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Second config whose map is compared against this one.
    #[arg(long, global = true, value_name = "PATH")]
    pub compare: Option<PathBuf>,
    /// Worker threads for maps; 1 runs sequentially.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.epsilon {
            cfg.drive.epsilon = v;
        }
        if let Some(v) = self.t_start {
            cfg.drive.t_start = v;
        }
        if let Some(v) = self.t_end {
            cfg.drive.t_end = v;
        }
        if let Some(v) = &self.frames {
            cfg.frames.list = v.clone();
        }
        if let Some(v) = self.n_max {
            cfg.cascade.n_max = v;
        }
        if let Some(v) = self.resolution {
            cfg.map.resolution = v;
        }
        if let Some(v) = self.frame {
            cfg.map.frame = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
    }
}

/// Loads the config, applies flags and validates.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.scenario = match cli.command {
        Command::Run => cfg.scenario,
        Command::Sweep => Scenario::Sweep,
        Command::Frames => Scenario::Frames,
        Command::Qfactor => Scenario::Qfactor,
        Command::Map => Scenario::Map,
        Command::Sensitivity => Scenario::Sensitivity,
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let compare = match &cli.overrides.compare {
        Some(path) => {
            let other = RunConfig::load(path)?;
            other.validate()?;
            Some(other)
        }
        None => None,
    };
    fs::create_dir_all(&cfg.out)?;
    match cfg.scenario {
        Scenario::Sweep => cmd_sweep(&cfg),
        Scenario::Frames => cmd_frames(&cfg),
        Scenario::Qfactor => cmd_qfactor(&cfg),
        Scenario::Map => cmd_map(&cfg, compare.as_ref()),
        Scenario::Sensitivity => cmd_sensitivity(&cfg),
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    generated_at: String,
    config: &'a RunConfig,
    results: Value,
}

fn write_summary(cfg: &RunConfig, name: &str, results: Value) -> Result<()> {
    let s = Summary {
        schema_version: SCHEMA_VERSION,
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: cfg,
        results,
    };
    let path = cfg.out.join(name);
    output::write_json(&path, &s)?;
    announce(&path);
    Ok(())
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = output::create(path)?;
    f(&mut w)?;
    w.flush()?;
    announce(path);
    Ok(())
}

fn header(cfg: &RunConfig, schedule: &dyn DriveSchedule) -> Vec<(String, String)> {
    let info = schedule.info();
    let mut h = vec![("schedule".to_string(), info.label)];
    h.extend(info.params.into_iter().map(|(k, v)| (k, fmt_f64(v))));
    h.push(("rel_tol".into(), fmt_f64(cfg.integrator.rel_tol)));
    h.push(("abs_tol".into(), fmt_f64(cfg.integrator.abs_tol)));
    h
}

fn lz_reference(cfg: &RunConfig) -> Result<Option<(f64, f64)>> {
    if cfg.drive.kind != DriveKind::LandauZener {
        return Ok(None);
    }
    Ok(Some((schedule::p_lz(cfg.drive.epsilon)?, schedule::delta_s_lz(cfg.drive.epsilon)?)))
}

/// Lab-frame sweep: `trajectory.csv`, `entropy_trace.csv`, `summary.json`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let schedule = cfg.drive.schedule()?;
    let p0 = cfg.drive.initial_state(schedule.as_ref())?;
    let traj = integrator::evolve(p0, schedule.as_ref(), cfg.drive.span(), &cfg.integrator)?;
    let hdr = header(cfg, schedule.as_ref());
    write_file(&cfg.out.join("trajectory.csv"), |w| traj.write_csv(w, &hdr))?;

    let trace = analysis::lab_delta_s_trace(&traj, schedule.as_ref())?;
    write_file(&cfg.out.join("entropy_trace.csv"), |w| trace.write_csv(w))?;

    let tail = trace.tail_average(0.1)?;
    let p_trans = match integrator::transition_probability(&traj, schedule.as_ref()) {
        Ok(p) => Some(p),
        Err(Error::NotEigenstate { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut results = json!({
        "norm_drift": traj.norm_drift,
        "drift_budget": traj.meta.drift_budget,
        "steps_accepted": traj.meta.steps_accepted,
        "steps_rejected": traj.meta.steps_rejected,
        "delta_s_final": trace.final_value(),
        "delta_s_tail_average": tail,
        "delta_s_max": trace.max_value(),
        "monotonicity": analysis::monotonicity_metric(&trace.delta_s)?,
        "transition_probability": p_trans,
    });
    if let Some((p_lz, ds_lz)) = lz_reference(cfg)? {
        results["p_lz"] = json!(p_lz);
        results["delta_s_lz"] = json!(ds_lz);
        results["abs_difference"] = json!((tail - ds_lz).abs());
        results["transition_probability_error"] = json!(p_trans.map(|p| (p - p_lz).abs()));
    }
    write_summary(cfg, "summary.json", results)
}

fn cascade_for(cfg: &RunConfig, schedule: &dyn DriveSchedule) -> Result<FrameCascade> {
    frames::build_cascade(schedule, cfg.drive.span(), &cfg.cascade)
}

fn write_cascade(cfg: &RunConfig, cascade: &FrameCascade, frames: impl Iterator<Item = usize>) -> Result<Value> {
    for n in frames.filter(|n| *n >= 1 && *n <= cascade.n_frames()) {
        write_file(&cfg.out.join(format!("cascade_frame{n}.csv")), |w| cascade.write_frame_csv(n, w))?;
    }
    let summary = cascade.summary()?;
    let path = cfg.out.join("cascade.json");
    output::write_json(&path, &summary)?;
    announce(&path);
    Ok(serde_json::to_value(summary)?)
}

/// Traces in every requested frame, cascade exports and `summary.json`.
pub fn cmd_frames(cfg: &RunConfig) -> Result<()> {
    let schedule = cfg.drive.schedule()?;
    let cascade = cascade_for(cfg, schedule.as_ref())?;
    let p0 = cfg.drive.initial_state(schedule.as_ref())?;
    let icfg = cfg.integrator.clone().with_output(OutputGrid::Times(cascade.grid.clone()));
    let traj = integrator::evolve(p0, schedule.as_ref(), cfg.drive.span(), &icfg)?;

    let mut traces = Vec::new();
    for &n in &cfg.frames.list {
        let trace = analysis::delta_s_trace(&traj, &cascade, n)?;
        write_file(&cfg.out.join(format!("entropy_trace_frame{n}.csv")), |w| trace.write_csv(w))?;
        traces.push(json!({
            "frame": n,
            "monotonicity": analysis::monotonicity_metric(&trace.delta_s)?,
            "delta_s_final": trace.final_value(),
            "delta_s_max": trace.max_value(),
        }));
    }
    let cascade_summary = write_cascade(cfg, &cascade, cfg.frames.list.iter().copied())?;
    let results = json!({
        "norm_drift": traj.norm_drift,
        "traces": traces,
        "cascade": cascade_summary,
    });
    write_summary(cfg, "summary.json", results)
}

/// Cascade exports for every frame and `summary.json`.
pub fn cmd_qfactor(cfg: &RunConfig) -> Result<()> {
    let schedule = cfg.drive.schedule()?;
    let cascade = cascade_for(cfg, schedule.as_ref())?;
    let cascade_summary = write_cascade(cfg, &cascade, 1..=cascade.n_frames())?;
    write_summary(cfg, "summary.json", json!({ "cascade": cascade_summary }))
}

fn map_config(cfg: &RunConfig) -> MapConfig {
    MapConfig { integrator: cfg.integrator.clone(), cascade: cfg.cascade.clone(), execution: cfg.execution() }
}

fn map_record(map: &EntropyMap, file: &str) -> Value {
    let stats = map.stats();
    json!({
        "file": file,
        "epsilon": map.params.epsilon,
        "t_i": map.params.t_i,
        "t_f": map.params.t_f,
        "frame": map.frame,
        "delta_s_lz": schedule::delta_s_lz(map.params.epsilon).ok(),
        "stats": stats,
    })
}

fn fmt_tag(v: f64) -> String {
    format!("{v}")
}

/// `entropy_map.csv` and `map_meta.json`; a panel batch when the config
/// lists panel parameters; `map_compare.json` with `--compare`.
pub fn cmd_map(cfg: &RunConfig, compare: Option<&RunConfig>) -> Result<()> {
    let mcfg = map_config(cfg);
    let base = cfg.drive.lz_params()?;
    let mut records = Vec::new();
    let mut first = None;
    if cfg.map.panel_epsilons.is_empty() && cfg.map.panel_t_shifts.is_empty() {
        let map = analysis::entropy_map(base, cfg.map.resolution, cfg.map.frame, &mcfg)?;
        write_file(&cfg.out.join("entropy_map.csv"), |w| map.write_csv(w))?;
        records.push(map_record(&map, "entropy_map.csv"));
        first = Some(map);
    } else {
        let eps = if cfg.map.panel_epsilons.is_empty() { vec![base.epsilon] } else { cfg.map.panel_epsilons.clone() };
        let shifts = if cfg.map.panel_t_shifts.is_empty() { vec![0.0] } else { cfg.map.panel_t_shifts.clone() };
        for e in &eps {
            for s in &shifts {
                let params = LZParams::new(*e, base.t_i + s, base.t_f)?;
                let map = analysis::entropy_map(params, cfg.map.resolution, cfg.map.frame, &mcfg)?;
                let name = format!("entropy_map_eps{}_shift{}.csv", fmt_tag(*e), fmt_tag(*s));
                write_file(&cfg.out.join(&name), |w| map.write_csv(w))?;
                records.push(map_record(&map, &name));
                first.get_or_insert(map);
            }
        }
    }

    let mut results = json!({ "maps": records });
    if let (Some(other), Some(a)) = (compare, first.as_ref()) {
        let params = other.drive.lz_params()?;
        let b = analysis::entropy_map(params, other.map.resolution, other.map.frame, &map_config(other))?;
        write_file(&cfg.out.join("entropy_map_compare.csv"), |w| b.write_csv(w))?;
        let cmp = analysis::map_compare(a, &b)?;
        let path = cfg.out.join("map_compare.json");
        output::write_json(&path, &cmp)?;
        announce(&path);
        results["compare"] = json!({ "against": map_record(&b, "entropy_map_compare.csv"), "comparison": cmp });
    }
    write_summary(cfg, "map_meta.json", results)
}

/// `sensitivity.json` with the start- and end-shift comparisons.
pub fn cmd_sensitivity(cfg: &RunConfig) -> Result<()> {
    let params = cfg.drive.lz_params()?;
    let sens =
        analysis::endpoint_sensitivity(params, cfg.map.delta, cfg.map.resolution, cfg.map.frame, &map_config(cfg))?;
    let ratio = sens.t_i_shift.sign_flip_fraction / sens.t_f_shift.sign_flip_fraction;
    let results = json!({
        "sensitivity": sens,
        "sign_flip_ratio": finite_or_null(ratio),
    });
    write_summary(cfg, "sensitivity.json", results)
}
