//! Precession integrator for `dP/dt = H(t) × P`.
//!
//! The scheme is the Dormand-Prince 5(4) embedded pair with FSAL stages, a
//! PI step-size controller, and the fourth-order continuous extension for
//! sampling the requested output grid. The polarization norm is never
//! renormalized; its drift is reported on the trajectory.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bloch::BlochVector;
use crate::error::{Error, Result};
use crate::output::fmt_f64;
use crate::schedule::DriveSchedule;

/// Where the trajectory is sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputGrid {
    /// Uniform spacing; the spacing is shrunk slightly so the grid ends on
    /// `t_f` exactly.
    Uniform { dt: f64 },
    /// `count` uniformly spaced samples including both endpoints.
    Count(usize),
    /// Explicit strictly increasing sample times inside the span.
    Times(Vec<f64>),
}

impl OutputGrid {
    pub fn times(&self, t_i: f64, t_f: f64) -> Result<Vec<f64>> {
        let linspace = |n: usize| -> Vec<f64> {
            (0..n).map(|k| if k + 1 == n { t_f } else { t_i + (t_f - t_i) * k as f64 / (n - 1) as f64 }).collect()
        };
        match self {
            OutputGrid::Uniform { dt } => {
                if !(dt.is_finite() && *dt > 0.0) {
                    return Err(Error::Domain(format!("output spacing must be positive, got {dt}")));
                }
                let n = ((t_f - t_i) / dt - 1e-9).ceil().max(1.0) as usize;
                Ok(linspace(n + 1))
            }
            OutputGrid::Count(n) => {
                if *n < 2 {
                    return Err(Error::Domain("output grid needs at least two samples".into()));
                }
                Ok(linspace(*n))
            }
            OutputGrid::Times(ts) => {
                if ts.is_empty() {
                    return Err(Error::Domain("explicit output grid is empty".into()));
                }
                if ts.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Domain("output times must be strictly increasing".into()));
                }
                if ts[0] < t_i || ts[ts.len() - 1] > t_f {
                    return Err(Error::SpanMismatch(format!(
                        "output times [{}, {}] leave the span [{t_i}, {t_f}]",
                        ts[0],
                        ts[ts.len() - 1]
                    )));
                }
                Ok(ts.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// First trial step; `None` picks one from the initial derivative.
    pub initial_step: Option<f64>,
    pub output: OutputGrid,
    /// Hard cap on attempted steps.
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 1.0,
            initial_step: None,
            output: OutputGrid::Count(4001),
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_output(mut self, output: OutputGrid) -> Self {
        self.output = output;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(Error::Tolerance(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.rel_tol < 10.0 * f64::EPSILON {
            return Err(Error::Tolerance(format!(
                "rel_tol = {:e} is below what double precision can deliver",
                self.rel_tol
            )));
        }
        if !positive(self.max_step) {
            return Err(Error::Domain(format!("max_step must be positive, got {}", self.max_step)));
        }
        if let Some(h) = self.initial_step {
            if !positive(h) {
                return Err(Error::Domain(format!("initial_step must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub label: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Norm drift the integration is expected to stay under,
    /// `max(1e-8, 10 · rel_tol · (t_f − t_i))`.
    pub drift_budget: f64,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
}

/// Sampled solution `P(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    /// `max |P(t)| − |P(t_0)|` in absolute value over the samples.
    pub norm_drift: f64,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Wraps pre-computed samples, recomputing the norm drift.
    pub fn from_samples(times: Vec<f64>, states: Vec<BlochVector>, meta: TrajectoryMeta) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::Domain("trajectory needs matching, non-empty times and states".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trajectory times must be strictly increasing".into()));
        }
        let norm_drift = drift(&states);
        Ok(Self { times, states, norm_drift, meta })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn first(&self) -> BlochVector {
        self.states[0]
    }

    pub fn last(&self) -> BlochVector {
        self.states[self.states.len() - 1]
    }

    pub fn within_drift_budget(&self) -> bool {
        self.norm_drift <= self.meta.drift_budget
    }

    /// CSV with columns `t,Px,Py,Pz,|P|`; `header` lines are written first as
    /// `# key = value` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[(String, String)]) -> Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# norm_drift = {}", fmt_f64(self.norm_drift))?;
        writeln!(w, "t,Px,Py,Pz,|P|")?;
        for (t, p) in self.times.iter().zip(&self.states) {
            writeln!(w, "{},{},{},{},{}", fmt_f64(*t), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z), fmt_f64(p.norm()))?;
        }
        Ok(())
    }
}

fn drift(states: &[BlochVector]) -> f64 {
    let n0 = states[0].norm();
    states.iter().map(|p| (p.norm() - n0).abs()).fold(0.0, f64::max)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error weights: fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Smallest drift budget; tighter budgets are not meaningful for long sweeps.
pub const NORM_DRIFT_FLOOR: f64 = 1e-8;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

/// Integrate `dP/dt = H(t) × P` from `span.0` to `span.1`.
pub fn evolve(
    p_init: BlochVector,
    schedule: &dyn DriveSchedule,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (t0, t_end) = span;
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(Error::Domain(format!("integration span [{t0}, {t_end}] is empty")));
    }
    if !p_init.is_finite() || p_init.norm() > 1.0 + crate::bloch::NORM_TOLERANCE {
        return Err(Error::Domain(format!("initial polarization |P| = {} is not physical", p_init.norm())));
    }
    if !schedule.covers(t0, t_end) {
        return Err(Error::SpanMismatch(format!(
            "span [{t0}, {t_end}] exceeds the schedule domain {:?}",
            schedule.span()
        )));
    }
    let out_times = cfg.output.times(t0, t_end)?;

    let rhs = |t: f64, p: BlochVector| schedule.field(t).cross(p);
    let scale = |a: BlochVector, b: BlochVector| {
        [
            cfg.abs_tol + cfg.rel_tol * a.x.abs().max(b.x.abs()),
            cfg.abs_tol + cfg.rel_tol * a.y.abs().max(b.y.abs()),
            cfg.abs_tol + cfg.rel_tol * a.z.abs().max(b.z.abs()),
        ]
    };

    let mut states = Vec::with_capacity(out_times.len());
    let mut next_out = 0;
    let mut t = t0;
    let mut y = p_init;
    let mut k1 = rhs(t, y);
    while next_out < out_times.len() && out_times[next_out] <= t0 {
        states.push(y);
        next_out += 1;
    }

    let mut h = match cfg.initial_step {
        Some(h) => h,
        None => initial_step(&rhs, t, y, k1, cfg),
    }
    .min(cfg.max_step)
    .min(t_end - t);

    let mut fac_old: f64 = 1e-4;
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut last_rejected = false;

    while t < t_end {
        if accepted + rejected >= cfg.max_steps {
            return Err(Error::Tolerance(format!("step budget of {} exhausted at t = {t}", cfg.max_steps)));
        }
        let min_step = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < min_step {
            return Err(Error::StepUnderflow { t, step: h });
        }
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }

        let k2 = rhs(t + C2 * h, y + k1 * (h * A21));
        let k3 = rhs(t + C3 * h, y + (k1 * A31 + k2 * A32) * h);
        let k4 = rhs(t + C4 * h, y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
        let k5 = rhs(t + C5 * h, y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
        let t_new = if last { t_end } else { t + h };
        let k6 = rhs(t_new, y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
        let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = rhs(t_new, y_new);

        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let sc = scale(y, y_new);
        let err_norm = (((err.x / sc[0]).powi(2) + (err.y / sc[1]).powi(2) + (err.z / sc[2]).powi(2)) / 3.0).sqrt();
        if !err_norm.is_finite() {
            return Err(Error::Tolerance(format!("non-finite error estimate at t = {t}")));
        }

        let fac11 = err_norm.powf(0.2 - PI_BETA * 0.75);
        if err_norm <= 1.0 {
            accepted += 1;
            // Dense output on (t, t_new].
            if next_out < out_times.len() && out_times[next_out] <= t_new {
                let r2 = y_new - y;
                let r3 = k1 * h - r2;
                let r4 = r2 - k7 * h - r3;
                let r5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
                while next_out < out_times.len() && out_times[next_out] <= t_new {
                    let to = out_times[next_out];
                    if to == t_new {
                        states.push(y_new);
                    } else {
                        let s = (to - t) / h;
                        let s1 = 1.0 - s;
                        states.push(y + (r2 + (r3 + (r4 + r5 * s1) * s) * s1) * s);
                    }
                    next_out += 1;
                }
            }
            let fac = (fac11 / fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err_norm.max(1e-4);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            h = h_new.min(cfg.max_step);
            last_rejected = false;
        } else {
            rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }

    // Samples can only be missed through round-off at the final endpoint.
    while states.len() < out_times.len() {
        states.push(y);
    }

    let info = schedule.info();
    let meta = TrajectoryMeta {
        label: info.label,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        drift_budget: NORM_DRIFT_FLOOR.max(10.0 * cfg.rel_tol * (t_end - t0)),
        steps_accepted: accepted,
        steps_rejected: rejected,
    };
    let norm_drift = drift(&states);
    Ok(Trajectory { times: out_times, states, norm_drift, meta })
}

/// Starting step from the magnitudes of the state and its derivative.
fn initial_step(
    rhs: &impl Fn(f64, BlochVector) -> BlochVector,
    t: f64,
    y: BlochVector,
    f0: BlochVector,
    cfg: &IntegratorConfig,
) -> f64 {
    let sk = |v: BlochVector| cfg.abs_tol + cfg.rel_tol * v.norm();
    let d0 = y.norm() / sk(y);
    let d1 = f0.norm() / sk(y);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let f1 = rhs(t + h0, y + f0 * h0);
    let d2 = (f1 - f0).norm() / sk(y) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Nonadiabatic transition probability `(1 − s_i Ĥ(t_f)·P(t_f)/|P(t_i)|)/2`
/// of a trajectory that starts (anti)aligned with the field.
pub fn transition_probability(traj: &Trajectory, schedule: &dyn DriveSchedule) -> Result<f64> {
    let (t_i, t_f) = traj.span();
    let p_i = traj.first();
    let norm_i = p_i.norm();
    let h_i = schedule
        .field(t_i)
        .unit()
        .ok_or_else(|| Error::Domain("field vanishes at the start of the trajectory".into()))?;
    let h_f = schedule
        .field(t_f)
        .unit()
        .ok_or_else(|| Error::Domain("field vanishes at the end of the trajectory".into()))?;
    if norm_i == 0.0 {
        return Err(Error::NotEigenstate { transverse: 1.0 });
    }
    let along = h_i.dot(p_i);
    let transverse = (p_i - h_i * along).norm() / norm_i;
    if transverse > 1e-6 {
        return Err(Error::NotEigenstate { transverse });
    }
    let sign = along.signum();
    Ok(0.5 * (1.0 - sign * h_f.dot(traj.last()) / norm_i))
}
