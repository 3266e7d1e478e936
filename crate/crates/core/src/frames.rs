//! Superadiabatic frame cascade.
//!
//! Frame `n` is reached from frame `n − 1` by the time-dependent rotation
//! that carries the effective field `h_eff[n−1](t)` onto `+ẑ`. Moving into a
//! rotating frame adds the frame's angular velocity to the field, so
//!
//! ```text
//! h_eff[n] = |h_eff[n−1]| ẑ + c[n],   c[n] = −R_n (ĥ × dĥ/dt)
//! ```
//!
//! where `ĥ` is the direction of `h_eff[n−1]` in frame `n − 1` coordinates
//! and `R_n` the rotation into frame `n`. The rotation is fixed by parallel
//! transport along `ĥ(t)`, which keeps `c[n]` perpendicular to the frame's
//! `ẑ` (purely off-diagonal) and makes the rotation continuous in time.
//! Frame 0 is the lab frame with `h_eff[0] = H`.
//!
//! The direction derivative uses the schedule's analytic derivative for
//! frame 1 when available and fourth-order finite differences on the
//! cascade grid otherwise.

use std::io::Write;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::bloch::BlochVector;
use crate::error::{Error, Result};
use crate::integrator::{Trajectory, TrajectoryMeta};
use crate::output::{finite_or_null, fmt_f64};
use crate::schedule::{DriveSchedule, ScheduleInfo};
use crate::spline::VectorSpline;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeConfig {
    /// Number of uniformly spaced grid points before refinement.
    pub points: usize,
    /// Highest frame to construct.
    pub n_max: usize,
    /// Refine the grid until no field direction turns by more than this many
    /// radians between neighbouring points.
    pub max_angle_step: f64,
    /// Refinement stops at this many points.
    pub max_points: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self { points: 20001, n_max: 5, max_angle_step: 0.01, max_points: 160_001 }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::Domain("the cascade needs n_max >= 1".into()));
        }
        if self.points < 5 {
            return Err(Error::Domain("the cascade grid needs at least 5 points".into()));
        }
        if !(self.max_angle_step > 0.0 && self.max_angle_step <= HARD_ANGLE_STEP) {
            return Err(Error::Domain(format!(
                "max_angle_step must lie in (0, {HARD_ANGLE_STEP}], got {}",
                self.max_angle_step
            )));
        }
        Ok(())
    }
}

/// Direction increments above this are rejected outright.
pub const HARD_ANGLE_STEP: f64 = 0.1;

/// Why the cascade stopped before `n_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Truncation {
    /// First frame that could not be built.
    pub frame: usize,
    pub t: f64,
    pub reason: String,
}

/// One frame of the cascade, sampled on the cascade grid.
#[derive(Clone, Debug)]
pub struct Frame {
    /// Diagonal field `|h_eff[n−1]|` along the frame's `ẑ`.
    pub h_diag: Vec<f64>,
    /// Nonadiabatic term in frame coordinates.
    pub c_vec: Vec<BlochVector>,
    /// `h_diag ẑ + c_vec`.
    pub h_eff: Vec<BlochVector>,
    /// Cumulative rotation taking lab-frame vectors into this frame.
    pub rot: Vec<UnitQuaternion<f64>>,
    /// Adiabaticity `h_diag / |c_vec|`; `+∞` where `c_vec` vanishes.
    pub q: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FrameCascade {
    pub grid: Vec<f64>,
    pub lab_field: Vec<BlochVector>,
    /// `frames[n − 1]` is frame `n`.
    pub frames: Vec<Frame>,
    pub truncation: Option<Truncation>,
    /// Largest direction increment seen on the final grid (radians).
    pub max_angle_step: f64,
    pub schedule: ScheduleInfo,
}

impl FrameCascade {
    /// Number of frames built (excluding the lab frame).
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Frame `n ≥ 1`.
    pub fn frame(&self, n: usize) -> Result<&Frame> {
        if n == 0 || n > self.frames.len() {
            return Err(Error::FrameOutOfRange { requested: n, available: self.frames.len() });
        }
        Ok(&self.frames[n - 1])
    }

    /// Effective field of frame `n` (the lab field for `n = 0`) on the grid.
    pub fn effective_field(&self, n: usize) -> Result<&[BlochVector]> {
        if n == 0 {
            Ok(&self.lab_field)
        } else {
            Ok(&self.frame(n)?.h_eff)
        }
    }

    /// Rotation from frame `n − 1` into frame `n` at grid index `k`.
    pub fn step_rotation(&self, n: usize, k: usize) -> Result<UnitQuaternion<f64>> {
        let cur = self.frame(n)?.rot[k];
        if n == 1 {
            Ok(cur)
        } else {
            Ok(cur * self.frame(n - 1)?.rot[k].inverse())
        }
    }

    /// Per-frame CSV with columns `t,h_diag,c_x,c_y,c_z,q`.
    pub fn write_frame_csv<W: Write>(&self, n: usize, mut w: W) -> Result<()> {
        let f = self.frame(n)?;
        writeln!(w, "# frame = {n}")?;
        writeln!(w, "# schedule = {}", self.schedule.label)?;
        for (k, v) in &self.schedule.params {
            writeln!(w, "# {k} = {}", fmt_f64(*v))?;
        }
        writeln!(w, "t,h_diag,c_x,c_y,c_z,q")?;
        for (i, t) in self.grid.iter().enumerate() {
            let c = f.c_vec[i];
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(f.h_diag[i]),
                fmt_f64(c.x),
                fmt_f64(c.y),
                fmt_f64(c.z),
                fmt_f64(f.q[i])
            )?;
        }
        Ok(())
    }

    /// Per-frame `Q_n^min` together with the optimal frame.
    pub fn summary(&self) -> Result<CascadeSummary> {
        let mut frames = Vec::with_capacity(self.frames.len());
        for n in 1..=self.frames.len() {
            let q = q_factor(self, n)?;
            frames.push(FrameSummary { n, q_min: finite_or_null(q.q_min), t_at_qmin: q.t_at_min });
        }
        let best = optimal_frame(self).ok();
        Ok(CascadeSummary {
            schema_version: SCHEMA_VERSION,
            frames,
            n_star: best.map(|b| b.n_star),
            q_star: best.and_then(|b| finite_or_null(b.q_star)),
            truncation: self.truncation.clone(),
            grid_points: self.grid.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameSummary {
    pub n: usize,
    /// `null` encodes `+∞`.
    pub q_min: Option<f64>,
    pub t_at_qmin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeSummary {
    pub schema_version: u32,
    pub frames: Vec<FrameSummary>,
    pub n_star: Option<usize>,
    pub q_star: Option<f64>,
    pub truncation: Option<Truncation>,
    pub grid_points: usize,
}

fn uniform_grid(span: (f64, f64), points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| if k + 1 == points { span.1 } else { span.0 + (span.1 - span.0) * k as f64 / (points - 1) as f64 })
        .collect()
}

/// Fourth-order first derivative of uniformly sampled data: five-point
/// central stencil inside, one-sided stencils on the two outermost points at
/// each end.
pub fn derivative_4th(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "need at least five samples");
    let mut d = vec![0.0; n];
    let s = 1.0 / (12.0 * dt);
    for i in 2..n - 2 {
        d[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) * s;
    }
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) * s;
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) * s;
    d[n - 1] = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]) * s;
    d[n - 2] = (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]) * s;
    d
}

fn derivative_vec(v: &[BlochVector], dt: f64) -> Vec<BlochVector> {
    let comp = |f: fn(&BlochVector) -> f64| derivative_4th(&v.iter().map(f).collect::<Vec<_>>(), dt);
    let (dx, dy, dz) = (comp(|p| p.x), comp(|p| p.y), comp(|p| p.z));
    (0..v.len()).map(|i| BlochVector::new(dx[i], dy[i], dz[i])).collect()
}

fn to_na(v: BlochVector) -> Vector3<f64> {
    v.into()
}

/// Rotation carrying `from` onto `to` about their common normal; a half turn
/// about x for antiparallel vectors.
fn minimal_rotation(from: Vector3<f64>, to: Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::rotation_between(&from, &to).unwrap_or_else(|| {
        let axis =
            if from.cross(&Vector3::x()).norm() > 1e-8 { from.cross(&Vector3::x()) } else { from.cross(&Vector3::y()) };
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), std::f64::consts::PI)
    })
}

/// Flips `q` to the hemisphere of `prev` so neighbouring samples stay close.
fn continue_sign(q: UnitQuaternion<f64>, prev: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.coords.dot(&prev.coords) < 0.0 {
        Unit::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

fn max_direction_step(h: &[BlochVector]) -> f64 {
    h.windows(2)
        .map(|w| match (w[0].unit(), w[1].unit()) {
            (Some(a), Some(b)) => a.cross(b).norm().atan2(a.dot(b)),
            _ => 0.0,
        })
        .fold(0.0, f64::max)
}

/// Builds frames `1..=cfg.n_max` over `span`, refining the grid while any
/// field direction turns faster than `cfg.max_angle_step` per grid step.
pub fn build_cascade(schedule: &dyn DriveSchedule, span: (f64, f64), cfg: &CascadeConfig) -> Result<FrameCascade> {
    cfg.validate()?;
    if !(span.0.is_finite() && span.1.is_finite() && span.1 > span.0) {
        return Err(Error::Domain(format!("cascade span [{}, {}] is empty", span.0, span.1)));
    }
    if !schedule.covers(span.0, span.1) {
        return Err(Error::SpanMismatch(format!(
            "cascade span [{}, {}] exceeds the schedule domain {:?}",
            span.0,
            span.1,
            schedule.span()
        )));
    }
    let mut points = cfg.points;
    loop {
        let cascade = build_on_grid(schedule, uniform_grid(span, points), cfg.n_max)?;
        if cascade.max_angle_step <= cfg.max_angle_step {
            return Ok(cascade);
        }
        let finer = 2 * (points - 1) + 1;
        if finer > cfg.max_points {
            if cascade.max_angle_step > HARD_ANGLE_STEP {
                return Err(Error::Domain(format!(
                    "cascade grid of {points} points still turns {:.3} rad per step; raise max_points",
                    cascade.max_angle_step
                )));
            }
            return Ok(cascade);
        }
        points = finer;
    }
}

/// Builds the cascade on a fixed, uniformly spaced grid.
pub fn build_on_grid(schedule: &dyn DriveSchedule, grid: Vec<f64>, n_max: usize) -> Result<FrameCascade> {
    if grid.len() < 5 {
        return Err(Error::Domain("the cascade grid needs at least 5 points".into()));
    }
    let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let lab_field: Vec<BlochVector> = grid.iter().map(|&t| schedule.field(t)).collect();
    if lab_field.iter().any(|h| !h.is_finite()) {
        return Err(Error::Domain("schedule produced a non-finite field on the cascade grid".into()));
    }
    let analytic: Option<Vec<BlochVector>> = grid.iter().map(|&t| schedule.derivative(t)).collect();

    let mut frames: Vec<Frame> = Vec::with_capacity(n_max);
    let mut truncation = None;
    let mut max_angle = 0.0f64;
    let mut field = lab_field.clone();
    for n in 1..=n_max {
        let scale = field.iter().map(|h| h.norm()).fold(0.0, f64::max);
        let weak = field.iter().position(|h| !(h.norm() > 1e-12 * scale) || !h.is_finite());
        if let Some(k) = weak {
            truncation = Some(Truncation {
                frame: n,
                t: grid[k],
                reason: if n == 1 {
                    "lab field vanishes (level crossing)".into()
                } else {
                    format!("effective field of frame {} vanishes (level crossing)", n - 1)
                },
            });
            break;
        }
        max_angle = max_angle.max(max_direction_step(&field));

        let dirs: Vec<BlochVector> = field.iter().map(|h| h.unit().unwrap_or(BlochVector::Z)).collect();
        let mags: Vec<f64> = field.iter().map(|h| h.norm()).collect();
        let dir_rate: Vec<BlochVector> = match (&analytic, n) {
            (Some(dh), 1) => {
                dirs.iter().zip(dh).zip(&mags).map(|((u, d), m)| (*d - *u * u.dot(*d)) * (1.0 / m)).collect()
            }
            _ => derivative_vec(&dirs, dt),
        };

        let z = Vector3::z();
        let mut step_rot = Vec::with_capacity(grid.len());
        let mut r = minimal_rotation(to_na(dirs[0]), z);
        step_rot.push(r);
        for k in 0..grid.len() - 1 {
            let advance = minimal_rotation(to_na(dirs[k]), to_na(dirs[k + 1]));
            let mut next = r * advance.inverse();
            // Re-anchor so the accumulated product keeps mapping ĥ onto ẑ.
            let landed = next * to_na(dirs[k + 1]);
            next = minimal_rotation(landed, z) * next;
            r = continue_sign(next, &r);
            step_rot.push(r);
        }

        let mut h_eff = Vec::with_capacity(grid.len());
        let mut c_vec = Vec::with_capacity(grid.len());
        let mut q = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let omega = dirs[k].cross(dir_rate[k]);
            let c = -BlochVector::from(step_rot[k] * to_na(omega));
            let cn = c.norm();
            q.push(if cn > 0.0 { mags[k] / cn } else { f64::INFINITY });
            c_vec.push(c);
            h_eff.push(BlochVector::new(c.x, c.y, c.z + mags[k]));
        }

        let rot: Vec<UnitQuaternion<f64>> = match frames.last() {
            None => step_rot,
            Some(prev) => {
                let mut out: Vec<UnitQuaternion<f64>> = Vec::with_capacity(grid.len());
                for (k, s) in step_rot.iter().enumerate() {
                    let mut cum = s * prev.rot[k];
                    cum.renormalize();
                    if let Some(p) = out.last() {
                        cum = continue_sign(cum, p);
                    }
                    out.push(cum);
                }
                out
            }
        };

        field = h_eff.clone();
        frames.push(Frame { h_diag: mags, c_vec, h_eff, rot, q });
    }

    Ok(FrameCascade { grid, lab_field, frames, truncation, max_angle_step: max_angle, schedule: schedule.info() })
}

/// Time series of `Q_n(t)` and its minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct QFactor {
    pub series: Vec<f64>,
    pub q_min: f64,
    /// `None` when `Q_n` is infinite everywhere in the window.
    pub t_at_min: Option<f64>,
}

/// `Q_n(t)` over the full cascade grid.
pub fn q_factor(cascade: &FrameCascade, n: usize) -> Result<QFactor> {
    let span = cascade.span();
    q_factor_in(cascade, n, span)
}

/// `Q_n(t)` with the minimum taken over `window` only.
pub fn q_factor_in(cascade: &FrameCascade, n: usize, window: (f64, f64)) -> Result<QFactor> {
    let frame = cascade.frame(n)?;
    let mut q_min = f64::INFINITY;
    let mut t_at_min = None;
    for (t, &q) in cascade.grid.iter().zip(&frame.q) {
        if *t >= window.0 && *t <= window.1 && q < q_min {
            q_min = q;
            t_at_min = Some(*t);
        }
    }
    Ok(QFactor { series: frame.q.clone(), q_min, t_at_min })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalFrame {
    pub n_star: usize,
    /// Frame-independent adiabaticity `max_n Q_n^min`.
    pub q_star: f64,
}

/// Frame with the largest `Q_n^min`; ties go to the smallest `n`.
pub fn optimal_frame(cascade: &FrameCascade) -> Result<OptimalFrame> {
    if cascade.n_frames() < 2 {
        return Err(Error::Domain(format!(
            "optimal frame needs at least two frames, cascade has {}",
            cascade.n_frames()
        )));
    }
    let mut best = OptimalFrame { n_star: 1, q_star: q_factor(cascade, 1)?.q_min };
    for n in 2..=cascade.n_frames() {
        let q = q_factor(cascade, n)?.q_min;
        if q > best.q_star {
            best = OptimalFrame { n_star: n, q_star: q };
        }
    }
    Ok(best)
}

/// Expresses a lab-frame trajectory in frame `n` on the cascade grid.
///
/// Frame 0 returns the trajectory unchanged. Otherwise the trajectory is
/// used directly when it is sampled on the cascade grid and interpolated
/// with cubic splines when it merely covers the cascade span.
pub fn transform_trajectory(traj: &Trajectory, cascade: &FrameCascade, n: usize) -> Result<Trajectory> {
    if n == 0 {
        return Ok(traj.clone());
    }
    let frame = cascade.frame(n)?;
    let lab = resample(traj, cascade)?;
    let states: Vec<BlochVector> = lab.iter().zip(&frame.rot).map(|(p, r)| BlochVector::from(r * to_na(*p))).collect();
    let meta = TrajectoryMeta { label: format!("{} [frame {n}]", traj.meta.label), ..traj.meta.clone() };
    Trajectory::from_samples(cascade.grid.clone(), states, meta)
}

/// Lab-frame states at the cascade grid times.
pub(crate) fn resample(traj: &Trajectory, cascade: &FrameCascade) -> Result<Vec<BlochVector>> {
    if traj.times == cascade.grid {
        return Ok(traj.states.clone());
    }
    let (c0, c1) = cascade.span();
    let (t0, t1) = traj.span();
    let slack = 1e-9 * (c1 - c0);
    if t0 > c0 + slack || t1 < c1 - slack {
        return Err(Error::SpanMismatch(format!(
            "trajectory [{t0}, {t1}] does not cover the cascade span [{c0}, {c1}]"
        )));
    }
    if traj.len() < 2 {
        return Err(Error::SpanMismatch("trajectory has a single sample".into()));
    }
    let spline = VectorSpline::new(&traj.times, &traj.states)?;
    Ok(cascade.grid.iter().map(|&t| spline.eval(t.clamp(t0, t1))).collect())
}
