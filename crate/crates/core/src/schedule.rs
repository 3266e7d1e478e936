//! Time-dependent Hamiltonian fields.
//!
//! A [`DriveSchedule`] maps time to the Bloch-vector field `H(t)` that the
//! polarization precesses about. The Landau-Zener sweep
//! `H(t) = σx + εtσz`, i.e. `H(t) = 2x̂ + 2εt ẑ`, is the canonical instance;
//! constant and tabulated schedules exist for testing and for user-supplied
//! drives.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bloch::{self, BlochVector};
use crate::error::{Error, Result};
use crate::spline::VectorSpline;

/// Label and scalar parameters of a schedule, written into output metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleInfo {
    pub label: String,
    pub params: BTreeMap<String, f64>,
}

pub trait DriveSchedule: Send + Sync {
    fn field(&self, t: f64) -> BlochVector;

    /// Analytic `dH/dt`, when the schedule knows it.
    fn derivative(&self, _t: f64) -> Option<BlochVector> {
        None
    }

    /// Interval on which the schedule is defined; `None` means all of ℝ.
    fn span(&self) -> Option<(f64, f64)> {
        None
    }

    fn info(&self) -> ScheduleInfo;

    /// Whether `[t_a, t_b]` lies inside [`DriveSchedule::span`].
    fn covers(&self, t_a: f64, t_b: f64) -> bool {
        match self.span() {
            None => true,
            Some((lo, hi)) => t_a >= lo && t_b <= hi,
        }
    }
}

/// Landau-Zener sweep parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LZParams {
    pub epsilon: f64,
    pub t_i: f64,
    pub t_f: f64,
}

impl LZParams {
    pub fn new(epsilon: f64, t_i: f64, t_f: f64) -> Result<Self> {
        let p = Self { epsilon, t_i, t_f };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric sweep over `[−t0, t0]`.
    pub fn symmetric(epsilon: f64, t0: f64) -> Result<Self> {
        Self::new(epsilon, -t0, t0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.t_i.is_finite() && self.t_f.is_finite() && self.t_i < self.t_f) {
            return Err(Error::Domain(format!(
                "sweep endpoints must satisfy t_i < t_f, got [{}, {}]",
                self.t_i, self.t_f
            )));
        }
        Ok(())
    }

    /// Sweep duration `t_f − t_i`.
    pub fn duration(&self) -> f64 {
        self.t_f - self.t_i
    }
}

/// `H(t) = (2, 0, 2εt)`.
pub fn lz_field(t: f64, params: &LZParams) -> BlochVector {
    BlochVector::new(2.0, 0.0, 2.0 * params.epsilon * t)
}

/// Energy levels `E± = ±|H| = ±2√(1 + (εt)²)`.
pub fn energy_levels(t: f64, params: &LZParams) -> (f64, f64) {
    let e = 2.0 * (params.epsilon * t).hypot(1.0);
    (e, -e)
}

/// Landau-Zener transition probability `e^{−π/ε}`.
pub fn p_lz(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok((-PI / epsilon).exp())
}

/// Entropy implied by the Landau-Zener formula, `S(|1 − 2 p_LZ|)`.
pub fn delta_s_lz(epsilon: f64) -> Result<f64> {
    let p = p_lz(epsilon)?;
    bloch::entropy_of_norm((1.0 - 2.0 * p).abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LzSchedule {
    pub params: LZParams,
}

impl LzSchedule {
    pub fn new(params: LZParams) -> Self {
        Self { params }
    }
}

impl DriveSchedule for LzSchedule {
    fn field(&self, t: f64) -> BlochVector {
        lz_field(t, &self.params)
    }

    fn derivative(&self, _t: f64) -> Option<BlochVector> {
        Some(BlochVector::new(0.0, 0.0, 2.0 * self.params.epsilon))
    }

    fn info(&self) -> ScheduleInfo {
        ScheduleInfo {
            label: "landau-zener".into(),
            params: BTreeMap::from([
                ("epsilon".into(), self.params.epsilon),
                ("t_i".into(), self.params.t_i),
                ("t_f".into(), self.params.t_f),
            ]),
        }
    }
}

/// Time-independent field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantSchedule {
    pub h: BlochVector,
}

impl ConstantSchedule {
    pub fn new(h: BlochVector) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::Domain("constant field must be finite".into()));
        }
        Ok(Self { h })
    }
}

impl DriveSchedule for ConstantSchedule {
    fn field(&self, _t: f64) -> BlochVector {
        self.h
    }

    fn derivative(&self, _t: f64) -> Option<BlochVector> {
        Some(BlochVector::ZERO)
    }

    fn info(&self) -> ScheduleInfo {
        ScheduleInfo {
            label: "constant".into(),
            params: BTreeMap::from([("hx".into(), self.h.x), ("hy".into(), self.h.y), ("hz".into(), self.h.z)]),
        }
    }
}

/// Field sampled at knots and interpolated with natural cubic splines.
#[derive(Clone, Debug)]
pub struct TabulatedSchedule {
    spline: VectorSpline,
    label: String,
}

impl TabulatedSchedule {
    pub fn new(times: &[f64], fields: &[BlochVector], label: impl Into<String>) -> Result<Self> {
        Ok(Self { spline: VectorSpline::new(times, fields)?, label: label.into() })
    }

    /// Samples another schedule on a uniform grid of `points` knots.
    pub fn sample(schedule: &dyn DriveSchedule, span: (f64, f64), points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Domain("need at least two sample points".into()));
        }
        let times: Vec<f64> =
            (0..points).map(|i| span.0 + (span.1 - span.0) * i as f64 / (points - 1) as f64).collect();
        let fields: Vec<_> = times.iter().map(|&t| schedule.field(t)).collect();
        Self::new(&times, &fields, format!("tabulated:{}", schedule.info().label))
    }
}

impl DriveSchedule for TabulatedSchedule {
    fn field(&self, t: f64) -> BlochVector {
        self.spline.eval(t)
    }

    fn derivative(&self, t: f64) -> Option<BlochVector> {
        Some(self.spline.derivative(t))
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some(self.spline.span())
    }

    fn info(&self) -> ScheduleInfo {
        let (lo, hi) = self.spline.span();
        ScheduleInfo {
            label: self.label.clone(),
            params: BTreeMap::from([("t_start".into(), lo), ("t_end".into(), hi)]),
        }
    }
}
