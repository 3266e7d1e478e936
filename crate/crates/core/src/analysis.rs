//! Entropy production in the lab and superadiabatic frames.
//!
//! The coarse-grained state at time `t` in a frame with field `h` is the
//! projection of the polarization onto `ĥ`; the entropy production is
//! `ΔS(t) = S(P^eq(t)) − S(P^eq(t_i))`. Entropy maps evaluate `ΔS(t_f)` for
//! a hemisphere of pure initial states, one integration per cell.

use std::io::Write;

use nalgebra::Vector3;
use serde::Serialize;

use crate::bloch::{self, BlochVector};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::frames::{self, CascadeConfig, FrameCascade};
use crate::integrator::{self, IntegratorConfig, OutputGrid, Trajectory};
use crate::output::fmt_f64;
use crate::schedule::{DriveSchedule, LZParams, LzSchedule};

/// `S(|ĥ·P|)`, the entropy of the projection of `p` onto `h`.
pub fn projected_entropy(p: BlochVector, h: BlochVector) -> Result<f64> {
    bloch::entropy(bloch::equilibrium_projection(p, h)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    /// Entropy production in nats; the first sample is exactly zero.
    pub delta_s: Vec<f64>,
    pub frame: usize,
    pub label: String,
}

impl EntropyTrace {
    fn from_pairs(
        times: Vec<f64>,
        states: impl Iterator<Item = (BlochVector, BlochVector)>,
        frame: usize,
        label: String,
    ) -> Result<Self> {
        let s: Vec<f64> = states.map(|(p, h)| projected_entropy(p, h)).collect::<Result<_>>()?;
        let s0 = s[0];
        let delta_s = s.into_iter().map(|v| v - s0).collect();
        Ok(Self { times, delta_s, frame, label })
    }

    pub fn final_value(&self) -> f64 {
        self.delta_s[self.delta_s.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.delta_s.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoidal average of `ΔS` over the last `fraction` of the span.
    pub fn tail_average(&self, fraction: f64) -> Result<f64> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Domain(format!("tail fraction must lie in (0, 1], got {fraction}")));
        }
        let (t0, t1) = (self.times[0], self.times[self.times.len() - 1]);
        let start = t1 - fraction * (t1 - t0);
        let mut area = 0.0;
        let mut width = 0.0;
        for k in 1..self.times.len() {
            let (ta, tb) = (self.times[k - 1], self.times[k]);
            if tb <= start {
                continue;
            }
            let (a, b) = (self.delta_s[k - 1], self.delta_s[k]);
            let (lo, ya) = if ta < start { (start, a + (b - a) * (start - ta) / (tb - ta)) } else { (ta, a) };
            area += 0.5 * (ya + b) * (tb - lo);
            width += tb - lo;
        }
        if width <= 0.0 {
            return Err(Error::Domain("tail window contains no samples".into()));
        }
        Ok(area / width)
    }

    /// CSV with columns `t,delta_s,frame`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,delta_s,frame")?;
        for (t, s) in self.times.iter().zip(&self.delta_s) {
            writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(*s), self.frame)?;
        }
        Ok(())
    }
}

/// Lab-frame trace on the trajectory's own samples.
pub fn lab_delta_s_trace(traj: &Trajectory, schedule: &dyn DriveSchedule) -> Result<EntropyTrace> {
    let pairs = traj.times.iter().zip(&traj.states).map(|(t, p)| (*p, schedule.field(*t)));
    EntropyTrace::from_pairs(traj.times.clone(), pairs, 0, traj.meta.label.clone())
}

/// Trace in `frame` (0 for the lab frame) on the cascade grid.
pub fn delta_s_trace(traj: &Trajectory, cascade: &FrameCascade, frame: usize) -> Result<EntropyTrace> {
    let field = cascade.effective_field(frame)?;
    let states = if frame == 0 {
        frames::resample(traj, cascade)?
    } else {
        frames::transform_trajectory(traj, cascade, frame)?.states
    };
    EntropyTrace::from_pairs(
        cascade.grid.clone(),
        states.into_iter().zip(field.iter().copied()),
        frame,
        traj.meta.label.clone(),
    )
}

/// Fraction of the total variation carried by decreasing steps: 0 for a
/// nondecreasing series, 1 for a nonincreasing one.
pub fn monotonicity_metric(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Domain("monotonicity needs at least two samples".into()));
    }
    let (mut down, mut total) = (0.0, 0.0);
    for w in values.windows(2) {
        let d = w[1] - w[0];
        total += d.abs();
        if d < 0.0 {
            down -= d;
        }
    }
    Ok(if total > 0.0 { down / total } else { 0.0 })
}

/// Near-equal-area point set on the northern hemisphere, ordered from the
/// pole outwards.
pub fn fibonacci_hemisphere(n: usize) -> Vec<BlochVector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = k as f64 * golden;
            BlochVector::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

pub const MIN_MAP_RESOLUTION: usize = 16;

/// Settings shared by every cell of a map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapConfig {
    pub integrator: IntegratorConfig,
    /// Only used for frames above 0.
    pub cascade: CascadeConfig,
    pub execution: Execution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[repr(u8)]
pub enum CellStatus {
    Ok = 0,
    IntegrationFailed = 1,
    DriftExceeded = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyMap {
    pub cells: Vec<BlochVector>,
    /// `ΔS(t_f)` per cell; `NaN` where the integration failed.
    pub values: Vec<f64>,
    pub status: Vec<CellStatus>,
    pub params: LZParams,
    pub frame: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapStats {
    pub cells: usize,
    pub flagged: usize,
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub p75: f64,
    pub pole_value: f64,
}

impl EntropyMap {
    /// Index of the cell closest to the north pole.
    pub fn pole_index(&self) -> usize {
        (0..self.cells.len()).max_by(|&a, &b| self.cells[a].z.total_cmp(&self.cells[b].z)).unwrap_or(0)
    }

    pub fn pole_value(&self) -> f64 {
        self.values[self.pole_index()]
    }

    fn valid_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.status)
            .filter(|(v, s)| **s != CellStatus::IntegrationFailed && v.is_finite())
            .map(|(v, _)| *v)
            .collect()
    }

    /// Value at quantile `q ∈ [0, 1]` of the valid cells, linearly
    /// interpolated between order statistics.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut v = self.valid_values();
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    }

    pub fn stats(&self) -> MapStats {
        let v = self.valid_values();
        let n = v.len().max(1) as f64;
        MapStats {
            cells: self.cells.len(),
            flagged: self.status.iter().filter(|s| **s != CellStatus::Ok).count(),
            positive_fraction: v.iter().filter(|x| **x > 0.0).count() as f64 / n,
            negative_fraction: v.iter().filter(|x| **x < 0.0).count() as f64 / n,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / n,
            median: self.quantile(0.5),
            p75: self.quantile(0.75),
            pole_value: self.pole_value(),
        }
    }

    /// CSV with columns `cell_index,cx,cy,cz,delta_s,flag`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell_index,cx,cy,cz,delta_s,flag")?;
        for (i, ((c, v), s)) in self.cells.iter().zip(&self.values).zip(&self.status).enumerate() {
            writeln!(w, "{i},{},{},{},{},{}", fmt_f64(c.x), fmt_f64(c.y), fmt_f64(c.z), fmt_f64(*v), *s as u8)?;
        }
        Ok(())
    }
}

/// `ΔS(t_f)` over a hemisphere of pure initial states.
///
/// Cells are lab-frame Bloch vectors at `t_i`. In frames above 0 the
/// endpoint states are rotated with the cascade built for the same sweep.
pub fn entropy_map(params: LZParams, resolution: usize, frame: usize, cfg: &MapConfig) -> Result<EntropyMap> {
    params.validate()?;
    if resolution < MIN_MAP_RESOLUTION {
        return Err(Error::Domain(format!(
            "map resolution must be at least {MIN_MAP_RESOLUTION} cells, got {resolution}"
        )));
    }
    let schedule = LzSchedule::new(params);
    let span = (params.t_i, params.t_f);
    let icfg = cfg.integrator.clone().with_output(OutputGrid::Times(vec![params.t_i, params.t_f]));
    icfg.validate()?;

    // Endpoint rotations and fields for the requested frame.
    let (start, end) = if frame == 0 {
        let id = nalgebra::UnitQuaternion::identity();
        ((id, schedule.field(params.t_i)), (id, schedule.field(params.t_f)))
    } else {
        let cascade = frames::build_cascade(&schedule, span, &cfg.cascade)?;
        let f = cascade.frame(frame)?;
        let last = cascade.grid.len() - 1;
        ((f.rot[0], f.h_eff[0]), (f.rot[last], f.h_eff[last]))
    };
    let in_frame =
        |q: &nalgebra::UnitQuaternion<f64>, p: BlochVector| -> BlochVector { BlochVector::from(q * Vector3::from(p)) };

    let cells = fibonacci_hemisphere(resolution);
    let results = cfg.execution.map(&cells, |_, p0| {
        let traj = match integrator::evolve(*p0, &schedule, span, &icfg) {
            Ok(t) => t,
            Err(_) => return (f64::NAN, CellStatus::IntegrationFailed),
        };
        let s_i = projected_entropy(in_frame(&start.0, traj.first()), start.1);
        let s_f = projected_entropy(in_frame(&end.0, traj.last()), end.1);
        match (s_i, s_f) {
            (Ok(a), Ok(b)) if traj.within_drift_budget() => (b - a, CellStatus::Ok),
            (Ok(a), Ok(b)) => (b - a, CellStatus::DriftExceeded),
            _ => (f64::NAN, CellStatus::IntegrationFailed),
        }
    });
    let (values, status) = results.into_iter().unzip();
    Ok(EntropyMap { cells, values, status, params, frame })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MapComparison {
    pub pearson_r: f64,
    pub sign_flip_fraction: f64,
    pub max_abs_diff: f64,
    pub cells: usize,
}

/// Cell-by-cell comparison of two maps on the same grid. Cells flagged as
/// failed in either map are skipped.
pub fn map_compare(a: &EntropyMap, b: &EntropyMap) -> Result<MapComparison> {
    if a.cells != b.cells {
        return Err(Error::GridMismatch(format!(
            "maps have {} and {} cells on different grids",
            a.cells.len(),
            b.cells.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = a
        .values
        .iter()
        .zip(&b.values)
        .zip(a.status.iter().zip(&b.status))
        .filter(|(_, (sa, sb))| **sa != CellStatus::IntegrationFailed && **sb != CellStatus::IntegrationFailed)
        .map(|(v, _)| (*v.0, *v.1))
        .collect();
    if pairs.is_empty() {
        return Err(Error::GridMismatch("maps share no valid cells".into()));
    }
    let n = pairs.len() as f64;
    let flips = pairs.iter().filter(|(x, y)| x * y < 0.0).count() as f64 / n;
    let max_abs_diff = pairs.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(MapComparison { pearson_r: pearson(&pairs), sign_flip_fraction: flips, max_abs_diff, cells: pairs.len() })
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    if pairs.iter().all(|(x, y)| x == y) {
        return 1.0;
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointSensitivity {
    pub delta: f64,
    pub t_i_shift: MapComparison,
    pub t_f_shift: MapComparison,
}

/// Compares the base map against maps with `t_i` and, separately, `t_f`
/// moved later by `delta`.
pub fn endpoint_sensitivity(
    params: LZParams,
    delta: f64,
    resolution: usize,
    frame: usize,
    cfg: &MapConfig,
) -> Result<EndpointSensitivity> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Domain(format!("shift must be non-negative, got {delta}")));
    }
    let base = entropy_map(params, resolution, frame, cfg)?;
    let early = LZParams::new(params.epsilon, params.t_i + delta, params.t_f)?;
    let late = LZParams::new(params.epsilon, params.t_i, params.t_f + delta)?;
    let t_i_shift = map_compare(&base, &entropy_map(early, resolution, frame, cfg)?)?;
    let t_f_shift = map_compare(&base, &entropy_map(late, resolution, frame, cfg)?)?;
    Ok(EndpointSensitivity { delta, t_i_shift, t_f_shift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ConstantSchedule;

    #[test]
    fn monotonicity_examples() {
        assert_eq!(monotonicity_metric(&[0.0, 1.0, 2.5, 3.0]).unwrap(), 0.0);
        assert_eq!(monotonicity_metric(&[3.0, 1.0, 0.0]).unwrap(), 1.0);
        let saw = [0.0, 2.0, 1.0, 3.0, 2.0, 4.0, 3.0];
        assert!((monotonicity_metric(&saw).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(monotonicity_metric(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(monotonicity_metric(&[1.0]).is_err());
    }

    #[test]
    fn hemisphere_cells_are_unit_and_north() {
        let cells = fibonacci_hemisphere(2048);
        assert_eq!(cells.len(), 2048);
        for c in &cells {
            assert!(c.z >= 0.0);
            assert!((c.norm() - 1.0).abs() < 1e-14);
        }
        assert!(cells[0].z > cells[1].z);
    }

    #[test]
    fn tail_average_of_a_ramp() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let trace = EntropyTrace { delta_s: times.clone(), times, frame: 0, label: String::new() };
        assert!((trace.tail_average(0.1).unwrap() - 95.0).abs() < 1e-12);
        assert!((trace.tail_average(0.105).unwrap() - 94.75).abs() < 1e-12);
        assert!(trace.tail_average(0.0).is_err());
    }

    #[test]
    fn static_field_produces_no_entropy() {
        let s = ConstantSchedule::new(BlochVector::new(0.0, 1.0, 1.0)).unwrap();
        let p = BlochVector::from_spherical(0.7, 0.3);
        let cfg = IntegratorConfig::default().with_output(OutputGrid::Count(101));
        let traj = integrator::evolve(p, &s, (0.0, 10.0), &cfg).unwrap();
        let trace = lab_delta_s_trace(&traj, &s).unwrap();
        assert_eq!(trace.delta_s[0], 0.0);
        assert!(trace.delta_s.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn compare_identical_and_mismatched() {
        let p = LZParams::symmetric(1.0, 5.0).unwrap();
        let cfg = MapConfig { execution: Execution::Sequential, ..Default::default() };
        let a = entropy_map(p, 16, 0, &cfg).unwrap();
        let c = map_compare(&a, &a).unwrap();
        assert_eq!((c.pearson_r, c.sign_flip_fraction, c.max_abs_diff), (1.0, 0.0, 0.0));
        let b = entropy_map(p, 17, 0, &cfg).unwrap();
        assert!(matches!(map_compare(&a, &b), Err(Error::GridMismatch(_))));
        assert!(entropy_map(p, 15, 0, &cfg).is_err());
    }

    #[test]
    fn quantiles() {
        let p = LZParams::symmetric(1.0, 1.0).unwrap();
        let m = EntropyMap {
            cells: fibonacci_hemisphere(5),
            values: vec![4.0, 0.0, 1.0, 3.0, 2.0],
            status: vec![CellStatus::Ok; 5],
            params: p,
            frame: 0,
        };
        assert_eq!(m.quantile(0.5), 2.0);
        assert_eq!(m.quantile(0.75), 3.0);
        assert_eq!(m.pole_value(), 4.0);
        let s = m.stats();
        assert_eq!((s.positive_fraction, s.negative_fraction), (0.8, 0.0));
    }
}
