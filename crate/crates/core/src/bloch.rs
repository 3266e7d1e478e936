//! Bloch-vector algebra for a single qubit.
//!
//! A 2×2 Hermitian matrix is written `M = (P0·I + P·σ) / 2` with `P0` the
//! trace and `P` a real 3-vector. Density matrices have `P0 = 1` and
//! `|P| ≤ 1`; Hamiltonians use the same decomposition with `P` playing the
//! role of the field `H`. Nothing in this module evolves in time.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `|P|` accepted as physical. Integrated trajectories carry a small
/// norm drift, so polarizations slightly above 1 are clamped instead of
/// rejected.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Polarizations within this distance of the pure-state boundary are
/// treated as exactly pure by [`entropy`].
pub const PURE_CLAMP: f64 = 1e-12;

/// Tolerance on the anti-Hermitian part accepted by [`decompose`], relative
/// to the Frobenius norm of the input.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Complex 2×2 matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ZERO: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: BlochVector = BlochVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: BlochVector = BlochVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Unit vector from polar angle `theta` (measured from +z) and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::new(st * cp, st * sp, ct)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    /// Direction of the vector, or `None` for the zero vector.
    pub fn unit(self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn max_abs_diff(self, other: Self) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs()).max((self.z - other.z).abs())
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<nalgebra::Vector3<f64>> for BlochVector {
    fn from(v: nalgebra::Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl From<BlochVector> for nalgebra::Vector3<f64> {
    fn from(v: BlochVector) -> Self {
        nalgebra::Vector3::new(v.x, v.y, v.z)
    }
}

impl Add for BlochVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for BlochVector {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for BlochVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for BlochVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for BlochVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<BlochVector> for f64 {
    type Output = BlochVector;
    fn mul(self, v: BlochVector) -> BlochVector {
        v * self
    }
}

/// Trace component plus Bloch vector of a 2×2 Hermitian matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub p0: f64,
    pub p: BlochVector,
}

impl QubitState {
    /// Density matrix with unit trace and polarization `p`.
    pub fn from_bloch(p: BlochVector) -> Self {
        Self { p0: 1.0, p }
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch(BlochVector::ZERO)
    }

    /// Unit trace and `|P| ≤ 1` within [`NORM_TOLERANCE`].
    pub fn is_physical(&self) -> bool {
        self.p.is_finite() && (self.p0 - 1.0).abs() <= NORM_TOLERANCE && self.p.norm() <= 1.0 + NORM_TOLERANCE
    }

    fn require_physical(&self, what: &str) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::Domain(format!("{what} is not a physical state (P0 = {}, |P| = {})", self.p0, self.p.norm())))
        }
    }
}

/// Inverse temperature of a Gibbs state. Negative values describe
/// population inversion; zero is infinite temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    beta: f64,
}

impl ThermalParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("inverse temperature must be finite, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Gibbs equilibrium polarization. `degenerate` is set when the field
/// vanishes and the zero vector was returned for a nonzero `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalState {
    pub polarization: BlochVector,
    pub degenerate: bool,
}

/// Split a Hermitian 2×2 matrix into `(P0, P)`.
pub fn decompose(m: &Matrix2) -> Result<QubitState> {
    let frob = m.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let a01 = (m[0][1] - m[1][0].conj()) * 0.5;
    let anti = (m[0][0].im.powi(2) + m[1][1].im.powi(2) + 2.0 * a01.norm_sqr()).sqrt();
    if !(anti <= HERMITIAN_TOLERANCE * frob.max(1.0)) {
        return Err(Error::NonHermitian { anti_hermitian_norm: anti });
    }
    let off = (m[0][1].conj() + m[1][0]) * 0.5;
    Ok(QubitState {
        p0: m[0][0].re + m[1][1].re,
        p: BlochVector::new(2.0 * off.re, 2.0 * off.im, m[0][0].re - m[1][1].re),
    })
}

/// Inverse of [`decompose`].
pub fn recompose(state: &QubitState) -> Matrix2 {
    let QubitState { p0, p } = *state;
    [
        [Complex64::new((p0 + p.z) / 2.0, 0.0), Complex64::new(p.x / 2.0, -p.y / 2.0)],
        [Complex64::new(p.x / 2.0, p.y / 2.0), Complex64::new((p0 - p.z) / 2.0, 0.0)],
    ]
}

/// Von Neumann entropy (nats) of the qubit state with polarization `p`.
pub fn entropy(p: BlochVector) -> Result<f64> {
    entropy_of_norm(p.norm())
}

/// Von Neumann entropy as a function of `|P|` alone.
pub fn entropy_of_norm(norm: f64) -> Result<f64> {
    if !(norm.is_finite() && norm >= 0.0) || norm > 1.0 + NORM_TOLERANCE {
        return Err(Error::Domain(format!("|P| = {norm} is not a physical polarization")));
    }
    if norm >= 1.0 - PURE_CLAMP {
        return Ok(0.0);
    }
    // Smaller eigenvalue of ρ; the larger is 1 − lo.
    let lo = 0.5 * (1.0 - norm);
    Ok(-(1.0 - lo) * (-lo).ln_1p() - lo * lo.ln())
}

/// Gibbs polarization `−tanh(β|H|/2) Ĥ` for the field `h`.
pub fn thermal_equilibrium(h: BlochVector, params: ThermalParams) -> ThermalState {
    let beta = params.beta();
    match h.unit() {
        Some(dir) => ThermalState { polarization: dir * -(beta * h.norm() / 2.0).tanh(), degenerate: false },
        None => ThermalState { polarization: BlochVector::ZERO, degenerate: beta != 0.0 },
    }
}

/// Precession-averaged equilibrium `(Ĥ·P) Ĥ` of `p` about the field `h`.
///
/// The alignment sign and the magnitude `|Ĥ·P|` combine into the scalar
/// projection, so a state exactly perpendicular to `h` maps to zero.
pub fn equilibrium_projection(p: BlochVector, h: BlochVector) -> Result<BlochVector> {
    let dir = h.unit().ok_or_else(|| Error::Domain("equilibrium is undefined for a zero field".into()))?;
    Ok(dir * dir.dot(p))
}

/// `Tr(ρ²) = (P0² + |P|²) / 2`.
pub fn purity(state: &QubitState) -> f64 {
    0.5 * (state.p0 * state.p0 + state.p.norm_squared())
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` via the qubit closed form
/// `Tr(ρσ) + 2√(det ρ · det σ)`.
pub fn fidelity(a: &QubitState, b: &QubitState) -> Result<f64> {
    a.require_physical("first argument")?;
    b.require_physical("second argument")?;
    let det_a = (1.0 - a.p.norm_squared()).max(0.0);
    let det_b = (1.0 - b.p.norm_squared()).max(0.0);
    let f = 0.5 * (1.0 + a.p.dot(b.p) + (det_a * det_b).sqrt());
    Ok(f.clamp(0.0, 1.0))
}

/// Quantum relative entropy `Tr ρ log ρ − Tr ρ log σ` in nats.
///
/// Returns `f64::INFINITY` when the support of `a` is not contained in the
/// support of `b` (only possible for a pure `b`); [`support_contained`]
/// reports the same condition without computing the value.
pub fn relative_entropy(a: &QubitState, b: &QubitState) -> Result<f64> {
    a.require_physical("first argument")?;
    b.require_physical("second argument")?;
    let neg_entropy = -entropy(a.p)?;
    let nb = b.p.norm().min(1.0);
    // Populations of ρ in the eigenbasis of σ.
    let along = b.p.unit().map_or(0.0, |d| a.p.dot(d));
    let w_hi = 0.5 * (1.0 + along);
    let w_lo = 0.5 * (1.0 - along);
    let l_hi = 0.5 * (1.0 + nb);
    let l_lo = 0.5 * (1.0 - nb);
    let mut cross = w_hi * l_hi.ln();
    if l_lo <= PURE_CLAMP {
        if w_lo > PURE_CLAMP.sqrt() {
            return Ok(f64::INFINITY);
        }
    } else {
        cross += w_lo * l_lo.ln();
    }
    Ok((neg_entropy - cross).max(0.0))
}

/// Whether `supp(a) ⊆ supp(b)`, the precondition for a finite
/// [`relative_entropy`].
pub fn support_contained(a: &QubitState, b: &QubitState) -> bool {
    if b.p.norm() < 1.0 - PURE_CLAMP {
        return true;
    }
    let dir = b.p.unit().unwrap_or(BlochVector::Z);
    0.5 * (1.0 - a.p.dot(dir)) <= PURE_CLAMP.sqrt()
}

/// Trapezoidal time average of a sampled trajectory over `[t_a, t_b]`.
///
/// Window endpoints that fall between samples are linearly interpolated.
pub fn time_average(times: &[f64], states: &[BlochVector], window: (f64, f64)) -> Result<BlochVector> {
    let mut acc = BlochVector::ZERO;
    let span = trapezoid(times, states, window, |p, w| acc += p * w)?;
    Ok(acc * (1.0 / span))
}

/// Trapezoidal time average of `S(P(t))` over the same window convention as
/// [`time_average`].
pub fn time_averaged_entropy(times: &[f64], states: &[BlochVector], window: (f64, f64)) -> Result<f64> {
    let mut weighted = Vec::with_capacity(states.len());
    let span = trapezoid(times, states, window, |p, w| weighted.push((p, w)))?;
    let mut acc = 0.0;
    for (p, w) in weighted {
        acc += w * entropy(p)?;
    }
    Ok(acc / span)
}

/// Visits every node of the trapezoid rule on the clipped window with its
/// weight and returns the window length.
fn trapezoid(
    times: &[f64],
    states: &[BlochVector],
    (ta, tb): (f64, f64),
    mut visit: impl FnMut(BlochVector, f64),
) -> Result<f64> {
    if times.len() != states.len() {
        return Err(Error::Domain("times and states differ in length".into()));
    }
    if !(tb > ta) {
        return Err(Error::Domain(format!("empty averaging window [{ta}, {tb}]")));
    }
    let (first, last) = match (times.first(), times.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Domain("empty trajectory".into())),
    };
    if ta < first || tb > last {
        return Err(Error::Domain(format!("window [{ta}, {tb}] outside trajectory span [{first}, {last}]")));
    }
    let lerp = |i: usize, t: f64| {
        let (t0, t1) = (times[i], times[i + 1]);
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        states[i] * (1.0 - s) + states[i + 1] * s
    };
    for i in 0..times.len().saturating_sub(1) {
        let lo = times[i].max(ta);
        let hi = times[i + 1].min(tb);
        if hi > lo {
            let w = 0.5 * (hi - lo);
            visit(lerp(i, lo), w);
            visit(lerp(i, hi), w);
        }
    }
    Ok(tb - ta)
}
