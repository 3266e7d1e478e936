//! Reference implementations working directly with 2×2 density matrices.
//!
//! Nothing here calls into the crate's closed forms: states are built as
//! `ρ = (p0·1 + P·σ)/2`, diagonalized numerically, and matrix functions are
//! applied through the eigendecomposition.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use qubit_thermo::bloch::BlochVector;
use qubit_thermo::integrator::{self, IntegratorConfig, OutputGrid};
use qubit_thermo::schedule::DriveSchedule;

pub type CMat = Matrix2<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn density(p: BlochVector) -> CMat {
    Matrix2::new(
        c(0.5 * (1.0 + p.z), 0.0),
        c(0.5 * p.x, -0.5 * p.y),
        c(0.5 * p.x, 0.5 * p.y),
        c(0.5 * (1.0 - p.z), 0.0),
    )
}

/// Eigenvalues (ascending) and orthonormal eigenvectors as columns.
pub fn eigh(m: &CMat) -> ([f64; 2], CMat) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    let vals = [mean - r, mean + r];
    if b.norm() < 1e-300 {
        return if a <= d {
            (vals, CMat::identity())
        } else {
            (vals, Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)))
        };
    }
    let mut cols = [[c(0.0, 0.0); 2]; 2];
    for (k, lam) in vals.iter().enumerate() {
        // (a − λ) u + b v = 0 and b* u + (d − λ) v = 0; pick the better row.
        let (u, v) =
            if (a - lam).abs() > (d - lam).abs() { (-b, c(a - lam, 0.0)) } else { (c(d - lam, 0.0), -b.conj()) };
        let n = (u.norm_sqr() + v.norm_sqr()).sqrt();
        cols[k] = [u / n, v / n];
    }
    (vals, Matrix2::new(cols[0][0], cols[1][0], cols[0][1], cols[1][1]))
}

pub fn apply_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let diag = Matrix2::new(c(f(vals[0]), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(f(vals[1]), 0.0));
    vecs * diag * vecs.adjoint()
}

pub fn trace(m: &CMat) -> f64 {
    (m[(0, 0)] + m[(1, 1)]).re
}

pub fn von_neumann(p: BlochVector) -> f64 {
    let (vals, _) = eigh(&density(p));
    vals.iter().filter(|l| **l > 0.0).map(|l| -l * l.ln()).sum()
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn fidelity(a: BlochVector, b: BlochVector) -> f64 {
    let ra = density(a);
    let sa = apply_fn(&ra, |x| x.max(0.0).sqrt());
    let inner = sa * density(b) * sa;
    trace(&apply_fn(&inner, |x| x.max(0.0).sqrt())).powi(2)
}

/// `tr ρ (ln ρ − ln σ)` for full-rank `σ`.
pub fn relative_entropy(a: BlochVector, b: BlochVector) -> f64 {
    let ra = density(a);
    let log = |x: f64| if x > 0.0 { x.ln() } else { 0.0 };
    let la = apply_fn(&ra, log);
    let lb = apply_fn(&density(b), |x| x.ln());
    trace(&(ra * (la - lb)))
}

/// Entropy of the state dephased in the eigenbasis of `h·σ`.
pub fn dephased_entropy(p: BlochVector, h: BlochVector) -> f64 {
    let rho = density(p);
    let hm = density(h.unit().unwrap());
    let (_, vecs) = eigh(&hm);
    let in_basis = vecs.adjoint() * rho * vecs;
    [in_basis[(0, 0)].re, in_basis[(1, 1)].re].iter().filter(|l| **l > 0.0).map(|l| -l * l.ln()).sum()
}

/// Sweep propagator: columns are the images of the three lab axes.
pub fn propagator(schedule: &dyn DriveSchedule, span: (f64, f64), cfg: &IntegratorConfig) -> Matrix3<f64> {
    let cfg = cfg.clone().with_output(OutputGrid::Times(vec![span.0, span.1]));
    let cols: Vec<Vector3<f64>> = [BlochVector::X, BlochVector::Y, BlochVector::Z]
        .iter()
        .map(|e| integrator::evolve(*e, schedule, span, &cfg).unwrap().last().into())
        .collect();
    Matrix3::from_columns(&cols)
}

pub fn p_lz(epsilon: f64) -> f64 {
    (-std::f64::consts::PI / epsilon).exp()
}
