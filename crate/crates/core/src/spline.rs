//! Natural cubic splines on strictly increasing knots.

use crate::bloch::BlochVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    curvature: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::Domain(format!(
                "spline needs at least two knots with matching values ({} knots, {} values)",
                n,
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("spline knots must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("spline values must be finite".into()));
        }
        let curvature = natural_curvature(&knots, &values);
        Ok(Self { knots, values, curvature })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.knots.len() - 2;
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            i => (i - 1).min(last),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.curvature[i] + (b * b * b - b) * self.curvature[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        (self.values[i + 1] - self.values[i]) / h - (3.0 * a * a - 1.0) * h * self.curvature[i] / 6.0
            + (3.0 * b * b - 1.0) * h * self.curvature[i + 1] / 6.0
    }
}

/// Tridiagonal solve for the second derivatives with zero end curvature.
fn natural_curvature(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // Thomas algorithm on rows 1..n-1; sub/super diagonal entries are the
    // interval widths.
    for i in 2..n - 1 {
        let w = (x[i] - x[i - 1]) / diag[i - 1];
        diag[i] -= w * (x[i] - x[i - 1]);
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        let upper = if i + 1 < n - 1 { (x[i + 1] - x[i]) * m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper) / diag[i];
    }
    m
}

/// Componentwise spline through a sampled vector series.
#[derive(Clone, Debug)]
pub struct VectorSpline {
    components: [CubicSpline; 3],
}

impl VectorSpline {
    pub fn new(times: &[f64], values: &[BlochVector]) -> Result<Self> {
        let comp = |f: fn(&BlochVector) -> f64| CubicSpline::new(times.to_vec(), values.iter().map(f).collect());
        Ok(Self { components: [comp(|v| v.x)?, comp(|v| v.y)?, comp(|v| v.z)?] })
    }

    pub fn span(&self) -> (f64, f64) {
        self.components[0].span()
    }

    pub fn eval(&self, t: f64) -> BlochVector {
        let [x, y, z] = &self.components;
        BlochVector::new(x.eval(t), y.eval(t), z.eval(t))
    }

    pub fn derivative(&self, t: f64) -> BlochVector {
        let [x, y, z] = &self.components;
        BlochVector::new(x.derivative(t), y.derivative(t), z.derivative(t))
    }
}
