//! Gauss–Legendre rules and the explicit node/weight grids every integral in
//! the crate is evaluated on.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `[-half_width, half_width]`
    pub const fn symmetric(half_width: f64) -> Self {
        Self { lo: -half_width, hi: half_width }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots of `P_n` by Newton iteration from the Tricomi initial guess; the
/// rule is symmetrised so that `x_i = -x_{n-1-i}` holds bit-exactly.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (theta).cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..40 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // descending root order -> store ascending
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A one-dimensional quadrature grid: sample locations plus the weights that
/// turn a sample vector into an integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid1D {
    /// Single Gauss–Legendre rule with `n` nodes on `interval`.
    pub fn gauss_legendre(interval: Interval, n: usize) -> Self {
        Self::composite_gauss_legendre(interval, 1, n)
    }

    /// `panels` equal sub-intervals, each carrying an `per_panel`-node rule.
    pub fn composite_gauss_legendre(interval: Interval, panels: usize, per_panel: usize) -> Self {
        assert!(panels > 0 && per_panel > 0);
        let (x, w) = gauss_legendre_unit(per_panel);
        let h = interval.len() / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let a = interval.lo + h * p as f64;
            let c = a + 0.5 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// `n` equispaced points including both endpoints, trapezoidal weights.
    pub fn uniform_trapezoid(interval: Interval, n: usize) -> Self {
        assert!(n >= 2);
        let h = interval.len() / (n - 1) as f64;
        let nodes = (0..n).map(|i| interval.lo + h * i as f64).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest interval containing all nodes.
    pub fn span(&self) -> Interval {
        let lo = self.nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub(crate) fn check_inside(&self, window: Interval, what: &str) -> Result<()> {
        let span = self.span();
        let tol = 1e-12 * window.len().abs().max(1.0);
        if span.lo < window.lo - tol || span.hi > window.hi + tol {
            return Err(Error::Precondition(format!(
                "{what} grid [{}, {}] is not inside the window [{}, {}]",
                span.lo, span.hi, window.lo, window.hi
            )));
        }
        Ok(())
    }
}

/// Cartesian product of 1-D grids, axis 0 varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub axes: Vec<Grid1D>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Grid1D>) -> Self {
        Self { axes }
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Grid1D::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Grid1D::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product weights in row-major order.
    pub fn weights(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for axis in &self.axes {
            out = out
                .iter()
                .flat_map(|&a| axis.weights.iter().map(move |&w| a * w))
                .collect();
        }
        out
    }
}
