//! Sampled one-dimensional functions and their integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear function through sorted `(x, y)` knots.
///
/// Outside the knot range the function is held at the nearest endpoint value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

/// A function value plus whether the argument fell outside the knot range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub clamped: bool,
}

impl PiecewiseLinear {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if xs.is_empty() {
            return Err(Error::invalid("profile", "needs at least one sample"));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::invalid("profile", "samples must be finite"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("profile", "grid must be strictly increasing"));
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn constant(y: f64) -> Result<Self> {
        Self::new([(0.0, y)])
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn start(&self) -> f64 {
        self.xs[0]
    }

    pub fn end(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.evaluate(x).value
    }

    pub fn evaluate(&self, x: f64) -> Evaluation {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return Evaluation {
                value: self.ys[0],
                clamped: x < self.xs[0],
            };
        }
        if x >= self.xs[n - 1] {
            return Evaluation {
                value: self.ys[n - 1],
                clamped: x > self.xs[n - 1],
            };
        }
        // first knot strictly greater than x
        let hi = self.xs.partition_point(|&k| k <= x);
        let lo = hi - 1;
        let t = (x - self.xs[lo]) / (self.xs[hi] - self.xs[lo]);
        Evaluation {
            value: self.ys[lo] + t * (self.ys[hi] - self.ys[lo]),
            clamped: false,
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for PiecewiseLinear {
    type Error = Error;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(points.into_iter().map(|[x, y]| (x, y)))
    }
}

impl From<PiecewiseLinear> for Vec<[f64; 2]> {
    fn from(p: PiecewiseLinear) -> Self {
        p.xs.into_iter().zip(p.ys).map(|(x, y)| [x, y]).collect()
    }
}

/// Relative change between successive refinements at which integration stops.
pub const INTEGRATION_RTOL: f64 = 1e-4;
const MAX_REFINEMENTS: u32 = 10;

/// Composite trapezoid integral of `f` over `[a, b]`.
///
/// The base grid is `a`, `b` and every breakpoint strictly between them. The
/// grid is then halved uniformly until two successive estimates agree within
/// [`INTEGRATION_RTOL`]. For integrands that are linear between breakpoints
/// the base estimate is already exact and the first refinement confirms it.
pub fn integrate<F>(f: F, breakpoints: &[f64], a: f64, b: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let mut grid = Vec::with_capacity(breakpoints.len() + 2);
    grid.push(a);
    grid.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    grid.push(b);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut estimate = trapezoid(&grid, &values);
    for _ in 0..MAX_REFINEMENTS {
        let mut fine_grid = Vec::with_capacity(grid.len() * 2);
        let mut fine_values = Vec::with_capacity(grid.len() * 2);
        for i in 0..grid.len() - 1 {
            let mid = 0.5 * (grid[i] + grid[i + 1]);
            fine_grid.push(grid[i]);
            fine_values.push(values[i]);
            fine_grid.push(mid);
            fine_values.push(f(mid));
        }
        fine_grid.push(grid[grid.len() - 1]);
        fine_values.push(values[values.len() - 1]);

        let refined = trapezoid(&fine_grid, &fine_values);
        let converged =
            (refined - estimate).abs() <= INTEGRATION_RTOL * refined.abs().max(f64::MIN_POSITIVE);
        estimate = refined;
        grid = fine_grid;
        values = fine_values;
        if converged {
            break;
        }
    }
    estimate
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}
