//! Uniform time grids, grid-sampled paths, and refinement diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform discretization of `[0, T]` into `n_steps` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("horizon_T", "must be a positive finite time"));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// The i-th grid point `i * T / n_steps`.
    pub fn point(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n_steps as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.point(i)).collect()
    }

    /// Grid keeping every `factor`-th point; `factor` must divide `n_steps`.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::invalid(
                "factor",
                format!("{factor} does not divide n_steps = {}", self.n_steps),
            ));
        }
        TimeGrid::new(self.horizon, self.n_steps / factor)
    }

    /// Index of `t` if it coincides with a grid point (within rounding slack).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return None;
        }
        let raw = t / self.dt();
        let i = raw.round() as usize;
        if i <= self.n_steps && (raw - i as f64).abs() < 1e-9 {
            Some(i)
        } else {
            None
        }
    }
}

/// A real-valued function sampled on a uniform grid: one realized path of a
/// process, or a deterministic function tabulated at the grid points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(
                "values",
                format!(
                    "length {} does not match grid with {} points",
                    values.len(),
                    grid.n_points()
                ),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Tabulate `f` at the grid points.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.n_steps()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SamplePath {
        SamplePath {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Restriction to every `factor`-th point.
    pub fn subsample(&self, factor: usize) -> Result<SamplePath> {
        let grid = self.grid.subsample(factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(SamplePath { grid, values })
    }

    /// Running composite-trapezoid integral `t_i -> integral of self over [0, t_i]`.
    pub fn running_trapezoid(&self) -> SamplePath {
        let dt = self.grid.dt();
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dt;
            out.push(acc);
        }
        SamplePath {
            grid: self.grid,
            values: out,
        }
    }

    /// Running left-endpoint integral; the sample at `t_i` carries no weight
    /// in the value at `t_i`.
    pub fn running_left_sum(&self) -> SamplePath {
        let dt = self.grid.dt();
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for &v in &self.values[..self.values.len() - 1] {
            acc += v * dt;
            out.push(acc);
        }
        SamplePath {
            grid: self.grid,
            values: out,
        }
    }

    /// CSV export: header `t,value`, full double precision.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        for i in 0..=self.grid.n_steps() {
            writeln!(w, "{:.17e},{:.17e}", self.grid.point(i), self.values[i])?;
        }
        Ok(())
    }
}

/// A numeric value plus the refinement diagnostics that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub grid_sizes: Vec<usize>,
    pub values: Vec<f64>,
    pub estimated_order: Option<f64>,
    pub beta: Option<f64>,
}

impl IntegralResult {
    /// Bundle per-level values, taking the Richardson extrapolation of the
    /// last three levels as the headline value when the Aitken order
    /// estimate is sane, the finest value otherwise.
    pub fn from_levels(grid_sizes: Vec<usize>, values: Vec<f64>, beta: Option<f64>) -> Self {
        let (value, estimated_order) = aitken_extrapolate(&values);
        IntegralResult {
            value,
            grid_sizes,
            values,
            estimated_order,
            beta,
        }
    }

    /// Bundle per-level values with the finest value as the headline; the
    /// order estimate is still reported.
    pub fn from_levels_raw(grid_sizes: Vec<usize>, values: Vec<f64>, beta: Option<f64>) -> Self {
        let (_, estimated_order) = aitken_extrapolate(&values);
        IntegralResult {
            value: *values.last().expect("at least one level"),
            grid_sizes,
            values,
            estimated_order,
            beta,
        }
    }

    /// Distance between the two finest levels — the refinement tolerance.
    pub fn refinement_tolerance(&self) -> f64 {
        match self.values.len() {
            0 | 1 => f64::NAN,
            n => (self.values[n - 1] - self.values[n - 2]).abs(),
        }
    }
}

/// Aitken order estimate and Richardson extrapolation from the last three
/// values of a refinement sequence. Returns the last value unchanged when
/// fewer than three levels are available or the estimated order is not in a
/// trustworthy range.
pub fn aitken_extrapolate(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let last = *values.last().unwrap_or(&f64::NAN);
    if n < 3 {
        return (last, None);
    }
    let d1 = values[n - 2] - values[n - 3];
    let d2 = values[n - 1] - values[n - 2];
    if d2 == 0.0 {
        return (last, None);
    }
    let rho = d1 / d2;
    if rho > 1.05 {
        let order = rho.log2();
        if (0.2..=4.0).contains(&order) {
            return (last + d2 / (rho - 1.0), Some(order));
        }
    }
    (last, None)
}
