//! Unit convention, model parameters and the spacetime grid.
//!
//! Everything in this crate is expressed in natural units with
//! `hbar = m = l = 1`: lengths in `l`, wave numbers in `1/l`, energies in
//! `hbar^2/(m l^2)` and the dimensionless time `T = hbar t/(m l^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker for the `hbar = m = l = 1` unit system.
///
/// No public function takes unit parameters; this type exists so the
/// convention has a name in signatures and docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NaturalUnits;

impl NaturalUnits {
    pub const HBAR: f64 = 1.0;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;

    /// Kinetic energy `hbar^2 k^2 / 2m`.
    pub fn kinetic_energy(k: f64) -> f64 {
        0.5 * k * k
    }
}

/// Piecewise-constant potential: `v1` for `x < 0`, `v2` for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPotential {
    pub v1: f64,
    pub v2: f64,
}

impl StepPotential {
    pub fn new(v1: f64, v2: f64) -> Result<Self> {
        if !v1.is_finite() || !v2.is_finite() {
            return Err(Error::invalid(format!(
                "step potential must be finite, got v1={v1}, v2={v2}"
            )));
        }
        Ok(Self { v1, v2 })
    }

    /// Step of height `v0` rising from zero at the origin.
    pub fn rising(v0: f64) -> Result<Self> {
        Self::new(0.0, v0)
    }

    pub fn free() -> Self {
        Self { v1: 0.0, v2: 0.0 }
    }

    /// `v2 - v1`.
    pub fn height(&self) -> f64 {
        self.v2 - self.v1
    }
}

/// Gaussian spectral amplitude of the incident packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpectrum {
    /// Spectral center.
    pub k0: f64,
    /// Spectral width of the amplitude `exp(-(k-k0)^2 / (2 dk^2))`.
    pub dk: f64,
    /// Initial center of the packet; must lie in region 1.
    pub x0: f64,
}

impl GaussianSpectrum {
    /// Minimum `k0/dk`; keeps the discarded `k < 0` weight below 0.2%.
    pub const MIN_CENTER_TO_WIDTH: f64 = 3.0;

    pub fn new(k0: f64, dk: f64, x0: f64) -> Result<Self> {
        if !(k0.is_finite() && dk.is_finite() && x0.is_finite()) {
            return Err(Error::invalid("packet parameters must be finite"));
        }
        if dk <= 0.0 {
            return Err(Error::invalid(format!("dk must be positive, got {dk}")));
        }
        if k0 <= 0.0 {
            return Err(Error::invalid(format!("k0 must be positive, got {k0}")));
        }
        if k0 / dk < Self::MIN_CENTER_TO_WIDTH {
            return Err(Error::invalid(format!(
                "k0/dk = {} is below {}; packet is not predominantly right-moving",
                k0 / dk,
                Self::MIN_CENTER_TO_WIDTH
            )));
        }
        if x0 >= 0.0 {
            return Err(Error::invalid(format!(
                "x0 must be negative (incidence from region 1), got {x0}"
            )));
        }
        Ok(Self { k0, dk, x0 })
    }

    /// Reference speed for the time axis, `sqrt(2E/m) = k0`.
    pub fn reference_speed(&self) -> f64 {
        self.k0
    }

    /// Central energy `k0^2/2`.
    pub fn energy(&self) -> f64 {
        NaturalUnits::kinetic_energy(self.k0)
    }

    /// rms width of the initial density, `1/(sqrt(2) dk)`.
    pub fn initial_rms_width(&self) -> f64 {
        1.0 / (std::f64::consts::SQRT_2 * self.dk)
    }
}

/// Uniform, endpoint-inclusive `(x, T)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
}

impl SpacetimeGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_min: f64, t_max: f64, nt: usize) -> Result<Self> {
        let finite = [x_min, x_max, t_min, t_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if !(x_min < 0.0 && 0.0 < x_max) {
            return Err(Error::invalid(format!(
                "grid must straddle the step: need x_min < 0 < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if t_min >= t_max {
            return Err(Error::invalid(format!(
                "need t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if nx < 2 || nt < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 points per axis, got nx={nx}, nt={nt}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            t_min,
            t_max,
            nt,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.nt - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        uniform(self.x_min, self.x_max, self.nx)
    }

    pub fn ts(&self) -> Vec<f64> {
        uniform(self.t_min, self.t_max, self.nt)
    }

    /// Both axes at once.
    pub fn points(&self) -> (Vec<f64>, Vec<f64>) {
        (self.xs(), self.ts())
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the time row closest to `t`, clamped to the grid.
    pub fn nearest_row(&self, t: f64) -> usize {
        nearest_index(self.t_min, self.dt(), self.nt, t)
    }

    /// Index of the column closest to `x`, clamped to the grid.
    pub fn nearest_column(&self, x: f64) -> usize {
        nearest_index(self.x_min, self.dx(), self.nx, x)
    }
}

/// Free-function form of [`SpacetimeGrid::points`].
pub fn grid_points(grid: &SpacetimeGrid) -> (Vec<f64>, Vec<f64>) {
    grid.points()
}

fn uniform(min: f64, max: f64, n: usize) -> Vec<f64> {
    let step = (max - min) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| min + i as f64 * step).collect();
    out[n - 1] = max;
    out
}

fn nearest_index(min: f64, step: f64, n: usize, v: f64) -> usize {
    let i = ((v - min) / step).round();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(n - 1)
    }
}

/// Portion of the x axis an observable is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    All,
    /// `x < 0`
    Left,
    /// `x >= 0`
    Right,
}

impl Region {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            Region::All => true,
            Region::Left => x < 0.0,
            Region::Right => x >= 0.0,
        }
    }
}

/// `|psi|^2` sampled on a grid; row-major with one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: SpacetimeGrid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: SpacetimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "density has {} values, grid needs {} x {} = {}",
                values.len(),
                grid.nt,
                grid.nx,
                grid.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::invalid(format!(
                "density entry {i} is {v}; densities must be finite and nonnegative"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t_index: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[t_index * nx..(t_index + 1) * nx]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.nx)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoid norm of each time row.
    pub fn row_norms(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.rows().map(|r| trapezoid(r, dx)).collect()
    }
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], dx: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}
