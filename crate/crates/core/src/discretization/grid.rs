use std::sync::Arc;

use crate::error::{BgkError, Result};
use crate::model::Moments;

/// Multiple of the thermal speed `sqrt(T/m)` kept on each side of the
/// mean velocity by [`VelocityGrid::sized_for`].
pub const SIZING_WIDTH: f64 = 6.0;

/// Values below this are treated as zero in quadratures of `f ln f`
/// and as vacuum when they are densities.
pub const VACUUM_THRESHOLD: f64 = 1e-300;

/// One axis of a uniform midpoint lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub nodes: usize,
    pub v_min: f64,
    pub v_max: f64,
}

impl Axis {
    pub fn new(nodes: usize, v_min: f64, v_max: f64) -> Self {
        Self { nodes, v_min, v_max }
    }

    pub fn spacing(&self) -> f64 {
        (self.v_max - self.v_min) / self.nodes as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.v_min + (i as f64 + 0.5) * self.spacing()
    }
}

/// Uniform Cartesian velocity lattice (1D or 3D) with midpoint weights.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    axes: Vec<Axis>,
    coords: Vec<Vec<f64>>,
    weight: f64,
}

impl VelocityGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.len() != 1 && axes.len() != 3 {
            return Err(BgkError::InvalidGrid(format!("dimension must be 1 or 3, got {}", axes.len())));
        }
        for (d, axis) in axes.iter().enumerate() {
            if axis.nodes == 0 || axis.nodes % 2 != 0 {
                return Err(BgkError::InvalidGrid(format!(
                    "axis {d}: node count must be even and positive, got {}",
                    axis.nodes
                )));
            }
            if !(axis.v_min < axis.v_max) || !axis.v_min.is_finite() || !axis.v_max.is_finite() {
                return Err(BgkError::InvalidGrid(format!(
                    "axis {d}: need finite v_min < v_max, got [{}, {}]",
                    axis.v_min, axis.v_max
                )));
            }
        }
        let coords = axes.iter().map(|a| (0..a.nodes).map(|i| a.node(i)).collect()).collect();
        let weight = axes.iter().map(Axis::spacing).product();
        Ok(Self { axes, coords, weight })
    }

    /// 3D grid with identical axes.
    pub fn cube(nodes: usize, v_min: f64, v_max: f64) -> Result<Self> {
        Self::new(vec![Axis::new(nodes, v_min, v_max); 3])
    }

    /// 1D grid.
    pub fn line(nodes: usize, v_min: f64, v_max: f64) -> Result<Self> {
        Self::new(vec![Axis::new(nodes, v_min, v_max)])
    }

    /// Grid of dimension `dim` whose axes cover `u ± 6 sqrt(T/m)` for every
    /// `(moments, mass)` pair.
    pub fn sized_for(states: &[(Moments, f64)], nodes: usize, dim: usize) -> Result<Self> {
        if states.is_empty() {
            return Err(BgkError::InvalidGrid("sizing rule needs at least one state".into()));
        }
        let axes = (0..dim)
            .map(|d| {
                let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (m, mass)| {
                    let w = SIZING_WIDTH * (m.temperature / mass).sqrt();
                    (lo.min(m.velocity[d] - w), hi.max(m.velocity[d] + w))
                });
                Axis::new(nodes, lo, hi)
            })
            .collect();
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    /// Node coordinates along axis `d`.
    pub fn coords(&self, d: usize) -> &[f64] {
        &self.coords[d]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of every node (product of axis spacings).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn total_weight(&self) -> f64 {
        self.axes.iter().map(|a| a.v_max - a.v_min).product()
    }

    /// Largest node speed along the first axis.
    pub fn max_speed(&self) -> f64 {
        let c = &self.coords[0];
        c[0].abs().max(c[c.len() - 1].abs())
    }

    /// The first axis as a 1D grid.
    pub fn longitudinal(&self) -> Result<Self> {
        Self::new(vec![self.axes[0]])
    }

    /// Coordinates of node `index` (row-major, last axis fastest).
    pub fn node(&self, index: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        let mut rest = index;
        for d in (0..self.dim()).rev() {
            let n = self.axes[d].nodes;
            v[d] = self.coords[d][rest % n];
            rest /= n;
        }
        v
    }
}

/// Nonnegative distribution function sampled on a velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    grid: Arc<VelocityGrid>,
    values: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(grid: Arc<VelocityGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BgkError::InvalidInput(format!(
                "distribution has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BgkError::InvalidInput(format!(
                "distribution value {} at node {i} is negative or not finite",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<VelocityGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<VelocityGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    /// Samples `f(v)` at every node.
    pub fn from_fn(grid: Arc<VelocityGrid>, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// Nodewise sum of two distributions on the same grid.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(BgkError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self::from_raw(self.grid.clone(), values))
    }

    /// `sum_i w f_i`.
    pub fn density(&self) -> f64 {
        self.grid.weight() * self.values.iter().sum::<f64>()
    }
}

/// Unnormalised quadrature moments: `sum w f`, `sum w v f`, `sum w |v|^2 f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMoments {
    pub density: f64,
    pub flux: [f64; 3],
    pub second: f64,
}

impl RawMoments {
    pub fn to_moments(&self, mass: f64) -> Result<Moments> {
        if !(self.density >= VACUUM_THRESHOLD) {
            return Err(BgkError::Vacuum { density: self.density });
        }
        let n = self.density;
        let u = self.flux.map(|p| p / n);
        let u_sq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        let temperature = mass / (3.0 * n) * (self.second - n * u_sq);
        Ok(Moments::new(n, u, temperature))
    }
}

/// Quadrature sums over a 3D grid in a fixed sequential order.
pub fn raw_moments(f: &DiscreteDistribution) -> Result<RawMoments> {
    let grid = f.grid();
    if grid.dim() != 3 {
        return Err(BgkError::InvalidInput("raw_moments needs a 3D grid; use reduced_moments for 1D".into()));
    }
    let (cx, cy, cz) = (grid.coords(0), grid.coords(1), grid.coords(2));
    let values = f.values();
    let mut density = 0.0;
    let mut flux = [0.0; 3];
    let mut second = 0.0;
    let mut idx = 0;
    for &vx in cx {
        for &vy in cy {
            let (mut s0, mut sz, mut sz2) = (0.0, 0.0, 0.0);
            for &vz in cz {
                let v = values[idx];
                s0 += v;
                sz += vz * v;
                sz2 += vz * vz * v;
                idx += 1;
            }
            density += s0;
            flux[0] += vx * s0;
            flux[1] += vy * s0;
            flux[2] += sz;
            second += (vx * vx + vy * vy) * s0 + sz2;
        }
    }
    let w = grid.weight();
    Ok(RawMoments { density: w * density, flux: flux.map(|p| w * p), second: w * second })
}

/// Density, mean velocity and temperature of a distribution on a 3D grid.
pub fn discrete_moments(f: &DiscreteDistribution, mass: f64) -> Result<Moments> {
    raw_moments(f)?.to_moments(mass)
}
