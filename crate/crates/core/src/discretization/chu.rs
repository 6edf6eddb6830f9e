//! Chu reduction for flows that vary only along `x`.
//!
//! A 3D distribution is replaced by its `v_x` marginal `g` and the
//! transverse energy moment `h = ∫ |v_⊥|^2 f dv_⊥`. Relaxation operators
//! close exactly on `(g, h)` because the reduction of a Maxwellian is
//! explicit: `g` is the 1D Maxwellian in `v_x` and `h = 2 (T/m) g`.
//! Transverse mean velocities are assumed to vanish.

use std::sync::Arc;

use super::grid::{DiscreteDistribution, VelocityGrid, VACUUM_THRESHOLD};
use super::maxwellian::fit_maxwellian;
use crate::error::{BgkError, Result};
use crate::model::Moments;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPair {
    pub g: DiscreteDistribution,
    pub h: Vec<f64>,
}

impl ReducedPair {
    pub fn new(g: DiscreteDistribution, h: Vec<f64>) -> Result<Self> {
        if g.grid().dim() != 1 {
            return Err(BgkError::InvalidInput("reduced pairs live on 1D grids".into()));
        }
        if h.len() != g.values().len() {
            return Err(BgkError::InvalidInput("g and h must have the same length".into()));
        }
        if let Some(i) = h.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BgkError::InvalidInput(format!("transverse energy {} at node {i} is negative", h[i])));
        }
        Ok(Self { g, h })
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        self.g.grid()
    }
}

/// Quadrature sums of a reduced pair: `sum w g`, `sum w v g`,
/// `sum w (v^2 g + h)`.
pub(crate) fn reduced_sums(grid: &VelocityGrid, g: &[f64], h: &[f64]) -> (f64, f64, f64) {
    let (mut n, mut p, mut e) = (0.0, 0.0, 0.0);
    for ((&v, &gi), &hi) in grid.coords(0).iter().zip(g).zip(h) {
        n += gi;
        p += v * gi;
        e += v * v * gi + hi;
    }
    let w = grid.weight();
    (w * n, w * p, w * e)
}

pub(crate) fn sums_to_moments(n: f64, p: f64, e: f64, mass: f64) -> Result<Moments> {
    if !(n >= VACUUM_THRESHOLD) {
        return Err(BgkError::Vacuum { density: n });
    }
    let u = p / n;
    Ok(Moments::new(n, [u, 0.0, 0.0], mass / (3.0 * n) * (e - n * u * u)))
}

/// Marginal in `v_x` and transverse energy of a 3D distribution.
pub fn chu_reduce(f3: &DiscreteDistribution) -> Result<ReducedPair> {
    let grid = f3.grid();
    if grid.dim() != 3 {
        return Err(BgkError::InvalidInput("chu_reduce needs a 3D distribution".into()));
    }
    let line = Arc::new(grid.longitudinal()?);
    let (cy, cz) = (grid.coords(1), grid.coords(2));
    let w_perp = grid.axis(1).spacing() * grid.axis(2).spacing();
    let nx = grid.axis(0).nodes;
    let mut g = vec![0.0; nx];
    let mut h = vec![0.0; nx];
    let values = f3.values();
    let mut idx = 0;
    for i in 0..nx {
        let (mut s0, mut s2) = (0.0, 0.0);
        for &vy in cy {
            for &vz in cz {
                let v = values[idx];
                s0 += v;
                s2 += (vy * vy + vz * vz) * v;
                idx += 1;
            }
        }
        g[i] = w_perp * s0;
        h[i] = w_perp * s2;
    }
    Ok(ReducedPair { g: DiscreteDistribution::from_raw(line, g), h })
}

/// `(n, u_x, T)` of a reduced pair; `T` counts longitudinal and
/// transverse thermal energy, `3 n T / m = sum w ((v-u)^2 g + h)`.
pub fn reduced_moments(rp: &ReducedPair, mass: f64) -> Result<Moments> {
    let (n, p, e) = reduced_sums(rp.grid(), rp.g.values(), &rp.h);
    sums_to_moments(n, p, e, mass)
}

/// Exact reduction of the 3D discrete Maxwellian with the target moments.
pub fn reduced_maxwellian(target: &Moments, grid: &Arc<VelocityGrid>, mass: f64) -> Result<ReducedPair> {
    if grid.dim() != 1 {
        return Err(BgkError::InvalidInput("reduced_maxwellian needs a 1D grid".into()));
    }
    let g = fit_maxwellian(target, grid, mass)?.to_distribution(grid);
    let scale = 2.0 * target.temperature / mass;
    let h = g.values().iter().map(|v| scale * v).collect();
    Ok(ReducedPair { g, h })
}
