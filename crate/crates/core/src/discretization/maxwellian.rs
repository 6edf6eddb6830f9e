//! Conservative discrete Maxwellians.
//!
//! A discrete Maxwellian is the grid function `exp(a + b·v + c|v|^2)` whose
//! quadrature moments equal a prescribed `(n, u, T)` exactly (to round-off),
//! not merely the continuous Gaussian sampled at the nodes. On a tensor grid
//! the ansatz factorises per axis, so every moment needed by the Newton
//! iteration is a product of 1D sums and a fit costs `O(sum of axis sizes)`.
//!
//! On a 1D grid the same ansatz is fitted to the longitudinal moments
//! `(n, u_x, T/m)`, which is what the reduced (Chu) system needs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::grid::{DiscreteDistribution, VelocityGrid};
use crate::error::{BgkError, Result};
use crate::model::Moments;

pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Scaled moment residual accepted as converged.
pub const PROJECTION_TOLERANCE: f64 = 1e-12;
const TIGHT_TOLERANCE: f64 = 4e-15;
/// Thermal widths `sqrt(T/m)` that must fit on each side of the mean.
pub const SUPPORT_WIDTH: f64 = 4.0;

/// Separable discrete Maxwellian: `density * prod_d profile_d[i_d]`, each
/// profile normalised to unit quadrature mass along its axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMaxwellian {
    density: f64,
    profiles: Vec<Vec<f64>>,
    iterations: usize,
    residual: f64,
}

impl DiscreteMaxwellian {
    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Writes the nodal values into `out` (row-major, last axis fastest).
    pub fn fill(&self, out: &mut [f64]) {
        out.fill(0.0);
        self.add_scaled(1.0, out);
    }

    /// `out += scale * M`.
    pub fn add_scaled(&self, scale: f64, out: &mut [f64]) {
        let s = scale * self.density;
        match self.profiles.as_slice() {
            [px] => {
                for (o, p) in out.iter_mut().zip(px) {
                    *o += s * p;
                }
            }
            [px, py, pz] => {
                let mut idx = 0;
                for &a in px {
                    for &b in py {
                        let ab = s * a * b;
                        for &c in pz {
                            out[idx] += ab * c;
                            idx += 1;
                        }
                    }
                }
            }
            _ => unreachable!("grids are 1D or 3D"),
        }
    }

    pub fn to_distribution(&self, grid: &Arc<VelocityGrid>) -> DiscreteDistribution {
        let mut values = vec![0.0; grid.len()];
        self.fill(&mut values);
        DiscreteDistribution::from_raw(grid.clone(), values)
    }
}

/// Normalised power sums `mu_k = sum x^k phi / sum phi` along one axis,
/// with `phi = exp(b x + c x^2)`, plus the unnormalised quadrature mass.
struct AxisSums {
    mass: f64,
    mu: [f64; 5],
}

fn axis_profile(coords: &[f64], b: f64, c: f64) -> Vec<f64> {
    let shift = coords.iter().map(|&x| b * x + c * x * x).fold(f64::NEG_INFINITY, f64::max);
    coords.iter().map(|&x| (b * x + c * x * x - shift).exp()).collect()
}

fn axis_sums(coords: &[f64], spacing: f64, b: f64, c: f64) -> AxisSums {
    let phi = axis_profile(coords, b, c);
    let mut s = [0.0; 5];
    for (&x, &p) in coords.iter().zip(&phi) {
        let mut xk = p;
        for sk in s.iter_mut() {
            *sk += xk;
            xk *= x;
        }
    }
    let mass = spacing * s[0];
    AxisSums { mass, mu: s.map(|v| v / s[0]) }
}

fn check_support(target: &Moments, grid: &VelocityGrid, mass: f64) -> Result<()> {
    if !(target.density > 0.0 && target.temperature > 0.0 && target.density.is_finite()) {
        return Err(BgkError::Degenerate(format!(
            "Maxwellian target needs positive density and temperature, got n = {}, T = {}",
            target.density, target.temperature
        )));
    }
    let width = SUPPORT_WIDTH * (target.temperature / mass).sqrt();
    for (d, axis) in grid.axes().iter().enumerate() {
        let u = target.velocity[d];
        if !(u - width >= axis.v_min && u + width <= axis.v_max) {
            return Err(BgkError::GridSupport(format!(
                "axis {d}: u = {u} with thermal width {:.4} needs [{}, {}] inside [{}, {}]",
                width / SUPPORT_WIDTH,
                u - width,
                u + width,
                axis.v_min,
                axis.v_max
            )));
        }
    }
    Ok(())
}

/// Fits the discrete Maxwellian with the target moments.
///
/// On a 3D grid the target is `(n, u, T)`; on a 1D grid it is the
/// longitudinal part `(n, u_x, T)`, i.e. variance `T/m` along the axis.
pub fn fit_maxwellian(target: &Moments, grid: &VelocityGrid, mass: f64) -> Result<DiscreteMaxwellian> {
    check_support(target, grid, mass)?;
    let dim = grid.dim();
    let sigma2 = target.temperature / mass;
    let sigma = sigma2.sqrt();
    let u = &target.velocity[..dim];
    let s_target = dim as f64 * sigma2 + u.iter().map(|x| x * x).sum::<f64>();

    // Unknowns: b_0..b_{dim-1}, c.
    let mut x: Vec<f64> = u.iter().map(|ud| ud / sigma2).collect();
    x.push(-0.5 / sigma2);

    let evaluate = |x: &[f64]| -> (Vec<AxisSums>, Vec<f64>, f64) {
        let c = x[dim];
        let sums: Vec<AxisSums> =
            (0..dim).map(|d| axis_sums(grid.coords(d), grid.axis(d).spacing(), x[d], c)).collect();
        let mut r: Vec<f64> = (0..dim).map(|d| sums[d].mu[1] - u[d]).collect();
        r.push(sums.iter().map(|s| s.mu[2]).sum::<f64>() - s_target);
        let norm = r[..dim].iter().map(|v| v.abs() / sigma).fold(r[dim].abs() / s_target, f64::max);
        (sums, r, norm)
    };

    let (mut sums, mut r, mut norm) = evaluate(&x);
    let mut iterations = 0;
    let mut converged = norm <= TIGHT_TOLERANCE;
    while !converged && iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(dim + 1, dim + 1);
        let mut cross_sum = 0.0;
        for d in 0..dim {
            let mu = &sums[d].mu;
            let cross = mu[3] - mu[1] * mu[2];
            jac[(d, d)] = mu[2] - mu[1] * mu[1];
            jac[(d, dim)] = cross;
            jac[(dim, d)] = cross;
            cross_sum += mu[4] - mu[2] * mu[2];
        }
        jac[(dim, dim)] = cross_sum;
        let rhs = DVector::from_iterator(dim + 1, r.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(BgkError::ProjectionFailed { iterations, residual: norm });
        };

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            if trial[dim] < 0.0 {
                let ev = evaluate(&trial);
                if ev.2 < norm {
                    accepted = Some((trial, ev));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, (s, res, new_norm))) => {
                let stalled = new_norm > 0.25 * norm;
                x = trial;
                sums = s;
                r = res;
                norm = new_norm;
                converged = norm <= TIGHT_TOLERANCE || (stalled && norm <= PROJECTION_TOLERANCE);
            }
            None => {
                converged = norm <= PROJECTION_TOLERANCE;
                break;
            }
        }
    }
    if !converged {
        return Err(BgkError::ProjectionFailed { iterations, residual: norm });
    }

    let c = x[dim];
    let profiles = (0..dim)
        .map(|d| {
            let phi = axis_profile(grid.coords(d), x[d], c);
            let mass = sums[d].mass;
            phi.into_iter().map(|p| p / mass).collect()
        })
        .collect();
    Ok(DiscreteMaxwellian { density: target.density, profiles, iterations, residual: norm })
}

/// Discrete Maxwellian with the target moments, as a distribution.
pub fn project_maxwellian(target: &Moments, grid: &Arc<VelocityGrid>, mass: f64) -> Result<DiscreteDistribution> {
    Ok(fit_maxwellian(target, grid, mass)?.to_distribution(grid))
}

/// The continuous Maxwellian `n (2 pi T/m)^{-3/2} exp(-|v-u|^2 m / 2T)`.
pub fn continuous_maxwellian(target: &Moments, mass: f64, v: [f64; 3]) -> f64 {
    let s2 = target.temperature / mass;
    let d2: f64 = (0..3).map(|i| (v[i] - target.velocity[i]).powi(2)).sum();
    target.density * (2.0 * std::f64::consts::PI * s2).powf(-1.5) * (-0.5 * d2 / s2).exp()
}

/// The `v_x` marginal of [`continuous_maxwellian`].
pub fn continuous_maxwellian_1d(target: &Moments, mass: f64, vx: f64) -> f64 {
    let s2 = target.temperature / mass;
    target.density / (2.0 * std::f64::consts::PI * s2).sqrt() * (-0.5 * (vx - target.velocity[0]).powi(2) / s2).exp()
}
