//! Periodic 1D finite-volume transport of Chu-reduced distributions with
//! implicit-explicit relaxation.
//!
//! Storage is cell-major: the values of cell `c` at velocity node `j` live
//! at `c * nodes + j`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diagnostics::{reduced_entropy_density, write_csv, Check, ConservationLedger, LedgerTolerances, Totals};
use crate::discretization::chu::{reduced_sums, sums_to_moments};
use crate::discretization::{fit_maxwellian, ReducedPair, VelocityGrid};
use crate::discretization::{DiscreteDistribution, DiscreteMaxwellian};
use crate::error::{BgkError, Result};
use crate::model::{implicit_relaxation, mixture_equilibrium, MixtureModel, Moments};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMesh {
    pub cell_count: usize,
    pub length: f64,
}

impl SpatialMesh {
    pub fn new(cell_count: usize, length: f64) -> Result<Self> {
        if cell_count == 0 || !(length > 0.0 && length.is_finite()) {
            return Err(BgkError::InvalidInput(format!("mesh needs cells > 0 and length > 0, got {cell_count}, {length}")));
        }
        Ok(Self { cell_count, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cell_count as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportOrder {
    /// Upwind fluxes, forward Euler; CFL limit 1.
    First,
    /// Minmod-limited reconstruction with SSP-RK2 (Heun); CFL limit 1/2.
    Second,
}

impl TransportOrder {
    pub fn cfl_limit(self) -> f64 {
        match self {
            TransportOrder::First => 1.0,
            TransportOrder::Second => 0.5,
        }
    }
}

/// Reduced distributions `(g, h)` of both species on every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub mesh: SpatialMesh,
    pub grid: Arc<VelocityGrid>,
    pub g: [Vec<f64>; 2],
    pub h: [Vec<f64>; 2],
    pub time: f64,
}

impl SpatialField {
    /// Local reduced Maxwellians with the given per-cell moments.
    pub fn from_cell_moments(
        mesh: SpatialMesh,
        grid: Arc<VelocityGrid>,
        masses: [f64; 2],
        cells: &[[Moments; 2]],
    ) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(BgkError::InvalidGrid("the transport solver needs a 1D velocity grid".into()));
        }
        if cells.len() != mesh.cell_count {
            return Err(BgkError::InvalidInput(format!(
                "{} cell states for {} cells",
                cells.len(),
                mesh.cell_count
            )));
        }
        let nv = grid.len();
        let mut g = [vec![0.0; nv * mesh.cell_count], vec![0.0; nv * mesh.cell_count]];
        let mut h = g.clone();
        for (c, state) in cells.iter().enumerate() {
            for k in 0..2 {
                let m = &state[k];
                if m.velocity[1] != 0.0 || m.velocity[2] != 0.0 {
                    return Err(BgkError::InvalidInput(format!(
                        "cell {c}, species {}: the reduced solver needs zero transverse velocity",
                        k + 1
                    )));
                }
                let range = c * nv..(c + 1) * nv;
                let fit = fit_maxwellian(m, &grid, masses[k])?;
                fit.fill(&mut g[k][range.clone()]);
                let scale = 2.0 * m.temperature / masses[k];
                for i in range {
                    h[k][i] = scale * g[k][i];
                }
            }
        }
        Ok(Self { mesh, grid, g, h, time: 0.0 })
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    fn cell_range(&self, cell: usize) -> std::ops::Range<usize> {
        let nv = self.nodes();
        cell * nv..(cell + 1) * nv
    }

    pub fn pair(&self, species: usize, cell: usize) -> Result<ReducedPair> {
        let r = self.cell_range(cell);
        let g = DiscreteDistribution::new(self.grid.clone(), self.g[species][r.clone()].to_vec())?;
        ReducedPair::new(g, self.h[species][r].to_vec())
    }

    pub fn cell_moments(&self, masses: [f64; 2]) -> Result<Vec<[Moments; 2]>> {
        (0..self.mesh.cell_count)
            .map(|c| {
                let r = self.cell_range(c);
                let mut out = [Moments::vacuum(); 2];
                for k in 0..2 {
                    let (n, p, e) = reduced_sums(&self.grid, &self.g[k][r.clone()], &self.h[k][r.clone()]);
                    out[k] = sums_to_moments(n, p, e, masses[k])?;
                }
                Ok(out)
            })
            .collect()
    }

    /// Domain totals; sums run sequentially in cell order.
    pub fn totals(&self, masses: [f64; 2]) -> Totals {
        let dx = self.mesh.dx();
        let w = self.grid.weight();
        let mut t = Totals { mass: [0.0; 2], momentum: [0.0; 3], energy: 0.0, entropy: 0.0 };
        for k in 0..2 {
            let (mut n, mut p, mut e, mut s) = (0.0, 0.0, 0.0, 0.0);
            for c in 0..self.mesh.cell_count {
                let r = self.cell_range(c);
                let (cn, cp, ce) = reduced_sums(&self.grid, &self.g[k][r.clone()], &self.h[k][r.clone()]);
                n += cn;
                p += cp;
                e += ce;
                s += reduced_entropy_density(&self.g[k][r.clone()], &self.h[k][r]);
            }
            t.mass[k] = dx * n;
            t.momentum[0] += masses[k] * dx * p;
            t.energy += 0.5 * masses[k] * dx * e;
            t.entropy += dx * w * s;
        }
        t
    }

    /// `dt * max|v| / dx`.
    pub fn cfl_number(&self, dt: f64) -> f64 {
        dt * self.grid.max_speed() / self.mesh.dx()
    }
}

/// Time step with the given CFL number.
pub fn dt_for_cfl(mesh: &SpatialMesh, grid: &VelocityGrid, cfl: f64) -> f64 {
    cfl * mesh.dx() / grid.max_speed()
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// `out = q - (dt/dx) (F_{i+1/2} - F_{i-1/2})` along each velocity node.
fn advect(q: &[f64], out: &mut [f64], coords: &[f64], cells: usize, ratio: f64, order: TransportOrder) {
    let nv = coords.len();
    let mut flux = vec![0.0; cells];
    for (j, &v) in coords.iter().enumerate() {
        let at = |c: usize| q[c * nv + j];
        // flux[i] is the flux through the right face of cell i.
        for i in 0..cells {
            let (up, sign) = if v >= 0.0 { (i, 1.0) } else { ((i + 1) % cells, -1.0) };
            let face = match order {
                TransportOrder::First => at(up),
                TransportOrder::Second => {
                    let left = at((up + cells - 1) % cells);
                    let right = at((up + 1) % cells);
                    let centre = at(up);
                    centre + 0.5 * sign * minmod(centre - left, right - centre)
                }
            };
            flux[i] = v * face;
        }
        for i in 0..cells {
            let left = flux[(i + cells - 1) % cells];
            out[i * nv + j] = at(i) - ratio * (flux[i] - left);
        }
    }
}

/// Explicit finite-volume transport of `g` and `h` for both species.
pub fn transport_step(field: &SpatialField, dt: f64, order: TransportOrder) -> Result<SpatialField> {
    let cfl = field.cfl_number(dt);
    if !(dt > 0.0) || cfl > order.cfl_limit() * (1.0 + 1e-12) {
        return Err(BgkError::StepSize {
            dt,
            reason: format!("CFL number {cfl:.4} exceeds {} for {order:?} order transport", order.cfl_limit()),
        });
    }
    let cells = field.mesh.cell_count;
    let ratio = dt / field.mesh.dx();
    let coords = field.grid.coords(0);
    let mut next = field.clone();
    let arrays: Vec<(&Vec<f64>, &mut Vec<f64>)> =
        field.g.iter().chain(field.h.iter()).zip(next.g.iter_mut().chain(next.h.iter_mut())).collect();
    arrays.into_par_iter().for_each(|(q, out)| match order {
        TransportOrder::First => advect(q, out, coords, cells, ratio, order),
        TransportOrder::Second => {
            let mut stage = vec![0.0; q.len()];
            advect(q, &mut stage, coords, cells, ratio, order);
            let mut second = vec![0.0; q.len()];
            advect(&stage, &mut second, coords, cells, ratio, order);
            for ((o, a), b) in out.iter_mut().zip(q).zip(&second) {
                *o = 0.5 * (a + b);
            }
        }
    });
    next.time = field.time + dt;
    Ok(next)
}

fn reduced_target(fit: &DiscreteMaxwellian, target: &Moments, mass: f64, nv: usize) -> (Vec<f64>, Vec<f64>) {
    let mut g = vec![0.0; nv];
    fit.fill(&mut g);
    let scale = 2.0 * target.temperature / mass;
    let h = g.iter().map(|v| scale * v).collect();
    (g, h)
}

/// Implicit Euler relaxation of one cell, in place.
fn relax_cell(
    cell: [(&mut [f64], &mut [f64]); 2],
    grid: &VelocityGrid,
    model: &MixtureModel,
    dt: f64,
) -> Result<()> {
    let masses = model.masses();
    let nv = grid.len();
    let [(g1, h1), (g2, h2)] = cell;
    let mom = [(&*g1, &*h1), (&*g2, &*h2)].map(|(g, h)| reduced_sums(grid, g, h));
    let m1 = sums_to_moments(mom[0].0, mom[0].1, mom[0].2, masses[0])?;
    let m2 = sums_to_moments(mom[1].0, mom[1].1, mom[1].2, masses[1])?;
    let rates = model.rates(m1.density, m2.density)?;
    let (tot1, tot2) = rates.totals(m1.density, m2.density);
    if tot1 == 0.0 && tot2 == 0.0 {
        return Ok(());
    }
    let (new1, new2) = implicit_relaxation(&m1, &m2, model, dt)?;
    let mix = model.mixture_moments(&new1, &new2)?;
    let weights = [
        (rates.nu11 * m1.density, rates.nu12 * m2.density),
        (rates.nu22 * m2.density, rates.nu21 * m1.density),
    ];
    let own = [new1, new2];
    let mixed = [mix.m12, mix.m21];
    for (k, (g, h)) in [(g1, h1), (g2, h2)].into_iter().enumerate() {
        let (intra, inter) = weights[k];
        let (go, ho) = reduced_target(&fit_maxwellian(&own[k], grid, masses[k])?, &own[k], masses[k], nv);
        let (gm, hm) = reduced_target(&fit_maxwellian(&mixed[k], grid, masses[k])?, &mixed[k], masses[k], nv);
        let denom = 1.0 + dt * (intra + inter);
        for i in 0..nv {
            g[i] = (g[i] + dt * (intra * go[i] + inter * gm[i])) / denom;
            h[i] = (h[i] + dt * (intra * ho[i] + inter * hm[i])) / denom;
        }
    }
    Ok(())
}

/// Per-cell implicit Euler relaxation (the homogeneous moments-first
/// update applied to the reduced pairs).
pub fn relax_cells(field: &SpatialField, model: &MixtureModel, dt: f64) -> Result<SpatialField> {
    let nv = field.nodes();
    let mut next = field.clone();
    let [g1, g2] = &mut next.g;
    let [h1, h2] = &mut next.h;
    g1.par_chunks_mut(nv)
        .zip(h1.par_chunks_mut(nv))
        .zip(g2.par_chunks_mut(nv).zip(h2.par_chunks_mut(nv)))
        .try_for_each(|((a, b), (c, d))| relax_cell([(a, b), (c, d)], &field.grid, model, dt))?;
    Ok(next)
}

/// First-order IMEX step: explicit transport, then implicit relaxation.
pub fn imex_step(field: &SpatialField, dt: f64, model: &MixtureModel, order: TransportOrder) -> Result<SpatialField> {
    let transported = transport_step(field, dt, order)?;
    relax_cells(&transported, model, dt)
}

/// Largest per-cell distance `sum_k (|g_k - G_k|_1 + |h_k - H_k|_1)` to the
/// local mixture equilibrium (common velocity and temperature with the
/// cell's densities, momentum and energy).
pub fn equilibrium_deviation(field: &SpatialField, model: &MixtureModel) -> Result<f64> {
    let masses = model.masses();
    let nv = field.nodes();
    let w = field.grid.weight();
    let moments = field.cell_moments(masses)?;
    let per_cell: Result<Vec<f64>> = moments
        .par_iter()
        .enumerate()
        .map(|(c, mom)| {
            let (e1, e2) = mixture_equilibrium(&mom[0], &mom[1], masses);
            let r = c * nv..(c + 1) * nv;
            let mut sum = 0.0;
            for (k, eq) in [e1, e2].iter().enumerate() {
                let (ge, he) = reduced_target(&fit_maxwellian(eq, &field.grid, masses[k])?, eq, masses[k], nv);
                for (i, idx) in r.clone().enumerate() {
                    sum += (field.g[k][idx] - ge[i]).abs() + (field.h[k][idx] - he[i]).abs();
                }
            }
            Ok(w * sum)
        })
        .collect();
    Ok(per_cell?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub model: MixtureModel,
    pub mesh: SpatialMesh,
    pub grid: Arc<VelocityGrid>,
    pub initial: Vec<[Moments; 2]>,
    pub dt: f64,
    pub t_end: f64,
    pub output_interval: f64,
    pub order: TransportOrder,
    pub tolerances: LedgerTolerances,
    /// Keep per-cell moment profiles at every output time.
    pub keep_profiles: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportSample {
    pub time: f64,
    pub totals: Totals,
    pub equilibrium_deviation: f64,
}

pub const LEDGER_HEADER: [&str; 8] =
    ["time", "mass_1", "mass_2", "total_px", "total_py", "total_pz", "total_E", "H_total"];

pub const PROFILE_HEADER: [&str; 7] = ["x", "n1", "u1", "T1", "n2", "u2", "T2"];

#[derive(Debug, Clone)]
pub struct Profile {
    pub time: f64,
    pub cells: Vec<[Moments; 2]>,
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    pub samples: Vec<TransportSample>,
    pub profiles: Vec<Profile>,
    pub ledger: ConservationLedger,
    pub final_field: SpatialField,
}

impl TransportRun {
    pub fn checks(&self, tol: &LedgerTolerances) -> Vec<Check> {
        self.ledger.checks(tol)
    }

    pub fn write_ledger_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut header = LEDGER_HEADER.to_vec();
        header.push("eq_deviation");
        write_csv(
            w,
            &header,
            self.samples.iter().map(|s| {
                let t = &s.totals;
                vec![
                    s.time,
                    t.mass[0],
                    t.mass[1],
                    t.momentum[0],
                    t.momentum[1],
                    t.momentum[2],
                    t.energy,
                    t.entropy,
                    s.equilibrium_deviation,
                ]
            }),
        )
    }

    pub fn write_profile_csv<W: std::io::Write>(&self, profile: &Profile, w: W) -> Result<()> {
        let mesh = &self.final_field.mesh;
        write_csv(
            w,
            &PROFILE_HEADER,
            profile.cells.iter().enumerate().map(|(c, m)| {
                vec![
                    mesh.center(c),
                    m[0].density,
                    m[0].velocity[0],
                    m[0].temperature,
                    m[1].density,
                    m[1].velocity[0],
                    m[1].temperature,
                ]
            }),
        )
    }
}

fn momentum_scale(field: &SpatialField, masses: [f64; 2]) -> Result<f64> {
    let dx = field.mesh.dx();
    Ok(field
        .cell_moments(masses)?
        .iter()
        .map(|cell| {
            (0..2)
                .map(|k| {
                    let m = &cell[k];
                    masses[k] * m.density * (m.velocity[0].abs() + (m.temperature / masses[k]).sqrt())
                })
                .sum::<f64>()
                * dx
        })
        .sum())
}

/// Runs the IMEX scheme and records ledgers at the output times.
pub fn run_1d(cfg: &TransportConfig) -> Result<TransportRun> {
    let model = &cfg.model;
    model.ensure_admissible()?;
    if !(cfg.dt > 0.0 && cfg.t_end >= 0.0 && cfg.output_interval > 0.0) {
        return Err(BgkError::InvalidInput("dt and output interval must be positive, t_end nonnegative".into()));
    }
    let masses = model.masses();
    let mut field = SpatialField::from_cell_moments(cfg.mesh, cfg.grid.clone(), masses, &cfg.initial)?;
    // Fail before the first step rather than midway.
    transport_step(&field, cfg.dt, cfg.order)?;

    let sample = |field: &SpatialField, totals: Totals| -> Result<TransportSample> {
        Ok(TransportSample { time: field.time, totals, equilibrium_deviation: equilibrium_deviation(field, model)? })
    };
    let profile = |field: &SpatialField| -> Result<Profile> {
        Ok(Profile { time: field.time, cells: field.cell_moments(masses)? })
    };

    let totals0 = field.totals(masses);
    let mut ledger = ConservationLedger::new(0.0, totals0, momentum_scale(&field, masses)?);
    let mut samples = vec![sample(&field, totals0)?];
    let mut profiles = Vec::new();
    if cfg.keep_profiles {
        profiles.push(profile(&field)?);
    }

    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut next_output = 1usize;
    for n in 1..=steps {
        field = imex_step(&field, cfg.dt, model, cfg.order)?;
        field.time = n as f64 * cfg.dt;
        let totals = field.totals(masses);
        ledger.update(totals);
        if ((next_output as f64 * cfg.output_interval) / cfg.dt).round() as usize == n || n == steps {
            ledger.record(field.time);
            samples.push(sample(&field, totals)?);
            if cfg.keep_profiles {
                profiles.push(profile(&field)?);
            }
            while ((next_output as f64 * cfg.output_interval) / cfg.dt).round() as usize <= n {
                next_output += 1;
            }
        }
    }
    Ok(TransportRun { samples, profiles, ledger, final_field: field })
}
