//! Space-homogeneous two-species BGK relaxation on a 3D velocity grid.

use std::sync::Arc;

use crate::diagnostics::{
    entropy, l1_distance, relative_entropy, write_csv, Check, ConservationLedger, LedgerTolerances, Totals,
};
use crate::discretization::{
    fit_maxwellian, project_maxwellian, raw_moments, DiscreteDistribution, DiscreteMaxwellian, VelocityGrid,
};
use crate::error::{BgkError, Result};
use crate::model::{
    closed_form_temperature_diff, closed_form_velocity_diff, entropy_decay_bound, implicit_relaxation, moment_rhs,
    norm_sq, relaxation_coefficients, sub, MixtureModel, Moments, Rates, RelaxationCoefficients, SpeciesParams,
};

/// Largest `dt * (nu_kk n_k + nu_kj n_j)` accepted by the explicit scheme.
pub const RK4_STABILITY_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    ImplicitEuler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousState {
    pub f: [DiscreteDistribution; 2],
    pub time: f64,
}

impl HomogeneousState {
    pub fn new(f1: DiscreteDistribution, f2: DiscreteDistribution, time: f64) -> Result<Self> {
        if !f1.same_grid(&f2) {
            return Err(BgkError::GridMismatch);
        }
        if f1.grid().dim() != 3 {
            return Err(BgkError::InvalidGrid("the homogeneous solver needs a 3D grid".into()));
        }
        Ok(Self { f: [f1, f2], time })
    }

    pub fn grid(&self) -> &Arc<VelocityGrid> {
        self.f[0].grid()
    }

    pub fn moments(&self, masses: [f64; 2]) -> Result<[Moments; 2]> {
        Ok([raw_moments(&self.f[0])?.to_moments(masses[0])?, raw_moments(&self.f[1])?.to_moments(masses[1])?])
    }

    pub fn totals(&self, masses: [f64; 2]) -> Result<Totals> {
        let mut t = Totals { mass: [0.0; 2], momentum: [0.0; 3], energy: 0.0, entropy: 0.0 };
        for k in 0..2 {
            let raw = raw_moments(&self.f[k])?;
            t.mass[k] = raw.density;
            for i in 0..3 {
                t.momentum[i] += masses[k] * raw.flux[i];
            }
            t.energy += 0.5 * masses[k] * raw.second;
            t.entropy += entropy(&self.f[k]);
        }
        Ok(t)
    }
}

/// Relaxation targets of both species at given moments.
struct Targets {
    rates: Rates,
    own: [DiscreteMaxwellian; 2],
    mixed: [DiscreteMaxwellian; 2],
}

fn targets(mom: &[Moments; 2], model: &MixtureModel, grid: &VelocityGrid) -> Result<Targets> {
    let rates = model.rates(mom[0].density, mom[1].density)?;
    let mix = model.mixture_moments(&mom[0], &mom[1])?;
    let [m1, m2] = model.masses();
    Ok(Targets {
        rates,
        own: [fit_maxwellian(&mom[0], grid, m1)?, fit_maxwellian(&mom[1], grid, m2)?],
        mixed: [fit_maxwellian(&mix.m12, grid, m1)?, fit_maxwellian(&mix.m21, grid, m2)?],
    })
}

/// Per-species `(intra weight, inter weight)`: `(nu_kk n_k, nu_kj n_j)`.
fn weights(rates: &Rates, n: [f64; 2]) -> [(f64, f64); 2] {
    [(rates.nu11 * n[0], rates.nu12 * n[1]), (rates.nu22 * n[1], rates.nu21 * n[0])]
}

fn rhs_values(values: [&[f64]; 2], model: &MixtureModel, grid: &Arc<VelocityGrid>) -> Result<[Vec<f64>; 2]> {
    let masses = model.masses();
    let mut mom = [Moments::vacuum(); 2];
    for k in 0..2 {
        let f = DiscreteDistribution::from_raw(grid.clone(), values[k].to_vec());
        mom[k] = raw_moments(&f)?.to_moments(masses[k])?;
    }
    let t = targets(&mom, model, grid)?;
    let w = weights(&t.rates, [mom[0].density, mom[1].density]);
    let mut out = [Vec::new(), Vec::new()];
    for k in 0..2 {
        let (intra, inter) = w[k];
        let mut df: Vec<f64> = values[k].iter().map(|v| -(intra + inter) * v).collect();
        t.own[k].add_scaled(intra, &mut df);
        t.mixed[k].add_scaled(inter, &mut df);
        out[k] = df;
    }
    Ok(out)
}

/// Pointwise time derivatives of both distributions.
pub fn rhs_homogeneous(s: &HomogeneousState, model: &MixtureModel) -> Result<[Vec<f64>; 2]> {
    rhs_values([s.f[0].values(), s.f[1].values()], model, s.grid())
}

fn check_rk4_step(s: &HomogeneousState, model: &MixtureModel, dt: f64) -> Result<()> {
    let n = [s.f[0].density(), s.f[1].density()];
    let rates = model.rates(n[0], n[1])?;
    let (a, b) = rates.totals(n[0], n[1]);
    let stiffness = dt * a.max(b);
    if stiffness > RK4_STABILITY_LIMIT {
        return Err(BgkError::StepSize {
            dt,
            reason: format!("dt * max(nu n) = {stiffness:.4} exceeds the RK4 limit {RK4_STABILITY_LIMIT}"),
        });
    }
    Ok(())
}

fn rk4(s: &HomogeneousState, model: &MixtureModel, dt: f64) -> Result<[Vec<f64>; 2]> {
    let grid = s.grid();
    let base = [s.f[0].values(), s.f[1].values()];
    let stage = |k: &[Vec<f64>; 2], c: f64| -> [Vec<f64>; 2] {
        [0, 1].map(|j| base[j].iter().zip(&k[j]).map(|(f, d)| f + c * d).collect())
    };
    let k1 = rhs_values(base, model, grid)?;
    let s2 = stage(&k1, 0.5 * dt);
    let k2 = rhs_values([&s2[0], &s2[1]], model, grid)?;
    let s3 = stage(&k2, 0.5 * dt);
    let k3 = rhs_values([&s3[0], &s3[1]], model, grid)?;
    let s4 = stage(&k3, dt);
    let k4 = rhs_values([&s4[0], &s4[1]], model, grid)?;
    let h = dt / 6.0;
    Ok([0, 1].map(|j| {
        (0..base[j].len())
            .map(|i| base[j][i] + h * (k1[j][i] + 2.0 * (k2[j][i] + k3[j][i]) + k4[j][i]))
            .collect()
    }))
}

fn implicit_euler(s: &HomogeneousState, model: &MixtureModel, dt: f64) -> Result<[Vec<f64>; 2]> {
    let grid = s.grid();
    let old = s.moments(model.masses())?;
    let (new1, new2) = implicit_relaxation(&old[0], &old[1], model, dt)?;
    let t = targets(&[new1, new2], model, grid)?;
    let w = weights(&t.rates, [old[0].density, old[1].density]);
    Ok([0, 1].map(|k| {
        let (intra, inter) = w[k];
        let mut out = s.f[k].values().to_vec();
        t.own[k].add_scaled(dt * intra, &mut out);
        t.mixed[k].add_scaled(dt * inter, &mut out);
        let denom = 1.0 + dt * (intra + inter);
        out.iter_mut().for_each(|v| *v /= denom);
        out
    }))
}

/// Advances the state by one time step.
pub fn step(s: &HomogeneousState, model: &MixtureModel, dt: f64, scheme: Scheme) -> Result<HomogeneousState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(BgkError::StepSize { dt, reason: "time step must be positive".into() });
    }
    let values = match scheme {
        Scheme::Rk4 => {
            check_rk4_step(s, model, dt)?;
            rk4(s, model, dt)?
        }
        Scheme::ImplicitEuler => implicit_euler(s, model, dt)?,
    };
    let grid = s.grid().clone();
    let [a, b] = values;
    let f1 = DiscreteDistribution::new(grid.clone(), a)
        .map_err(|e| BgkError::StepSize { dt, reason: format!("species 1 lost positivity: {e}") })?;
    let f2 = DiscreteDistribution::new(grid, b)
        .map_err(|e| BgkError::StepSize { dt, reason: format!("species 2 lost positivity: {e}") })?;
    Ok(HomogeneousState { f: [f1, f2], time: s.time + dt })
}

/// Species moments evolved by the macroscopic relaxation equations alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub mom: [Moments; 2],
    pub time: f64,
}

impl MomentState {
    pub fn new(mom1: Moments, mom2: Moments) -> Self {
        Self { mom: [mom1, mom2], time: 0.0 }
    }

    /// One classical RK4 step of the moment equations.
    pub fn rk4_step(&self, model: &MixtureModel, dt: f64) -> Result<Self> {
        let shift = |base: &[Moments; 2], r: &crate::model::MomentRates, c: f64| -> [Moments; 2] {
            let mut out = *base;
            for i in 0..3 {
                out[0].velocity[i] += c * r.du1[i];
                out[1].velocity[i] += c * r.du2[i];
            }
            out[0].temperature += c * r.dt1;
            out[1].temperature += c * r.dt2;
            out
        };
        let m = &self.mom;
        let k1 = moment_rhs(&m[0], &m[1], model)?;
        let s2 = shift(m, &k1, 0.5 * dt);
        let k2 = moment_rhs(&s2[0], &s2[1], model)?;
        let s3 = shift(m, &k2, 0.5 * dt);
        let k3 = moment_rhs(&s3[0], &s3[1], model)?;
        let s4 = shift(m, &k3, dt);
        let k4 = moment_rhs(&s4[0], &s4[1], model)?;
        let mut out = *m;
        let h = dt / 6.0;
        for i in 0..3 {
            out[0].velocity[i] += h * (k1.du1[i] + 2.0 * (k2.du1[i] + k3.du1[i]) + k4.du1[i]);
            out[1].velocity[i] += h * (k1.du2[i] + 2.0 * (k2.du2[i] + k3.du2[i]) + k4.du2[i]);
        }
        out[0].temperature += h * (k1.dt1 + 2.0 * (k2.dt1 + k3.dt1) + k4.dt1);
        out[1].temperature += h * (k1.dt2 + 2.0 * (k2.dt2 + k3.dt2) + k4.dt2);
        Ok(Self { mom: out, time: self.time + dt })
    }

    pub fn implicit_step(&self, model: &MixtureModel, dt: f64) -> Result<Self> {
        let (a, b) = implicit_relaxation(&self.mom[0], &self.mom[1], model, dt)?;
        Ok(Self { mom: [a, b], time: self.time + dt })
    }
}

/// Velocity profile of an initial distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialShape {
    Maxwellian,
    /// Equal-weight pair of Maxwellians at `u ± offset e_x`, with the
    /// temperature lowered so that the pair has the prescribed moments.
    Bimodal { offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub moments: Moments,
    pub shape: InitialShape,
}

impl InitialCondition {
    pub fn maxwellian(moments: Moments) -> Self {
        Self { moments, shape: InitialShape::Maxwellian }
    }

    pub fn build(&self, grid: &Arc<VelocityGrid>, mass: f64) -> Result<DiscreteDistribution> {
        match self.shape {
            InitialShape::Maxwellian => project_maxwellian(&self.moments, grid, mass),
            InitialShape::Bimodal { offset } => {
                let m = &self.moments;
                let t = m.temperature - mass * offset * offset / 3.0;
                if !(t > 0.0) {
                    return Err(BgkError::InvalidInput(format!(
                        "bimodal offset {offset} leaves no thermal energy at temperature {}",
                        m.temperature
                    )));
                }
                let half = |sign: f64| {
                    let mut u = m.velocity;
                    u[0] += sign * offset;
                    project_maxwellian(&Moments::new(0.5 * m.density, u, t), grid, mass)
                };
                half(1.0)?.sum(&half(-1.0)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousConfig {
    pub model: MixtureModel,
    pub initial: [InitialCondition; 2],
    pub grid: Arc<VelocityGrid>,
    pub dt: f64,
    pub t_end: f64,
    /// Spacing of the output times `0, dt_out, 2 dt_out, ...`.
    pub output_interval: f64,
    pub scheme: Scheme,
    pub tolerances: HomogeneousTolerances,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTolerances {
    pub ledger: LedgerTolerances,
    /// Relative error allowed against the closed-form relaxation laws.
    pub closed_form: f64,
}

impl Default for HomogeneousTolerances {
    fn default() -> Self {
        Self { ledger: LedgerTolerances::HOMOGENEOUS, closed_form: 1e-4 }
    }
}

/// Closed-form values are compared only where they exceed this magnitude.
pub const CLOSED_FORM_FLOOR: f64 = 1e-8;

/// Default velocity grid: 32 nodes per axis covering every initial state.
pub fn default_grid(model: &MixtureModel, initial: &[InitialCondition; 2], nodes: usize) -> Result<VelocityGrid> {
    let [m1, m2] = model.masses();
    VelocityGrid::sized_for(&[(initial[0].moments, m1), (initial[1].moments, m2)], nodes, 3)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub moments: [Moments; 2],
    pub totals: Totals,
    pub l1_to_maxwellian: [f64; 2],
    pub du_sq: f64,
    pub du_sq_closed: f64,
    pub dtemp: f64,
    /// Temperature gap from the reference constants.
    pub dtemp_closed: f64,
    /// Temperature gap from the model-consistent constants.
    pub dtemp_closed_model: f64,
    pub l1_bound: f64,
}

pub const CSV_HEADER: [&str; 28] = [
    "time", "n1", "u1x", "u1y", "u1z", "T1", "n2", "u2x", "u2y", "u2z", "T2", "H_total", "L1_dist_1", "L1_dist_2",
    "total_px", "total_py", "total_pz", "total_E", "mass_1", "mass_2", "du_sq", "du_sq_closed", "dT", "dT_closed",
    "dT_closed_model", "L1_bound", "rel_err_du_sq", "rel_err_dT",
];

impl Sample {
    pub fn row(&self) -> Vec<f64> {
        let m = &self.moments;
        let t = &self.totals;
        vec![
            self.time,
            m[0].density,
            m[0].velocity[0],
            m[0].velocity[1],
            m[0].velocity[2],
            m[0].temperature,
            m[1].density,
            m[1].velocity[0],
            m[1].velocity[1],
            m[1].velocity[2],
            m[1].temperature,
            t.entropy,
            self.l1_to_maxwellian[0],
            self.l1_to_maxwellian[1],
            t.momentum[0],
            t.momentum[1],
            t.momentum[2],
            t.energy,
            t.mass[0],
            t.mass[1],
            self.du_sq,
            self.du_sq_closed,
            self.dtemp,
            self.dtemp_closed,
            self.dtemp_closed_model,
            self.l1_bound,
            relative_error(self.du_sq, self.du_sq_closed),
            relative_error(self.dtemp, self.dtemp_closed),
        ]
    }
}

/// `|a - b| / |b|`, or zero where `|b|` is below [`CLOSED_FORM_FLOOR`].
pub fn relative_error(a: f64, b: f64) -> f64 {
    if b.abs() > CLOSED_FORM_FLOOR {
        (a - b).abs() / b.abs()
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct HomogeneousRun {
    pub samples: Vec<Sample>,
    pub ledger: ConservationLedger,
    pub coefficients: RelaxationCoefficients,
    /// `[H(f1|M1) + H(f2|M2)]^{1/2}` at `t = 0`.
    pub initial_entropy_gap: f64,
    pub final_state: HomogeneousState,
}

impl HomogeneousRun {
    pub fn max_error_du_sq(&self) -> f64 {
        self.samples.iter().map(|s| relative_error(s.du_sq, s.du_sq_closed)).fold(0.0, f64::max)
    }

    pub fn max_error_dtemp(&self) -> f64 {
        self.samples.iter().map(|s| relative_error(s.dtemp, s.dtemp_closed)).fold(0.0, f64::max)
    }

    pub fn max_error_dtemp_model(&self) -> f64 {
        self.samples.iter().map(|s| relative_error(s.dtemp, s.dtemp_closed_model)).fold(0.0, f64::max)
    }

    /// Largest `L1 distance - bound` over samples and species (`<= 0` when
    /// the decay bound holds everywhere).
    pub fn max_bound_excess(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.l1_to_maxwellian[0].max(s.l1_to_maxwellian[1]) - s.l1_bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Conservation and closed-form checks. Conservation, entropy and the
    /// model-consistent closed forms are hard; the reference temperature
    /// constants and the distribution decay bound are reported only.
    pub fn checks(&self, tol: &HomogeneousTolerances) -> Vec<Check> {
        let mut checks = self.ledger.checks(&tol.ledger);
        checks.push(Check::at_most("velocity gap vs closed form (rel)", self.max_error_du_sq(), tol.closed_form));
        checks.push(Check::at_most(
            "temperature gap vs closed form, model constants (rel)",
            self.max_error_dtemp_model(),
            tol.closed_form,
        ));
        checks.push(
            Check::at_most(
                "temperature gap vs closed form, reference constants (rel)",
                self.max_error_dtemp(),
                tol.closed_form,
            )
            .soft(),
        );
        checks.push(Check::at_most("L1 distance above decay bound", self.max_bound_excess().max(0.0), 0.0).soft());
        checks
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_csv(w, &CSV_HEADER, self.samples.iter().map(Sample::row))
    }
}

fn momentum_scale(mom: &[Moments; 2], masses: [f64; 2]) -> f64 {
    (0..2)
        .map(|k| {
            let m = &mom[k];
            masses[k] * m.density * (norm_sq(&m.velocity).sqrt() + (m.temperature / masses[k]).sqrt())
        })
        .sum()
}

fn distance_to_own(f: &DiscreteDistribution, mom: &Moments, mass: f64) -> Result<(DiscreteDistribution, f64)> {
    let m = project_maxwellian(mom, f.grid(), mass)?;
    let d = l1_distance(f, &m)?;
    Ok((m, d))
}

/// Integrates the homogeneous problem and samples it at the output times.
pub fn run_homogeneous(cfg: &HomogeneousConfig) -> Result<HomogeneousRun> {
    let model = &cfg.model;
    model.ensure_admissible()?;
    if !(cfg.dt > 0.0 && cfg.t_end >= 0.0 && cfg.output_interval > 0.0) {
        return Err(BgkError::InvalidInput("dt and output interval must be positive, t_end nonnegative".into()));
    }
    let masses = model.masses();
    let f1 = cfg.initial[0].build(&cfg.grid, masses[0])?;
    let f2 = cfg.initial[1].build(&cfg.grid, masses[1])?;
    let mut state = HomogeneousState::new(f1, f2, 0.0)?;

    let mom0 = state.moments(masses)?;
    let rates = model.rates(mom0[0].density, mom0[1].density)?;
    let ip = model.interaction_at(mom0[0].density, mom0[1].density)?;
    let sp1 = SpeciesParams { nu_intra: rates.nu11, ..model.species[0] };
    let sp2 = SpeciesParams { nu_intra: rates.nu22, ..model.species[1] };
    let rc = relaxation_coefficients(&ip, &sp1, &sp2, mom0[0].density, mom0[1].density);
    let rc_model = rc.with_model_c2();
    let du0_sq = norm_sq(&sub(&mom0[0].velocity, &mom0[1].velocity));
    let dt0 = mom0[0].temperature - mom0[1].temperature;

    let mut h0 = 0.0;
    for k in 0..2 {
        let m = project_maxwellian(&mom0[k], &cfg.grid, masses[k])?;
        h0 += relative_entropy(&state.f[k], &m)?;
    }
    let initial_entropy_gap = h0.max(0.0).sqrt();

    let sample = |state: &HomogeneousState, totals: Totals| -> Result<Sample> {
        let mom = state.moments(masses)?;
        let t = state.time;
        let (_, l1a) = distance_to_own(&state.f[0], &mom[0], masses[0])?;
        let (_, l1b) = distance_to_own(&state.f[1], &mom[1], masses[1])?;
        Ok(Sample {
            time: t,
            moments: mom,
            totals,
            l1_to_maxwellian: [l1a, l1b],
            du_sq: norm_sq(&sub(&mom[0].velocity, &mom[1].velocity)),
            du_sq_closed: closed_form_velocity_diff(t, du0_sq, &rc),
            dtemp: mom[0].temperature - mom[1].temperature,
            dtemp_closed: closed_form_temperature_diff(t, dt0, du0_sq, &rc).value,
            dtemp_closed_model: closed_form_temperature_diff(t, dt0, du0_sq, &rc_model).value,
            l1_bound: entropy_decay_bound(t, initial_entropy_gap, &rc),
        })
    };

    let totals0 = state.totals(masses)?;
    let mut ledger = ConservationLedger::new(0.0, totals0, momentum_scale(&mom0, masses));
    let mut samples = vec![sample(&state, totals0)?];

    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut next_output = 1usize;
    for n in 1..=steps {
        state = step(&state, model, cfg.dt, cfg.scheme)?;
        // Accumulate time from the step count to avoid drift.
        state.time = n as f64 * cfg.dt;
        let totals = state.totals(masses)?;
        ledger.update(totals);
        let target = next_output as f64 * cfg.output_interval;
        // Nearest step to the output time; the actual time is recorded.
        if (target / cfg.dt).round() as usize == n {
            ledger.record(state.time);
            samples.push(sample(&state, totals)?);
            while ((next_output as f64 * cfg.output_interval) / cfg.dt).round() as usize <= n {
                next_output += 1;
            }
        }
    }

    Ok(HomogeneousRun { samples, ledger, coefficients: rc, initial_entropy_gap, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::discrete_moments;
    use crate::model::{hamel_preset, mixture_equilibrium, InteractionParams};

    fn hamel_model(nu: f64) -> MixtureModel {
        let sp = SpeciesParams::new(1.0, nu).unwrap();
        MixtureModel::new(sp, sp, hamel_preset(&sp, &sp, nu))
    }

    fn generic_model() -> MixtureModel {
        let sp1 = SpeciesParams::new(1.0, 0.5).unwrap();
        let sp2 = SpeciesParams::new(2.0, 0.8).unwrap();
        MixtureModel::new(sp1, sp2, InteractionParams { nu12: 1.2, epsilon: 0.7, delta: 0.3, alpha: 0.6, gamma: 0.05 })
    }

    fn grid(n: usize) -> Arc<VelocityGrid> {
        Arc::new(VelocityGrid::cube(n, -7.0, 7.0).unwrap())
    }

    fn state(model: &MixtureModel, g: &Arc<VelocityGrid>, a: Moments, b: Moments, offset: f64) -> HomogeneousState {
        let [m1, m2] = model.masses();
        let ic1 = InitialCondition { moments: a, shape: InitialShape::Bimodal { offset } };
        HomogeneousState::new(ic1.build(g, m1).unwrap(), InitialCondition::maxwellian(b).build(g, m2).unwrap(), 0.0)
            .unwrap()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = generic_model();
        let g = grid(16);
        let eq = Moments::new(1.0, [0.3, 0.0, -0.2], 1.1);
        let s = state(&model, &g, eq, Moments { density: 0.6, ..eq }, 0.0);
        let rhs = rhs_homogeneous(&s, &model).unwrap();
        assert!(max_abs(&rhs[0]) < 1e-13 && max_abs(&rhs[1]) < 1e-13);
        for scheme in [Scheme::Rk4, Scheme::ImplicitEuler] {
            let next = step(&s, &model, 0.1, scheme).unwrap();
            for k in 0..2 {
                let d = l1_distance(&next.f[k], &s.f[k]).unwrap();
                assert!(d < 1e-12, "{scheme:?}: {d}");
            }
        }
    }

    #[test]
    fn rhs_conserves_mass_momentum_energy() {
        let model = generic_model();
        let g = grid(20);
        let s = state(&model, &g, Moments::new(1.1, [0.4, 0.1, 0.0], 1.3), Moments::new(0.7, [-0.2, 0.0, 0.3], 0.8), 0.5);
        let rhs = rhs_homogeneous(&s, &model).unwrap();
        let [m1, m2] = model.masses();
        let d = [0, 1].map(|k| raw_moments(&DiscreteDistribution::from_raw(g.clone(), rhs[k].clone())).unwrap());
        assert!(d[0].density.abs() < 1e-13 && d[1].density.abs() < 1e-13);
        for i in 0..3 {
            assert!((m1 * d[0].flux[i] + m2 * d[1].flux[i]).abs() < 1e-13);
        }
        assert!((m1 * d[0].second + m2 * d[1].second).abs() < 1e-12);
        // Individual exchanges are far from zero.
        assert!(d[0].flux[0].abs() > 1e-2);
    }

    #[test]
    fn rk4_stability_limit() {
        let model = hamel_model(100.0);
        let g = grid(8);
        let m = Moments::new(1.0, [0.0; 3], 1.0);
        let s = state(&model, &g, m, m, 0.0);
        assert!(matches!(step(&s, &model, 0.05, Scheme::Rk4), Err(BgkError::StepSize { .. })));
        assert!(step(&s, &model, 0.009, Scheme::Rk4).is_ok());
        assert!(step(&s, &model, 0.05, Scheme::ImplicitEuler).is_ok());
    }

    fn run(model: MixtureModel, scheme: Scheme, dt: f64, t_end: f64, n: usize) -> HomogeneousRun {
        let initial = [
            InitialCondition { moments: Moments::new(1.0, [0.6, 0.0, 0.0], 1.2), shape: InitialShape::Bimodal { offset: 0.4 } },
            InitialCondition::maxwellian(Moments::new(0.8, [-0.2, 0.0, 0.0], 0.9)),
        ];
        let grid = Arc::new(default_grid(&model, &initial, n).unwrap());
        let cfg = HomogeneousConfig {
            model,
            initial,
            grid,
            dt,
            t_end,
            output_interval: 0.1,
            scheme,
            tolerances: HomogeneousTolerances::default(),
        };
        run_homogeneous(&cfg).unwrap()
    }

    #[test]
    fn run_conserves_and_dissipates() {
        for scheme in [Scheme::Rk4, Scheme::ImplicitEuler] {
            let r = run(generic_model(), scheme, 0.01, 1.0, 16);
            assert_eq!(r.samples.len(), 11);
            assert!((r.samples[10].time - 1.0).abs() < 1e-12);
            let checks = r.ledger.checks(&LedgerTolerances::HOMOGENEOUS);
            assert!(checks.iter().all(|c| c.passed), "{scheme:?}: {checks:?}");
            let h: Vec<f64> = r.samples.iter().map(|s| s.totals.entropy).collect();
            assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        }
    }

    #[test]
    fn kinetic_moments_follow_the_model_closed_forms() {
        // Generic parameters: the kinetic run must reproduce the
        // model-consistent constants, including C2.
        let r = run(generic_model(), Scheme::Rk4, 0.005, 2.0, 16);
        assert!(r.max_error_du_sq() < 1e-8, "{}", r.max_error_du_sq());
        assert!(r.max_error_dtemp_model() < 1e-7, "{}", r.max_error_dtemp_model());
    }

    #[test]
    fn moments_follow_the_moment_equations() {
        let model = generic_model();
        let r = run(model, Scheme::Rk4, 0.01, 0.5, 16);
        let s0 = &r.samples[0];
        let mut ms = MomentState::new(s0.moments[0], s0.moments[1]);
        for _ in 0..50 {
            ms = ms.rk4_step(&model, 0.01).unwrap();
        }
        let last = r.samples.last().unwrap();
        for k in 0..2 {
            assert!((ms.mom[k].temperature - last.moments[k].temperature).abs() < 1e-10);
            assert!((ms.mom[k].velocity[0] - last.moments[k].velocity[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_difference_residual_is_second_order() {
        // Centred differences of kinetic RK4 moments against the moment
        // equations evaluated at the middle sample.
        let model = generic_model();
        let g = grid(14);
        let s0 = state(&model, &g, Moments::new(1.0, [0.6, 0.0, 0.0], 1.2), Moments::new(0.8, [-0.2, 0.0, 0.0], 0.9), 0.4);
        let masses = model.masses();
        let residual = |h: f64| {
            let s1 = step(&s0, &model, h, Scheme::Rk4).unwrap();
            let s2 = step(&s1, &model, h, Scheme::Rk4).unwrap();
            let [a, b, c] = [&s0, &s1, &s2].map(|s| s.moments(masses).unwrap());
            let rhs = moment_rhs(&b[0], &b[1], &model).unwrap();
            let r_t = (c[0].temperature - a[0].temperature) / (2.0 * h) - rhs.dt1;
            let r_u = (c[1].velocity[0] - a[1].velocity[0]) / (2.0 * h) - rhs.du2[0];
            r_t.abs().max(r_u.abs())
        };
        let (r1, r2) = (residual(0.04), residual(0.02));
        let order = (r1 / r2).log2();
        assert!(order > 1.8, "residuals {r1:e} {r2:e}, order {order}");
    }

    #[test]
    fn schemes_agree_at_first_order() {
        let model = generic_model();
        let reference = run(model, Scheme::Rk4, 0.01, 0.5, 12);
        let t_ref = reference.samples.last().unwrap().moments[0].temperature;
        let err = |dt: f64| {
            let r = run(model, Scheme::ImplicitEuler, dt, 0.5, 12);
            (r.samples.last().unwrap().moments[0].temperature - t_ref).abs()
        };
        let (e1, e2) = (err(0.05), err(0.025));
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "observed order {order}");
    }

    #[test]
    fn stiff_implicit_step_approaches_mixture_equilibrium() {
        let model = hamel_model(1.0);
        let g = grid(20);
        let s = state(&model, &g, Moments::new(1.0, [0.5, 0.0, 0.0], 1.0), Moments::new(1.0, [-0.5, 0.0, 0.0], 1.0), 0.5);
        let masses = model.masses();
        let mom = s.moments(masses).unwrap();
        let (e1, e2) = mixture_equilibrium(&mom[0], &mom[1], masses);
        let eq = [project_maxwellian(&e1, &g, 1.0).unwrap(), project_maxwellian(&e2, &g, 1.0).unwrap()];
        let dev = |st: &HomogeneousState| (0..2).map(|k| l1_distance(&st.f[k], &eq[k]).unwrap()).sum::<f64>();
        let d0 = dev(&s);
        // Total relaxation rate nu n = 2 per species; the deviation left
        // after k steps is O(stiffness^-k).
        for stiffness in [1e2, 1e3, 1e4] {
            let dt = stiffness / 2.0;
            let one = step(&s, &model, dt, Scheme::ImplicitEuler).unwrap();
            let two = step(&one, &model, dt, Scheme::ImplicitEuler).unwrap();
            assert!(dev(&one) <= 2.0 * d0 / stiffness, "{stiffness}: {} vs {d0}", dev(&one));
            assert!(dev(&two) <= 10.0 * d0 / (stiffness * stiffness), "{stiffness}: {}", dev(&two));
            let t0 = s.totals(masses).unwrap();
            let t1 = two.totals(masses).unwrap();
            assert!((t1.energy - t0.energy).abs() < 1e-12 * t0.energy);
            assert!((t1.momentum[0] - t0.momentum[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn bimodal_initial_data_has_prescribed_moments() {
        let g = grid(24);
        let target = Moments::new(1.3, [0.2, -0.1, 0.0], 1.1);
        let ic = InitialCondition { moments: target, shape: InitialShape::Bimodal { offset: 0.6 } };
        let f = ic.build(&g, 1.5).unwrap();
        let m = discrete_moments(&f, 1.5).unwrap();
        assert!((m.density - 1.3).abs() < 1e-12);
        assert!((m.velocity[0] - 0.2).abs() < 1e-12);
        assert!((m.temperature - 1.1).abs() < 1e-12);
        let too_far = InitialCondition { moments: target, shape: InitialShape::Bimodal { offset: 2.0 } };
        assert!(too_far.build(&g, 1.5).is_err());
    }
}
