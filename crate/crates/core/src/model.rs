//! Closed-form algebra of the two-species BGK mixture model.
//!
//! Everything here is a pure function of its inputs: admissibility checks
//! for the free interaction parameters, the mixture-Maxwellian closure
//! (`n12, u12, T12` and `n21, u21, T21`), the macroscopic exchange terms,
//! parameter presets and rate matching, and the analytic relaxation laws
//! for the space-homogeneous problem.
//!
//! Temperatures carry Boltzmann's constant (`T` means `k_B T`).

use std::fmt;

use crate::error::{BgkError, Result};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm_sq(a: &Vec3) -> f64 {
    dot(a, a)
}

/// Mass and intra-species collision frequency (per density) of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParams {
    pub mass: f64,
    pub nu_intra: f64,
}

impl SpeciesParams {
    pub fn new(mass: f64, nu_intra: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(BgkError::InvalidInput(format!("species mass must be positive, got {mass}")));
        }
        if !(nu_intra >= 0.0 && nu_intra.is_finite()) {
            return Err(BgkError::InvalidInput(format!(
                "intra-species collision frequency must be nonnegative, got {nu_intra}"
            )));
        }
        Ok(Self { mass, nu_intra })
    }
}

/// The free parameters of the inter-species relaxation.
///
/// `nu12 = epsilon * nu21`; `delta` weights the mixture velocity, `alpha`
/// the mixture temperature and `gamma` the frictional heating term.
/// Construction does not check admissibility, use [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionParams {
    pub nu12: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl InteractionParams {
    pub fn nu21(&self) -> f64 {
        self.nu12 / self.epsilon
    }
}

/// Density, mean velocity and temperature of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub density: f64,
    pub velocity: Vec3,
    pub temperature: f64,
}

impl Moments {
    pub fn new(density: f64, velocity: Vec3, temperature: f64) -> Self {
        Self { density, velocity, temperature }
    }

    /// Zero density; velocity and temperature carry no meaning.
    pub fn vacuum() -> Self {
        Self { density: 0.0, velocity: [f64::NAN; 3], temperature: f64::NAN }
    }

    pub fn is_vacuum(&self) -> bool {
        self.density == 0.0
    }

    /// `n (3 T / m + |u|^2)`, the discrete second moment `sum w |v|^2 f`.
    pub fn second_moment(&self, mass: f64) -> f64 {
        self.density * (3.0 * self.temperature / mass + norm_sq(&self.velocity))
    }

    /// Total (kinetic plus thermal) energy density `3/2 n T + m/2 n |u|^2`.
    pub fn energy(&self, mass: f64) -> f64 {
        1.5 * self.density * self.temperature + 0.5 * mass * self.density * norm_sq(&self.velocity)
    }

    fn check_positive(&self, label: &str) -> Result<()> {
        if !(self.density > 0.0) {
            return Err(BgkError::Degenerate(format!("{label}: density {} is not positive", self.density)));
        }
        if !(self.temperature > 0.0) {
            return Err(BgkError::Degenerate(format!(
                "{label}: temperature {} is not positive",
                self.temperature
            )));
        }
        if self.velocity.iter().any(|u| !u.is_finite()) {
            return Err(BgkError::Degenerate(format!("{label}: velocity is not finite")));
        }
        Ok(())
    }
}

/// Parameters of the two mixture Maxwellians `M12` and `M21`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureMoments {
    pub m12: Moments,
    pub m21: Moments,
}

/// Constraint families on the interaction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `0 < epsilon <= 1`.
    FrequencyRatio,
    /// `nu12 > 0`.
    PositiveFrequency,
    /// `0 <= alpha <= 1`.
    TemperatureWeight,
    /// `(eps m1/m2 - 1)/(1 + eps m1/m2) <= delta <= 1`.
    VelocityWeight,
    /// `0 <= gamma <= m1/3 (1 - delta) [(1 + eps m1/m2) delta + 1 - eps m1/m2]`.
    HeatingBound,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::FrequencyRatio => "frequency ratio: 0 < epsilon <= 1",
            Constraint::PositiveFrequency => "interspecies frequency: nu12 > 0",
            Constraint::TemperatureWeight => "temperature weight: 0 <= alpha <= 1",
            Constraint::VelocityWeight => {
                "velocity weight: (eps m1/m2 - 1)/(1 + eps m1/m2) <= delta <= 1"
            }
            Constraint::HeatingBound => {
                "heating bound: 0 <= gamma <= m1/3 (1-delta)[(1 + eps m1/m2) delta + 1 - eps m1/m2]"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    /// Distance by which the inequality is missed (always positive).
    pub margin: f64,
    pub message: String,
}

/// Violated parameter constraints; empty when the parameters are admissible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, constraint: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }

    fn push(&mut self, constraint: Constraint, margin: f64, message: String) {
        self.violations.push(Violation { constraint, margin, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("admissible");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "violates {} (margin {:.6e}): {}", v.constraint, v.margin, v.message)?;
        }
        Ok(())
    }
}

/// Upper bound on `gamma` that keeps `T21` positive.
pub fn gamma_upper_bound(ip: &InteractionParams, sp1: &SpeciesParams, sp2: &SpeciesParams) -> f64 {
    let r = ip.epsilon * sp1.mass / sp2.mass;
    sp1.mass / 3.0 * (1.0 - ip.delta) * ((1.0 + r) * ip.delta + 1.0 - r)
}

/// Lower bound on `delta`.
pub fn delta_lower_bound(ip: &InteractionParams, sp1: &SpeciesParams, sp2: &SpeciesParams) -> f64 {
    let r = ip.epsilon * sp1.mass / sp2.mass;
    (r - 1.0) / (1.0 + r)
}

/// Checks every admissibility inequality and reports the ones that fail.
pub fn validate_params(ip: &InteractionParams, sp1: &SpeciesParams, sp2: &SpeciesParams) -> ValidationReport {
    let mut report = ValidationReport::default();

    if !(ip.nu12 > 0.0) {
        report.push(Constraint::PositiveFrequency, -ip.nu12, format!("nu12 = {} must be positive", ip.nu12));
    }
    if !(ip.epsilon > 0.0) {
        report.push(
            Constraint::FrequencyRatio,
            -ip.epsilon,
            format!("epsilon = {} must be positive", ip.epsilon),
        );
    } else if ip.epsilon > 1.0 {
        report.push(
            Constraint::FrequencyRatio,
            ip.epsilon - 1.0,
            format!(
                "epsilon = {} exceeds 1; swap the species labels and use epsilon = {}",
                ip.epsilon,
                1.0 / ip.epsilon
            ),
        );
    }
    if ip.alpha < 0.0 {
        report.push(Constraint::TemperatureWeight, -ip.alpha, format!("alpha = {} is negative", ip.alpha));
    } else if ip.alpha > 1.0 {
        report.push(Constraint::TemperatureWeight, ip.alpha - 1.0, format!("alpha = {} exceeds 1", ip.alpha));
    }

    let lower = delta_lower_bound(ip, sp1, sp2);
    if ip.delta < lower {
        report.push(
            Constraint::VelocityWeight,
            lower - ip.delta,
            format!("delta = {} is below the lower bound {lower}", ip.delta),
        );
    } else if ip.delta > 1.0 {
        report.push(Constraint::VelocityWeight, ip.delta - 1.0, format!("delta = {} exceeds 1", ip.delta));
    }

    let upper = gamma_upper_bound(ip, sp1, sp2);
    if ip.gamma < 0.0 {
        report.push(Constraint::HeatingBound, -ip.gamma, format!("gamma = {} is negative", ip.gamma));
    } else if ip.gamma > upper {
        report.push(
            Constraint::HeatingBound,
            ip.gamma - upper,
            format!("gamma = {} exceeds the upper bound {upper}", ip.gamma),
        );
    }
    report
}

/// Coefficient of `|u1 - u2|^2` in `T21`.
fn t21_heating(ip: &InteractionParams, sp1: &SpeciesParams, sp2: &SpeciesParams) -> f64 {
    let (eps, d, m1) = (ip.epsilon, ip.delta, sp1.mass);
    eps * m1 * (1.0 - d) * (m1 / sp2.mass * eps * (d - 1.0) + d + 1.0) / 3.0 - eps * ip.gamma
}

/// Mixture velocities `(u12, u21)` for given species velocities.
fn mixture_velocities(u1: &Vec3, u2: &Vec3, ip: &InteractionParams, sp1: &SpeciesParams, sp2: &SpeciesParams) -> (Vec3, Vec3) {
    let d = ip.delta;
    let w = sp1.mass / sp2.mass * ip.epsilon * (1.0 - d);
    let mut u12 = [0.0; 3];
    let mut u21 = [0.0; 3];
    for i in 0..3 {
        u12[i] = d * u1[i] + (1.0 - d) * u2[i];
        u21[i] = u2[i] - w * (u2[i] - u1[i]);
    }
    (u12, u21)
}

fn mixture_temperatures(
    t1: f64,
    t2: f64,
    du_sq: f64,
    ip: &InteractionParams,
    sp1: &SpeciesParams,
    sp2: &SpeciesParams,
) -> (f64, f64) {
    let t12 = ip.alpha * t1 + (1.0 - ip.alpha) * t2 + ip.gamma * du_sq;
    let w = ip.epsilon * (1.0 - ip.alpha);
    let t21 = t21_heating(ip, sp1, sp2) * du_sq + w * t1 + (1.0 - w) * t2;
    (t12, t21)
}

/// Parameters of the mixture Maxwellians.
///
/// Admissibility of `ip` is a precondition; degenerate species moments
/// (zero density, nonpositive temperature) are rejected.
pub fn mixture_moments(
    mom1: &Moments,
    mom2: &Moments,
    ip: &InteractionParams,
    sp1: &SpeciesParams,
    sp2: &SpeciesParams,
) -> Result<MixtureMoments> {
    mom1.check_positive("species 1")?;
    mom2.check_positive("species 2")?;
    let (u12, u21) = mixture_velocities(&mom1.velocity, &mom2.velocity, ip, sp1, sp2);
    let du_sq = norm_sq(&sub(&mom1.velocity, &mom2.velocity));
    let (t12, t21) = mixture_temperatures(mom1.temperature, mom2.temperature, du_sq, ip, sp1, sp2);
    if !(t12 > 0.0 && t21 > 0.0) {
        return Err(BgkError::Degenerate(format!(
            "mixture temperatures T12 = {t12}, T21 = {t21} are not positive"
        )));
    }
    Ok(MixtureMoments {
        m12: Moments::new(mom1.density, u12, t12),
        m21: Moments::new(mom2.density, u21, t21),
    })
}

/// Momentum and energy exchange of species 1 due to collisions with
/// species 2. The exchange of species 2 is the negation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub momentum: Vec3,
    pub energy: f64,
}

impl Exchange {
    pub fn reversed(&self) -> Self {
        Exchange { momentum: self.momentum.map(|p| -p), energy: -self.energy }
    }
}

/// Velocity moments (`m1 v`, `m1 |v|^2 / 2`) of `nu12 n2 (M12 - f1)`.
pub fn exchange_terms(
    mom1: &Moments,
    mom2: &Moments,
    ip: &InteractionParams,
    sp1: &SpeciesParams,
    _sp2: &SpeciesParams,
) -> Exchange {
    let (n1, n2, m1, d) = (mom1.density, mom2.density, sp1.mass, ip.delta);
    let (u1, u2) = (&mom1.velocity, &mom2.velocity);
    let rate = ip.nu12 * n1 * n2;
    let mut momentum = [0.0; 3];
    let mut kinetic = 0.0;
    for i in 0..3 {
        let du = u2[i] - u1[i];
        momentum[i] = m1 * rate * (1.0 - d) * du;
        kinetic += du * ((1.0 + d) * u1[i] + (1.0 - d) * u2[i]);
    }
    let du_sq = norm_sq(&sub(u1, u2));
    // ip.epsilon * ip.nu21() == nu12
    let energy = rate
        * (0.5 * m1 * (1.0 - d) * kinetic
            + 1.5 * ip.gamma * du_sq
            + 1.5 * (1.0 - ip.alpha) * (mom2.temperature - mom1.temperature));
    Exchange { momentum, energy }
}

/// The Hamel model as a member of the admissible family.
pub fn hamel_preset(sp1: &SpeciesParams, sp2: &SpeciesParams, nu12: f64) -> InteractionParams {
    let (m1, m2) = (sp1.mass, sp2.mass);
    let total = m1 + m2;
    InteractionParams {
        nu12,
        epsilon: 1.0,
        delta: m1 / total,
        alpha: (m1 * m1 + m2 * m2) / (total * total),
        gamma: m1 * m2 / (total * total) * m2 / 3.0,
    }
}

/// Interaction parameters matched to given Boltzmann relaxation rates,
/// together with their admissibility report.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedRates {
    pub params: InteractionParams,
    pub report: ValidationReport,
}

/// Chooses `(delta, alpha, gamma)` so that both the velocity and the
/// temperature relaxation rates equal those produced by the energy
/// transfer coefficient `alpha12` of the Boltzmann operator.
///
/// The result is not guaranteed to be admissible; inspect `report`.
pub fn match_boltzmann_rates(
    alpha12: f64,
    nu12: f64,
    epsilon: f64,
    sp1: &SpeciesParams,
    sp2: &SpeciesParams,
    n1: f64,
    n2: f64,
) -> Result<MatchedRates> {
    for (name, value) in [("alpha12", alpha12), ("nu12", nu12), ("epsilon", epsilon), ("n1", n1), ("n2", n2)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(BgkError::InvalidInput(format!("{name} must be positive, got {value}")));
        }
    }
    let (m1, m2) = (sp1.mass, sp2.mass);
    let ratio = alpha12 / nu12;
    let delta = 1.0
        - ratio * (m1 + m2) / 2.0 * (m1 * n1 + m2 * n2) / (m1 * n1 * m2 * n2) / (n1 * m1 / m2 + n2);
    let alpha = 1.0 - ratio / (n2 * n1);
    let gamma = (ratio * (m2 * n2 - m1 * n1) / (n2 * n1) - m1 * n2 * (1.0 - delta).powi(2)
        + m1 * n1 * (1.0 - delta * delta))
        / (3.0 * (n1 + n2));
    let params = InteractionParams { nu12, epsilon, delta, alpha, gamma };
    let report = validate_params(&params, sp1, sp2);
    Ok(MatchedRates { params, report })
}

/// `nu_kj = 1/2 alpha_kj / (n_k n_j) (m_k + m_j)^2 / (m_k m_j)`.
pub fn collision_frequency_formula(alpha_kj: f64, n_k: f64, n_j: f64, m_k: f64, m_j: f64) -> Result<f64> {
    for (name, value) in [("alpha_kj", alpha_kj), ("n_k", n_k), ("n_j", n_j), ("m_k", m_k), ("m_j", m_j)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(BgkError::InvalidInput(format!("{name} must be positive, got {value}")));
        }
    }
    Ok(0.5 * alpha_kj / (n_k * n_j) * (m_k + m_j).powi(2) / (m_k * m_j))
}

/// Rate constants of the homogeneous relaxation laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationCoefficients {
    /// `d(u1 - u2)/dt = -rate_u (u1 - u2)`.
    pub rate_u: f64,
    pub c1: f64,
    /// `C2` of the reference closed form for the temperature gap.
    pub c2: f64,
    /// `C2` obtained from the moment equations of the model itself.
    pub c2_model: f64,
    pub c3: f64,
    pub c_entropy: f64,
}

impl RelaxationCoefficients {
    /// Copy with `c2` replaced by the model-consistent coefficient.
    pub fn with_model_c2(&self) -> Self {
        Self { c2: self.c2_model, ..*self }
    }
}

pub fn relaxation_coefficients(
    ip: &InteractionParams,
    sp1: &SpeciesParams,
    sp2: &SpeciesParams,
    n1: f64,
    n2: f64,
) -> RelaxationCoefficients {
    let (d, g, m1, m2, nu12) = (ip.delta, ip.gamma, sp1.mass, sp2.mass, ip.nu12);
    let rate_u = nu12 * (1.0 - d) * (n2 + m1 / m2 * n1);
    let c1 = (1.0 - ip.alpha) * nu12 * (n2 + n1);
    let c2 = nu12 * (n2 * ((1.0 - d).powi(2) + g / m1) - n1 * (1.0 - d * d - g / m1));
    let c2_model =
        nu12 * (n2 * (m1 / 3.0 * (1.0 - d).powi(2) + g) - n1 * (m1 / 3.0 * (1.0 - d * d) - g));
    let c3 = 2.0 * nu12 * (1.0 - d) * (n2 + m1 / m2 * n1);
    let c_entropy = (sp1.nu_intra * n1 + nu12 * n2).min(sp2.nu_intra * n2 + ip.nu21() * n1);
    RelaxationCoefficients { rate_u, c1, c2, c2_model, c3, c_entropy }
}

/// `|u1(t) - u2(t)|^2 = exp(-C3 t) |u1(0) - u2(0)|^2`.
pub fn closed_form_velocity_diff(t: f64, du0_sq: f64, rc: &RelaxationCoefficients) -> f64 {
    (-rc.c3 * t).exp() * du0_sq
}

/// Closed-form `T1(t) - T2(t)`; `limit_branch` marks evaluation through the
/// `C1 -> C3` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureDecay {
    pub value: f64,
    pub limit_branch: bool,
}

/// Relative width of the band around `C1 = C3` handled by the analytic limit.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

pub fn closed_form_temperature_diff(t: f64, dt0: f64, du0_sq: f64, rc: &RelaxationCoefficients) -> TemperatureDecay {
    let gap = rc.c1 - rc.c3;
    let scale = rc.c1.abs().max(rc.c3.abs()).max(1.0);
    let decay = (-rc.c1 * t).exp();
    if gap.abs() < SINGULAR_THRESHOLD * scale {
        TemperatureDecay { value: decay * (dt0 + rc.c2 * t * du0_sq), limit_branch: true }
    } else {
        let growth = (gap * t).exp_m1() / gap;
        TemperatureDecay { value: decay * (dt0 + rc.c2 * growth * du0_sq), limit_branch: false }
    }
}

/// Right side `4 exp(-C t / 2) H0` of the distribution decay bound, where
/// `h0` is the square root of the summed initial relative entropies.
pub fn entropy_decay_bound(t: f64, h0: f64, rc: &RelaxationCoefficients) -> f64 {
    4.0 * (-0.5 * rc.c_entropy * t).exp() * h0
}

/// How the collision frequencies depend on the local state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionFrequencies {
    /// `nu11`, `nu22` from the species, `nu12` from the interaction block.
    Constant,
    /// `nu_kj` from the density formula with energy transfer coefficients;
    /// `nu21 = nu12 / epsilon` keeps the model's frequency relation.
    Formula { alpha11: f64, alpha22: f64, alpha12: f64 },
}

/// Collision frequencies per density at a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub nu11: f64,
    pub nu22: f64,
    pub nu12: f64,
    pub nu21: f64,
}

impl Rates {
    /// Total relaxation rates `(nu11 n1 + nu12 n2, nu22 n2 + nu21 n1)`.
    pub fn totals(&self, n1: f64, n2: f64) -> (f64, f64) {
        (self.nu11 * n1 + self.nu12 * n2, self.nu22 * n2 + self.nu21 * n1)
    }
}

/// Species, interaction parameters and frequency law of one mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureModel {
    pub species: [SpeciesParams; 2],
    pub interaction: InteractionParams,
    pub frequencies: CollisionFrequencies,
}

impl MixtureModel {
    pub fn new(sp1: SpeciesParams, sp2: SpeciesParams, interaction: InteractionParams) -> Self {
        Self { species: [sp1, sp2], interaction, frequencies: CollisionFrequencies::Constant }
    }

    pub fn with_frequencies(mut self, frequencies: CollisionFrequencies) -> Self {
        self.frequencies = frequencies;
        self
    }

    pub fn masses(&self) -> [f64; 2] {
        [self.species[0].mass, self.species[1].mass]
    }

    pub fn validate(&self) -> ValidationReport {
        validate_params(&self.interaction, &self.species[0], &self.species[1])
    }

    /// Errors with the full report unless the parameters are admissible.
    pub fn ensure_admissible(&self) -> Result<()> {
        let report = self.validate();
        if report.is_admissible() {
            Ok(())
        } else {
            Err(BgkError::Inadmissible(report))
        }
    }

    pub fn rates(&self, n1: f64, n2: f64) -> Result<Rates> {
        let [sp1, sp2] = &self.species;
        match self.frequencies {
            CollisionFrequencies::Constant => Ok(Rates {
                nu11: sp1.nu_intra,
                nu22: sp2.nu_intra,
                nu12: self.interaction.nu12,
                nu21: self.interaction.nu21(),
            }),
            CollisionFrequencies::Formula { alpha11, alpha22, alpha12 } => {
                let nu12 = collision_frequency_formula(alpha12, n1, n2, sp1.mass, sp2.mass)?;
                Ok(Rates {
                    nu11: collision_frequency_formula(alpha11, n1, n1, sp1.mass, sp1.mass)?,
                    nu22: collision_frequency_formula(alpha22, n2, n2, sp2.mass, sp2.mass)?,
                    nu12,
                    nu21: nu12 / self.interaction.epsilon,
                })
            }
        }
    }

    /// Interaction parameters with `nu12` evaluated at the given densities.
    pub fn interaction_at(&self, n1: f64, n2: f64) -> Result<InteractionParams> {
        let rates = self.rates(n1, n2)?;
        Ok(InteractionParams { nu12: rates.nu12, ..self.interaction })
    }

    pub fn mixture_moments(&self, mom1: &Moments, mom2: &Moments) -> Result<MixtureMoments> {
        let ip = self.interaction_at(mom1.density, mom2.density)?;
        mixture_moments(mom1, mom2, &ip, &self.species[0], &self.species[1])
    }
}

/// Time derivatives of the species velocities and temperatures in the
/// space-homogeneous problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRates {
    pub du1: Vec3,
    pub du2: Vec3,
    pub dt1: f64,
    pub dt2: f64,
}

/// Moment equations of the homogeneous BGK system (densities are constant).
pub fn moment_rhs(mom1: &Moments, mom2: &Moments, model: &MixtureModel) -> Result<MomentRates> {
    let rates = model.rates(mom1.density, mom2.density)?;
    let mix = model.mixture_moments(mom1, mom2)?;
    let [sp1, sp2] = &model.species;
    let (n1, n2) = (mom1.density, mom2.density);
    let w1 = rates.nu12 * n2;
    let w2 = rates.nu21 * n1;
    let shift1 = sub(&mix.m12.velocity, &mom1.velocity);
    let shift2 = sub(&mix.m21.velocity, &mom2.velocity);
    Ok(MomentRates {
        du1: shift1.map(|s| w1 * s),
        du2: shift2.map(|s| w2 * s),
        dt1: w1 * (mix.m12.temperature - mom1.temperature + sp1.mass / 3.0 * norm_sq(&shift1)),
        dt2: w2 * (mix.m21.temperature - mom2.temperature + sp2.mass / 3.0 * norm_sq(&shift2)),
    })
}

/// Species moments after one implicit Euler step of the homogeneous
/// relaxation. Densities are unchanged; velocities and temperatures solve
/// the 2x2 linear systems obtained from the momentum and energy moments of
/// the implicit update.
pub fn implicit_relaxation(mom1: &Moments, mom2: &Moments, model: &MixtureModel, dt: f64) -> Result<(Moments, Moments)> {
    mom1.check_positive("species 1")?;
    mom2.check_positive("species 2")?;
    let rates = model.rates(mom1.density, mom2.density)?;
    let ip = InteractionParams { nu12: rates.nu12, ..model.interaction };
    let [sp1, sp2] = &model.species;
    let (n1, n2, m1, m2) = (mom1.density, mom2.density, sp1.mass, sp2.mass);

    let a = dt * rates.nu12 * n2 * (1.0 - ip.delta);
    let b = dt * rates.nu12 * n1 * (m1 / m2) * (1.0 - ip.delta);
    let det = 1.0 + a + b;
    let mut u1 = [0.0; 3];
    let mut u2 = [0.0; 3];
    for i in 0..3 {
        let (v1, v2) = (mom1.velocity[i], mom2.velocity[i]);
        u1[i] = ((1.0 + b) * v1 + a * v2) / det;
        u2[i] = (b * v1 + (1.0 + a) * v2) / det;
    }

    let (u12, u21) = mixture_velocities(&u1, &u2, &ip, sp1, sp2);
    let du_sq = norm_sq(&sub(&u1, &u2));
    let p = dt * rates.nu12 * n2;
    let q = dt * rates.nu21 * n1;
    let r1 = mom1.energy(m1) + p * (1.5 * n1 * ip.gamma * du_sq + 0.5 * m1 * n1 * norm_sq(&u12))
        - (1.0 + p) * 0.5 * m1 * n1 * norm_sq(&u1);
    let r2 = mom2.energy(m2)
        + q * (1.5 * n2 * t21_heating(&ip, sp1, sp2) * du_sq + 0.5 * m2 * n2 * norm_sq(&u21))
        - (1.0 + q) * 0.5 * m2 * n2 * norm_sq(&u2);
    let x1 = r1 / (1.5 * n1);
    let x2 = r2 / (1.5 * n2);
    let big_a = p * (1.0 - ip.alpha);
    let big_b = q * ip.epsilon * (1.0 - ip.alpha);
    let det = 1.0 + big_a + big_b;
    let t1 = ((1.0 + big_b) * x1 + big_a * x2) / det;
    let t2 = (big_b * x1 + (1.0 + big_a) * x2) / det;
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(BgkError::Degenerate(format!("implicit relaxation produced temperatures {t1}, {t2}")));
    }
    Ok((Moments::new(n1, u1, t1), Moments::new(n2, u2, t2)))
}

/// Common-velocity, common-temperature state with the same species
/// densities, total momentum and total energy.
pub fn mixture_equilibrium(mom1: &Moments, mom2: &Moments, masses: [f64; 2]) -> (Moments, Moments) {
    let (n1, n2) = (mom1.density, mom2.density);
    let (r1, r2) = (masses[0] * n1, masses[1] * n2);
    let mut u = [0.0; 3];
    for i in 0..3 {
        u[i] = (r1 * mom1.velocity[i] + r2 * mom2.velocity[i]) / (r1 + r2);
    }
    let energy = mom1.energy(masses[0]) + mom2.energy(masses[1]);
    let t = (energy - 0.5 * (r1 + r2) * norm_sq(&u)) / (1.5 * (n1 + n2));
    (Moments::new(n1, u, t), Moments::new(n2, u, t))
}
