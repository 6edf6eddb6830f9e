//! Entropy and distance functionals, conservation ledgers and CSV output.

use std::fmt;
use std::io::Write;

use crate::discretization::grid::{DiscreteDistribution, VACUUM_THRESHOLD};
use crate::discretization::ReducedPair;
use crate::error::{BgkError, Result};

fn f_ln_f(v: f64) -> f64 {
    if v < VACUUM_THRESHOLD {
        0.0
    } else {
        v * v.ln()
    }
}

/// `H(f) = sum w f ln f` with `0 ln 0 = 0`.
pub fn entropy(f: &DiscreteDistribution) -> f64 {
    f.grid().weight() * f.values().iter().map(|&v| f_ln_f(v)).sum::<f64>()
}

/// `H(f|g) = sum w f ln(f/g)`.
pub fn relative_entropy(f: &DiscreteDistribution, g: &DiscreteDistribution) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(BgkError::GridMismatch);
    }
    let mut sum = 0.0;
    for (i, (&a, &b)) in f.values().iter().zip(g.values()).enumerate() {
        if a < VACUUM_THRESHOLD {
            continue;
        }
        if b < VACUUM_THRESHOLD {
            return Err(BgkError::SupportViolation { node: i });
        }
        sum += a * (a / b).ln();
    }
    Ok(f.grid().weight() * sum)
}

/// `sum w |f - g|`.
pub fn l1_distance(f: &DiscreteDistribution, g: &DiscreteDistribution) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(BgkError::GridMismatch);
    }
    Ok(f.grid().weight() * f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Entropy of the reduced pair: the least `∫ f ln f` over all 3D
/// distributions with marginal `g` and transverse energy `h`, attained by a
/// transverse Gaussian of variance `h / 2g`.
pub fn reduced_entropy(rp: &ReducedPair) -> f64 {
    rp.grid().weight() * reduced_entropy_density(rp.g.values(), &rp.h)
}

pub(crate) fn reduced_entropy_density(g: &[f64], h: &[f64]) -> f64 {
    g.iter()
        .zip(h)
        .map(|(&gi, &hi)| {
            if gi < VACUUM_THRESHOLD || hi < VACUUM_THRESHOLD {
                0.0
            } else {
                // g (ln(g / (2 pi theta)) - 1) with theta = h / (2 g).
                gi * ((gi * gi / (std::f64::consts::PI * hi)).ln() - 1.0)
            }
        })
        .sum()
}

/// Conserved totals and entropy at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    pub mass: [f64; 2],
    pub momentum: [f64; 3],
    pub energy: f64,
    pub entropy: f64,
}

/// Relative drifts of the conserved totals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Drift {
    pub mass: [f64; 2],
    pub momentum: f64,
    pub energy: f64,
}

impl Drift {
    pub fn max(&self) -> f64 {
        self.mass[0].max(self.mass[1]).max(self.momentum).max(self.energy)
    }

    fn between(a: &Totals, b: &Totals, momentum_scale: f64) -> Self {
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(VACUUM_THRESHOLD);
        let dp = (0..3).map(|i| (a.momentum[i] - b.momentum[i]).abs()).fold(0.0, f64::max);
        Drift {
            mass: [rel(a.mass[0], b.mass[0]), rel(a.mass[1], b.mass[1])],
            momentum: dp / momentum_scale,
            energy: rel(a.energy, b.energy),
        }
    }

    fn merge(&mut self, other: &Drift) {
        self.mass[0] = self.mass[0].max(other.mass[0]);
        self.mass[1] = self.mass[1].max(other.mass[1]);
        self.momentum = self.momentum.max(other.momentum);
        self.energy = self.energy.max(other.energy);
    }
}

/// Per-run conservation bookkeeping.
///
/// Momentum drift is measured against `momentum_scale` rather than the
/// total momentum itself, which may vanish (e.g. counter-flow).
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationLedger {
    reference: Totals,
    momentum_scale: f64,
    last: Totals,
    samples: Vec<(f64, Totals)>,
    max_step: Drift,
    max_total: Drift,
    max_entropy_increase: f64,
    steps: usize,
}

impl ConservationLedger {
    pub fn new(time: f64, reference: Totals, momentum_scale: f64) -> Self {
        Self {
            reference,
            momentum_scale: momentum_scale.max(VACUUM_THRESHOLD),
            last: reference,
            samples: vec![(time, reference)],
            max_step: Drift::default(),
            max_total: Drift::default(),
            max_entropy_increase: f64::NEG_INFINITY,
            steps: 0,
        }
    }

    /// Accounts for one time step.
    pub fn update(&mut self, totals: Totals) {
        self.max_step.merge(&Drift::between(&totals, &self.last, self.momentum_scale));
        self.max_total.merge(&Drift::between(&totals, &self.reference, self.momentum_scale));
        self.max_entropy_increase = self.max_entropy_increase.max(totals.entropy - self.last.entropy);
        self.last = totals;
        self.steps += 1;
    }

    /// Keeps the current totals as an output sample.
    pub fn record(&mut self, time: f64) {
        self.samples.push((time, self.last));
    }

    pub fn reference(&self) -> &Totals {
        &self.reference
    }

    pub fn latest(&self) -> &Totals {
        &self.last
    }

    pub fn samples(&self) -> &[(f64, Totals)] {
        &self.samples
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn max_step_drift(&self) -> Drift {
        self.max_step
    }

    pub fn max_total_drift(&self) -> Drift {
        self.max_total
    }

    /// Largest per-step increase of the total entropy (negative when the
    /// entropy decreased on every step).
    pub fn max_entropy_increase(&self) -> f64 {
        self.max_entropy_increase
    }

    pub fn checks(&self, tol: &LedgerTolerances) -> Vec<Check> {
        vec![
            Check::at_most("per-step conservation drift", self.max_step.max(), tol.per_step),
            Check::at_most("cumulative conservation drift", self.max_total.max(), tol.cumulative),
            Check::at_most("per-step entropy increase", self.max_entropy_increase.max(0.0), tol.entropy_slack),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerTolerances {
    pub per_step: f64,
    pub cumulative: f64,
    pub entropy_slack: f64,
}

impl LedgerTolerances {
    pub const HOMOGENEOUS: Self = Self { per_step: 1e-12, cumulative: 1e-10, entropy_slack: 1e-10 };
    pub const TRANSPORT: Self = Self { per_step: 1e-10, cumulative: 1e-10, entropy_slack: 1e-10 };
}

/// Outcome of one tolerance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Hard checks decide the exit status; soft ones are only reported.
    pub hard: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance, hard: true }
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        write!(f, "{status} {}: {:.6e} (tolerance {:.1e})", self.name, self.value, self.tolerance)
    }
}

/// Fixed, locale-free rendering with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header row and numeric rows.
pub fn write_csv<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
