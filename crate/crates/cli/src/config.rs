//! Run configuration: a line-oriented `section.key = value` format.
//!
//! ```text
//! # comment
//! run.scenario = homogeneous
//! species1.mass = 1
//! species1.nu_intra = 1
//! species1.density = 1
//! species1.velocity = 1, 0, 0
//! species1.temperature = 1
//! species1.shape = bimodal(0.5)
//! species2.mass = 1
//! ...
//! interaction.preset = hamel
//! interaction.nu12 = 1
//! grid.nodes = 32
//! time.dt = 1e-3
//! time.t_end = 5
//! time.output_interval = 0.05
//! ```
//!
//! The interaction block is either explicit (`nu12`, `epsilon`, `delta`,
//! `alpha`, `gamma`), a preset (`preset = hamel`, `nu12`) or matched to a
//! Boltzmann energy transfer coefficient (`match.alpha12`, `nu12`, optional
//! `epsilon`). Density and temperature accept `constant(c)`,
//! `sine(mean, amplitude, wavenumber)` or `pulse(base, height, start, end)`
//! profiles in transport runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use mixbgk_core::diagnostics::LedgerTolerances;
use mixbgk_core::homogeneous::HomogeneousTolerances;
use mixbgk_core::model::{hamel_preset, match_boltzmann_rates, validate_params};
use mixbgk_core::{InitialShape, InteractionParams, Scheme, SpeciesParams, TransportOrder, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Validate,
    Homogeneous,
    Transport,
    MatchRates,
    Presets,
}

impl Scenario {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "validate" => Scenario::Validate,
            "homogeneous" => Scenario::Homogeneous,
            "transport" => Scenario::Transport,
            "match-rates" => Scenario::MatchRates,
            "presets" => Scenario::Presets,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Validate => "validate",
            Scenario::Homogeneous => "homogeneous",
            Scenario::Transport => "transport",
            Scenario::MatchRates => "match-rates",
            Scenario::Presets => "presets",
        }
    }

    fn needs_state(self) -> bool {
        matches!(self, Scenario::Homogeneous | Scenario::Transport)
    }
}

/// Spatial profile of a scalar initial field on `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `mean + amplitude sin(2 pi wavenumber x / length)`.
    Sine { mean: f64, amplitude: f64, wavenumber: f64 },
    /// `base`, plus `height` on `[start, end)`.
    Pulse { base: f64, height: f64, start: f64, end: f64 },
}

impl Profile {
    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant(_))
    }

    /// Smallest value taken anywhere.
    pub fn min_value(&self) -> f64 {
        match *self {
            Profile::Constant(c) => c,
            Profile::Sine { mean, amplitude, .. } => mean - amplitude.abs(),
            Profile::Pulse { base, height, .. } => base.min(base + height),
        }
    }

    /// Exact average over the cell `[a, b]`.
    pub fn cell_average(&self, a: f64, b: f64, length: f64) -> f64 {
        match *self {
            Profile::Constant(c) => c,
            Profile::Sine { mean, amplitude, wavenumber } => {
                if wavenumber == 0.0 {
                    return mean;
                }
                let k = 2.0 * std::f64::consts::PI * wavenumber / length;
                mean + amplitude * ((k * a).cos() - (k * b).cos()) / (k * (b - a))
            }
            Profile::Pulse { base, height, start, end } => {
                let overlap = (b.min(end) - a.max(start)).max(0.0);
                base + height * overlap / (b - a)
            }
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "{c}"),
            Profile::Sine { mean, amplitude, wavenumber } => write!(f, "sine({mean}, {amplitude}, {wavenumber})"),
            Profile::Pulse { base, height, start, end } => write!(f, "pulse({base}, {height}, {start}, {end})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesBlock {
    pub mass: f64,
    pub nu_intra: f64,
    pub density: Option<Profile>,
    pub velocity: [f64; 3],
    pub temperature: Option<Profile>,
    pub shape: InitialShape,
}

impl SpeciesBlock {
    pub fn params(&self) -> SpeciesParams {
        SpeciesParams { mass: self.mass, nu_intra: self.nu_intra }
    }

    /// Mean density over the domain (the constant value for uniform data).
    pub fn mean_density(&self) -> Option<f64> {
        self.density.map(|p| match p {
            Profile::Constant(c) => c,
            Profile::Sine { mean, .. } => mean,
            Profile::Pulse { base, .. } => base,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionSpec {
    Explicit(InteractionParams),
    Hamel { nu12: f64 },
    Match { alpha12: f64, nu12: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// Transport only: `dt = cfl dx / max|v|`.
    Cfl(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBlock {
    pub step: TimeStep,
    pub t_end: f64,
    pub output_interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub per_step: f64,
    pub cumulative: f64,
    pub entropy_slack: f64,
    pub closed_form: f64,
}

impl Tolerances {
    fn defaults(scenario: Scenario) -> Self {
        let ledger = if scenario == Scenario::Transport {
            LedgerTolerances::TRANSPORT
        } else {
            LedgerTolerances::HOMOGENEOUS
        };
        Self {
            per_step: ledger.per_step,
            cumulative: ledger.cumulative,
            entropy_slack: ledger.entropy_slack,
            closed_form: HomogeneousTolerances::default().closed_form,
        }
    }

    pub fn ledger(&self) -> LedgerTolerances {
        LedgerTolerances { per_step: self.per_step, cumulative: self.cumulative, entropy_slack: self.entropy_slack }
    }

    pub fn homogeneous(&self) -> HomogeneousTolerances {
        HomogeneousTolerances { ledger: self.ledger(), closed_form: self.closed_form }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub species: [SpeciesBlock; 2],
    pub interaction_spec: InteractionSpec,
    /// Materialised interaction parameters.
    pub interaction: InteractionParams,
    /// Admissibility of `interaction`; non-empty only for matched rates.
    pub report: ValidationReport,
    pub grid_nodes: usize,
    pub grid_bounds: Option<(f64, f64)>,
    pub mesh: Option<(usize, f64)>,
    pub time: Option<TimeBlock>,
    pub scheme: Scheme,
    pub transport_order: TransportOrder,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

const SPECIES_KEYS: [&str; 6] = ["mass", "nu_intra", "density", "velocity", "temperature", "shape"];
const OTHER_KEYS: [&str; 21] = [
    "run.scenario",
    "interaction.preset",
    "interaction.nu12",
    "interaction.epsilon",
    "interaction.delta",
    "interaction.alpha",
    "interaction.gamma",
    "match.alpha12",
    "grid.nodes",
    "grid.v_min",
    "grid.v_max",
    "mesh.cells",
    "mesh.length",
    "time.dt",
    "time.cfl",
    "time.t_end",
    "time.output_interval",
    "scheme.time",
    "scheme.transport_order",
    "output.dir",
    "tolerance.per_step",
];
const TOLERANCE_KEYS: [&str; 3] = ["tolerance.cumulative", "tolerance.entropy_slack", "tolerance.closed_form"];

fn known_key(key: &str) -> bool {
    if let Some((section, name)) = key.split_once('.') {
        if (section == "species1" || section == "species2") && SPECIES_KEYS.contains(&name) {
            return true;
        }
    }
    OTHER_KEYS.contains(&key) || TOLERANCE_KEYS.contains(&key)
}

struct Entry {
    value: String,
    line: usize,
}

struct Parser {
    entries: BTreeMap<String, Entry>,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn error(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.diags.push(Diagnostic { line, message: message.into() });
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&mut self, key: &str, required: bool) -> Option<(String, usize)> {
        match self.entries.get(key) {
            Some(e) => Some((e.value.clone(), e.line)),
            None => {
                if required {
                    self.error(None, format!("missing required key `{key}`"));
                }
                None
            }
        }
    }

    fn number(&mut self, key: &str, required: bool) -> Option<f64> {
        let (v, line) = self.raw(key, required)?;
        match parse_f64(&v) {
            Some(x) => Some(x),
            None => {
                self.error(Some(line), format!("`{key}`: expected a number, got `{v}`"));
                None
            }
        }
    }

    fn check(&mut self, key: &str, value: Option<f64>, ok: impl Fn(f64) -> bool, what: &str) -> Option<f64> {
        let v = value?;
        if ok(v) {
            Some(v)
        } else {
            let line = self.line_of(key);
            self.error(line, format!("`{key}` must be {what}, got {v}"));
            None
        }
    }

    fn positive(&mut self, key: &str, required: bool) -> Option<f64> {
        let v = self.number(key, required);
        self.check(key, v, |x| x > 0.0, "positive")
    }

    fn nonnegative(&mut self, key: &str, required: bool) -> Option<f64> {
        let v = self.number(key, required);
        self.check(key, v, |x| x >= 0.0, "nonnegative")
    }

    fn integer(&mut self, key: &str, required: bool) -> Option<usize> {
        let (v, line) = self.raw(key, required)?;
        match v.parse::<usize>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.error(Some(line), format!("`{key}`: expected a nonnegative integer, got `{v}`"));
                None
            }
        }
    }

    fn profile(&mut self, key: &str, required: bool) -> Option<Profile> {
        let (v, line) = self.raw(key, required)?;
        match parse_profile(&v) {
            Ok(p) => Some(p),
            Err(msg) => {
                self.error(Some(line), format!("`{key}`: {msg}"));
                None
            }
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_call<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let rest = s.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_args(args: &[&str], count: usize, name: &str) -> Result<Vec<f64>, String> {
    if args.len() != count {
        return Err(format!("{name}(...) takes {count} arguments, got {}", args.len()));
    }
    args.iter().map(|a| parse_f64(a).ok_or_else(|| format!("`{a}` is not a number"))).collect()
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    let s = s.trim();
    if let Some(x) = parse_f64(s) {
        return Ok(Profile::Constant(x));
    }
    if let Some(args) = parse_call(s, "constant") {
        return Ok(Profile::Constant(parse_args(&args, 1, "constant")?[0]));
    }
    if let Some(args) = parse_call(s, "sine") {
        let a = parse_args(&args, 3, "sine")?;
        return Ok(Profile::Sine { mean: a[0], amplitude: a[1], wavenumber: a[2] });
    }
    if let Some(args) = parse_call(s, "pulse") {
        let a = parse_args(&args, 4, "pulse")?;
        if a[3] <= a[2] {
            return Err("pulse end must exceed its start".into());
        }
        return Ok(Profile::Pulse { base: a[0], height: a[1], start: a[2], end: a[3] });
    }
    Err(format!("expected a number, constant(c), sine(mean, amplitude, k) or pulse(base, height, start, end), got `{s}`"))
}

fn parse_shape(s: &str) -> Result<InitialShape, String> {
    let s = s.trim();
    if s == "maxwellian" {
        return Ok(InitialShape::Maxwellian);
    }
    if let Some(args) = parse_call(s, "bimodal") {
        let offset = parse_args(&args, 1, "bimodal")?[0];
        if !(offset > 0.0) {
            return Err("bimodal offset must be positive".into());
        }
        return Ok(InitialShape::Bimodal { offset });
    }
    Err(format!("expected `maxwellian` or `bimodal(offset)`, got `{s}`"))
}

fn tokenize(text: &str) -> (BTreeMap<String, Entry>, Vec<Diagnostic>) {
    let mut entries = BTreeMap::new();
    let mut diags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            diags.push(Diagnostic { line: Some(line), message: format!("expected `section.key = value`, got `{content}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !known_key(key) {
            diags.push(Diagnostic { line: Some(line), message: format!("unknown key `{key}`") });
            continue;
        }
        if value.is_empty() {
            diags.push(Diagnostic { line: Some(line), message: format!("`{key}` has no value") });
            continue;
        }
        if let Some(prev) = entries.get(key) {
            let prev: &Entry = prev;
            diags.push(Diagnostic {
                line: Some(line),
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
            continue;
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    (entries, diags)
}

fn parse_species(p: &mut Parser, k: usize, scenario: Scenario) -> Option<SpeciesBlock> {
    let s = format!("species{k}");
    let key = |name: &str| format!("{s}.{name}");
    let needs_state = scenario.needs_state();
    let needs_density = needs_state || scenario == Scenario::MatchRates;
    let mass = p.positive(&key("mass"), true);
    let nu_intra = p.nonnegative(&key("nu_intra"), needs_state).or(if needs_state { None } else { Some(0.0) });
    let density = p.profile(&key("density"), needs_density);
    let temperature = p.profile(&key("temperature"), needs_state);
    let velocity = match p.raw(&key("velocity"), needs_state) {
        None => (!needs_state).then_some([0.0; 3]),
        Some((v, line)) => {
            let parts: Vec<Option<f64>> = v.split(',').map(parse_f64).collect();
            match parts.as_slice() {
                [Some(a), Some(b), Some(c)] => Some([*a, *b, *c]),
                _ => {
                    p.error(Some(line), format!("`{}`: expected three comma-separated numbers", key("velocity")));
                    None
                }
            }
        }
    };
    let shape = match p.raw(&key("shape"), false) {
        None => Some(InitialShape::Maxwellian),
        Some((v, line)) => match parse_shape(&v) {
            Ok(shape) => Some(shape),
            Err(msg) => {
                p.error(Some(line), format!("`{}`: {msg}", key("shape")));
                None
            }
        },
    };
    for (name, prof) in [("density", &density), ("temperature", &temperature)] {
        if let Some(prof) = prof {
            let line = p.line_of(&key(name));
            if !(prof.min_value() > 0.0) {
                p.error(line, format!("`{}` must stay positive", key(name)));
            }
            if scenario != Scenario::Transport && !prof.is_constant() {
                p.error(line, format!("`{}`: spatial profiles are only allowed in transport runs", key(name)));
            }
        }
    }
    if scenario == Scenario::Transport {
        if let Some(v) = velocity {
            if v[1] != 0.0 || v[2] != 0.0 {
                p.error(p.line_of(&key("velocity")), "transport runs need zero transverse velocity components");
            }
        }
        if shape != Some(InitialShape::Maxwellian) {
            p.error(p.line_of(&key("shape")), "transport runs start from local Maxwellians");
        }
    }
    Some(SpeciesBlock {
        mass: mass?,
        nu_intra: nu_intra?,
        density,
        velocity: velocity?,
        temperature,
        shape: shape?,
    })
}

fn parse_interaction(p: &mut Parser, species: Option<&[SpeciesBlock; 2]>) -> Option<(InteractionSpec, InteractionParams, ValidationReport)> {
    let explicit_keys = ["interaction.epsilon", "interaction.delta", "interaction.alpha", "interaction.gamma"];
    let has_preset = p.has("interaction.preset");
    let has_match = p.has("match.alpha12");
    if has_preset && has_match {
        p.error(p.line_of("match.alpha12"), "give either `interaction.preset` or a match block, not both");
        return None;
    }
    let nu12 = p.positive("interaction.nu12", true);
    let first_line = p.line_of("interaction.preset").or(p.line_of("match.alpha12")).or(p.line_of("interaction.nu12"));
    if has_preset {
        for k in explicit_keys {
            if p.has(k) {
                p.error(p.line_of(k), format!("`{k}` conflicts with `interaction.preset`"));
            }
        }
        let (v, line) = p.raw("interaction.preset", true)?;
        if v != "hamel" {
            p.error(Some(line), format!("unknown preset `{v}` (available: hamel)"));
            return None;
        }
        let [a, b] = species?;
        let ip = hamel_preset(&a.params(), &b.params(), nu12?);
        let report = validate_params(&ip, &a.params(), &b.params());
        return Some((InteractionSpec::Hamel { nu12: nu12? }, ip, report));
    }
    if has_match {
        for k in &explicit_keys[1..] {
            if p.has(k) {
                p.error(p.line_of(k), format!("`{k}` conflicts with the match block"));
            }
        }
        let alpha12 = p.positive("match.alpha12", true);
        let epsilon = if p.has("interaction.epsilon") { p.positive("interaction.epsilon", true) } else { Some(1.0) };
        let [a, b] = species?;
        let (Some(n1), Some(n2)) = (a.mean_density(), b.mean_density()) else {
            p.error(first_line, "the match block needs `species1.density` and `species2.density`");
            return None;
        };
        return match match_boltzmann_rates(alpha12?, nu12?, epsilon?, &a.params(), &b.params(), n1, n2) {
            Ok(m) => Some((InteractionSpec::Match { alpha12: alpha12?, nu12: nu12?, epsilon: epsilon? }, m.params, m.report)),
            Err(e) => {
                p.error(first_line, e.to_string());
                None
            }
        };
    }
    let epsilon = p.number("interaction.epsilon", true);
    let delta = p.number("interaction.delta", true);
    let alpha = p.number("interaction.alpha", true);
    let gamma = p.number("interaction.gamma", true);
    let ip = InteractionParams { nu12: nu12?, epsilon: epsilon?, delta: delta?, alpha: alpha?, gamma: gamma? };
    let [a, b] = species?;
    let report = validate_params(&ip, &a.params(), &b.params());
    if !report.is_admissible() {
        for v in &report.violations {
            let key = match v.constraint {
                mixbgk_core::model::Constraint::FrequencyRatio => "interaction.epsilon",
                mixbgk_core::model::Constraint::PositiveFrequency => "interaction.nu12",
                mixbgk_core::model::Constraint::TemperatureWeight => "interaction.alpha",
                mixbgk_core::model::Constraint::VelocityWeight => "interaction.delta",
                mixbgk_core::model::Constraint::HeatingBound => "interaction.gamma",
            };
            p.error(p.line_of(key), format!("inadmissible: violates {} ({})", v.constraint, v.message));
        }
        return None;
    }
    Some((InteractionSpec::Explicit(ip), ip, report))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let (entries, diags) = tokenize(text);
    let mut p = Parser { entries, diags };

    let scenario = match p.raw("run.scenario", true) {
        Some((v, line)) => match Scenario::parse(&v) {
            Some(s) => Some(s),
            None => {
                p.error(
                    Some(line),
                    format!("unknown scenario `{v}` (expected validate, homogeneous, transport, match-rates or presets)"),
                );
                None
            }
        },
        None => None,
    };
    let Some(scenario) = scenario else {
        return Err(ConfigError { diagnostics: p.diags });
    };

    let s1 = parse_species(&mut p, 1, scenario);
    let s2 = parse_species(&mut p, 2, scenario);
    let species = match (s1, s2) {
        (Some(a), Some(b)) => Some([a, b]),
        _ => None,
    };
    if scenario == Scenario::Presets && !p.has("interaction.preset") {
        p.error(None, "missing required key `interaction.preset`");
    }
    if scenario == Scenario::MatchRates && !p.has("match.alpha12") {
        p.error(None, "missing required key `match.alpha12`");
    }
    let interaction = parse_interaction(&mut p, species.as_ref());

    let default_nodes = if scenario == Scenario::Transport { 64 } else { 32 };
    let grid_nodes = if p.has("grid.nodes") { p.integer("grid.nodes", true) } else { Some(default_nodes) };
    if let Some(n) = grid_nodes {
        if n < 2 || n % 2 != 0 {
            p.error(p.line_of("grid.nodes"), format!("`grid.nodes` must be even and at least 2, got {n}"));
        }
    }
    let grid_bounds = match (p.has("grid.v_min"), p.has("grid.v_max")) {
        (false, false) => None,
        (true, true) => {
            let lo = p.number("grid.v_min", true);
            let hi = p.number("grid.v_max", true);
            match (lo, hi) {
                (Some(lo), Some(hi)) if hi > lo => Some((lo, hi)),
                (Some(_), Some(_)) => {
                    p.error(p.line_of("grid.v_max"), "`grid.v_max` must exceed `grid.v_min`");
                    None
                }
                _ => None,
            }
        }
        _ => {
            p.error(p.line_of("grid.v_min").or(p.line_of("grid.v_max")), "give both `grid.v_min` and `grid.v_max` or neither");
            None
        }
    };

    let transport = scenario == Scenario::Transport;
    let mesh = if transport || p.has("mesh.cells") || p.has("mesh.length") {
        let cells = p.integer("mesh.cells", true);
        let length = p.positive("mesh.length", true);
        if cells == Some(0) {
            p.error(p.line_of("mesh.cells"), "`mesh.cells` must be positive");
        }
        cells.zip(length)
    } else {
        None
    };

    let time = if scenario.needs_state() {
        let step = match (p.has("time.dt"), p.has("time.cfl")) {
            (true, false) => p.positive("time.dt", true).map(TimeStep::Fixed),
            (false, true) if transport => {
                let v = p.positive("time.cfl", true);
                p.check("time.cfl", v, |c| c <= 1.0, "at most 1").map(TimeStep::Cfl)
            }
            (false, true) => {
                p.error(p.line_of("time.cfl"), "`time.cfl` is only available in transport runs; use `time.dt`");
                None
            }
            (true, true) => {
                p.error(p.line_of("time.cfl"), "give either `time.dt` or `time.cfl`, not both");
                None
            }
            (false, false) => {
                p.error(None, "missing required key `time.dt`");
                None
            }
        };
        let t_end = p.nonnegative("time.t_end", true);
        let output_interval = p.positive("time.output_interval", true);
        match (step, t_end, output_interval) {
            (Some(step), Some(t_end), Some(output_interval)) => Some(TimeBlock { step, t_end, output_interval }),
            _ => None,
        }
    } else {
        None
    };

    let scheme = match p.raw("scheme.time", false) {
        None => Some(Scheme::Rk4),
        Some((v, line)) => match v.as_str() {
            "rk4" => Some(Scheme::Rk4),
            "implicit-euler" => Some(Scheme::ImplicitEuler),
            _ => {
                p.error(Some(line), format!("`scheme.time`: expected `rk4` or `implicit-euler`, got `{v}`"));
                None
            }
        },
    };
    let transport_order = match p.raw("scheme.transport_order", false) {
        None => Some(TransportOrder::First),
        Some((v, line)) => match v.as_str() {
            "1" => Some(TransportOrder::First),
            "2" => Some(TransportOrder::Second),
            _ => {
                p.error(Some(line), format!("`scheme.transport_order`: expected 1 or 2, got `{v}`"));
                None
            }
        },
    };

    let defaults = Tolerances::defaults(scenario);
    let mut tol = |key: &str, default: f64| if p.has(key) { p.positive(key, true) } else { Some(default) };
    let tolerances = (|| {
        Some(Tolerances {
            per_step: tol("tolerance.per_step", defaults.per_step)?,
            cumulative: tol("tolerance.cumulative", defaults.cumulative)?,
            entropy_slack: tol("tolerance.entropy_slack", defaults.entropy_slack)?,
            closed_form: tol("tolerance.closed_form", defaults.closed_form)?,
        })
    })();

    let output_dir = p.raw("output.dir", false).map(|(v, _)| PathBuf::from(v));

    if !p.diags.is_empty() {
        return Err(ConfigError { diagnostics: p.diags });
    }
    let (interaction_spec, interaction, report) = interaction.expect("interaction parsed without diagnostics");
    Ok(RunConfig {
        scenario,
        species: species.expect("species parsed without diagnostics"),
        interaction_spec,
        interaction,
        report,
        grid_nodes: grid_nodes.expect("checked"),
        grid_bounds,
        mesh,
        time,
        scheme: scheme.expect("checked"),
        transport_order: transport_order.expect("checked"),
        tolerances: tolerances.expect("checked"),
        output_dir,
    })
}

impl RunConfig {
    /// Canonical text form; parses back to an equal configuration.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("run.scenario", self.scenario.name().into());
        for (i, s) in self.species.iter().enumerate() {
            let sec = format!("species{}", i + 1);
            put(&format!("{sec}.mass"), s.mass.to_string());
            put(&format!("{sec}.nu_intra"), s.nu_intra.to_string());
            if let Some(d) = s.density {
                put(&format!("{sec}.density"), d.to_string());
            }
            put(&format!("{sec}.velocity"), format!("{}, {}, {}", s.velocity[0], s.velocity[1], s.velocity[2]));
            if let Some(t) = s.temperature {
                put(&format!("{sec}.temperature"), t.to_string());
            }
            match s.shape {
                InitialShape::Maxwellian => put(&format!("{sec}.shape"), "maxwellian".into()),
                InitialShape::Bimodal { offset } => put(&format!("{sec}.shape"), format!("bimodal({offset})")),
            }
        }
        match self.interaction_spec {
            InteractionSpec::Explicit(ip) => {
                put("interaction.nu12", ip.nu12.to_string());
                put("interaction.epsilon", ip.epsilon.to_string());
                put("interaction.delta", ip.delta.to_string());
                put("interaction.alpha", ip.alpha.to_string());
                put("interaction.gamma", ip.gamma.to_string());
            }
            InteractionSpec::Hamel { nu12 } => {
                put("interaction.preset", "hamel".into());
                put("interaction.nu12", nu12.to_string());
            }
            InteractionSpec::Match { alpha12, nu12, epsilon } => {
                put("match.alpha12", alpha12.to_string());
                put("interaction.nu12", nu12.to_string());
                put("interaction.epsilon", epsilon.to_string());
            }
        }
        put("grid.nodes", self.grid_nodes.to_string());
        if let Some((lo, hi)) = self.grid_bounds {
            put("grid.v_min", lo.to_string());
            put("grid.v_max", hi.to_string());
        }
        if let Some((cells, length)) = self.mesh {
            put("mesh.cells", cells.to_string());
            put("mesh.length", length.to_string());
        }
        if let Some(t) = self.time {
            match t.step {
                TimeStep::Fixed(dt) => put("time.dt", dt.to_string()),
                TimeStep::Cfl(c) => put("time.cfl", c.to_string()),
            }
            put("time.t_end", t.t_end.to_string());
            put("time.output_interval", t.output_interval.to_string());
        }
        put(
            "scheme.time",
            match self.scheme {
                Scheme::Rk4 => "rk4",
                Scheme::ImplicitEuler => "implicit-euler",
            }
            .into(),
        );
        put(
            "scheme.transport_order",
            match self.transport_order {
                TransportOrder::First => "1",
                TransportOrder::Second => "2",
            }
            .into(),
        );
        put("tolerance.per_step", self.tolerances.per_step.to_string());
        put("tolerance.cumulative", self.tolerances.cumulative.to_string());
        put("tolerance.entropy_slack", self.tolerances.entropy_slack.to_string());
        put("tolerance.closed_form", self.tolerances.closed_form.to_string());
        if let Some(dir) = &self.output_dir {
            put("output.dir", dir.display().to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAMEL: &str = "\
run.scenario = homogeneous
species1.mass = 1
species1.nu_intra = 1
species1.density = 1
species1.velocity = 1, 0, 0
species1.temperature = 1
species2.mass = 1
species2.nu_intra = 1
species2.density = 1
species2.velocity = 0, 0, 0
species2.temperature = 1
interaction.preset = hamel   # Hamel model
interaction.nu12 = 1
time.dt = 1e-3
time.t_end = 5
time.output_interval = 0.05
";

    fn errors(text: &str) -> Vec<String> {
        parse_config(text).unwrap_err().diagnostics.iter().map(|d| d.to_string()).collect()
    }

    #[test]
    fn hamel_preset_is_materialized() {
        let cfg = parse_config(HAMEL).unwrap();
        assert_eq!(cfg.scenario, Scenario::Homogeneous);
        assert_eq!(cfg.interaction.delta, 0.5);
        assert_eq!(cfg.interaction.alpha, 0.5);
        assert!((cfg.interaction.gamma - 1.0 / 12.0).abs() < 1e-16);
        assert!(cfg.report.is_admissible());
        assert_eq!(cfg.grid_nodes, 32);
        assert_eq!(cfg.tolerances.per_step, 1e-12);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config(HAMEL).unwrap();
        assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
        let transport = "\
run.scenario = transport
species1.mass = 1
species1.nu_intra = 10
species1.density = sine(1, 0.2, 1)
species1.velocity = 0.1, 0, 0
species1.temperature = pulse(1, 0.5, 0.25, 0.5)
species2.mass = 2
species2.nu_intra = 10
species2.density = constant(0.5)
species2.velocity = 0, 0, 0
species2.temperature = 1
interaction.nu12 = 10
interaction.epsilon = 0.5
interaction.delta = 0.5
interaction.alpha = 0.3
interaction.gamma = 0.01
mesh.cells = 20
mesh.length = 2.5
grid.v_min = -7
grid.v_max = 7.5
time.cfl = 0.9
time.t_end = 0.3
time.output_interval = 0.1
scheme.transport_order = 2
tolerance.per_step = 1e-9
output.dir = out/t
";
        let cfg = parse_config(transport).unwrap();
        assert_eq!(cfg.tolerances.per_step, 1e-9);
        assert_eq!(cfg.tolerances.cumulative, 1e-10);
        assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn epsilon_above_one_cites_the_constraint() {
        let text = HAMEL.replace("interaction.preset = hamel   # Hamel model\n", "interaction.epsilon = 1.5\ninteraction.delta = 0.5\ninteraction.alpha = 0.5\ninteraction.gamma = 0.01\n");
        let errs = errors(&text);
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].starts_with("line 12:"), "{errs:?}");
        assert!(errs[0].contains("0 < epsilon <= 1"));
        assert!(errs[0].contains("swap the species labels"));
    }

    #[test]
    fn unknown_and_missing_keys_are_errors() {
        let text = HAMEL.replace("time.t_end = 5\n", "time.tend = 5\n");
        let errs = errors(&text);
        assert!(errs.iter().any(|e| e == "line 15: unknown key `time.tend`"), "{errs:?}");
        assert!(errs.iter().any(|e| e == "missing required key `time.t_end`"), "{errs:?}");
        let errs = errors("run.scenario = validate\n");
        assert!(errs.iter().any(|e| e.contains("`species1.mass`")));
        assert!(errors("run.scenario = nope\n")[0].contains("unknown scenario"));
        assert!(errors("just text\n")[0].starts_with("line 1:"));
    }

    #[test]
    fn malformed_values_report_their_line() {
        let text = HAMEL.replace("species1.velocity = 1, 0, 0", "species1.velocity = 1, 0").replace("time.dt = 1e-3", "time.dt = -1");
        let errs = errors(&text);
        assert!(errs.iter().any(|e| e.starts_with("line 5:")), "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("line 14:") && e.contains("positive")), "{errs:?}");
        let dup = format!("{HAMEL}grid.nodes = 16\ngrid.nodes = 8\n");
        assert!(errors(&dup).iter().any(|e| e.contains("duplicate key")));
        let odd = format!("{HAMEL}grid.nodes = 15\n");
        assert!(errors(&odd)[0].contains("even"));
    }

    #[test]
    fn interaction_specs_are_exclusive() {
        let both = format!("{HAMEL}match.alpha12 = 0.5\n");
        assert!(errors(&both)[0].contains("not both"));
        let mixed = format!("{HAMEL}interaction.delta = 0.3\n");
        assert!(errors(&mixed)[0].contains("conflicts"));
    }

    #[test]
    fn match_block_carries_the_report() {
        let text = HAMEL.replace("interaction.preset = hamel   # Hamel model\n", "match.alpha12 = 0.5\n");
        let cfg = parse_config(&text).unwrap();
        let expected = match_boltzmann_rates(0.5, 1.0, 1.0, &cfg.species[0].params(), &cfg.species[1].params(), 1.0, 1.0).unwrap();
        assert_eq!(cfg.interaction, expected.params);
        assert_eq!(cfg.report, expected.report);
        assert_eq!(cfg.interaction.alpha, 0.5);
        assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn profiles_only_in_transport() {
        let text = HAMEL.replace("species1.density = 1", "species1.density = sine(1, 0.1, 1)");
        assert!(errors(&text)[0].contains("only allowed in transport"));
        let neg = HAMEL.replace("run.scenario = homogeneous", "run.scenario = transport")
            .replace("species1.density = 1", "species1.density = sine(1, 1.5, 1)");
        assert!(errors(&neg).iter().any(|e| e.contains("stay positive")));
    }

    #[test]
    fn cell_averages_are_exact() {
        let sine = Profile::Sine { mean: 1.0, amplitude: 0.5, wavenumber: 1.0 };
        assert!((sine.cell_average(0.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((sine.cell_average(0.0, 0.5, 1.0) - (1.0 + 1.0 / std::f64::consts::PI)).abs() < 1e-15);
        let pulse = Profile::Pulse { base: 1.0, height: 2.0, start: 0.25, end: 0.5 };
        assert_eq!(pulse.cell_average(0.0, 0.5, 1.0), 2.0);
        assert_eq!(pulse.cell_average(0.5, 1.0, 1.0), 1.0);
    }

    #[test]
    fn validate_needs_only_masses_and_interaction() {
        let cfg = parse_config(
            "run.scenario = validate\nspecies1.mass = 1\nspecies2.mass = 1\ninteraction.preset = hamel\ninteraction.nu12 = 1\n",
        )
        .unwrap();
        assert!(cfg.time.is_none());
        assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }
}
