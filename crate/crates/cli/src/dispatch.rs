//! Scenario execution and artifact writing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mixbgk_core::diagnostics::{format_f64, Check};
use mixbgk_core::discretization::{write_dump, Dump, SpatialHeader};
use mixbgk_core::homogeneous::{run_homogeneous, HomogeneousConfig, InitialCondition};
use mixbgk_core::model::{delta_lower_bound, gamma_upper_bound};
use mixbgk_core::transport::{dt_for_cfl, run_1d, TransportConfig};
use mixbgk_core::{BgkError, ConservationLedger, MixtureModel, Moments, SpatialMesh, VelocityGrid};

use crate::config::{ConfigError, InteractionSpec, RunConfig, Scenario, TimeStep};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Setup(String),
    #[error("solver error: {0}")]
    Solver(#[from] BgkError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Solver(_) | RunError::Io { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Human-readable lines plus tolerance checks of one run.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }

    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone)]
pub struct DispatchOptions {
    pub out_dir: PathBuf,
    pub dump_fields: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), RunError> {
    w.flush().map_err(io_err(path))
}

fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> mixbgk_core::Result<()>) -> Result<(), RunError> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| match e {
        BgkError::Io(source) => RunError::Io { path: path.to_path_buf(), source },
        other => RunError::Solver(other),
    })?;
    finish(w, path)
}

fn model(cfg: &RunConfig) -> Result<MixtureModel, RunError> {
    if !cfg.report.is_admissible() {
        return Err(RunError::Setup(format!("matched interaction parameters are inadmissible:\n{}", cfg.report)));
    }
    Ok(MixtureModel::new(cfg.species[0].params(), cfg.species[1].params(), cfg.interaction))
}

fn uniform_moments(cfg: &RunConfig, k: usize) -> Moments {
    let s = &cfg.species[k];
    let n = s.mean_density().expect("state scenarios require densities");
    let t = s.temperature.expect("state scenarios require temperatures").cell_average(0.0, 1.0, 1.0);
    Moments::new(n, s.velocity, t)
}

/// Ledger samples followed by two summary rows: largest per-step and
/// largest cumulative relative drift (the entropy column holds the largest
/// per-step entropy increase in both).
fn write_ledger(ledger: &ConservationLedger, path: &Path) -> Result<(), RunError> {
    let mut w = create(path)?;
    let e = io_err(path);
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "time,mass_1,mass_2,total_px,total_py,total_pz,total_E,H_total")?;
        for (t, tot) in ledger.samples() {
            let row = [*t, tot.mass[0], tot.mass[1], tot.momentum[0], tot.momentum[1], tot.momentum[2], tot.energy, tot.entropy];
            writeln!(w, "{}", row.map(format_f64).join(","))?;
        }
        for (label, d) in [("max_step_drift", ledger.max_step_drift()), ("max_total_drift", ledger.max_total_drift())] {
            let row = [d.mass[0], d.mass[1], d.momentum, d.momentum, d.momentum, d.energy, ledger.max_entropy_increase()];
            writeln!(w, "{label},{}", row.map(format_f64).join(","))?;
        }
        Ok(())
    })();
    body.map_err(e)?;
    finish(w, path)
}

fn params_lines(cfg: &RunConfig) -> Vec<String> {
    let ip = &cfg.interaction;
    let (sp1, sp2) = (cfg.species[0].params(), cfg.species[1].params());
    vec![
        format!("nu12 = {}", ip.nu12),
        format!("nu21 = {}", ip.nu21()),
        format!("epsilon = {}", ip.epsilon),
        format!("delta = {}  (lower bound {})", ip.delta, delta_lower_bound(ip, &sp1, &sp2)),
        format!("alpha = {}", ip.alpha),
        format!("gamma = {}  (upper bound {})", ip.gamma, gamma_upper_bound(ip, &sp1, &sp2)),
    ]
}

fn validate(cfg: &RunConfig) -> Report {
    let mut r = Report { lines: params_lines(cfg), checks: Vec::new() };
    r.lines.push(cfg.report.to_string());
    r.checks.push(Check::at_most("violated admissibility constraints", cfg.report.violations.len() as f64, 0.0));
    r
}

fn match_rates(cfg: &RunConfig) -> Report {
    let mut r = validate(cfg);
    let InteractionSpec::Match { alpha12, nu12, .. } = cfg.interaction_spec else {
        return r;
    };
    let (m1, m2) = (cfg.species[0].mass, cfg.species[1].mass);
    let n1 = cfg.species[0].mean_density().unwrap_or(1.0);
    let n2 = cfg.species[1].mean_density().unwrap_or(1.0);
    let ip = &cfg.interaction;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let velocity = rel(
        nu12 * (1.0 - ip.delta) * (n2 + m1 / m2 * n1),
        alpha12 * (m1 + m2) * (m1 * n1 + m2 * n2) / (2.0 * m1 * m2 * n1 * n2),
    );
    let temperature = rel((1.0 - ip.alpha) * nu12 * (n1 + n2), alpha12 * (n1 + n2) / (n1 * n2));
    r.checks.push(Check::at_most("velocity rate identity (rel)", velocity, 1e-12));
    r.checks.push(Check::at_most("temperature rate identity (rel)", temperature, 1e-12));
    r
}

fn homogeneous(cfg: &RunConfig, opts: &DispatchOptions) -> Result<Report, RunError> {
    let model = model(cfg)?;
    let time = cfg.time.expect("homogeneous runs have a time block");
    let TimeStep::Fixed(dt) = time.step else {
        return Err(RunError::Setup("homogeneous runs need `time.dt`".into()));
    };
    let initial = [0, 1].map(|k| InitialCondition { moments: uniform_moments(cfg, k), shape: cfg.species[k].shape });
    let grid = match cfg.grid_bounds {
        Some((lo, hi)) => VelocityGrid::cube(cfg.grid_nodes, lo, hi),
        None => mixbgk_core::homogeneous::default_grid(&model, &initial, cfg.grid_nodes),
    }?;
    let hcfg = HomogeneousConfig {
        model,
        initial,
        grid: Arc::new(grid),
        dt,
        t_end: time.t_end,
        output_interval: time.output_interval,
        scheme: cfg.scheme,
        tolerances: cfg.tolerances.homogeneous(),
    };
    let run = run_homogeneous(&hcfg)?;

    let series = opts.out_dir.join("time_series.csv");
    with_file(&series, |w| run.write_csv(w))?;
    write_ledger(&run.ledger, &opts.out_dir.join("ledger.csv"))?;
    if opts.dump_fields {
        let state = &run.final_state;
        let dump = Dump {
            grid: (**state.grid()).clone(),
            spatial: None,
            species: state.f.iter().map(|f| f.values().to_vec()).collect(),
        };
        with_file(&opts.out_dir.join("fields.bin"), |w| write_dump(w, &dump))?;
    }

    let rc = &run.coefficients;
    let lines = vec![
        format!("samples: {}, steps: {}", run.samples.len(), run.ledger.steps()),
        format!("C1 = {}, C2 = {} (model {}), C3 = {}, C = {}", rc.c1, rc.c2, rc.c2_model, rc.c3, rc.c_entropy),
    ];
    Ok(Report { lines, checks: run.checks(&hcfg.tolerances) })
}

fn transport(cfg: &RunConfig, opts: &DispatchOptions) -> Result<Report, RunError> {
    let model = model(cfg)?;
    let time = cfg.time.expect("transport runs have a time block");
    let (cells, length) = cfg.mesh.expect("transport runs have a mesh");
    let mesh = SpatialMesh::new(cells, length)?;
    let dx = mesh.dx();
    let initial: Vec<[Moments; 2]> = (0..cells)
        .map(|c| {
            let (a, b) = (c as f64 * dx, (c + 1) as f64 * dx);
            [0, 1].map(|k| {
                let s = &cfg.species[k];
                Moments::new(
                    s.density.expect("checked").cell_average(a, b, length),
                    [s.velocity[0], 0.0, 0.0],
                    s.temperature.expect("checked").cell_average(a, b, length),
                )
            })
        })
        .collect();
    let masses = model.masses();
    let grid = match cfg.grid_bounds {
        Some((lo, hi)) => VelocityGrid::line(cfg.grid_nodes, lo, hi)?,
        None => {
            let states: Vec<(Moments, f64)> =
                initial.iter().flat_map(|cell| [(cell[0], masses[0]), (cell[1], masses[1])]).collect();
            VelocityGrid::sized_for(&states, cfg.grid_nodes, 1)?
        }
    };
    let dt = match time.step {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Cfl(c) => dt_for_cfl(&mesh, &grid, c),
    };
    let limit = cfg.transport_order.cfl_limit();
    let cfl = dt * grid.max_speed() / dx;
    if cfl > limit {
        return Err(RunError::Setup(format!(
            "time step {dt} gives CFL number {cfl:.4}, above the limit {limit} of order {} transport",
            cfg.transport_order as u8 + 1
        )));
    }
    let tcfg = TransportConfig {
        model,
        mesh,
        grid: Arc::new(grid),
        initial,
        dt,
        t_end: time.t_end,
        output_interval: time.output_interval,
        order: cfg.transport_order,
        tolerances: cfg.tolerances.ledger(),
        keep_profiles: true,
    };
    let run = run_1d(&tcfg)?;

    with_file(&opts.out_dir.join("series.csv"), |w| run.write_ledger_csv(w))?;
    write_ledger(&run.ledger, &opts.out_dir.join("ledger.csv"))?;
    let profiles = opts.out_dir.join("profiles");
    fs::create_dir_all(&profiles).map_err(io_err(&profiles))?;
    for (i, p) in run.profiles.iter().enumerate() {
        with_file(&profiles.join(format!("profile_{i:04}.csv")), |w| run.write_profile_csv(p, w))?;
    }
    if opts.dump_fields {
        let f = &run.final_field;
        let nv = f.nodes();
        let species = (0..2)
            .map(|k| {
                (0..cells)
                    .flat_map(|c| f.g[k][c * nv..(c + 1) * nv].iter().chain(&f.h[k][c * nv..(c + 1) * nv]).copied())
                    .collect()
            })
            .collect();
        let dump = Dump {
            grid: (*f.grid).clone(),
            spatial: Some(SpatialHeader { cell_count: cells as u32, length }),
            species,
        };
        with_file(&opts.out_dir.join("fields.bin"), |w| write_dump(w, &dump))?;
    }
    let last = run.samples.last().expect("at least the initial sample");
    let lines = vec![
        format!("dt = {dt}, steps: {}, CFL = {:.4}", run.ledger.steps(), run.final_field.cfl_number(dt)),
        format!("final equilibrium deviation: {:.6e}", last.equilibrium_deviation),
    ];
    Ok(Report { lines, checks: run.checks(&tcfg.tolerances) })
}

/// Runs the scenario and writes its artifacts and manifest into the
/// output directory (created if needed).
pub fn dispatch(cfg: &RunConfig, opts: &DispatchOptions) -> Result<Report, RunError> {
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let report = match cfg.scenario {
        Scenario::Validate | Scenario::Presets => validate(cfg),
        Scenario::MatchRates => match_rates(cfg),
        Scenario::Homogeneous => homogeneous(cfg, opts)?,
        Scenario::Transport => transport(cfg, opts)?,
    };
    write_manifest(cfg, &report, &opts.out_dir.join("manifest.cfg"))?;
    Ok(report)
}

/// Config echo plus the PASS/FAIL summary as comments; the file parses
/// back to the same configuration.
fn write_manifest(cfg: &RunConfig, report: &Report, path: &Path) -> Result<(), RunError> {
    let mut text = format!("# mixbgk {} run manifest\n", cfg.scenario.name());
    text.push_str(&cfg.echo());
    for line in &report.lines {
        for l in line.lines() {
            text.push_str(&format!("# {l}\n"));
        }
    }
    for c in &report.checks {
        text.push_str(&format!("# {c}\n"));
    }
    text.push_str(&format!("# result: {}\n", if report.passed() { "PASS" } else { "FAIL" }));
    fs::write(path, text).map_err(io_err(path))
}
