use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mixbgk_cli::{dispatch, parse_config, DispatchOptions, RunError};

/// Two-species BGK mixture solver.
///
/// Exit status: 0 success, 1 tolerance failure, 2 configuration error,
/// 3 runtime or solver error.
#[derive(Debug, Parser)]
#[command(name = "mixbgk", version)]
struct Args {
    /// Run configuration (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the solvers.
    #[arg(long)]
    threads: Option<usize>,
    /// Parse and validate the configuration, then exit.
    #[arg(long)]
    check: bool,
    /// Write the final distributions as a binary dump.
    #[arg(long)]
    dump_fields: bool,
}

fn run(args: Args) -> Result<u8, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Setup(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = parse_config(&text)?;
    if args.check {
        println!("configuration ok: {} scenario", cfg.scenario.name());
        println!("{}", cfg.report);
        return Ok(0);
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Setup(format!("cannot start {n} threads: {e}")))?;
    }
    let out_dir = args.out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("mixbgk-out"));
    let report = dispatch(&cfg, &DispatchOptions { out_dir, dump_fields: args.dump_fields })?;
    for line in &report.lines {
        println!("{line}");
    }
    for check in &report.checks {
        println!("{check}");
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mixbgk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
