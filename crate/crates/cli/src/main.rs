use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hdg_core::hdgforms::Stabilization;
use hdg_core::solver::{configure_threads, SolveMode};
use hdg_core::study::{run_study, OutputFormat, StudyConfig};
use hdg_core::{Example, HdgError};

/// Convergence study for the divergence-free HDG Navier-Stokes solver on
/// uniform meshes of the unit square.
#[derive(Debug, Parser)]
#[command(name = "hdgns", version)]
struct Args {
    /// Manufactured solution: 1 (polynomial flow) or 2 (hydrostatic pressure).
    #[arg(long, default_value_t = 1)]
    example: u32,

    /// Velocity degree k (1, 2 or 3).
    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Gradient degree m (k or k - 1); defaults to k.
    #[arg(long)]
    m: Option<usize>,

    /// Comma-separated squares per side, e.g. 4,8,16.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    levels: Vec<usize>,

    /// Reynolds number; the viscosity is 1/Re.
    #[arg(long, default_value_t = 1.0)]
    re: f64,

    /// Picard stopping tolerance on the velocity increment.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    #[arg(long, default_value_t = 50)]
    max_iter: usize,

    /// monolithic or condensed.
    #[arg(long, default_value = "condensed")]
    mode: String,

    /// Stabilization length: cell (diameter) or edge (edge length).
    #[arg(long, default_value = "cell")]
    tau: String,

    /// csv or markdown.
    #[arg(long, default_value = "csv")]
    format: String,

    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Triangle .node file (with a sibling .ele); replaces --levels.
    #[arg(long)]
    mesh_file: Option<PathBuf>,
}

fn config(args: Args) -> Result<StudyConfig, HdgError> {
    let mode: SolveMode = args.mode.parse()?;
    let format: OutputFormat = args.format.parse()?;
    let stabilization: Stabilization = args.tau.parse()?;
    if !(args.re > 0.0) || !args.re.is_finite() {
        return Err(HdgError::Config(format!("Reynolds number must be positive and finite, got {}", args.re)));
    }
    Ok(StudyConfig {
        example: Example::from_id(args.example)?,
        k: args.k,
        m: args.m.unwrap_or(args.k),
        levels: args.levels,
        nu: 1.0 / args.re,
        tol: args.tol,
        max_iter: args.max_iter,
        mode,
        stabilization,
        format,
        out: args.out,
        mesh_file: args.mesh_file,
    })
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = || -> Result<i32, HdgError> {
        configure_threads()?;
        let cfg = config(args)?;
        let outcome = run_study(&cfg)?;
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        if cfg.out.is_none() {
            print!("{}", outcome.table);
        }
        Ok(outcome.exit_code())
    };
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
