use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use cosserat_dem::cases::{self, CaseOutcome, Emit, RunOptions, builtin_case, builtin_cases, config, output};
use cosserat_dem::solver::{self, SolverConfig, SolverKind};

/// Cell-centred discrete element solver for linear Cosserat elasticity.
#[derive(Parser)]
#[command(name = "cosserat-dem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case described by a TOML file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a builtin case (see `list`).
    Case {
        name: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// List the builtin cases.
    List,
}

#[derive(Args)]
struct Opts {
    /// Directory for VTK, CSV and report files.
    #[arg(long, default_value = "output")]
    output_dir: PathBuf,
    /// Uniform refinements of generated meshes.
    #[arg(long, default_value_t = 0)]
    refine: u32,
    /// Linear solver: direct or krylov.
    #[arg(long)]
    solver: Option<String>,
    /// Time step override for dynamic cases.
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Comma-separated artifacts among vtk, csv, report.
    #[arg(long, default_value = "vtk,csv,report")]
    emit: String,
}

impl Opts {
    fn to_run_options(&self, base: Option<SolverConfig>) -> cosserat_dem::Result<RunOptions> {
        solver::set_threads(self.threads)?;
        let mut solver = base.unwrap_or_default();
        if let Some(s) = &self.solver {
            solver.kind = SolverKind::from_str(s)?;
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(cosserat_dem::Error::Config(format!("--dt must be positive, got {dt}")));
            }
        }
        Ok(RunOptions {
            refine: self.refine,
            solver,
            dt: self.dt,
            output_dir: Some(self.output_dir.clone()),
            emit: Emit::parse(&self.emit)?,
        })
    }
}

fn print_outcomes(outcomes: &[CaseOutcome]) {
    for o in outcomes {
        println!("{}", output::report_text(o));
    }
}

fn run(cli: Cli) -> cosserat_dem::Result<()> {
    match cli.command {
        Command::List => {
            for c in builtin_cases() {
                println!("{:<18} {}", c.name, c.description);
            }
        }
        Command::Run { config, opts } => {
            let cfg = config::load(&config)?;
            let options = opts.to_run_options(cfg.solver)?;
            let outcome = cases::run_case(&cfg.spec, &options)?;
            print_outcomes(&[outcome]);
        }
        Command::Case { name, opts } => {
            let case = builtin_case(&name).ok_or_else(|| {
                cosserat_dem::Error::Config(format!("unknown case '{name}'; `cosserat-dem list` shows the builtin cases"))
            })?;
            let options = opts.to_run_options(None)?;
            print_outcomes(&(case.run)(&options)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
