use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gradplast::korn::{constant_skew_field, estimate_min_quotient, korn_quotient};
use gradplast::oracles::self_check;
use gradplast::{FaceSet, KornProblem};
use gradplast_cli::{load_scenario, run_scenario, sweep, CliError, SweepParam};

#[derive(Parser)]
#[command(name = "gradplast", version, about = "Gradient plasticity with plastic spin on box domains")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the load program of a scenario.
    Run { config: PathBuf },
    /// Run one scenario per parameter value and write summary.csv.
    Sweep {
        config: PathBuf,
        /// Lc, k1, k2 or grid.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Estimate the smallest Korn quotient on the scenario grid.
    Korn {
        config: PathBuf,
        /// Drop the tangential boundary condition.
        #[arg(long)]
        no_bc: bool,
        /// Length scale weighting the Curl term.
        #[arg(long, default_value_t = 1.0)]
        length_scale: f64,
        /// Relative eigenvalue tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Run the analytic identity checks.
    OracleCheck,
}

fn korn(config: &std::path::Path, no_bc: bool, length_scale: f64, tol: f64) -> Result<(), CliError> {
    let scenario = load_scenario(config)?;
    let prepared = scenario.prepare()?;
    let faces = if no_bc { FaceSet::empty() } else { prepared.boundary.micro_hard_faces };
    let problem = KornProblem::new(prepared.grid.clone(), faces, length_scale)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let lambda = estimate_min_quotient(&problem, tol).map_err(|source| CliError::Solver { step: 0, source })?;
    println!("lambda_min {lambda:.10e}");
    if lambda > 0.0 {
        println!("korn_constant {:.10e}", 1.0 / lambda.sqrt());
    } else {
        println!("korn_constant inf");
    }
    if faces.is_empty() {
        let q = korn_quotient(&problem, &constant_skew_field(&prepared.grid, [1.0, 0.0, 0.0]))
            .map_err(|source| CliError::Solver { step: 0, source })?;
        println!("constant_skew_quotient {q:e}");
    }
    Ok(())
}

fn oracle_check(quiet: bool) -> Result<(), CliError> {
    let rows = self_check(2024);
    let mut failed = 0;
    for r in &rows {
        if !r.passed {
            failed += 1;
        }
        if !quiet || !r.passed {
            println!("{} {}: {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
        }
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} oracle checks failed")));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let scenario = load_scenario(&config)?;
            let summary = run_scenario(&scenario, &cli.out, cli.quiet)?;
            if !cli.quiet {
                eprintln!(
                    "{} steps, {} outer / {} CG iterations, output in {}",
                    summary.rows.len(),
                    summary.outer_iterations,
                    summary.cg_iterations,
                    cli.out.display()
                );
            }
            Ok(())
        }
        Command::Sweep { config, param, values } => {
            let scenario = load_scenario(&config)?;
            let param: SweepParam = param.parse()?;
            sweep(&scenario, param, &values, &cli.out, cli.quiet)?;
            Ok(())
        }
        Command::Korn {
            config,
            no_bc,
            length_scale,
            tol,
        } => korn(&config, no_bc, length_scale, tol),
        Command::OracleCheck => oracle_check(cli.quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
