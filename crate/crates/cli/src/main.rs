use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use saw_sle::observables::ObservableKind;
use saw_sle::run::{self, unfold_check, SimulateOptions};
use saw_sle::sle::ExactCdf;
use saw_sle::stats::default_grid;
use saw_sle::{Domain, Error, Result, RunConfig};

/// Pivot-algorithm self-avoiding walks against exact SLE(8/3) laws.
#[derive(Parser, Debug)]
#[command(name = "sawsle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the chains of a configuration and write one CSV per observable.
    Simulate {
        /// TOML run configuration.
        #[arg(long, short)]
        config: PathBuf,
        /// Override a top-level key, e.g. `--set n=20000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Continue from the checkpoints in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop every chain after this many iterations, leaving checkpoints.
        #[arg(long, value_name = "ITERATIONS")]
        stop_after: Option<u64>,
    },
    /// Print an exact distribution function on a grid as `t,exact` CSV.
    Exact {
        /// xe, ye, theta-e or pass-right. Pass-right takes angles in radians.
        kind: ObservableKind,
        /// Horizontal offset of the circle centre, for theta-e.
        #[arg(long, default_value_t = 0.0)]
        d: f64,
        /// Comma-separated grid points; the observable's default grid if absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Recompute the exact and difference columns of existing CSVs.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Write the refreshed curves back to the files.
        #[arg(long)]
        write: bool,
    },
    /// Unfold every walk up to a length into the straight walk and check each move.
    UnfoldCheck {
        #[arg(long, default_value_t = 10)]
        max_length: usize,
        #[arg(long, default_value = "half-plane")]
        domain: Domain,
    },
}

fn exact_law(kind: ObservableKind, d: f64) -> Result<ExactCdf> {
    match kind {
        ObservableKind::Xe => Ok(ExactCdf::Xe),
        ObservableKind::Ye => Ok(ExactCdf::Ye),
        ObservableKind::ThetaE => Ok(ExactCdf::ThetaE { d }),
        ObservableKind::PassRight => Ok(ExactCdf::PassRight),
        other => Err(Error::Config(format!("{other} has no exact law"))),
    }
}

fn exact_table(kind: ObservableKind, d: f64, grid: Option<Vec<f64>>) -> Result<String> {
    let law = exact_law(kind, d)?;
    let pass_right = kind == ObservableKind::PassRight;
    let grid = grid.unwrap_or_else(|| {
        let g = default_grid(kind);
        if pass_right {
            g.into_iter().map(|u| u * std::f64::consts::PI).collect()
        } else {
            g
        }
    });
    let mut out = format!("# observable: {kind}\n");
    if kind == ObservableKind::ThetaE {
        let _ = writeln!(out, "# d: {d}");
    }
    out.push_str("t,exact\n");
    for t in grid {
        let arg = if pass_right { t / std::f64::consts::PI } else { t };
        let _ = writeln!(out, "{t},{}", law.eval(arg)?);
    }
    Ok(out)
}

/// Returns false when a check ran but found failures.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Simulate {
            config,
            overrides,
            resume,
            stop_after,
        } => {
            let config = RunConfig::load(&config)?.with_overrides(&overrides)?;
            let report = run::simulate(&config, SimulateOptions { resume, stop_after })?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", report.render());
        }
        Command::Exact { kind, d, grid, output } => {
            let table = exact_table(kind, d, grid)?;
            match output {
                Some(path) => run::write_atomic(&path, table.as_bytes())?,
                None => print!("{table}"),
            }
        }
        Command::Compare { files, write } => {
            for path in files {
                let curve = run::compare(&path)?;
                println!("{}: max |diff| = {:.6}", path.display(), curve.ks());
                if write {
                    run::write_atomic(&path, curve.to_csv().as_bytes())?;
                }
            }
        }
        Command::UnfoldCheck { max_length, domain } => {
            let report = unfold_check(max_length, domain)?;
            print!("{}", report.render());
            return Ok(report.violations.is_empty());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = execute(cli.command);
    let _ = std::io::stdout().flush();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
