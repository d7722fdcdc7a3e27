use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curveflow_cli::commands;
use curveflow_cli::{CliError, CliResult};

/// Parametric finite element simulations of surface diffusion and
/// solid-state dewetting.
#[derive(Parser)]
#[command(name = "curveflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        /// Config file, or a preset name.
        config: String,
        /// Override a setting, e.g. --set N=64 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Take this many steps instead of T/dt.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Temporal convergence study over halving time steps.
    Converge {
        config: String,
        /// Comma-separated time steps, e.g. 1/40,1/80,1/160.
        #[arg(long)]
        dt_list: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a parameter grid, e.g. --grid "scheme=bdf1_sav,bdf2_sav;r=3,6".
    Sweep {
        config: String,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Render SVG plots of a run directory.
    Plot { dir: PathBuf },
    /// List the built-in presets.
    Presets,
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config, set, steps } => {
            let (raw, name) = commands::load(&config, &set)?;
            let out = commands::run(&raw, &name, steps)?;
            println!("wrote {}", out.dir.display());
        }
        Command::Converge {
            config,
            dt_list,
            set,
        } => {
            let (raw, name) = commands::load(&config, &set)?;
            let out = commands::converge(&raw, &name, dt_list.as_deref())?;
            println!("{:>12}  {:>12}  {:>7}", "dt", "error", "order");
            for row in &out.table.rows {
                let order = row.order.map(|o| format!("{o:.3}")).unwrap_or_default();
                println!("{:>12.6e}  {:>12.6e}  {order:>7}", row.dt, row.error);
            }
            println!("wrote {}", out.dir.display());
        }
        Command::Sweep { config, grid, set } => {
            let (raw, name) = commands::load(&config, &set)?;
            let out = commands::sweep(&raw, &name, grid.as_deref())?;
            let failures = out.failures();
            println!(
                "{} of {} grid points succeeded; wrote {}",
                out.points.len() - failures.len(),
                out.points.len(),
                out.dir.display()
            );
            if !failures.is_empty() {
                let list: Vec<String> = failures
                    .iter()
                    .map(|p| format!("{}: {}", p.dir, p.result.as_ref().unwrap_err()))
                    .collect();
                return Err(CliError::Numerical(format!(
                    "{} grid points failed:\n  {}",
                    failures.len(),
                    list.join("\n  ")
                )));
            }
        }
        Command::Plot { dir } => {
            for f in commands::plot(&dir)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Presets => print!("{}", commands::preset_listing()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("curveflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
