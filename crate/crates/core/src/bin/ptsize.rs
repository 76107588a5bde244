use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powertrain_sizing::config::ToolkitConfig;
use powertrain_sizing::pipeline::{self, CommandOutput};
use powertrain_sizing::Result;

/// Minimum-energy sizing of an EV motor and fixed-gear transmission.
#[derive(Parser)]
#[command(name = "ptsize", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `paths.out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sample plan, oracle efficiency maps and battery samples.
    Sample(Common),
    /// Fit the loss surrogate and battery model.
    Fit(Common),
    /// Solve for the minimum-energy design.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Multi-start seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cross-check against the dense grid.
        #[arg(long, overrides_with = "no_grid")]
        grid: bool,
        /// Skip the grid cross-check.
        #[arg(long)]
        no_grid: bool,
    },
    /// Re-simulate the optimum through the oracle.
    Validate(Common),
    /// Write plot-ready maps, trajectories and a summary.
    Report(Common),
}

fn load(common: &Common) -> Result<(ToolkitConfig, PathBuf)> {
    let cfg = ToolkitConfig::load(common.config.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| cfg.paths.out.clone());
    Ok((cfg, out))
}

type Cmd = fn(&ToolkitConfig, &Path) -> Result<CommandOutput>;

fn run(cli: Cli) -> Result<CommandOutput> {
    let (common, f): (&Common, Cmd) = match &cli.command {
        Command::Sample(c) => (c, pipeline::cmd_sample),
        Command::Fit(c) => (c, pipeline::cmd_fit),
        Command::Validate(c) => (c, pipeline::cmd_validate),
        Command::Report(c) => (c, pipeline::cmd_report),
        Command::Optimize {
            common,
            seed,
            grid,
            no_grid,
        } => {
            let (mut cfg, out) = load(common)?;
            if let Some(s) = seed {
                cfg.solver.seed = *s;
            }
            if *grid {
                cfg.solver.crosscheck = true;
            }
            if *no_grid {
                cfg.solver.crosscheck = false;
            }
            return pipeline::cmd_optimize(&cfg, &out);
        }
    };
    let (cfg, out) = load(common)?;
    f(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
