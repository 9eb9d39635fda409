use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use swirhc_cli::config::{default_placement, InputConfig, Mode, RunConfig};
use swirhc_cli::runner;

/// Receding-horizon stabilization experiments on the unit square.
#[derive(Parser)]
#[command(name = "swirhc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV artifacts.
    Run(RunArgs),
    /// Print an aligned table comparing run summaries.
    Compare {
        /// Paths to summary.csv files.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Print the default actuator placement for a family size.
    Placements {
        /// Family size (3, 4, 9, or 12).
        #[arg(long)]
        m: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Preset name: free, switch_m3, switch_m4, switch_m9, switch_m12,
    /// nonswitch_m4.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML config file (may itself name a preset and override fields).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the run label used in summaries.
    #[arg(long)]
    label: Option<String>,
    /// Override the control mode: free, switching, nonswitching.
    #[arg(long)]
    mode: Option<String>,
    /// Override the mesh resolution (cells per side).
    #[arg(long)]
    mesh_n: Option<usize>,
    /// Override the total simulated time.
    #[arg(long)]
    t_infinity: Option<f64>,
    /// Override the prediction horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the sampling time.
    #[arg(long)]
    delta: Option<f64>,
    /// Override the inner time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the control penalty.
    #[arg(long)]
    beta: Option<f64>,
    /// Override the diffusion coefficient.
    #[arg(long)]
    nu: Option<f64>,
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "free" => Ok(Mode::Free),
        "switching" => Ok(Mode::Switching),
        "nonswitching" => Ok(Mode::Nonswitching),
        other => bail!("unknown mode `{other}` (free, switching, nonswitching)"),
    }
}

fn resolve_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => RunConfig::preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
            InputConfig::parse(&text)?.resolve()?
        }
        (None, None) => bail!("pass either --preset or --config"),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    if let Some(v) = &args.label {
        cfg.label = v.clone();
    }
    if let Some(v) = &args.mode {
        cfg.mode = parse_mode(v)?;
    }
    if let Some(v) = args.mesh_n {
        cfg.mesh_n = v;
    }
    if let Some(v) = args.t_infinity {
        cfg.t_infinity = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.nu {
        cfg.nu = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = resolve_run_config(&args)?;
            let outcome = runner::run_experiment(&cfg, &args.out)?;
            println!(
                "{}: cost = {:.6e}, final dual norm = {:.6e}, {} windows, {:.1}s",
                outcome.summary.label,
                outcome.summary.accumulated_cost,
                outcome.summary.final_vprime_norm,
                outcome.summary.windows,
                outcome.wall_seconds,
            );
            if outcome.summary.aborted {
                bail!("run aborted; see {}/FAILED", args.out.display());
            }
            Ok(())
        }
        Command::Compare { summaries } => {
            print!("{}", runner::compare_runs(&summaries)?);
            Ok(())
        }
        Command::Placements { m } => {
            println!("x1,x2");
            for p in default_placement(m)? {
                println!("{},{}", p[0], p[1]);
            }
            Ok(())
        }
    }
}
