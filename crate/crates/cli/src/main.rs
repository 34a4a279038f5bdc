//! `relay`: correlation surfaces, fidelities, Bell parameter, parameter
//! sweeps and Monte Carlo checks for the entanglement-relay model.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use commands::Run;
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "relay", version, about = "Quantum-dot entanglement relay model")]
struct Cli {
    /// TOML configuration; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Delay grid step.
    #[arg(long = "grid-ps", global = true)]
    grid_ps: Option<f64>,
    /// Coincidence window as `first,second`.
    #[arg(long = "window-ps", global = true, value_parser = parse_window)]
    window_ps: Option<(f64, f64)>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected, unexpected and total g3 surfaces with contrasts.
    G3,
    /// Windowed relay fidelity maps, their average and the diagonal cut.
    Fidelity,
    /// Bell parameter against the B-X delay.
    Bell,
    /// BB84 secret-key fraction from two error rates.
    Keyrate { q_z: f64, q_x: f64 },
    /// Fidelity-optimal intensity over pulse width and delay.
    Sweep,
    /// Simulated detection events histogrammed like the analytic surfaces.
    Mc {
        #[arg(long)]
        n_cycles: Option<u64>,
        /// Also write every detection to `events.csv`.
        #[arg(long)]
        events: bool,
    },
    /// Checks `mc` histograms against `g3` surfaces; fails when they disagree.
    Compare {
        analytic_dir: PathBuf,
        mc_dir: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        min_expected: f64,
    },
    /// Prints the resolved configuration.
    Config,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `first,second`")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", x.trim()));
    Ok((num(a)?, num(b)?))
}

fn execute(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        out_dir: cli.out,
        seed: cli.seed,
        threads: cli.threads,
        grid_ps: cli.grid_ps,
        window_ps: cli.window_ps,
    });
    if let Command::Mc { n_cycles: Some(n), .. } = cli.command {
        cfg.mc.n_cycles = n;
    }
    if let Command::Config = cli.command {
        cfg.validate()?;
        print!("{}", cfg.to_toml()?);
        return Ok(true);
    }
    let run = Run::prepare(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.cfg.run.threads.unwrap_or(0))
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    pool.install(|| match cli.command {
        Command::G3 => commands::g3(&run).map(|_| true),
        Command::Fidelity => commands::fidelity(&run).map(|_| true),
        Command::Bell => commands::bell(&run).map(|_| true),
        Command::Keyrate { q_z, q_x } => {
            let r = commands::keyrate(&run, q_z, q_x)?;
            println!("{r:.3}");
            Ok(true)
        }
        Command::Sweep => commands::sweep_cmd(&run).map(|_| true),
        Command::Mc { events, .. } => commands::mc(&run, events).map(|_| true),
        Command::Compare { analytic_dir, mc_dir, min_expected } => {
            let ok = commands::compare_cmd(&run, &analytic_dir, &mc_dir, min_expected)?;
            if !ok {
                eprintln!("relay: surfaces disagree beyond 3 sigma, see compare.json");
            }
            Ok(ok)
        }
        Command::Config => unreachable!(),
    })
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("relay: {e:#}");
            ExitCode::from(2)
        }
    }
}
