use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanegame::pipeline::{
    cmd_cluster, cmd_extract, cmd_fit, cmd_games, cmd_report, cmd_simulate, cmd_synth, cmd_validate, run_all, Manifest,
    PipelineConfig, StageOutcome,
};
use lanegame::{Error, Result};

/// Social-dilemma identification and cooperation dynamics for lane-changing
/// interactions.
#[derive(Debug, Parser)]
#[command(name = "lanegame", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic trajectories and a lane map.
    Synth {
        /// Number of lane-change scenarios.
        #[arg(long)]
        events: Option<usize>,
    },
    /// Detect lane-change events in trajectories.
    Extract {
        #[arg(long, requires = "map")]
        trajectories: Option<PathBuf>,
        #[arg(long, requires = "trajectories")]
        map: Option<PathBuf>,
    },
    /// Cluster behaviors and label event outcomes.
    Cluster {
        /// Use this event CSV instead of the extract output.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Estimate the utility model.
    Fit {
        #[arg(long)]
        l1_weight: Option<f64>,
    },
    /// Goodness-of-fit statistics and cross-validation.
    Validate {
        #[arg(long)]
        cv_splits: Option<usize>,
    },
    /// Build payoff tables and classify games.
    Games,
    /// Run the lattice simulation sweep.
    Simulate {
        /// Replicates per configuration.
        #[arg(long)]
        reps: Option<usize>,
        /// Update steps per replicate.
        #[arg(long)]
        steps: Option<usize>,
        /// Sweep all three levels of every axis.
        #[arg(long)]
        full_sweep: bool,
    },
    /// Summarize all stage outputs as Markdown.
    Report,
    /// Run every stage in order.
    All,
    /// Check artifact hashes against the manifest.
    Verify,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn print(outcome: &StageOutcome) {
    println!("{}: {}", outcome.stage, outcome.summary);
    for p in &outcome.outputs {
        println!("  wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    let outcome = match cli.command {
        Command::Synth { events } => {
            if let Some(n) = events {
                cfg.synth.events = n;
            }
            cmd_synth(&cfg)?
        }
        Command::Extract { trajectories, map } => {
            if trajectories.is_some() {
                cfg.input.trajectories = trajectories;
                cfg.input.map = map;
            }
            cmd_extract(&cfg)?
        }
        Command::Cluster { events } => {
            if events.is_some() {
                cfg.input.events = events;
            }
            cmd_cluster(&cfg)?
        }
        Command::Fit { l1_weight } => {
            if let Some(w) = l1_weight {
                cfg.fit.l1_weight = w;
            }
            cmd_fit(&cfg)?
        }
        Command::Validate { cv_splits } => {
            if let Some(n) = cv_splits {
                cfg.validate.cv_splits = n;
            }
            cmd_validate(&cfg)?
        }
        Command::Games => cmd_games(&cfg)?,
        Command::Simulate { reps, steps, full_sweep } => {
            if full_sweep {
                let g = lanegame::evolution::SweepGrid::full_factorial();
                cfg.simulate.neighbor_sizes = g.neighbor_sizes;
                cfg.simulate.noise_ks = g.noise_ks;
                cfg.simulate.mprs = g.mprs;
                cfg.simulate.contact_freqs = g.contact_freqs;
            }
            if let Some(r) = reps {
                cfg.simulate.reps = r;
            }
            if let Some(s) = steps {
                cfg.simulate.steps = s;
            }
            cmd_simulate(&cfg)?
        }
        Command::Report => cmd_report(&cfg)?,
        Command::All => {
            for o in run_all(&cfg)? {
                print(&o);
            }
            return Ok(());
        }
        Command::Verify => {
            Manifest::load(&cfg.out)?.verify(&cfg.out)?;
            println!("manifest in {} verified", cfg.out.display());
            return Ok(());
        }
        Command::ShowConfig => {
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
            return Ok(());
        }
    };
    print(&outcome);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
