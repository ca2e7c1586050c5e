use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use rebel_cli::{baseline, checks, exit, play, rebel, ConfigError, ExperimentConfig, Resolved};

#[derive(Parser)]
#[command(
    name = "rebel",
    version,
    about = "Run solver baselines, value-network training and invariant checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-game tabular solver with exploitability checkpoints.
    Baseline(Common),
    /// Self-play training with periodic evaluation.
    Rebel(Common),
    /// Invariant suite; exits with 1 if any check fails.
    Checks(Common),
    /// Play one game against the agent on the terminal.
    Play {
        #[command(flatten)]
        common: Common,
        /// Your seat, 1 or 2.
        #[arg(long, default_value_t = 1)]
        seat: usize,
        /// Network weights written by `rebel`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn resolve(c: &Common) -> Result<Resolved> {
    let config = ExperimentConfig::load(&c.config)?;
    let out = c
        .out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| Some(std::env::temp_dir().join("rebel-play")));
    Ok(config.resolve(c.seed, out)?)
}

fn run(cli: Cli) -> Result<i32> {
    Ok(match cli.command {
        Command::Baseline(c) => {
            let s = baseline::run_baseline(&resolve_strict(&c)?)?;
            println!(
                "{} {} iterations {}: exploitability {:.6}",
                s.game, s.solver, s.iterations, s.exploitability
            );
            exit::SUCCESS
        }
        Command::Rebel(c) => {
            let s = rebel::run_rebel(&resolve_strict(&c)?)?;
            println!(
                "{} rebel ({:?} values): final exploitability {:.6}",
                s.game, s.value, s.exploitability
            );
            exit::SUCCESS
        }
        Command::Checks(c) => {
            let s = checks::run_checks(&resolve_strict(&c)?)?;
            for r in &s.checks {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!(
                    "{tag} {:<28} measured {:.3e} threshold {:.3e}  {}",
                    r.name, r.measured, r.threshold, r.detail
                );
            }
            if s.passed {
                exit::SUCCESS
            } else {
                exit::CHECK_FAILED
            }
        }
        Command::Play {
            common,
            seat,
            checkpoint,
        } => {
            if !(1..=2).contains(&seat) {
                return Err(ConfigError("seat must be 1 or 2".into()).into());
            }
            let resolved = resolve(&common)?;
            let stdin = io::stdin();
            play::run_play(
                &resolved,
                seat - 1,
                checkpoint.as_deref(),
                &mut stdin.lock(),
                &mut io::stdout(),
            )?;
            exit::SUCCESS
        }
    })
}

/// Experiments that write results need an explicit output directory.
fn resolve_strict(c: &Common) -> Result<Resolved> {
    let config = ExperimentConfig::load(&c.config)?;
    Ok(config.resolve(c.seed, c.out.clone())?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                exit::CONFIG_ERROR
            } else {
                exit::CHECK_FAILED
            }
        }
    };
    ExitCode::from(code as u8)
}
