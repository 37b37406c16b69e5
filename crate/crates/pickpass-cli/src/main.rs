//! Command-line front end for the pickpass experiment harness.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 runtime error.

mod commands;
mod play;
mod spec;
mod util;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pickpass",
    about = "Closed-drafting card games: self-play DQN training, evaluation, and analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train self-play DQN models (checkpoints per epoch + training curves).
    Train {
        /// Training spec JSON (game/games/interpolate + train + seeds).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds overriding the spec.
        #[arg(long, value_parser = util::parse_seeds)]
        seeds: Option<Vec<u64>>,
        /// Override the spec's memory flag.
        #[arg(long, value_parser = parse_on_off)]
        memory: Option<bool>,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Card catalog JSON overriding the built-in one.
        #[arg(long)]
        cards: Option<PathBuf>,
    },
    /// Evaluate an agent's win rate against fixed opponents.
    Eval {
        /// Checkpoint to evaluate (game config comes from the checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Baseline agent spec instead: random | priority:<list.json> | dqn:<ckpt>.
        #[arg(long)]
        agent: Option<String>,
        /// Game config JSON (required with --agent).
        #[arg(long)]
        game: Option<PathBuf>,
        /// Opponent spec filling the other seats.
        #[arg(long, default_value = "random")]
        opponent: String,
        #[arg(long, default_value_t = 100)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluation unit: full games or single rounds.
        #[arg(long, default_value = "games")]
        unit: String,
        /// Optional output directory for eval.json + manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write JSON-lines game logs of the evaluation games.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        cards: Option<PathBuf>,
    },
    /// Cross-configuration generalization sweep over trained checkpoints.
    Sweep {
        /// Sweep spec JSON.
        #[arg(long)]
        config: PathBuf,
        /// Directory of checkpoints from `train` (config_<i>/seed_<s>/final.ckpt.json).
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override games per batch.
        #[arg(long)]
        games: Option<usize>,
        /// Override batch count.
        #[arg(long)]
        batches: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cards: Option<PathBuf>,
    },
    /// Memory-influence metric: expected KL divergence under perturbation.
    Meminfluence {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        states: usize,
        #[arg(long, default_value_t = 10)]
        perts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Softmax temperature for the action distribution.
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Memory on/off ablation with a Welch t-test on per-game rewards.
    AblateMemory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long)]
        cards: Option<PathBuf>,
    },
    /// Mine decision rules and reconstruct priority lists from play.
    Interpret {
        /// Checkpoint whose policy to interpret...
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// ...or a baseline agent spec (random | priority:<list.json>).
        #[arg(long)]
        agent: Option<String>,
        /// Rebuild a priority list from JSON-lines game logs instead.
        #[arg(long)]
        from_logs: Option<PathBuf>,
        /// Game config (required with --agent).
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample only the second-to-last round.
        #[arg(long)]
        round_two_only: bool,
        /// Priority-list files to compare against (repeatable).
        #[arg(long)]
        compare: Vec<PathBuf>,
        #[arg(long, default_value_t = 30)]
        trees: usize,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        #[arg(long, default_value_t = 0.5)]
        min_precision: f64,
        #[arg(long, default_value_t = 0.01)]
        min_recall: f64,
        #[arg(long, default_value_t = 5)]
        max_rules: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cards: Option<PathBuf>,
    },
    /// Welch's t-test on two samples (one number per line).
    Stats {
        #[arg(long)]
        xs: PathBuf,
        #[arg(long)]
        ys: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play a game interactively against agents in the terminal.
    Play {
        /// Game config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint providing both the game config and the opponents.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Opponent agents: auto, one spec, or a comma-separated list.
        #[arg(long, default_value = "auto")]
        agents: String,
        /// Your seat index.
        #[arg(long, default_value_t = 0)]
        seat: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Show what the agents' sleuthing knows about each hand.
        #[arg(long)]
        show_memory: bool,
        #[arg(long)]
        cards: Option<PathBuf>,
    },
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on or off, got {other:?}")),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            out,
            seeds,
            memory,
            workers,
            cards,
        } => commands::train(&commands::TrainArgs {
            config,
            out,
            seeds,
            memory,
            workers,
            cards,
        }),
        Command::Eval {
            checkpoint,
            agent,
            game,
            opponent,
            games,
            seed,
            unit,
            out,
            log,
            cards,
        } => commands::eval(&commands::EvalArgs {
            checkpoint,
            agent,
            game,
            opponent,
            games,
            seed,
            unit,
            out,
            log,
            cards,
        }),
        Command::Sweep {
            config,
            checkpoints,
            out,
            games,
            batches,
            seed,
            cards,
        } => commands::sweep(&commands::SweepArgs {
            config,
            checkpoints,
            out,
            games,
            batches,
            seed,
            cards,
        }),
        Command::Meminfluence {
            checkpoint,
            states,
            perts,
            seed,
            temperature,
            out,
        } => commands::meminfluence(&commands::MemInfluenceArgs {
            checkpoint,
            states,
            perts,
            seed,
            temperature,
            out,
        }),
        Command::AblateMemory {
            config,
            out,
            workers,
            cards,
        } => commands::ablate_memory(&commands::AblateArgs {
            config,
            out,
            workers,
            cards,
        }),
        Command::Interpret {
            checkpoint,
            agent,
            from_logs,
            game,
            games,
            seed,
            round_two_only,
            compare,
            trees,
            max_depth,
            min_precision,
            min_recall,
            max_rules,
            out,
            cards,
        } => commands::interpret(&commands::InterpretArgs {
            checkpoint,
            agent,
            from_logs,
            game,
            games,
            seed,
            round_two_only,
            compare,
            trees,
            max_depth,
            min_precision,
            min_recall,
            max_rules,
            out,
            cards,
        }),
        Command::Stats { xs, ys, out } => commands::stats(&commands::StatsArgs { xs, ys, out }),
        Command::Play {
            config,
            checkpoint,
            agents,
            seat,
            seed,
            show_memory,
            cards,
        } => play::play(&play::PlayArgs {
            config,
            checkpoint,
            agents,
            seat,
            seed,
            show_memory,
            cards,
        }),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
