//! Interactive terminal play: a human takes one seat via numbered prompts,
//! agents fill the rest. The session core is generic over its input/output
//! streams so tests can drive it.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use pickpass::agents::Agent;
use pickpass::cards::{GameConfig, KindId};
use pickpass::dqn::{Checkpoint, DqnAgent};
use pickpass::sim::{derive_seed, Rollout};
use pickpass::{Error, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::util::{load_catalog, load_game_config, OpponentSpec};

pub struct PlayArgs {
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub agents: String,
    pub seat: usize,
    pub seed: u64,
    pub show_memory: bool,
    pub cards: Option<PathBuf>,
}

pub fn play(args: &PlayArgs) -> Result<()> {
    let (game, default_agent): (GameConfig, Option<Box<dyn Agent>>) =
        match (&args.checkpoint, &args.config) {
            (Some(path), _) => {
                let ckpt = Checkpoint::load(path)?;
                let agent = DqnAgent::from_checkpoint(&ckpt)?;
                (ckpt.game_config, Some(Box::new(agent)))
            }
            (None, Some(path)) => {
                let catalog = load_catalog(&args.cards)?;
                (load_game_config(path, &catalog)?, None)
            }
            (None, None) => {
                return Err(Error::Config(
                    "play needs --config or --checkpoint".into(),
                ))
            }
        };
    if args.seat >= game.players {
        return Err(Error::Config(format!(
            "seat {} out of range for {} players",
            args.seat, game.players
        )));
    }

    // One agent per non-human seat: either copies of the checkpoint agent /
    // a single spec, or a comma-separated list.
    let mut agents: Vec<Box<dyn Agent>> = Vec::new();
    if args.agents.contains(',') {
        for part in args.agents.split(',') {
            agents.push(OpponentSpec::parse(part.trim())?.build(&game.menu)?);
        }
        if agents.len() != game.players - 1 {
            return Err(Error::Config(format!(
                "{} agents listed for {} non-human seats",
                agents.len(),
                game.players - 1
            )));
        }
    } else {
        for _ in 0..game.players - 1 {
            let agent: Box<dyn Agent> = match (&default_agent, args.agents.as_str()) {
                (Some(_), "auto") => {
                    let ckpt = Checkpoint::load(args.checkpoint.as_ref().expect("set above"))?;
                    Box::new(DqnAgent::from_checkpoint(&ckpt)?)
                }
                (None, "auto") => OpponentSpec::parse("random")?.build(&game.menu)?,
                (_, spec) => OpponentSpec::parse(spec)?.build(&game.menu)?,
            };
            agents.push(agent);
        }
    }

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    play_session(
        &game,
        &agents,
        args.seat,
        args.seed,
        args.show_memory,
        &mut stdin.lock(),
        &mut stdout.lock(),
    )
}

/// Runs one full game, prompting the human seat each turn. Invalid input
/// re-prompts; EOF aborts cleanly.
pub fn play_session(
    game: &GameConfig,
    agents: &[Box<dyn Agent>],
    human_seat: usize,
    seed: u64,
    show_memory: bool,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let mut rollout = Rollout::new(game.with_seed(derive_seed(seed, 0)))?;
    let mut rngs: Vec<ChaCha8Rng> = (0..game.players)
        .map(|s| ChaCha8Rng::seed_from_u64(derive_seed(seed, 1 + s as u64)))
        .collect();

    writeln!(output, "pick-and-pass: you are seat {human_seat} of {}", game.players)?;
    loop {
        let state = rollout.state();
        writeln!(
            output,
            "\n== round {} turn {} | scores {:?} ==",
            state.round() + 1,
            state.turn() + 1,
            state.scores()
        )?;
        for seat in 0..game.players {
            let board = state.board(seat);
            let cards: Vec<String> = board
                .play_order
                .iter()
                .map(|p| game.menu.kind(p.kind).name.clone())
                .collect();
            let marker = if seat == human_seat { "*" } else { " " };
            writeln!(output, "{marker}seat {seat} board: [{}]", cards.join(", "))?;
        }
        if show_memory {
            for seat in 0..game.players {
                if seat == human_seat {
                    continue;
                }
                match rollout.tracker().sleuth(human_seat, seat) {
                    Some(hand) => {
                        let known: Vec<String> = hand
                            .kinds_present()
                            .iter()
                            .map(|&k| format!("{}x{}", game.menu.kind(k).name, hand.count(k)))
                            .collect();
                        writeln!(output, " memory: seat {seat} holds [{}]", known.join(", "))?;
                    }
                    None => writeln!(output, " memory: seat {seat} hand unknown")?,
                }
            }
        }

        let legal = pickpass::game::legal_actions(state, human_seat)?;
        writeln!(output, "your hand:")?;
        for (i, &k) in legal.iter().enumerate() {
            writeln!(
                output,
                "  [{i}] {} x{}",
                game.menu.kind(k).name,
                state.hand(human_seat).count(k)
            )?;
        }
        let human_action = loop {
            write!(output, "pick a card [0-{}]: ", legal.len() - 1)?;
            output.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                writeln!(output, "\n(eof) game aborted")?;
                return Ok(());
            }
            match line.trim().parse::<usize>() {
                Ok(i) if i < legal.len() => break legal[i],
                _ => writeln!(output, "invalid input, try again")?,
            }
        };

        let mut actions: Vec<KindId> = Vec::with_capacity(game.players);
        let mut agent_idx = 0;
        for seat in 0..game.players {
            if seat == human_seat {
                actions.push(human_action);
            } else {
                let obs = rollout.observe(seat, agents[agent_idx].wants_memory());
                actions.push(agents[agent_idx].act(&obs, &mut rngs[seat])?);
                agent_idx += 1;
            }
        }
        let result = rollout.step(&actions)?;
        let reveal: Vec<String> = actions
            .iter()
            .enumerate()
            .map(|(s, &k)| format!("seat {s}: {}", game.menu.kind(k).name))
            .collect();
        writeln!(output, "revealed -> {}", reveal.join(" | "))?;
        if let Some(deltas) = &result.round_deltas {
            writeln!(output, "round scored: deltas {deltas:?}")?;
        }
        if let Some(final_result) = &result.final_result {
            writeln!(output, "\n=== final ===")?;
            for seat in 0..game.players {
                let marker = if final_result.winners.contains(&seat) { " (winner)" } else { "" };
                writeln!(
                    output,
                    "seat {seat}: {} points ({} from desserts){marker}",
                    final_result.final_scores[seat], final_result.dessert_deltas[seat]
                )?;
            }
            if final_result.winners.contains(&human_seat) {
                writeln!(output, "you win!")?;
            }
            return Ok(());
        }
    }
}
