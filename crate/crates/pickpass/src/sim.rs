//! Game rollouts: a state + memory tracker pair that agents drive, plus the
//! seeded single-game runner used by evaluation, logging, and dataset
//! collection. One rollout is strictly single-threaded; run many in parallel
//! with independent seeds.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::Agent;
use crate::cards::{ConfigRef, GameConfig, KindId};
use crate::error::{Error, Result};
use crate::game::{new_game_shared, step, FinalResult, GameState, StepResult};
use crate::observe::{encode, FeatureLayout, MemoryTracker, Observation};

/// SplitMix64 mixing for independent per-game / per-stream seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A live game with its per-round memory tracker and both feature layouts.
pub struct Rollout {
    state: GameState,
    tracker: MemoryTracker,
    layout_plain: FeatureLayout,
    layout_memory: FeatureLayout,
}

impl Rollout {
    pub fn new(config: GameConfig) -> Result<Self> {
        Self::from_shared(ConfigRef::new(config))
    }

    pub fn from_shared(config: ConfigRef) -> Result<Self> {
        let layout_plain = FeatureLayout::new(&config, false);
        let layout_memory = FeatureLayout::new(&config, true);
        let state = new_game_shared(config)?;
        let tracker = MemoryTracker::start_round(&state);
        Ok(Rollout {
            state,
            tracker,
            layout_plain,
            layout_memory,
        })
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn tracker(&self) -> &MemoryTracker {
        &self.tracker
    }

    pub fn layout(&self, memory: bool) -> &FeatureLayout {
        if memory {
            &self.layout_memory
        } else {
            &self.layout_plain
        }
    }

    pub fn observe(&self, seat: usize, memory: bool) -> Observation {
        encode(&self.state, &self.tracker, seat, self.layout(memory))
    }

    /// Advances the game and the tracker together.
    pub fn step(&mut self, actions: &[KindId]) -> Result<StepResult> {
        let turn = self.state.turn();
        let result = step(&self.state, actions)?;
        self.state = result.state.clone();
        if self.state.turn() == 0 {
            // Round boundary: a fresh deal circulates next round.
            if !self.state.is_finished() {
                self.tracker = MemoryTracker::start_round(&self.state);
            }
        } else {
            self.tracker.record_turn(turn, actions)?;
        }
        Ok(result)
    }
}

/// Observers of a running game; all callbacks fire before the pick applies
/// (`on_pick`) or right after scoring (`on_round_end`, `on_game_end`).
/// Multi-game runners announce each game via `on_game_begin`.
pub trait GameHook {
    fn on_game_begin(&mut self, _game_index: usize) {}
    fn on_pick(&mut self, _state: &GameState, _seat: usize, _obs: &Observation, _action: KindId) {}
    fn on_round_end(&mut self, _state: &GameState, _deltas: &[i64]) {}
    fn on_game_end(&mut self, _state: &GameState, _final_result: &FinalResult) {}
}

/// Hook that does nothing.
pub struct NoHook;

impl GameHook for NoHook {}

#[derive(Debug, Clone)]
pub struct GameOutcome {
    pub final_scores: Vec<i64>,
    pub dessert_deltas: Vec<i64>,
    pub winners: Vec<usize>,
    /// Per-seat reward: final score, plus 100 for each winning seat.
    pub rewards: Vec<f64>,
}

pub const WIN_BONUS: f64 = 100.0;

impl GameOutcome {
    fn from_final(final_result: &FinalResult) -> Self {
        let rewards = final_result
            .final_scores
            .iter()
            .enumerate()
            .map(|(seat, &score)| {
                score as f64
                    + if final_result.winners.contains(&seat) {
                        WIN_BONUS
                    } else {
                        0.0
                    }
            })
            .collect();
        GameOutcome {
            final_scores: final_result.final_scores.clone(),
            dessert_deltas: final_result.dessert_deltas.clone(),
            winners: final_result.winners.clone(),
            rewards,
        }
    }
}

/// Plays one seeded game with one agent per seat. Agent rng streams derive
/// from `seed`, the deal derives from the config's own seed.
pub fn play_game(
    agents: &[&dyn Agent],
    config: &GameConfig,
    seed: u64,
    hook: &mut dyn GameHook,
) -> Result<GameOutcome> {
    if agents.len() != config.players {
        return Err(Error::Config(format!(
            "{} agents for {} seats",
            agents.len(),
            config.players
        )));
    }
    let mut rollout = Rollout::new(config.with_seed(derive_seed(seed, 0)))?;
    let mut rngs: Vec<ChaCha8Rng> = (0..agents.len())
        .map(|seat| ChaCha8Rng::seed_from_u64(derive_seed(seed, 1 + seat as u64)))
        .collect();

    loop {
        let mut actions = Vec::with_capacity(agents.len());
        for (seat, agent) in agents.iter().enumerate() {
            let obs = rollout.observe(seat, agent.wants_memory());
            let action = agent.act(&obs, &mut rngs[seat])?;
            hook.on_pick(rollout.state(), seat, &obs, action);
            actions.push(action);
        }
        let result = rollout.step(&actions)?;
        if let Some(deltas) = &result.round_deltas {
            hook.on_round_end(&result.state, deltas);
        }
        if let Some(final_result) = &result.final_result {
            hook.on_game_end(&result.state, final_result);
            return Ok(GameOutcome::from_final(final_result));
        }
    }
}
