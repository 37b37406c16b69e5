//! Analysis pipelines: win-rate evaluation with seat rotation, the
//! memory-influence metric (expected KL divergence under memory
//! perturbation), and the cross-configuration generalization sweep.

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::cards::GameConfig;
pub use crate::cards::envsim;
use crate::dqn::{policy_distribution, DqnAgent};
use crate::error::{Error, Result};
use crate::net::QNetwork;
use crate::observe::{perturb_memory, FeatureLayout, Observation};
use crate::sim::{derive_seed, play_game, NoHook, Rollout};
use crate::stats::{kl_divergence, sample_variance, wilson_interval, Z_95};

/// Common denominator for exact fractional win credit: a game with k winners
/// credits each with `WIN_CREDIT_DENOM / k` units, so every game contributes
/// exactly `WIN_CREDIT_DENOM` units across seats (k divides 840 for k <= 8).
pub const WIN_CREDIT_DENOM: u64 = 840;

#[derive(Debug, Clone, Serialize)]
pub struct WinRateReport {
    pub win_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub n_games: usize,
    /// Win credit in units of 1/840 per game (exact tie accounting).
    pub credit_units: u64,
    /// Per-game reward of the evaluated agent (score + 100 on win, shared
    /// wins credited fractionally in `credit_units` but fully here).
    #[serde(skip)]
    pub agent_rewards: Vec<f64>,
}

/// Win rate of `agent` against fixed opponents over seeded games, rotating
/// the agent's seat each game to cancel positional bias. Ties credit
/// `1/|winners|`.
pub fn evaluate_win_rate(
    agent: &dyn Agent,
    opponents: &[&dyn Agent],
    config: &GameConfig,
    n_games: usize,
    seed: u64,
) -> Result<WinRateReport> {
    evaluate_win_rate_with(agent, opponents, config, n_games, seed, &mut NoHook)
}

/// [`evaluate_win_rate`] with a game hook attached (e.g. a log recorder).
pub fn evaluate_win_rate_with(
    agent: &dyn Agent,
    opponents: &[&dyn Agent],
    config: &GameConfig,
    n_games: usize,
    seed: u64,
    hook: &mut dyn crate::sim::GameHook,
) -> Result<WinRateReport> {
    if n_games == 0 {
        return Err(Error::Config("n_games must be positive".into()));
    }
    if opponents.len() != config.players - 1 {
        return Err(Error::Config(format!(
            "{} opponents for a {}-player game",
            opponents.len(),
            config.players
        )));
    }
    let players = config.players;
    let mut credit_units = 0u64;
    let mut agent_rewards = Vec::with_capacity(n_games);
    for g in 0..n_games {
        let agent_seat = g % players;
        let mut seats: Vec<&dyn Agent> = Vec::with_capacity(players);
        let mut next_opponent = 0;
        for seat in 0..players {
            if seat == agent_seat {
                seats.push(agent);
            } else {
                seats.push(opponents[next_opponent]);
                next_opponent += 1;
            }
        }
        hook.on_game_begin(g);
        let outcome = play_game(&seats, config, derive_seed(seed, g as u64), hook)?;
        if outcome.winners.contains(&agent_seat) {
            credit_units += WIN_CREDIT_DENOM / outcome.winners.len() as u64;
        }
        agent_rewards.push(outcome.rewards[agent_seat]);
    }
    let win_rate = credit_units as f64 / (WIN_CREDIT_DENOM * n_games as u64) as f64;
    let (wilson_low, wilson_high) = wilson_interval(win_rate, n_games, Z_95);
    Ok(WinRateReport {
        win_rate,
        wilson_low,
        wilson_high,
        n_games,
        credit_units,
        agent_rewards,
    })
}

/// Win rate counted per single round instead of per game: full games are
/// played and each round's winner is the seat with the highest round-score
/// delta (dessert points cannot be attributed to one round and are ignored;
/// ties share credit). `n_rounds` rounds are tallied.
pub fn evaluate_round_win_rate(
    agent: &dyn Agent,
    opponents: &[&dyn Agent],
    config: &GameConfig,
    n_rounds: usize,
    seed: u64,
) -> Result<WinRateReport> {
    if n_rounds == 0 {
        return Err(Error::Config("n_rounds must be positive".into()));
    }
    if opponents.len() != config.players - 1 {
        return Err(Error::Config(format!(
            "{} opponents for a {}-player game",
            opponents.len(),
            config.players
        )));
    }
    struct RoundTally {
        agent_seat: usize,
        counted: usize,
        limit: usize,
        credit_units: u64,
        agent_deltas: Vec<f64>,
    }
    impl crate::sim::GameHook for RoundTally {
        fn on_round_end(&mut self, _state: &crate::game::GameState, deltas: &[i64]) {
            if self.counted >= self.limit {
                return;
            }
            let best = *deltas.iter().max().expect("players >= 2");
            let winners: Vec<usize> = (0..deltas.len()).filter(|&s| deltas[s] == best).collect();
            if winners.contains(&self.agent_seat) {
                self.credit_units += WIN_CREDIT_DENOM / winners.len() as u64;
            }
            self.agent_deltas.push(deltas[self.agent_seat] as f64);
            self.counted += 1;
        }
    }

    let players = config.players;
    let mut tally = RoundTally {
        agent_seat: 0,
        counted: 0,
        limit: n_rounds,
        credit_units: 0,
        agent_deltas: Vec::with_capacity(n_rounds),
    };
    let mut g = 0usize;
    while tally.counted < n_rounds {
        let agent_seat = g % players;
        tally.agent_seat = agent_seat;
        let mut seats: Vec<&dyn Agent> = Vec::with_capacity(players);
        let mut next_opponent = 0;
        for seat in 0..players {
            if seat == agent_seat {
                seats.push(agent);
            } else {
                seats.push(opponents[next_opponent]);
                next_opponent += 1;
            }
        }
        play_game(&seats, config, derive_seed(seed, g as u64), &mut tally)?;
        g += 1;
    }
    let win_rate = tally.credit_units as f64 / (WIN_CREDIT_DENOM * n_rounds as u64) as f64;
    let (wilson_low, wilson_high) = wilson_interval(win_rate, n_rounds, Z_95);
    Ok(WinRateReport {
        win_rate,
        wilson_low,
        wilson_high,
        n_games: n_rounds,
        credit_units: tally.credit_units,
        agent_rewards: tally.agent_deltas,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationRecord {
    pub state_index: usize,
    pub perturbation: usize,
    pub kl: f64,
    /// Greedy action of the unperturbed policy.
    pub original_action: usize,
    /// Greedy action after the perturbation.
    pub perturbed_action: usize,
    /// |p'(a*) - p(a*)| for the original top action a*.
    pub probability_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateInfluence {
    pub state_index: usize,
    pub round: usize,
    pub turn: usize,
    pub mean_kl: f64,
    pub max_kl: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemInfluenceReport {
    /// Mean KL(perturbed || original) over all sampled states/perturbations.
    pub mean_kl: f64,
    pub n_states: usize,
    pub n_perturbations: usize,
    pub temperature: f64,
    pub per_state: Vec<StateInfluence>,
    /// The perturbation with the largest probability shift.
    pub max_shift: PerturbationRecord,
    #[serde(skip)]
    pub all_records: Vec<PerturbationRecord>,
}

/// Approximates the expected KL divergence between the action distribution
/// before and after perturbing one remembered card, sampling `n_states`
/// observations from the second half of each round (turn >= ceil(H/2), when
/// the cards have rotated at least once around) of greedy self-play games.
pub fn mem_influence(
    net: &QNetwork,
    layout: &FeatureLayout,
    game: &GameConfig,
    n_states: usize,
    n_pert: usize,
    seed: u64,
    temperature: f64,
) -> Result<MemInfluenceReport> {
    if !layout.memory {
        return Err(Error::Config(
            "mem_influence needs a memory-enabled network".into(),
        ));
    }
    FeatureLayout::new(game, true).check_compatible(layout)?;
    if n_states == 0 || n_pert == 0 {
        return Err(Error::Config("n_states and n_pert must be positive".into()));
    }

    // Pool of candidate observations from greedy self-play.
    let min_turn = game.hand_size.div_ceil(2);
    let mut pool: Vec<(Observation, usize, usize)> = Vec::new();
    let target_pool = n_states.saturating_mul(10);
    let mut greedy_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let agent = DqnAgent::new(net.clone(), layout.clone(), "probe");
    let mut game_index = 0u64;
    while pool.len() < target_pool && game_index < 4096 {
        let mut rollout = Rollout::new(game.with_seed(derive_seed(seed, 100 + game_index)))?;
        game_index += 1;
        loop {
            for seat in 0..game.players {
                if rollout.state().turn() >= min_turn {
                    let obs = rollout.observe(seat, true);
                    let (known, hand) = layout
                        .upstream_memory_section()
                        .expect("memory layout checked");
                    let hand_total: f64 =
                        obs.features[hand.offset..hand.offset + hand.len].iter().sum();
                    if obs.features[known.offset] == 1.0 && hand_total > 0.0 {
                        pool.push((obs, rollout.state().round(), rollout.state().turn()));
                    }
                }
            }
            let mut actions = Vec::with_capacity(game.players);
            for seat in 0..game.players {
                let obs = rollout.observe(seat, true);
                actions.push(agent.act(&obs, &mut greedy_rng)?);
            }
            if rollout.step(&actions)?.final_result.is_some() {
                break;
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::Config(
            "no perturbable states found; is the second half of the round reachable?".into(),
        ));
    }

    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let mut pick_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    indices.shuffle(&mut pick_rng);
    indices.truncate(n_states);

    let mut pert_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let mut all_records = Vec::with_capacity(indices.len() * n_pert);
    let mut per_state = Vec::with_capacity(indices.len());
    let mut total_kl = 0.0;
    for (state_index, &pool_idx) in indices.iter().enumerate() {
        let (obs, round, turn) = &pool[pool_idx];
        let p = policy_distribution(net, obs, temperature)?;
        let original_action = argmax(&p);
        let mut state_sum = 0.0;
        let mut state_max = 0.0f64;
        for perturbation in 0..n_pert {
            let perturbed = perturb_memory(obs, layout, &mut pert_rng)?;
            let q = policy_distribution(net, &perturbed, temperature)?;
            let kl = kl_divergence(&q, &p)?;
            let record = PerturbationRecord {
                state_index,
                perturbation,
                kl,
                original_action,
                perturbed_action: argmax(&q),
                probability_shift: (q[original_action] - p[original_action]).abs(),
            };
            state_sum += kl;
            state_max = state_max.max(kl);
            total_kl += kl;
            all_records.push(record);
        }
        per_state.push(StateInfluence {
            state_index,
            round: *round,
            turn: *turn,
            mean_kl: state_sum / n_pert as f64,
            max_kl: state_max,
        });
    }

    let max_shift = all_records
        .iter()
        .max_by(|a, b| {
            a.probability_shift
                .partial_cmp(&b.probability_shift)
                .expect("finite shifts")
        })
        .expect("at least one record")
        .clone();

    Ok(MemInfluenceReport {
        mean_kl: total_kl / all_records.len() as f64,
        n_states: indices.len(),
        n_perturbations: n_pert,
        temperature,
        per_state,
        max_shift,
        all_records,
    })
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// One trained model entering the sweep.
pub struct SweepModel {
    pub name: String,
    pub net: QNetwork,
    pub layout: FeatureLayout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub train_config: String,
    pub test_config: String,
    pub envsim: usize,
    /// EnvSim counted in one-card swaps (envsim / 2).
    pub swaps: usize,
    pub mean_win_rate: f64,
    /// Sample std across (model, batch) win rates.
    pub std_win_rate: f64,
    pub n_models: usize,
    pub n_batches: usize,
    pub games_per_batch: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvsimGroup {
    pub envsim: usize,
    pub swaps: usize,
    pub mean_win_rate: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSweep {
    pub cells: Vec<SweepCell>,
    pub groups: Vec<EnvsimGroup>,
}

/// Evaluates every trained model on every test configuration against copies
/// of one opponent agent (the human-like priority agent in the paper's
/// setup), aggregating win rates by EnvSim distance.
///
/// All configurations must share one card universe (same menu) so feature
/// layouts line up; EnvSim is computed on the active (dealable) kind sets.
pub fn generalization_sweep(
    models_per_config: &[Vec<SweepModel>],
    configs: &[GameConfig],
    config_names: &[String],
    opponent: &dyn Agent,
    games_per_batch: usize,
    batches: usize,
    seed: u64,
) -> Result<GenSweep> {
    if models_per_config.len() != configs.len() || config_names.len() != configs.len() {
        return Err(Error::Config(
            "models, configs, and names must have equal length".into(),
        ));
    }
    if games_per_batch == 0 || batches == 0 {
        return Err(Error::Config("games_per_batch and batches must be positive".into()));
    }
    let mut cells = Vec::new();
    for (i, models) in models_per_config.iter().enumerate() {
        for (j, test_config) in configs.iter().enumerate() {
            let test_layouts = [
                FeatureLayout::new(test_config, false),
                FeatureLayout::new(test_config, true),
            ];
            let mut rates = Vec::with_capacity(models.len() * batches);
            for (m, model) in models.iter().enumerate() {
                let expected = &test_layouts[model.layout.memory as usize];
                expected.check_compatible(&model.layout).map_err(|e| {
                    Error::Remap(format!(
                        "model {:?} cannot play test config {:?}: {e}",
                        model.name, config_names[j]
                    ))
                })?;
                let agent = DqnAgent::new(model.net.clone(), model.layout.clone(), &*model.name);
                let opponents: Vec<&dyn Agent> =
                    (0..test_config.players - 1).map(|_| opponent).collect();
                for b in 0..batches {
                    let cell_seed = derive_seed(
                        seed,
                        ((i * configs.len() + j) as u64) << 32
                            | (m as u64) << 16
                            | b as u64,
                    );
                    let report = evaluate_win_rate(
                        &agent,
                        &opponents,
                        test_config,
                        games_per_batch,
                        cell_seed,
                    )?;
                    rates.push(report.win_rate);
                }
            }
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            let std = if rates.len() > 1 {
                sample_variance(&rates).sqrt()
            } else {
                0.0
            };
            let distance = envsim_of_configs(&configs[i], test_config);
            cells.push(SweepCell {
                train_config: config_names[i].clone(),
                test_config: config_names[j].clone(),
                envsim: distance,
                swaps: distance / 2,
                mean_win_rate: mean,
                std_win_rate: std,
                n_models: models.len(),
                n_batches: batches,
                games_per_batch,
            });
        }
    }

    let mut groups: Vec<EnvsimGroup> = Vec::new();
    let mut distances: Vec<usize> = cells.iter().map(|c| c.envsim).collect();
    distances.sort_unstable();
    distances.dedup();
    for d in distances {
        let members: Vec<&SweepCell> = cells.iter().filter(|c| c.envsim == d).collect();
        groups.push(EnvsimGroup {
            envsim: d,
            swaps: d / 2,
            mean_win_rate: members.iter().map(|c| c.mean_win_rate).sum::<f64>()
                / members.len() as f64,
            n_cells: members.len(),
        });
    }
    Ok(GenSweep { cells, groups })
}

/// Symmetric difference of the kind sets that can actually appear in each
/// configuration (nonzero deck copies).
pub fn envsim_of_configs(a: &GameConfig, b: &GameConfig) -> usize {
    a.active_kind_names()
        .symmetric_difference(&b.active_kind_names())
        .count()
}

/// Builds the shared-universe configuration series for a sweep: interpolates
/// from `menu_a` toward `menu_b` one swap at a time (`steps` configurations
/// in total), all sharing one menu (the union of the path) so feature layouts
/// are identical, with each step's deck restricted to that step's kinds.
pub fn interpolated_series(
    catalog: &crate::cards::Catalog,
    menu_a: &crate::cards::Menu,
    menu_b: &crate::cards::Menu,
    steps: usize,
    players: usize,
    hand_size: usize,
    rounds: usize,
    seed: u64,
) -> Result<(Vec<GameConfig>, Vec<String>)> {
    let path = crate::cards::config_path(menu_a, menu_b)?;
    if steps == 0 || steps > path.len() {
        return Err(Error::Config(format!(
            "cannot take {steps} interpolation steps; the menus admit {}",
            path.len()
        )));
    }
    let path = &path[..steps];
    let mut union_names = menu_a.names();
    for menu in path.iter() {
        for name in menu.names() {
            if !union_names.contains(&name) {
                union_names.push(name);
            }
        }
    }
    let union = crate::cards::Menu::from_names(catalog, &union_names, false)?;
    let mut configs = Vec::new();
    let mut names = Vec::new();
    for (i, step_menu) in path.iter().enumerate() {
        let mut deck = crate::cards::DeckSpec::from_catalog(catalog, &union)?;
        for (id, copies) in deck.copies.iter_mut().enumerate() {
            if step_menu.id_of(&union.kind(id).name).is_none() {
                *copies = 0;
            }
        }
        let config = GameConfig {
            menu: union.clone(),
            deck,
            players,
            hand_size,
            rounds,
            pass_direction: crate::cards::PassDirection::Left,
            seed: derive_seed(seed, i as u64),
        };
        config.validate()?;
        configs.push(config);
        names.push(format!("config_{i}"));
    }
    Ok((configs, names))
}

impl GenSweep {
    pub fn cells_csv(&self) -> String {
        let mut out = String::from(
            "train_config,test_config,envsim,swaps,mean_win_rate,std_win_rate,n_models,n_batches,games_per_batch\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.train_config,
                c.test_config,
                c.envsim,
                c.swaps,
                c.mean_win_rate,
                c.std_win_rate,
                c.n_models,
                c.n_batches,
                c.games_per_batch
            ));
        }
        out
    }

    pub fn groups_csv(&self) -> String {
        let mut out = String::from("envsim,swaps,mean_win_rate,n_cells\n");
        for g in &self.groups {
            out.push_str(&format!(
                "{},{},{},{}\n",
                g.envsim, g.swaps, g.mean_win_rate, g.n_cells
            ));
        }
        out
    }
}
