//! From-scratch DQN: replay buffer, target network, epsilon-greedy
//! exploration, Huber-loss SGD, and the shared-parameter self-play loop
//! (one network controls every seat; all transitions feed one buffer).
//!
//! Per-seat reward is the seat's round-score delta at round boundaries, zero
//! elsewhere, with end-game dessert points and a +100 win bonus added to the
//! terminal reward, so a seat's rewards over a game sum to its final score
//! (+100 if it won).

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::cards::{GameConfig, KindId};
use crate::error::{Error, Result};
use crate::net::{huber, AdamState, QNetwork};
use crate::observe::{FeatureLayout, Observation};
use crate::sim::{derive_seed, Rollout, WIN_BONUS};

#[derive(Debug, Clone)]
pub struct ReplayEntry {
    pub obs: Vec<f64>,
    pub action: KindId,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    /// Legal mask of `next_obs`; ignored when `done`.
    pub legal_mask_next: Vec<bool>,
}

/// Fixed-capacity ring buffer.
pub struct ReplayBuffer {
    entries: Vec<ReplayEntry>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            entries: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, entry: ReplayEntry) {
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
        } else {
            self.entries[self.next] = entry;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Uniform sample with replacement.
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut impl Rng) -> Vec<&'a ReplayEntry> {
        (0..batch)
            .map(|_| &self.entries[rng.random_range(0..self.entries.len())])
            .collect()
    }
}

fn default_gamma() -> f64 {
    0.99
}
fn default_epsilon_start() -> f64 {
    1.0
}
fn default_epsilon_end() -> f64 {
    0.05
}
fn default_buffer_capacity() -> usize {
    100_000
}
fn default_batch_size() -> usize {
    64
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_huber_delta() -> f64 {
    10.0
}
fn default_target_sync() -> u64 {
    1000
}
fn default_train_every() -> u64 {
    4
}
fn default_epochs() -> usize {
    10
}
fn default_games_per_epoch() -> usize {
    2000
}
fn default_temperature() -> f64 {
    1.0
}
fn default_hidden() -> Vec<usize> {
    vec![128, 128, 128, 128]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_end")]
    pub epsilon_end: f64,
    /// Env steps over which epsilon anneals linearly; defaults to half the
    /// scheduled env steps of the whole run.
    #[serde(default)]
    pub epsilon_decay_steps: Option<u64>,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_huber_delta")]
    pub huber_delta: f64,
    /// Gradient steps between target-network syncs.
    #[serde(default = "default_target_sync")]
    pub target_sync_interval: u64,
    /// Env steps per gradient step.
    #[serde(default = "default_train_every")]
    pub train_every: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_games_per_epoch")]
    pub games_per_epoch: usize,
    #[serde(default)]
    pub memory_enabled: bool,
    /// Softmax temperature for [`policy_distribution`].
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0,1], got {}", self.gamma)));
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {eps}")));
            }
        }
        if self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config("buffer must hold at least one batch".into()));
        }
        if self.epochs == 0 || self.games_per_epoch == 0 {
            return Err(Error::Config("epochs and games_per_epoch must be positive".into()));
        }
        if self.train_every == 0 || self.target_sync_interval == 0 {
            return Err(Error::Config(
                "train_every and target_sync_interval must be positive".into(),
            ));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden_layers must be nonempty and nonzero".into()));
        }
        Ok(())
    }

    fn epsilon_at(&self, env_step: u64, total_env_steps: u64) -> f64 {
        let decay = self
            .epsilon_decay_steps
            .unwrap_or_else(|| (total_env_steps / 2).max(1));
        let frac = (env_step as f64 / decay as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Epsilon-greedy over the legal actions; greedy ties break to the lowest id.
pub fn act_epsilon_greedy(
    q: &[f64],
    mask: &[bool],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<KindId> {
    let legal: Vec<KindId> = (0..mask.len()).filter(|&k| mask[k]).collect();
    if legal.is_empty() {
        return Err(Error::State("no legal action".into()));
    }
    if epsilon > 0.0 && rng.random_range(0.0..1.0) < epsilon {
        return Ok(legal[rng.random_range(0..legal.len())]);
    }
    let mut best = legal[0];
    for &k in &legal[1..] {
        if q[k] > q[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Q-learning target: `reward` when done, else
/// `reward + gamma * max_legal target_net(next_obs)`.
pub fn td_target(entry: &ReplayEntry, target_net: &QNetwork, gamma: f64) -> Result<f64> {
    if entry.done {
        return Ok(entry.reward);
    }
    let q = target_net.forward(&entry.next_obs)?;
    let best = q
        .iter()
        .zip(&entry.legal_mask_next)
        .filter(|&(_, &legal)| legal)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::State("non-terminal entry with no legal next action".into()));
    }
    Ok(entry.reward + gamma * best)
}

/// Mean Huber loss over the batch and its gradients; only the taken
/// action's output contributes per sample.
pub fn batch_gradients(
    net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&ReplayEntry],
    huber_delta: f64,
    gamma: f64,
) -> Result<(crate::net::Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let mut grads = net.zero_gradients();
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let n_actions = net.output_dim();
    for entry in batch {
        let target = td_target(entry, target_net, gamma)?;
        let cache = net.forward_cached(&entry.obs)?;
        let q = cache.post.last().expect("forward output");
        let err = q[entry.action] - target;
        let (l, dl) = huber(err, huber_delta);
        loss += l * scale;
        let mut dout = vec![0.0; n_actions];
        dout[entry.action] = dl * scale;
        net.backprop_into(&cache, &dout, &mut grads);
    }
    if !loss.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss {loss}; batch={}",
            batch.len()
        )));
    }
    Ok((grads, loss))
}

/// One SGD step on the mean Huber loss between `q(obs)[action]` and the TD
/// target. Returns the batch loss.
pub fn train_step(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&ReplayEntry],
    lr: f64,
    huber_delta: f64,
    gamma: f64,
) -> Result<f64> {
    let (grads, loss) = batch_gradients(net, target_net, batch, huber_delta, gamma)?;
    net.apply_gradients(&grads, lr);
    Ok(loss)
}

/// Softmax of q-values over the legal actions at the given temperature;
/// illegal actions get probability zero.
pub fn policy_distribution(
    net: &QNetwork,
    obs: &Observation,
    temperature: f64,
) -> Result<Vec<f64>> {
    if temperature <= 0.0 {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let q = net.forward(&obs.features)?;
    softmax_masked(&q, &obs.legal_mask, temperature)
}

pub fn softmax_masked(q: &[f64], mask: &[bool], temperature: f64) -> Result<Vec<f64>> {
    if q.len() != mask.len() {
        return Err(Error::Shape {
            expected: q.len(),
            got: mask.len(),
        });
    }
    let max = q
        .iter()
        .zip(mask)
        .filter(|&(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::State("no legal action".into()));
    }
    let mut out = vec![0.0; q.len()];
    let mut total = 0.0;
    for (i, (&v, &m)) in q.iter().zip(mask).enumerate() {
        if m {
            let e = ((v - max) / temperature).exp();
            out[i] = e;
            total += e;
        }
    }
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// Versioned checkpoint container; JSON round-trips f64 exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub epoch: usize,
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub layout: FeatureLayout,
    pub train_config: TrainConfig,
    pub game_config: GameConfig,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_net(
        net: &QNetwork,
        epoch: usize,
        layout: &FeatureLayout,
        train_config: &TrainConfig,
        game_config: &GameConfig,
    ) -> Self {
        let (weights, biases) = net.to_arrays();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            epoch,
            layer_sizes: net.layer_sizes().to_vec(),
            weights,
            biases,
            layout: layout.clone(),
            train_config: train_config.clone(),
            game_config: game_config.clone(),
        }
    }

    pub fn net(&self) -> Result<QNetwork> {
        QNetwork::from_arrays(&self.layer_sizes, self.weights.clone(), self.biases.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let ckpt: Checkpoint = serde_json::from_str(&data)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}

/// Greedy policy wrapper around a trained network.
pub struct DqnAgent {
    net: QNetwork,
    layout: FeatureLayout,
    name: String,
}

impl DqnAgent {
    pub fn new(net: QNetwork, layout: FeatureLayout, name: impl Into<String>) -> Self {
        DqnAgent {
            net,
            layout,
            name: name.into(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(DqnAgent {
            net: ckpt.net()?,
            layout: ckpt.layout.clone(),
            name: format!("dqn_epoch{}", ckpt.epoch),
        })
    }

    pub fn net(&self) -> &QNetwork {
        &self.net
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }
}

impl Agent for DqnAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<KindId> {
        let q = self.net.forward(&obs.features)?;
        act_epsilon_greedy(&q, &obs.legal_mask, 0.0, rng)
    }

    fn wants_memory(&self) -> bool {
        self.layout.memory
    }
}

/// Per-seat reward of one step: the round-score delta at round boundaries
/// (zero mid-round), plus dessert points and the +100 win bonus at game end.
pub fn step_rewards(result: &crate::game::StepResult, players: usize) -> Vec<f64> {
    let mut rewards = vec![0.0; players];
    if let Some(deltas) = &result.round_deltas {
        for (seat, &d) in deltas.iter().enumerate() {
            rewards[seat] += d as f64;
        }
    }
    if let Some(final_result) = &result.final_result {
        for seat in 0..players {
            rewards[seat] += final_result.dessert_deltas[seat] as f64;
            if final_result.winners.contains(&seat) {
                rewards[seat] += WIN_BONUS;
            }
        }
    }
    rewards
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub games: usize,
    pub env_steps: u64,
    pub train_steps: u64,
    pub epsilon: f64,
    pub mean_loss: f64,
    /// Mean final score across all seats of the epoch's games.
    pub mean_score: f64,
    /// Mean per-seat reward (score + win bonus).
    pub mean_reward: f64,
}

pub struct TrainResult {
    pub net: QNetwork,
    pub layout: FeatureLayout,
    pub curve: Vec<EpochStats>,
}

/// Shared-parameter self-play training. `on_epoch` receives a checkpoint at
/// the end of every epoch.
pub fn self_play_train(
    train: &TrainConfig,
    game: &GameConfig,
    mut on_epoch: impl FnMut(&Checkpoint, &EpochStats) -> Result<()>,
) -> Result<TrainResult> {
    train.validate()?;
    game.validate()?;
    let layout = FeatureLayout::new(game, train.memory_enabled);
    let n = game.menu.len();
    let players = game.players;

    let mut sizes = vec![layout.total_len()];
    sizes.extend_from_slice(&train.hidden_layers);
    sizes.push(n);
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 3));
    let mut net = QNetwork::new(&sizes, &mut init_rng)?;
    let mut target = net.clone();

    let mut buffer = ReplayBuffer::new(train.buffer_capacity);
    let mut action_rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 1));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 2));
    let mut adam = AdamState::new(&net);

    let steps_per_game = (game.hand_size * game.rounds) as u64;
    let total_env_steps = steps_per_game * (train.epochs * train.games_per_epoch) as u64;
    let mut env_step: u64 = 0;
    let mut train_steps: u64 = 0;
    let mut curve = Vec::with_capacity(train.epochs);

    for epoch in 0..train.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_loss_count = 0u64;
        let mut epoch_score = 0.0;
        let mut epoch_reward = 0.0;
        let mut epsilon = train.epsilon_at(env_step, total_env_steps);

        for g in 0..train.games_per_epoch {
            let game_index = (epoch * train.games_per_epoch + g) as u64;
            let config = game.with_seed(derive_seed(train.seed, 0x6000 + game_index));
            let mut rollout = Rollout::new(config)?;

            loop {
                epsilon = train.epsilon_at(env_step, total_env_steps);
                let observations: Vec<Observation> = (0..players)
                    .map(|seat| rollout.observe(seat, train.memory_enabled))
                    .collect();
                let mut actions = Vec::with_capacity(players);
                for obs in &observations {
                    let q = net.forward(&obs.features)?;
                    actions.push(act_epsilon_greedy(&q, &obs.legal_mask, epsilon, &mut action_rng)?);
                }
                let result = rollout.step(&actions)?;
                let done = result.final_result.is_some();
                let rewards = step_rewards(&result, players);
                if let Some(final_result) = &result.final_result {
                    for seat in 0..players {
                        epoch_score += final_result.final_scores[seat] as f64;
                        epoch_reward += final_result.final_scores[seat] as f64
                            + if final_result.winners.contains(&seat) {
                                WIN_BONUS
                            } else {
                                0.0
                            };
                    }
                }

                for (seat, obs) in observations.into_iter().enumerate() {
                    let next = rollout.observe(seat, train.memory_enabled);
                    buffer.push(ReplayEntry {
                        obs: obs.features,
                        action: actions[seat],
                        reward: rewards[seat],
                        next_obs: next.features,
                        done,
                        legal_mask_next: next.legal_mask,
                    });
                }

                env_step += 1;
                if env_step % train.train_every == 0 && buffer.len() >= train.batch_size {
                    let batch = buffer.sample(train.batch_size, &mut sample_rng);
                    let loss = match train.optimizer {
                        Optimizer::Sgd => train_step(
                            &mut net,
                            &target,
                            &batch,
                            train.learning_rate,
                            train.huber_delta,
                            train.gamma,
                        )?,
                        Optimizer::Adam => {
                            let (grads, loss) = batch_gradients(
                                &net,
                                &target,
                                &batch,
                                train.huber_delta,
                                train.gamma,
                            )?;
                            adam.apply(&mut net, &grads, train.learning_rate, 0.9, 0.999, 1e-8);
                            loss
                        }
                    };
                    epoch_loss += loss;
                    epoch_loss_count += 1;
                    train_steps += 1;
                    if train_steps % train.target_sync_interval == 0 {
                        target = net.clone();
                    }
                }

                if done {
                    break;
                }
            }
        }

        let games = train.games_per_epoch;
        let stats = EpochStats {
            epoch,
            games,
            env_steps: env_step,
            train_steps,
            epsilon,
            mean_loss: if epoch_loss_count > 0 {
                epoch_loss / epoch_loss_count as f64
            } else {
                0.0
            },
            mean_score: epoch_score / (games * players) as f64,
            mean_reward: epoch_reward / (games * players) as f64,
        };
        let ckpt = Checkpoint::from_net(&net, epoch, &layout, train, game);
        on_epoch(&ckpt, &stats)?;
        curve.push(stats);
    }

    Ok(TrainResult { net, layout, curve })
}
