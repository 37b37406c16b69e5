//! On-disk experiment specifications. Every experiment is a JSON file plus a
//! handful of flag overrides, so a manifest can reproduce it exactly.

use std::path::{Path, PathBuf};

use pickpass::cards::{Catalog, GameConfig};
use pickpass::dqn::TrainConfig;
use pickpass::metrics::interpolated_series;
use pickpass::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::util::{load_game_config, load_menu};

/// Builds a shared-universe configuration series from two menu files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolateSpec {
    pub menu_a: PathBuf,
    pub menu_b: PathBuf,
    /// Number of configurations (first is `menu_a`; each step swaps one card
    /// toward `menu_b`).
    pub steps: usize,
    #[serde(default = "default_players")]
    pub players: usize,
    #[serde(default = "default_hand_size")]
    pub hand_size: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
}

fn default_players() -> usize {
    4
}
fn default_hand_size() -> usize {
    9
}
fn default_rounds() -> usize {
    3
}

impl InterpolateSpec {
    pub fn build(&self, catalog: &Catalog, seed: u64) -> Result<(Vec<GameConfig>, Vec<String>)> {
        let (menu_a, _) = load_menu(&self.menu_a, catalog)?;
        let (menu_b, _) = load_menu(&self.menu_b, catalog)?;
        interpolated_series(
            catalog,
            &menu_a,
            &menu_b,
            self.steps,
            self.players,
            self.hand_size,
            self.rounds,
            seed,
        )
    }
}

/// Training spec: one or more game configurations x seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    /// Single game configuration file.
    #[serde(default)]
    pub game: Option<PathBuf>,
    /// Several game configuration files (trained independently).
    #[serde(default)]
    pub games: Vec<PathBuf>,
    /// Shared-universe interpolated series (for generalization sweeps).
    #[serde(default)]
    pub interpolate: Option<InterpolateSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl TrainSpec {
    pub fn load(path: &Path) -> Result<Self> {
        crate::util::load_json(path)
    }

    /// Resolves to `(configs, names)`; exactly one source must be given.
    pub fn resolve_games(&self, catalog: &Catalog) -> Result<(Vec<GameConfig>, Vec<String>)> {
        let sources =
            self.game.is_some() as usize + !self.games.is_empty() as usize
                + self.interpolate.is_some() as usize;
        if sources != 1 {
            return Err(Error::Config(
                "exactly one of game, games, or interpolate must be set".into(),
            ));
        }
        if let Some(path) = &self.game {
            let config = load_game_config(path, catalog)?;
            return Ok((vec![config], vec![stem(path)]));
        }
        if !self.games.is_empty() {
            let mut configs = Vec::new();
            let mut names = Vec::new();
            for path in &self.games {
                configs.push(load_game_config(path, catalog)?);
                names.push(stem(path));
            }
            return Ok((configs, names));
        }
        self.interpolate
            .as_ref()
            .expect("checked above")
            .build(catalog, self.train.seed)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into())
}

/// Generalization sweep spec (checkpoints come from a prior `train` run).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub interpolate: InterpolateSpec,
    /// Priority-list file for the human-like opponent.
    pub opponent_priority: PathBuf,
    #[serde(default = "default_games_per_batch")]
    pub games_per_batch: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub seed: u64,
    /// Seed the training series was built with (to rebuild identical
    /// configurations); defaults to `seed`.
    #[serde(default)]
    pub series_seed: Option<u64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_games_per_batch() -> usize {
    100
}
fn default_batches() -> usize {
    10
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        crate::util::load_json(path)
    }
}

/// Memory-ablation spec: two cohorts (memory on/off) trained with matched
/// seeds and evaluated under identical seeds and opponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblateSpec {
    pub game: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_models")]
    pub models_per_cohort: usize,
    #[serde(default = "default_eval_games")]
    pub eval_games: usize,
    /// `random`, `priority:<list.json>`, or `dqn:<ckpt.json>`.
    #[serde(default = "default_opponent")]
    pub opponent: String,
    #[serde(default)]
    pub seed: u64,
    /// Skip training and load cohorts from these directories instead
    /// (expecting `model_<i>.ckpt.json`).
    #[serde(default)]
    pub checkpoints_on: Option<PathBuf>,
    #[serde(default)]
    pub checkpoints_off: Option<PathBuf>,
}

fn default_models() -> usize {
    5
}
fn default_eval_games() -> usize {
    500
}
fn default_opponent() -> String {
    "random".into()
}

impl AblateSpec {
    pub fn load(path: &Path) -> Result<Self> {
        crate::util::load_json(path)
    }
}
