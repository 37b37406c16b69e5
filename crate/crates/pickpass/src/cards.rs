//! Card kinds, menus, decks, and game configuration.
//!
//! A `Menu` is the ordered set of unique card kinds in play for a game; the
//! position of a kind in the menu is its id and doubles as the action index
//! and the feature index for that kind. All scoring constants are data-driven:
//! they live in `data/cards.json` (the default catalog, embedded at build
//! time) or in a user-supplied catalog file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Menu-local card kind index (contiguous `0..n`).
pub type KindId = usize;

pub const MIN_PLAYERS: usize = 2;
pub const MAX_PLAYERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Nigiri,
    Roll,
    Appetizer,
    Special,
    Dessert,
}

pub const ALL_CATEGORIES: [Category; 5] = [
    Category::Nigiri,
    Category::Roll,
    Category::Appetizer,
    Category::Special,
    Category::Dessert,
];

impl Category {
    pub fn index(self) -> usize {
        match self {
            Category::Nigiri => 0,
            Category::Roll => 1,
            Category::Appetizer => 2,
            Category::Special => 3,
            Category::Dessert => 4,
        }
    }
}

/// How a kind scores. Board rules apply at round scoring; dessert rules apply
/// once at game end, on the cards a player collected over all rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScoreRule {
    /// Flat points per copy; eligible for a wasabi multiplier.
    Nigiri { points: i64 },
    /// Multiplies the next nigiri played by the same player; 0 on its own.
    Wasabi { multiplier: i64 },
    /// `points` per completed set of `set_size` copies (tempura, sashimi).
    SetBonus { set_size: u32, points: i64 },
    /// Points per copy, voided when several players play it on the same turn.
    Miso { points: i64 },
    /// Most icons on boards scores `first`, second-most scores `second`.
    IconMajority { first: i64, second: i64 },
    /// One point per card in the player's largest same-category group, per copy.
    LargestCategorySet,
    /// `points` per copy if the player has the (tied-)most distinct categories.
    CategoryMajority { points: i64 },
    /// Per-player award: most copies `most`, fewest copies `fewest`.
    CountMostFewest { most: i64, fewest: i64 },
    /// Total points from the last `(min_count, points)` row with
    /// `min_count <= count`; 0 below the first row (eel, tofu).
    CountTable { table: Vec<(u32, i64)> },
    /// End of game: `points` per completed set of `set_size` collected copies.
    DessertSet { set_size: u32, points: i64 },
    /// End of game: most collected copies `most`, fewest `fewest`.
    DessertMostFewest { most: i64, fewest: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardKind {
    pub name: String,
    pub category: Category,
    /// Icons per copy; nonzero only for roll kinds.
    #[serde(default)]
    pub icons: u32,
    pub rule: ScoreRule,
}

impl CardKind {
    fn validate(&self) -> Result<()> {
        if self.icons > 0 && self.category != Category::Roll {
            return Err(Error::Config(format!(
                "kind {:?} has icons but is not a roll",
                self.name
            )));
        }
        let dessert_rule = matches!(
            self.rule,
            ScoreRule::DessertSet { .. } | ScoreRule::DessertMostFewest { .. }
        );
        if dessert_rule != (self.category == Category::Dessert) {
            return Err(Error::Config(format!(
                "kind {:?}: dessert rules and the dessert category must coincide",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CatalogKind {
    #[serde(flatten)]
    kind: CardKind,
    copies: u32,
}

#[derive(Debug, Clone, Deserialize)]
struct CatalogFile {
    dessert_schedule: Vec<u32>,
    kinds: Vec<CatalogKind>,
}

/// The full universe of known card kinds plus their default deck copies.
#[derive(Debug, Clone)]
pub struct Catalog {
    kinds: Vec<CardKind>,
    copies: Vec<u32>,
    dessert_schedule: Vec<u32>,
}

const DEFAULT_CATALOG: &str = include_str!("../data/cards.json");

impl Catalog {
    pub fn from_json(json: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(json)?;
        let mut names = BTreeSet::new();
        for ck in &file.kinds {
            ck.kind.validate()?;
            if !names.insert(ck.kind.name.clone()) {
                return Err(Error::Config(format!(
                    "duplicate kind {:?} in catalog",
                    ck.kind.name
                )));
            }
        }
        Ok(Catalog {
            kinds: file.kinds.iter().map(|ck| ck.kind.clone()).collect(),
            copies: file.kinds.iter().map(|ck| ck.copies).collect(),
            dessert_schedule: file.dessert_schedule,
        })
    }

    /// The built-in catalog from `data/cards.json`.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_CATALOG).expect("embedded catalog is valid")
    }

    pub fn kinds(&self) -> &[CardKind] {
        &self.kinds
    }

    pub fn kind_named(&self, name: &str) -> Option<&CardKind> {
        self.kinds.iter().find(|k| k.name == name)
    }

    pub fn default_copies(&self, name: &str) -> Option<u32> {
        self.kinds
            .iter()
            .position(|k| k.name == name)
            .map(|i| self.copies[i])
    }

    pub fn dessert_schedule(&self) -> &[u32] {
        &self.dessert_schedule
    }
}

/// The ordered set of unique kinds in play; position = kind id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    kinds: Vec<CardKind>,
    /// Require exactly one roll and one dessert kind (the party menu shape).
    strict: bool,
}

impl Menu {
    pub fn new(kinds: Vec<CardKind>) -> Result<Self> {
        Self::build(kinds, true)
    }

    /// A menu without the one-roll/one-dessert structure requirement,
    /// e.g. the intermediates produced by [`config_path`].
    pub fn relaxed(kinds: Vec<CardKind>) -> Result<Self> {
        Self::build(kinds, false)
    }

    fn build(kinds: Vec<CardKind>, strict: bool) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Config("menu has no kinds".into()));
        }
        let mut names = BTreeSet::new();
        for k in &kinds {
            k.validate()?;
            if !names.insert(k.name.clone()) {
                return Err(Error::Config(format!("duplicate kind {:?} in menu", k.name)));
            }
        }
        if strict {
            let rolls = kinds.iter().filter(|k| k.category == Category::Roll).count();
            let desserts = kinds
                .iter()
                .filter(|k| k.category == Category::Dessert)
                .count();
            if rolls != 1 || desserts != 1 {
                return Err(Error::Config(format!(
                    "strict menu needs exactly one roll and one dessert kind, got {rolls} roll(s) and {desserts} dessert(s)"
                )));
            }
        }
        Ok(Menu { kinds, strict })
    }

    pub fn from_names(catalog: &Catalog, names: &[String], strict: bool) -> Result<Self> {
        let mut kinds = Vec::with_capacity(names.len());
        for name in names {
            let kind = catalog
                .kind_named(name)
                .ok_or_else(|| Error::Config(format!("unknown card kind {name:?}")))?;
            kinds.push(kind.clone());
        }
        Self::build(kinds, strict)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, id: KindId) -> &CardKind {
        &self.kinds[id]
    }

    pub fn kinds(&self) -> &[CardKind] {
        &self.kinds
    }

    pub fn id_of(&self, name: &str) -> Option<KindId> {
        self.kinds.iter().position(|k| k.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.kinds.iter().map(|k| k.name.clone()).collect()
    }

    pub fn name_set(&self) -> BTreeSet<String> {
        self.kinds.iter().map(|k| k.name.clone()).collect()
    }

    pub fn dessert_ids(&self) -> Vec<KindId> {
        (0..self.len())
            .filter(|&i| self.kinds[i].category == Category::Dessert)
            .collect()
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }
}

impl fmt::Display for Menu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(", "))
    }
}

/// Cardinality of the symmetric difference of two menus' kind sets.
pub fn envsim(a: &Menu, b: &Menu) -> usize {
    let sa = a.name_set();
    let sb = b.name_set();
    sa.symmetric_difference(&sb).count()
}

/// Interpolates from menu `a` to menu `b` one card swap at a time.
///
/// Each step replaces the lowest-id kind of `a \ b` (id in the current menu)
/// with the lowest-id kind of `b \ a` (id in `b`), in the replaced kind's
/// slot, so untouched kinds keep their positions along the whole path.
pub fn config_path(a: &Menu, b: &Menu) -> Result<Vec<Menu>> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "menus must have equal size to interpolate ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let target: BTreeSet<String> = b.name_set();
    let mut path = vec![a.clone()];
    let mut current = a.kinds.to_vec();
    loop {
        let have: BTreeSet<String> = current.iter().map(|k| k.name.clone()).collect();
        let Some(out_slot) = current.iter().position(|k| !target.contains(&k.name)) else {
            break;
        };
        let incoming = b
            .kinds
            .iter()
            .find(|k| !have.contains(&k.name))
            .expect("|a\\b| = |b\\a| for equal-size menus");
        current[out_slot] = incoming.clone();
        path.push(Menu::relaxed(current.clone())?);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassDirection {
    Left,
    Right,
}

/// Physical deck composition for one game: copies per menu kind plus the
/// per-round counts of dessert cards shuffled into the draw pile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeckSpec {
    /// Indexed by kind id.
    pub copies: Vec<u32>,
    /// Dessert cards injected at the start of each round.
    pub dessert_schedule: Vec<u32>,
}

impl DeckSpec {
    /// Default copies from the catalog for every kind on the menu.
    pub fn from_catalog(catalog: &Catalog, menu: &Menu) -> Result<Self> {
        let mut copies = Vec::with_capacity(menu.len());
        for kind in menu.kinds() {
            let c = catalog.default_copies(&kind.name).ok_or_else(|| {
                Error::Config(format!("kind {:?} has no catalog default copies", kind.name))
            })?;
            copies.push(c);
        }
        Ok(DeckSpec {
            copies,
            dessert_schedule: catalog.dessert_schedule().to_vec(),
        })
    }

    pub fn non_dessert_total(&self, menu: &Menu) -> u32 {
        (0..menu.len())
            .filter(|&i| menu.kind(i).category != Category::Dessert)
            .map(|i| self.copies[i])
            .sum()
    }

    pub fn dessert_total(&self, menu: &Menu) -> u32 {
        menu.dessert_ids().iter().map(|&i| self.copies[i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub menu: Menu,
    pub deck: DeckSpec,
    pub players: usize,
    pub hand_size: usize,
    pub rounds: usize,
    pub pass_direction: PassDirection,
    pub seed: u64,
}

impl GameConfig {
    /// A 4-player, 9-card, 3-round game with catalog-default deck copies.
    pub fn standard(catalog: &Catalog, menu: Menu, seed: u64) -> Result<Self> {
        let deck = DeckSpec::from_catalog(catalog, &menu)?;
        let config = GameConfig {
            menu,
            deck,
            players: 4,
            hand_size: 9,
            rounds: 3,
            pass_direction: PassDirection::Left,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.players < MIN_PLAYERS || self.players > MAX_PLAYERS {
            return Err(Error::Config(format!(
                "players must be in [{MIN_PLAYERS},{MAX_PLAYERS}], got {}",
                self.players
            )));
        }
        if self.hand_size == 0 || self.rounds == 0 {
            return Err(Error::Config("hand_size and rounds must be positive".into()));
        }
        if self.deck.copies.len() != self.menu.len() {
            return Err(Error::Config(format!(
                "deck copies cover {} kinds but the menu has {}",
                self.deck.copies.len(),
                self.menu.len()
            )));
        }
        if self.deck.dessert_schedule.len() < self.rounds {
            return Err(Error::Config(format!(
                "dessert_schedule covers {} rounds but the game has {}",
                self.deck.dessert_schedule.len(),
                self.rounds
            )));
        }
        let schedule_total: u32 = self.deck.dessert_schedule[..self.rounds].iter().sum();
        let dessert_total = self.deck.dessert_total(&self.menu);
        if schedule_total > dessert_total {
            return Err(Error::Config(format!(
                "dessert_schedule deals {schedule_total} dessert cards but the deck only has {dessert_total}"
            )));
        }
        // Non-dessert cards recirculate through the discard pile between
        // rounds; desserts leave the deck once collected. Each round must be
        // dealable from non-desserts plus that round's dessert injection.
        let needed = (self.players * self.hand_size) as u32;
        let non_dessert = self.deck.non_dessert_total(&self.menu);
        for round in 0..self.rounds {
            let available = non_dessert + self.deck.dessert_schedule[round];
            if available < needed {
                return Err(Error::Config(format!(
                    "deck too small: round {} can deal {} cards but {} are needed \
                     ({} players x {} hand size)",
                    round + 1,
                    available,
                    needed,
                    self.players,
                    self.hand_size
                )));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn n_kinds(&self) -> usize {
        self.menu.len()
    }

    /// Kind names that can actually appear in this game (nonzero copies).
    pub fn active_kind_names(&self) -> BTreeSet<String> {
        (0..self.menu.len())
            .filter(|&i| self.deck.copies[i] > 0)
            .map(|i| self.menu.kind(i).name.clone())
            .collect()
    }
}

/// On-disk form of a game configuration: kind names resolved against a
/// catalog, deck optional (defaults to catalog copies).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameConfigFile {
    pub menu: Vec<String>,
    #[serde(default = "default_players")]
    pub players: usize,
    #[serde(default = "default_hand_size")]
    pub hand_size: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_pass_direction")]
    pub pass_direction: PassDirection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub strict_menu: bool,
    #[serde(default)]
    pub deck: Option<DeckFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeckFile {
    #[serde(default)]
    pub copies: BTreeMap<String, u32>,
    #[serde(default)]
    pub dessert_schedule: Option<Vec<u32>>,
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
fn default_pass_direction() -> PassDirection {
    PassDirection::Left
}
fn default_true() -> bool {
    true
}

impl GameConfigFile {
    pub fn resolve(&self, catalog: &Catalog) -> Result<GameConfig> {
        let menu = Menu::from_names(catalog, &self.menu, self.strict_menu)?;
        let mut deck = DeckSpec::from_catalog(catalog, &menu)?;
        if let Some(file) = &self.deck {
            for (name, count) in &file.copies {
                let id = menu
                    .id_of(name)
                    .ok_or_else(|| Error::Config(format!("deck names kind {name:?} not on the menu")))?;
                deck.copies[id] = *count;
            }
            if let Some(schedule) = &file.dessert_schedule {
                deck.dessert_schedule = schedule.clone();
            }
        }
        let config = GameConfig {
            menu,
            deck,
            players: self.players,
            hand_size: self.hand_size,
            rounds: self.rounds,
            pass_direction: self.pass_direction,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Shared handle used by [`crate::game::GameState`]; configs are immutable
/// once a game starts.
pub type ConfigRef = Arc<GameConfig>;

/// The two built-in party menus (action cards excluded).
pub fn my_first_meal(catalog: &Catalog) -> Result<Menu> {
    Menu::from_names(
        catalog,
        &[
            "egg_nigiri".into(),
            "salmon_nigiri".into(),
            "squid_nigiri".into(),
            "maki".into(),
            "tempura".into(),
            "sashimi".into(),
            "miso_soup".into(),
            "wasabi".into(),
            "tea".into(),
            "green_tea_ice_cream".into(),
        ],
        true,
    )
}

pub fn cutthroat_combo(catalog: &Catalog) -> Result<Menu> {
    Menu::from_names(
        catalog,
        &[
            "egg_nigiri".into(),
            "salmon_nigiri".into(),
            "squid_nigiri".into(),
            "temaki".into(),
            "eel".into(),
            "tofu".into(),
            "miso_soup".into(),
            "wasabi".into(),
            "soy_sauce".into(),
            "pudding".into(),
        ],
        true,
    )
}
