//! Player-centric observations under partial observability.
//!
//! The observation excludes other players' hands, but because the transition
//! simply rotates the hands and every pick is revealed, a player can sleuth
//! the exact contents of any hand they previously held. The tracker keeps the
//! ground-truth circulating hands and gates access per observer; the optional
//! memory block in the encoding exposes what the observer has sleuthed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cards::{GameConfig, KindId, PassDirection};
use crate::error::{Error, Result};
use crate::game::{GameState, Hand};

/// Tracks the circulating hands of one round and which seats have seen them.
/// A hand is identified by the seat it was dealt to at turn 0.
#[derive(Debug, Clone)]
pub struct MemoryTracker {
    players: usize,
    pass_direction: PassDirection,
    /// Current contents of circulating hand `h`.
    hand_contents: Vec<Hand>,
    /// `seen[h][seat]`: seat has held hand `h` at some turn this round.
    seen: Vec<Vec<bool>>,
    /// Picks applied so far; equals the current turn index.
    turn: usize,
    /// Public play log: `(turn, seat, kind)`.
    play_log: Vec<(usize, usize, KindId)>,
}

impl MemoryTracker {
    /// Starts tracking a freshly dealt round.
    pub fn start_round(state: &GameState) -> Self {
        let players = state.config().players;
        let mut tracker = MemoryTracker {
            players,
            pass_direction: state.config().pass_direction,
            hand_contents: state.hands().to_vec(),
            seen: vec![vec![false; players]; players],
            turn: 0,
            play_log: Vec::new(),
        };
        tracker.mark_holdings();
        tracker
    }

    /// The circulating hand held by `seat` at `turn`.
    pub fn hand_at(&self, seat: usize, turn: usize) -> usize {
        match self.pass_direction {
            PassDirection::Left => (seat + turn) % self.players,
            PassDirection::Right => (seat + self.players * turn - turn) % self.players,
        }
    }

    fn mark_holdings(&mut self) {
        for seat in 0..self.players {
            let hand = self.hand_at(seat, self.turn);
            self.seen[hand][seat] = true;
        }
    }

    /// Applies one turn's public reveals. Turns must arrive in order.
    pub fn record_turn(&mut self, turn: usize, picks: &[KindId]) -> Result<()> {
        if turn != self.turn {
            return Err(Error::Tracking(format!(
                "out-of-order event: expected turn {}, got {turn}",
                self.turn
            )));
        }
        if picks.len() != self.players {
            return Err(Error::Tracking(format!(
                "expected {} picks, got {}",
                self.players,
                picks.len()
            )));
        }
        for (seat, &kind) in picks.iter().enumerate() {
            let hand = self.hand_at(seat, turn);
            if self.hand_contents[hand].count(kind) == 0 {
                return Err(Error::Tracking(format!(
                    "revealed pick {kind} not in tracked hand {hand}"
                )));
            }
            let mut counts = self.hand_contents[hand].counts().to_vec();
            counts[kind] -= 1;
            self.hand_contents[hand] = Hand::from_counts(counts);
            self.play_log.push((turn, seat, kind));
        }
        self.turn += 1;
        self.mark_holdings();
        Ok(())
    }

    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn play_log(&self) -> &[(usize, usize, KindId)] {
        &self.play_log
    }

    /// The target's exact current hand, if the observer has held the
    /// circulating hand now at the target (or it is trivially empty).
    pub fn sleuth(&self, observer: usize, target: usize) -> Option<&Hand> {
        let hand = self.hand_at(target, self.turn);
        if self.seen[hand][observer] || self.hand_contents[hand].is_empty() {
            Some(&self.hand_contents[hand])
        } else {
            None
        }
    }

    #[cfg(test)]
    fn tracked_hand(&self, hand: usize) -> &Hand {
        &self.hand_contents[hand]
    }
}

/// One section of the feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Stable description of the observation encoding, stored with checkpoints
/// so encodings are reproducible across versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub version: u32,
    pub n_kinds: usize,
    pub players: usize,
    pub hand_size: usize,
    pub rounds: usize,
    pub pass_direction: PassDirection,
    pub memory: bool,
    pub sections: Vec<Section>,
}

impl FeatureLayout {
    pub fn new(config: &GameConfig, memory: bool) -> Self {
        let n = config.menu.len();
        let p = config.players;
        let mut sections = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, len: usize, offset: &mut usize| {
            sections.push(Section {
                name,
                offset: *offset,
                len,
            });
            *offset += len;
        };
        push("own_hand".into(), n, &mut offset);
        push("own_board".into(), n, &mut offset);
        for o in 1..p {
            push(format!("opp{o}_board"), n, &mut offset);
        }
        push("round".into(), config.rounds, &mut offset);
        push("turn".into(), config.hand_size, &mut offset);
        if memory {
            for o in 1..p {
                push(format!("opp{o}_mem_known"), 1, &mut offset);
                push(format!("opp{o}_mem_hand"), n, &mut offset);
            }
        }
        FeatureLayout {
            version: 1,
            n_kinds: n,
            players: p,
            hand_size: config.hand_size,
            rounds: config.rounds,
            pass_direction: config.pass_direction,
            memory,
            sections,
        }
    }

    pub fn total_len(&self) -> usize {
        self.sections.last().map_or(0, |s| s.offset + s.len)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Relative index (1-based seat distance) of the upstream neighbour:
    /// the seat whose hand the observer receives next.
    pub fn upstream_opponent(&self) -> usize {
        match self.pass_direction {
            PassDirection::Left => 1,
            PassDirection::Right => self.players - 1,
        }
    }

    /// Sections holding the upstream neighbour's known flag and hand counts.
    pub fn upstream_memory_section(&self) -> Option<(&Section, &Section)> {
        if !self.memory {
            return None;
        }
        let o = self.upstream_opponent();
        let known = self.section(&format!("opp{o}_mem_known"))?;
        let hand = self.section(&format!("opp{o}_mem_hand"))?;
        Some((known, hand))
    }

    /// Human-readable name of one feature index, used by rule rendering.
    pub fn feature_name(&self, index: usize, kind_names: &[String]) -> String {
        for s in &self.sections {
            if index >= s.offset && index < s.offset + s.len {
                let i = index - s.offset;
                return if s.len == kind_names.len() {
                    format!("{}[{}]", s.name, kind_names[i])
                } else if s.len == 1 {
                    s.name.clone()
                } else {
                    format!("{}[{}]", s.name, i)
                };
            }
        }
        format!("feature[{index}]")
    }

    pub fn check_compatible(&self, other: &FeatureLayout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Remap(format!(
                "feature layouts differ: {} features (n={}, players={}, memory={}) vs \
                 {} features (n={}, players={}, memory={})",
                self.total_len(),
                self.n_kinds,
                self.players,
                self.memory,
                other.total_len(),
                other.n_kinds,
                other.players,
                other.memory,
            )))
        }
    }
}

/// A seat's view of the game: encoded features plus the legal-action mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
    pub legal_mask: Vec<bool>,
}

impl Observation {
    pub fn legal_kinds(&self) -> Vec<KindId> {
        (0..self.legal_mask.len()).filter(|&k| self.legal_mask[k]).collect()
    }
}

/// Encodes the seat's view: own hand, all boards (seat-relative), round and
/// turn one-hots, and optionally the sleuthed memory of each opponent's hand.
/// Counts are raw integers.
pub fn encode(
    state: &GameState,
    tracker: &MemoryTracker,
    seat: usize,
    layout: &FeatureLayout,
) -> Observation {
    let n = layout.n_kinds;
    let p = layout.players;
    let mut features = vec![0.0; layout.total_len()];
    let mut offset = 0;

    for kind in 0..n {
        features[offset + kind] = state.hand(seat).count(kind) as f64;
    }
    offset += n;
    for kind in 0..n {
        features[offset + kind] = state.board(seat).counts[kind] as f64;
    }
    offset += n;
    for o in 1..p {
        let opp = (seat + o) % p;
        for kind in 0..n {
            features[offset + kind] = state.board(opp).counts[kind] as f64;
        }
        offset += n;
    }
    if state.round() < layout.rounds {
        features[offset + state.round()] = 1.0;
    }
    offset += layout.rounds;
    if state.turn() < layout.hand_size {
        features[offset + state.turn()] = 1.0;
    }
    offset += layout.hand_size;

    if layout.memory {
        for o in 1..p {
            let opp = (seat + o) % p;
            if let Some(hand) = tracker.sleuth(seat, opp) {
                features[offset] = 1.0;
                for kind in 0..n {
                    features[offset + 1 + kind] = hand.count(kind) as f64;
                }
            }
            offset += 1 + n;
        }
    }
    debug_assert_eq!(offset, layout.total_len());

    let legal_mask = (0..n).map(|k| state.hand(seat).count(k) > 0).collect();
    Observation { features, legal_mask }
}

/// Replaces one card in the remembered hand of the upstream neighbour with a
/// different kind (one count down, another up). Everything else is untouched.
pub fn perturb_memory(
    obs: &Observation,
    layout: &FeatureLayout,
    rng: &mut impl Rng,
) -> Result<Observation> {
    let (known, hand) = layout
        .upstream_memory_section()
        .ok_or_else(|| Error::Perturbation("memory is not enabled in this layout".into()))?;
    if obs.features[known.offset] == 0.0 {
        return Err(Error::Perturbation(
            "upstream neighbour's hand is not known".into(),
        ));
    }
    let counts: Vec<u32> = obs.features[hand.offset..hand.offset + hand.len]
        .iter()
        .map(|&c| c as u32)
        .collect();
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Perturbation("remembered hand is empty".into()));
    }

    // Pick a card copy uniformly, then a different kind uniformly.
    let mut pick = rng.random_range(0..total);
    let mut removed = 0;
    for (kind, &c) in counts.iter().enumerate() {
        if pick < c {
            removed = kind;
            break;
        }
        pick -= c;
    }
    let n = hand.len;
    let mut added = rng.random_range(0..n - 1);
    if added >= removed {
        added += 1;
    }

    let mut out = obs.clone();
    out.features[hand.offset + removed] -= 1.0;
    out.features[hand.offset + added] += 1.0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::{my_first_meal, Catalog, GameConfig};
    use crate::game::{new_game, random_legal, step};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn standard_config(seed: u64) -> GameConfig {
        let catalog = Catalog::builtin();
        let menu = my_first_meal(&catalog).unwrap();
        GameConfig::standard(&catalog, menu, seed).unwrap()
    }

    #[test]
    fn layout_lengths_match_arithmetic() {
        let config = standard_config(1);
        let plain = FeatureLayout::new(&config, false);
        assert_eq!(plain.total_len(), 10 + 10 + 30 + 3 + 9);
        let with_memory = FeatureLayout::new(&config, true);
        assert_eq!(with_memory.total_len(), 62 + 3 * 11);
    }

    #[test]
    fn turn_zero_only_own_hand_seen() {
        let state = new_game(standard_config(3)).unwrap();
        let tracker = MemoryTracker::start_round(&state);
        for observer in 0..4 {
            for target in 0..4 {
                let sleuthed = tracker.sleuth(observer, target);
                if observer == target {
                    assert_eq!(sleuthed, Some(state.hand(target)));
                } else {
                    assert_eq!(sleuthed, None);
                }
            }
        }
    }

    #[test]
    fn sleuth_exact_from_turn_three() {
        // DERIVED oracle: simulate games and compare sleuthed hands to the
        // ground truth at every turn.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for game_seed in 0..20 {
            let mut state = new_game(standard_config(1000 + game_seed)).unwrap();
            let mut tracker = MemoryTracker::start_round(&state);
            while !state.is_finished() {
                for observer in 0..4 {
                    for target in 0..4 {
                        if let Some(hand) = tracker.sleuth(observer, target) {
                            assert_eq!(
                                hand,
                                state.hand(target),
                                "sleuth soundness at round {} turn {}",
                                state.round(),
                                state.turn()
                            );
                        }
                        if state.turn() >= 3 {
                            assert!(
                                tracker.sleuth(observer, target).is_some(),
                                "completeness from turn P-1 onward"
                            );
                        }
                    }
                }
                let actions: Vec<_> = (0..4)
                    .map(|s| random_legal(state.hand(s), &mut rng).unwrap())
                    .collect();
                let turn = state.turn();
                let result = step(&state, &actions).unwrap();
                state = result.state;
                if state.turn() == 0 {
                    // Round boundary: fresh circulating hands next round.
                    if !state.is_finished() {
                        tracker = MemoryTracker::start_round(&state);
                    }
                } else {
                    tracker.record_turn(turn, &actions).unwrap();
                }
            }
        }
    }

    #[test]
    fn out_of_order_events_rejected() {
        let state = new_game(standard_config(5)).unwrap();
        let mut tracker = MemoryTracker::start_round(&state);
        let picks: Vec<_> = (0..4).map(|s| state.hand(s).kinds_present()[0]).collect();
        assert!(matches!(
            tracker.record_turn(2, &picks),
            Err(Error::Tracking(_))
        ));
    }

    #[test]
    fn reveal_decrements_one_tracked_count() {
        let state = new_game(standard_config(7)).unwrap();
        let mut tracker = MemoryTracker::start_round(&state);
        let before: Vec<u32> = (0..4).map(|h| tracker.tracked_hand(h).total()).collect();
        let picks: Vec<_> = (0..4).map(|s| state.hand(s).kinds_present()[0]).collect();
        tracker.record_turn(0, &picks).unwrap();
        for h in 0..4 {
            assert_eq!(tracker.tracked_hand(h).total(), before[h] - 1);
        }
    }

    #[test]
    fn encode_excludes_hidden_hands() {
        let config = standard_config(11);
        let layout = FeatureLayout::new(&config, false);
        let state = new_game(config).unwrap();
        let tracker = MemoryTracker::start_round(&state);
        let obs = encode(&state, &tracker, 0, &layout);
        // Swapping two unseen hands leaves seat 0's encoding unchanged.
        let mut altered = state.clone();
        let h2 = altered.hand(2).clone();
        let h3 = altered.hand(3).clone();
        altered.set_hand(2, h3);
        altered.set_hand(3, h2);
        let obs_altered = encode(&altered, &tracker, 0, &layout);
        assert_eq!(obs.features, obs_altered.features);
    }

    #[test]
    fn encode_onehots_and_mask() {
        let config = standard_config(13);
        let layout = FeatureLayout::new(&config, true);
        let state = new_game(config).unwrap();
        let tracker = MemoryTracker::start_round(&state);
        let obs = encode(&state, &tracker, 1, &layout);
        assert_eq!(obs.features.len(), 95);
        let round = layout.section("round").unwrap();
        assert_eq!(&obs.features[round.offset..round.offset + 3], &[1.0, 0.0, 0.0]);
        let turn = layout.section("turn").unwrap();
        assert_eq!(obs.features[turn.offset], 1.0);
        assert_eq!(
            obs.features[turn.offset + 1..turn.offset + 9].iter().sum::<f64>(),
            0.0
        );
        for kind in 0..10 {
            assert_eq!(obs.legal_mask[kind], state.hand(1).count(kind) > 0);
        }
        // At turn 0 no opponent memory is known: flags 0, counts 0.
        for o in 1..4 {
            let known = layout.section(&format!("opp{o}_mem_known")).unwrap();
            let hand = layout.section(&format!("opp{o}_mem_hand")).unwrap();
            assert_eq!(obs.features[known.offset], 0.0);
            assert!(obs.features[hand.offset..hand.offset + hand.len]
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn perturb_moves_exactly_one_card() {
        let config = standard_config(17);
        let layout = FeatureLayout::new(&config, true);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Advance a game to turn 3 so all memory is known.
        let mut state = new_game(config).unwrap();
        let mut tracker = MemoryTracker::start_round(&state);
        for _ in 0..3 {
            let actions: Vec<_> = (0..4)
                .map(|s| random_legal(state.hand(s), &mut rng).unwrap())
                .collect();
            let turn = state.turn();
            state = step(&state, &actions).unwrap().state;
            tracker.record_turn(turn, &actions).unwrap();
        }
        let obs = encode(&state, &tracker, 0, &layout);
        let (_, hand) = layout.upstream_memory_section().unwrap();
        for _ in 0..50 {
            let perturbed = perturb_memory(&obs, &layout, &mut rng).unwrap();
            let l1: f64 = obs
                .features
                .iter()
                .zip(&perturbed.features)
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert_eq!(l1, 2.0);
            // Only the upstream memory hand changed.
            for (i, (a, b)) in obs.features.iter().zip(&perturbed.features).enumerate() {
                if a != b {
                    assert!(i >= hand.offset && i < hand.offset + hand.len);
                }
            }
            let total: f64 = perturbed.features[hand.offset..hand.offset + hand.len]
                .iter()
                .sum();
            let orig: f64 = obs.features[hand.offset..hand.offset + hand.len].iter().sum();
            assert_eq!(total, orig);
            assert!(perturbed.features[hand.offset..hand.offset + hand.len]
                .iter()
                .all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn perturb_enumeration_on_three_card_hand() {
        // DERIVED oracle: a 3-card hand of distinct kinds over n kinds admits
        // exactly 3 x (n - 1) distinct perturbations; the sampler reaches all
        // of them and nothing else.
        let config = standard_config(19);
        let layout = FeatureLayout::new(&config, true);
        let n = layout.n_kinds;
        let (known, hand) = layout.upstream_memory_section().unwrap();
        let mut features = vec![0.0; layout.total_len()];
        features[known.offset] = 1.0;
        features[hand.offset] = 1.0; // kind 0
        features[hand.offset + 3] = 1.0; // kind 3
        features[hand.offset + 7] = 1.0; // kind 7
        let obs = Observation {
            features,
            legal_mask: vec![true; n],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut outcomes = BTreeSet::new();
        for _ in 0..5000 {
            let p = perturb_memory(&obs, &layout, &mut rng).unwrap();
            let counts: Vec<i64> = p.features[hand.offset..hand.offset + hand.len]
                .iter()
                .map(|&v| v as i64)
                .collect();
            outcomes.insert(counts);
        }
        assert_eq!(outcomes.len(), 3 * (n - 1));
    }

    #[test]
    fn perturb_requires_memory_and_known_hand() {
        let config = standard_config(23);
        let no_memory = FeatureLayout::new(&config, false);
        let obs = Observation {
            features: vec![0.0; no_memory.total_len()],
            legal_mask: vec![true; 10],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            perturb_memory(&obs, &no_memory, &mut rng),
            Err(Error::Perturbation(_))
        ));

        let with_memory = FeatureLayout::new(&config, true);
        let obs = Observation {
            features: vec![0.0; with_memory.total_len()],
            legal_mask: vec![true; 10],
        };
        assert!(matches!(
            perturb_memory(&obs, &with_memory, &mut rng),
            Err(Error::Perturbation(_))
        ));
    }
}
