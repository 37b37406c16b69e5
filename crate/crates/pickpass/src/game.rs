//! The simultaneous pick-and-pass state machine.
//!
//! Every seat picks one card per turn; hands rotate one seat in the pass
//! direction; a round ends when hands are empty, scores the boards, and the
//! next round is dealt. Non-dessert cards recirculate through a discard pile
//! (reshuffled into the draw pile when it runs out); collected desserts leave
//! the deck and are scored once at game end.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cards::{Category, ConfigRef, GameConfig, KindId, Menu, PassDirection, ScoreRule};
use crate::error::{Error, Result};

/// Frequency vector over menu kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hand {
    counts: Vec<u32>,
}

impl Hand {
    pub fn empty(n: usize) -> Self {
        Hand { counts: vec![0; n] }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Hand { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, kind: KindId) -> u32 {
        self.counts[kind]
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Kind ids present at least once, ascending.
    pub fn kinds_present(&self) -> Vec<KindId> {
        (0..self.counts.len()).filter(|&k| self.counts[k] > 0).collect()
    }

    pub fn add(&mut self, kind: KindId) {
        self.counts[kind] += 1;
    }

    fn remove(&mut self, kind: KindId) -> Result<()> {
        if self.counts[kind] == 0 {
            return Err(Error::State(format!("kind {kind} not in hand")));
        }
        self.counts[kind] -= 1;
        Ok(())
    }
}

/// One played card: the pick turn and what was picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Play {
    pub turn: usize,
    pub kind: KindId,
}

/// Face-up cards in front of one seat for the current round.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Board {
    pub counts: Vec<u32>,
    pub play_order: Vec<Play>,
    /// `(wasabi play index, nigiri play index)` pairs, in pairing order.
    pub wasabi_pairings: Vec<(usize, usize)>,
    /// Play indices voided by a same-turn miso collision.
    pub miso_voided: Vec<usize>,
}

impl Board {
    pub fn empty(n: usize) -> Self {
        Board {
            counts: vec![0; n],
            play_order: Vec::new(),
            wasabi_pairings: Vec::new(),
            miso_voided: Vec::new(),
        }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Appends a played card (used by the engine and by board replays),
    /// pairing wasabi with the next nigiri. Returns the play index.
    pub fn play(&mut self, turn: usize, kind: KindId, menu: &Menu) -> usize {
        let idx = self.play_order.len();
        self.play_order.push(Play { turn, kind });
        self.counts[kind] += 1;
        if menu.kind(kind).category == Category::Nigiri {
            if let Some(wasabi_idx) = self.first_unpaired_wasabi(menu) {
                self.wasabi_pairings.push((wasabi_idx, idx));
            }
        }
        idx
    }

    fn first_unpaired_wasabi(&self, menu: &Menu) -> Option<usize> {
        self.play_order.iter().enumerate().position(|(i, p)| {
            matches!(menu.kind(p.kind).rule, ScoreRule::Wasabi { .. })
                && !self.wasabi_pairings.iter().any(|&(w, _)| w == i)
        })
    }

    pub(crate) fn icons_of(&self, kind: KindId, menu: &Menu) -> u64 {
        self.counts[kind] as u64 * menu.kind(kind).icons as u64
    }

    pub(crate) fn distinct_categories(&self, menu: &Menu) -> usize {
        let mut seen = [false; 5];
        for (id, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                seen[menu.kind(id).category.index()] = true;
            }
        }
        seen.iter().filter(|&&s| s).count()
    }

    pub(crate) fn largest_category_group(&self, menu: &Menu) -> u32 {
        let mut per_cat = [0u32; 5];
        for (id, &c) in self.counts.iter().enumerate() {
            per_cat[menu.kind(id).category.index()] += c;
        }
        per_cat.into_iter().max().unwrap_or(0)
    }
}

/// Per-seat score deltas produced by round scoring.
pub type ScoreDeltas = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    /// Round scores plus end-game dessert scoring.
    pub final_scores: Vec<i64>,
    /// Dessert contribution alone.
    pub dessert_deltas: Vec<i64>,
    /// Seats sharing the win after tie-breaking, ascending.
    pub winners: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: GameState,
    /// Present when this step completed a round.
    pub round_deltas: Option<ScoreDeltas>,
    /// Present when this step ended the game.
    pub final_result: Option<FinalResult>,
}

#[derive(Debug, Clone)]
pub struct GameState {
    config: ConfigRef,
    hands: Vec<Hand>,
    boards: Vec<Board>,
    round: usize,
    turn: usize,
    scores: Vec<i64>,
    /// Collected dessert copies per seat per kind, over the whole game.
    dessert_counts: Vec<Vec<u32>>,
    draw_pile: Vec<KindId>,
    dessert_pile: Vec<KindId>,
    discard: Vec<KindId>,
    finished: bool,
    rng: ChaCha8Rng,
}

impl GameState {
    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn config_ref(&self) -> ConfigRef {
        self.config.clone()
    }

    pub fn hand(&self, seat: usize) -> &Hand {
        &self.hands[seat]
    }

    pub fn hands(&self) -> &[Hand] {
        &self.hands
    }

    pub fn board(&self, seat: usize) -> &Board {
        &self.boards[seat]
    }

    pub fn boards(&self) -> &[Board] {
        &self.boards
    }

    /// 0-based round index.
    pub fn round(&self) -> usize {
        self.round
    }

    /// 0-based pick index within the round.
    pub fn turn(&self) -> usize {
        self.turn
    }

    /// Running round scores (dessert scoring applies at [`finalize`]).
    pub fn scores(&self) -> &[i64] {
        &self.scores
    }

    pub fn dessert_counts(&self, seat: usize) -> &[u32] {
        &self.dessert_counts[seat]
    }

    pub fn dessert_total(&self, seat: usize) -> u32 {
        self.dessert_counts[seat].iter().sum()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }
}

/// Deals a fresh game: shuffled deck, round-1 hands, zero scores.
pub fn new_game(config: GameConfig) -> Result<GameState> {
    new_game_shared(ConfigRef::new(config))
}

pub fn new_game_shared(config: ConfigRef) -> Result<GameState> {
    config.validate()?;
    let n = config.menu.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut draw_pile = Vec::new();
    let mut dessert_pile = Vec::new();
    for (id, &copies) in config.deck.copies.iter().enumerate() {
        let pile = if config.menu.kind(id).category == Category::Dessert {
            &mut dessert_pile
        } else {
            &mut draw_pile
        };
        for _ in 0..copies {
            pile.push(id);
        }
    }
    draw_pile.shuffle(&mut rng);
    dessert_pile.shuffle(&mut rng);

    let mut state = GameState {
        hands: vec![Hand::empty(n); config.players],
        boards: vec![Board::empty(n); config.players],
        round: 0,
        turn: 0,
        scores: vec![0; config.players],
        dessert_counts: vec![vec![0; n]; config.players],
        draw_pile,
        dessert_pile,
        discard: Vec::new(),
        finished: false,
        config,
        rng,
    };
    state.deal_round()?;
    Ok(state)
}

impl GameState {
    fn deal_round(&mut self) -> Result<()> {
        let config = self.config.clone();
        let inject = config.deck.dessert_schedule[self.round] as usize;
        if self.dessert_pile.len() < inject {
            return Err(Error::Config(format!(
                "dessert pile exhausted in round {}",
                self.round + 1
            )));
        }
        for _ in 0..inject {
            let card = self.dessert_pile.pop().expect("checked length");
            self.draw_pile.push(card);
        }
        self.draw_pile.shuffle(&mut self.rng);

        for seat in 0..config.players {
            for _ in 0..config.hand_size {
                if self.draw_pile.is_empty() {
                    if self.discard.is_empty() {
                        return Err(Error::Config(format!(
                            "deck too small: ran out of cards dealing round {}",
                            self.round + 1
                        )));
                    }
                    self.draw_pile.append(&mut self.discard);
                    self.draw_pile.shuffle(&mut self.rng);
                }
                let card = self.draw_pile.pop().expect("refilled above");
                self.hands[seat].add(card);
            }
        }
        Ok(())
    }
}

/// Kinds the seat can legally play: exactly those with nonzero hand count.
pub fn legal_actions(state: &GameState, seat: usize) -> Result<Vec<KindId>> {
    if state.finished {
        return Err(Error::State("game is finished".into()));
    }
    if seat >= state.config.players {
        return Err(Error::State(format!("no seat {seat}")));
    }
    let kinds = state.hands[seat].kinds_present();
    if kinds.is_empty() {
        return Err(Error::State(format!("seat {seat} has an empty hand")));
    }
    Ok(kinds)
}

/// Applies one simultaneous pick per seat, rotates hands, and fires round
/// scoring / the final dessert scoring when the round / game completes.
pub fn step(state: &GameState, actions: &[KindId]) -> Result<StepResult> {
    if state.finished {
        return Err(Error::State("game is finished".into()));
    }
    let config = state.config.clone();
    let players = config.players;
    if actions.len() != players {
        return Err(Error::State(format!(
            "expected {} actions, got {}",
            players,
            actions.len()
        )));
    }
    for (seat, &action) in actions.iter().enumerate() {
        if action >= config.menu.len() {
            return Err(Error::Action {
                seat,
                msg: format!("kind {action} is not on the menu"),
            });
        }
        if state.hands[seat].count(action) == 0 {
            return Err(Error::Action {
                seat,
                msg: format!("kind {} not in hand", config.menu.kind(action).name),
            });
        }
    }

    let mut next = state.clone();
    let mut miso_plays: Vec<(usize, usize)> = Vec::new(); // (seat, play index)
    for (seat, &action) in actions.iter().enumerate() {
        next.hands[seat].remove(action)?;
        let idx = next.boards[seat].play(next.turn, action, &config.menu);
        if matches!(config.menu.kind(action).rule, ScoreRule::Miso { .. }) {
            miso_plays.push((seat, idx));
        }
        if config.menu.kind(action).category == Category::Dessert {
            next.dessert_counts[seat][action] += 1;
        }
    }
    if miso_plays.len() >= 2 {
        for (seat, idx) in miso_plays {
            next.boards[seat].miso_voided.push(idx);
        }
    }

    // Rotate: passing left hands the remainder to the lower seat index, so
    // seat i receives seat (i+1)'s hand.
    let old = next.hands.clone();
    for seat in 0..players {
        let from = match config.pass_direction {
            PassDirection::Left => (seat + 1) % players,
            PassDirection::Right => (seat + players - 1) % players,
        };
        next.hands[seat] = old[from].clone();
    }
    next.turn += 1;

    let mut round_deltas = None;
    let mut final_result = None;
    if next.turn == config.hand_size {
        let deltas = score_round(&next)?;
        for seat in 0..players {
            next.scores[seat] += deltas[seat];
        }
        round_deltas = Some(deltas);

        // Played non-dessert cards go to the discard pile; collected
        // desserts stay with their owners.
        for board in &mut next.boards {
            for play in &board.play_order {
                if config.menu.kind(play.kind).category != Category::Dessert {
                    next.discard.push(play.kind);
                }
            }
            *board = Board::empty(config.menu.len());
        }
        next.round += 1;
        next.turn = 0;
        if next.round == config.rounds {
            next.finished = true;
            final_result = Some(finalize(&next)?);
        } else {
            next.deal_round()?;
        }
    }

    Ok(StepResult {
        state: next,
        round_deltas,
        final_result,
    })
}

/// Round points for one board given every board in play. Dessert kinds are
/// counted, not scored, here.
pub fn score_board(seat: usize, boards: &[Board], menu: &Menu) -> i64 {
    let board = &boards[seat];
    let mut total = 0i64;
    for kind in 0..menu.len() {
        let count = board.counts[kind];
        let card = menu.kind(kind);
        total += match &card.rule {
            ScoreRule::Nigiri { points } => {
                let boosted: i64 = board
                    .wasabi_pairings
                    .iter()
                    .filter(|&&(_, n)| board.play_order[n].kind == kind)
                    .map(|&(w, _)| {
                        let mult = match menu.kind(board.play_order[w].kind).rule {
                            ScoreRule::Wasabi { multiplier } => multiplier,
                            _ => 1,
                        };
                        (mult - 1) * points
                    })
                    .sum();
                points * count as i64 + boosted
            }
            ScoreRule::Wasabi { .. } => 0,
            ScoreRule::SetBonus { set_size, points } => (count / set_size) as i64 * points,
            ScoreRule::Miso { points } => {
                let voided = board
                    .miso_voided
                    .iter()
                    .filter(|&&i| board.play_order[i].kind == kind)
                    .count() as u32;
                (count - voided) as i64 * points
            }
            ScoreRule::IconMajority { first, second } => {
                if count == 0 {
                    0
                } else {
                    let mine = board.icons_of(kind, menu);
                    match icon_rank(mine, boards, kind, menu) {
                        MajorityRank::First => *first,
                        MajorityRank::Second => *second,
                        MajorityRank::None => 0,
                    }
                }
            }
            ScoreRule::LargestCategorySet => {
                count as i64 * board.largest_category_group(menu) as i64
            }
            ScoreRule::CategoryMajority { points } => {
                if count == 0 {
                    0
                } else {
                    let mine = board.distinct_categories(menu);
                    let best_other = boards
                        .iter()
                        .enumerate()
                        .filter(|&(s, _)| s != seat)
                        .map(|(_, b)| b.distinct_categories(menu))
                        .max()
                        .unwrap_or(0);
                    if mine >= best_other {
                        count as i64 * points
                    } else {
                        0
                    }
                }
            }
            ScoreRule::CountMostFewest { most, fewest } => {
                let all: Vec<u32> = boards.iter().map(|b| b.counts[kind]).collect();
                most_fewest_award(count, &all, *most, *fewest)
            }
            ScoreRule::CountTable { table } => table
                .iter()
                .rev()
                .find(|&&(min, _)| count >= min)
                .map_or(0, |&(_, points)| points),
            ScoreRule::DessertSet { .. } | ScoreRule::DessertMostFewest { .. } => 0,
        };
    }
    total
}

pub(crate) enum MajorityRank {
    First,
    Second,
    None,
}

/// Rank of `mine` icons among all boards' icon totals for `kind`. Zero icons
/// never place; a tie for most suppresses second place.
pub(crate) fn icon_rank(mine: u64, boards: &[Board], kind: KindId, menu: &Menu) -> MajorityRank {
    if mine == 0 {
        return MajorityRank::None;
    }
    let totals: Vec<u64> = boards.iter().map(|b| b.icons_of(kind, menu)).collect();
    let max = *totals.iter().max().expect("nonempty boards");
    if mine == max {
        return MajorityRank::First;
    }
    if totals.iter().filter(|&&t| t == max).count() > 1 {
        return MajorityRank::None;
    }
    let second = totals.iter().copied().filter(|&t| t < max).max().unwrap_or(0);
    if mine == second {
        MajorityRank::Second
    } else {
        MajorityRank::None
    }
}

/// Most/fewest award shared by every tied player. A player with zero copies
/// can take the fewest penalty but never the most award.
pub(crate) fn most_fewest_award(count: u32, all: &[u32], most: i64, fewest: i64) -> i64 {
    let max = *all.iter().max().expect("nonempty boards");
    let min = *all.iter().min().expect("nonempty boards");
    let mut award = 0;
    if count == max && count > 0 {
        award += most;
    }
    if count == min && max != min {
        award += fewest;
    }
    if max == min && max > 0 {
        // Everyone tied with copies in play: both awards apply to all.
        award += fewest;
    }
    award
}

/// Per-seat deltas for a completed round. All hands must be empty.
pub fn score_round(state: &GameState) -> Result<ScoreDeltas> {
    if state.hands.iter().any(|h| !h.is_empty()) {
        return Err(Error::State("round is not over: hands are not empty".into()));
    }
    let menu = &state.config.menu;
    Ok((0..state.config.players)
        .map(|seat| score_board(seat, &state.boards, menu))
        .collect())
}

/// End-game dessert deltas: set desserts score per completed set; majority
/// desserts award most/fewest across seats.
pub fn dessert_scores(dessert_counts: &[Vec<u32>], menu: &Menu) -> Vec<i64> {
    let players = dessert_counts.len();
    let mut deltas = vec![0i64; players];
    for kind in menu.dessert_ids() {
        match &menu.kind(kind).rule {
            ScoreRule::DessertSet { set_size, points } => {
                for seat in 0..players {
                    deltas[seat] += (dessert_counts[seat][kind] / set_size) as i64 * points;
                }
            }
            ScoreRule::DessertMostFewest { most, fewest } => {
                let all: Vec<u32> = (0..players).map(|s| dessert_counts[s][kind]).collect();
                for seat in 0..players {
                    deltas[seat] += most_fewest_award(all[seat], &all, *most, *fewest);
                }
            }
            _ => unreachable!("dessert kinds carry dessert rules"),
        }
    }
    deltas
}

/// Winner set: argmax of final scores, ties broken by total collected
/// desserts, residual ties shared.
pub fn winners_of(final_scores: &[i64], dessert_totals: &[u32]) -> Vec<usize> {
    let best = *final_scores.iter().max().expect("at least one seat");
    let tied: Vec<usize> = (0..final_scores.len())
        .filter(|&s| final_scores[s] == best)
        .collect();
    if tied.len() > 1 {
        let best_desserts = tied.iter().map(|&s| dessert_totals[s]).max().unwrap();
        tied.into_iter()
            .filter(|&s| dessert_totals[s] == best_desserts)
            .collect()
    } else {
        tied
    }
}

/// End-game dessert scoring, final totals, and the winner set. Ties on the
/// final score break by total collected desserts; residual ties share the win.
pub fn finalize(state: &GameState) -> Result<FinalResult> {
    if !state.finished {
        return Err(Error::State("game is not finished".into()));
    }
    let config = &state.config;
    let players = config.players;
    let dessert_deltas = dessert_scores(&state.dessert_counts, &config.menu);
    let final_scores: Vec<i64> = (0..players)
        .map(|s| state.scores[s] + dessert_deltas[s])
        .collect();
    let dessert_totals: Vec<u32> = (0..players).map(|s| state.dessert_total(s)).collect();
    let winners = winners_of(&final_scores, &dessert_totals);
    Ok(FinalResult {
        final_scores,
        dessert_deltas,
        winners,
    })
}

#[cfg(test)]
impl GameState {
    /// Test-only: overwrite a seat's hand to craft scenarios.
    pub(crate) fn set_hand(&mut self, seat: usize, hand: Hand) {
        self.hands[seat] = hand;
    }
}

/// Uniform pick over the kinds present in the hand (kind-uniform).
pub fn random_legal(hand: &Hand, rng: &mut impl Rng) -> Option<KindId> {
    let kinds = hand.kinds_present();
    if kinds.is_empty() {
        None
    } else {
        Some(kinds[rng.random_range(0..kinds.len())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::{my_first_meal, Catalog};

    fn standard_state(seed: u64) -> GameState {
        let catalog = Catalog::builtin();
        let menu = my_first_meal(&catalog).unwrap();
        let config = GameConfig::standard(&catalog, menu, seed).unwrap();
        new_game(config).unwrap()
    }

    fn random_actions(state: &GameState, rng: &mut ChaCha8Rng) -> Vec<KindId> {
        (0..state.config().players)
            .map(|seat| random_legal(state.hand(seat), rng).expect("hand nonempty"))
            .collect()
    }

    #[test]
    fn new_game_deals_full_hands() {
        let state = standard_state(7);
        assert_eq!(state.hands().len(), 4);
        for hand in state.hands() {
            assert_eq!(hand.total(), 9);
        }
        assert_eq!(state.scores(), &[0, 0, 0, 0]);
        assert_eq!(state.round(), 0);
        assert_eq!(state.turn(), 0);
    }

    #[test]
    fn new_game_is_deterministic() {
        let a = standard_state(123);
        let b = standard_state(123);
        assert_eq!(a.hands(), b.hands());
        assert_eq!(a.draw_pile, b.draw_pile);
        let c = standard_state(124);
        assert_ne!(a.hands(), c.hands());
    }

    #[test]
    fn legal_actions_are_nonzero_hand_entries() {
        let state = standard_state(5);
        for seat in 0..4 {
            let legal = legal_actions(&state, seat).unwrap();
            for kind in 0..state.config().menu.len() {
                assert_eq!(legal.contains(&kind), state.hand(seat).count(kind) > 0);
            }
        }
    }

    #[test]
    fn legal_actions_error_on_empty_hand() {
        let mut state = standard_state(19);
        state.set_hand(1, Hand::empty(state.config().menu.len()));
        assert!(matches!(legal_actions(&state, 1), Err(Error::State(_))));
        assert!(legal_actions(&state, 0).is_ok());
        assert!(matches!(legal_actions(&state, 9), Err(Error::State(_))));
    }

    #[test]
    fn step_decrements_hands_and_rotates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let state = standard_state(9);
        let actions = random_actions(&state, &mut rng);
        let before = state.hands().to_vec();
        let result = step(&state, &actions).unwrap();
        for (seat, hand) in result.state.hands().iter().enumerate() {
            assert_eq!(hand.total(), 8, "hand size drops by exactly one");
            // Left pass: seat i now holds seat (i+1)'s previous hand minus its pick.
            let mut expected = before[(seat + 1) % 4].clone();
            expected.remove(actions[(seat + 1) % 4]).unwrap();
            assert_eq!(*hand, expected, "rotation mismatch at seat {seat}");
        }
    }

    #[test]
    fn conservation_within_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = standard_state(11);
        let total = |s: &GameState| -> u32 {
            s.hands().iter().map(Hand::total).sum::<u32>()
                + s.boards().iter().map(Board::total).sum::<u32>()
        };
        let start = total(&state);
        for _ in 0..8 {
            let actions = random_actions(&state, &mut rng);
            state = step(&state, &actions).unwrap().state;
            assert_eq!(total(&state), start);
        }
    }

    #[test]
    fn full_game_takes_27_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut state = standard_state(13);
        let mut steps = 0;
        while !state.is_finished() {
            let actions = random_actions(&state, &mut rng);
            let result = step(&state, &actions).unwrap();
            state = result.state;
            steps += 1;
            assert!(steps <= 27, "game must end in 27 steps");
        }
        assert_eq!(steps, 27);
        assert!(step(&state, &[0, 0, 0, 0]).is_err());
        assert!(legal_actions(&state, 0).is_err());
    }

    #[test]
    fn illegal_action_names_seat() {
        let state = standard_state(17);
        let missing = (0..10)
            .find(|&k| state.hand(2).count(k) == 0)
            .expect("some kind absent from a 9-card hand over 10 kinds");
        let mut actions = Vec::new();
        for seat in 0..4 {
            actions.push(if seat == 2 {
                missing
            } else {
                state.hand(seat).kinds_present()[0]
            });
        }
        match step(&state, &actions) {
            Err(Error::Action { seat, .. }) => assert_eq!(seat, 2),
            other => panic!("expected action error, got {other:?}"),
        }
    }

    fn menu_board(menu: &Menu, plays: &[(usize, &str)]) -> Board {
        let mut board = Board::empty(menu.len());
        for &(turn, name) in plays {
            board.play(turn, menu.id_of(name).unwrap(), menu);
        }
        board
    }

    #[test]
    fn score_board_fixtures() {
        let catalog = Catalog::builtin();
        let menu = my_first_meal(&catalog).unwrap();
        let empty = Board::empty(menu.len());

        // Lone tempura scores nothing; a pair scores 5.
        let one_tempura = menu_board(&menu, &[(0, "tempura")]);
        let boards = vec![one_tempura, empty.clone(), empty.clone(), empty.clone()];
        assert_eq!(score_board(0, &boards, &menu), 0);

        let two_tempura = menu_board(&menu, &[(0, "tempura"), (1, "tempura")]);
        let boards = vec![two_tempura, empty.clone(), empty.clone(), empty.clone()];
        assert_eq!(score_board(0, &boards, &menu), 5);

        let three_sashimi =
            menu_board(&menu, &[(0, "sashimi"), (1, "sashimi"), (2, "sashimi")]);
        let boards = vec![three_sashimi, empty.clone(), empty.clone(), empty.clone()];
        assert_eq!(score_board(0, &boards, &menu), 10);

        let squid = menu_board(&menu, &[(0, "squid_nigiri")]);
        let boards = vec![squid, empty.clone(), empty.clone(), empty.clone()];
        assert_eq!(score_board(0, &boards, &menu), 3);

        // Wasabi then squid: 3 x 3 = 9.
        let wasabi_squid = menu_board(&menu, &[(0, "wasabi"), (1, "squid_nigiri")]);
        let boards = vec![wasabi_squid, empty.clone(), empty.clone(), empty.clone()];
        assert_eq!(score_board(0, &boards, &menu), 9);

        // Unused wasabi scores nothing.
        let lone_wasabi = menu_board(&menu, &[(0, "wasabi")]);
        let boards = vec![lone_wasabi, empty.clone(), empty.clone(), empty.clone()];
        assert_eq!(score_board(0, &boards, &menu), 0);
    }

    #[test]
    fn miso_collision_voids_all() {
        let state = {
            // Craft hands so seats 0 and 1 both hold miso.
            let catalog = Catalog::builtin();
            let menu = my_first_meal(&catalog).unwrap();
            let config = GameConfig::standard(&catalog, menu, 21).unwrap();
            let mut state = new_game(config).unwrap();
            let miso = state.config().menu.id_of("miso_soup").unwrap();
            for seat in 0..2 {
                let mut counts = state.hands[seat].counts().to_vec();
                // Replace the first present kind with a miso.
                let k = state.hands[seat].kinds_present()[0];
                counts[k] -= 1;
                counts[miso] += 1;
                state.hands[seat] = Hand::from_counts(counts);
            }
            state
        };
        let miso = state.config().menu.id_of("miso_soup").unwrap();
        let mut actions = vec![miso, miso];
        for seat in 2..4 {
            let k = state
                .hand(seat)
                .kinds_present()
                .into_iter()
                .find(|&k| k != miso)
                .unwrap();
            actions.push(k);
        }
        let result = step(&state, &actions).unwrap();
        assert_eq!(result.state.boards()[0].miso_voided.len(), 1);
        assert_eq!(result.state.boards()[1].miso_voided.len(), 1);
        let menu = &state.config().menu;
        // Both voided misos score zero.
        assert_eq!(
            score_board(0, result.state.boards(), menu)
                + score_board(1, result.state.boards(), menu),
            0
        );
    }

    #[test]
    fn score_round_requires_empty_hands() {
        let state = standard_state(23);
        assert!(matches!(score_round(&state), Err(Error::State(_))));
    }

    #[test]
    fn finalize_requires_finished_game() {
        let state = standard_state(29);
        assert!(matches!(finalize(&state), Err(Error::State(_))));
    }

    #[test]
    fn finalize_applies_dessert_sets_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut state = standard_state(31);
        while !state.is_finished() {
            let actions = random_actions(&state, &mut rng);
            state = step(&state, &actions).unwrap().state;
        }
        let gtic = state.config().menu.id_of("green_tea_ice_cream").unwrap();
        // Force known dessert counts: 4 sets score 12 each.
        for seat in 0..4 {
            state.dessert_counts[seat] = vec![0; state.config().menu.len()];
        }
        state.dessert_counts[0][gtic] = 4;
        state.scores = vec![10, 20, 15, 5];
        let result = finalize(&state).unwrap();
        assert_eq!(result.dessert_deltas, vec![12, 0, 0, 0]);
        assert_eq!(result.final_scores, vec![22, 20, 15, 5]);
        assert_eq!(result.winners, vec![0]);

        // Two-way residual tie: equal scores and equal desserts share the win.
        state.scores = vec![20, 20, 1, 1];
        state.dessert_counts[0][gtic] = 0;
        let result = finalize(&state).unwrap();
        assert_eq!(result.winners, vec![0, 1]);

        // Dessert count breaks a score tie.
        state.dessert_counts[1][gtic] = 2;
        let result = finalize(&state).unwrap();
        assert_eq!(result.winners, vec![1]);
    }
}
