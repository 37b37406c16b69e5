//! JSON-lines game logs (one event per pick with a hand snapshot) and the
//! priority list built from logged play: each scored point is attributed to
//! the cards that produced it, and kinds rank by mean points per copy played.
//!
//! Attribution rules: set cards split their set points equally across the
//! completed sets' cards (leftover copies get 0); a wasabi-boosted nigiri
//! splits the tripled value 2:1 nigiri:wasabi; icon-majority awards split
//! across the player's roll copies; per-player awards (temaki, soy sauce,
//! tea, eel, tofu, pudding) split across the copies that earned them.
//! Negative awards attribute likewise; an award earned with zero copies
//! (the fewest-count penalty) has no card to carry it and is dropped.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cards::{Catalog, KindId, Menu, ScoreRule};
use crate::error::{Error, Result};
use crate::game::{icon_rank, most_fewest_award, Board, FinalResult, GameState, MajorityRank};
use crate::observe::Observation;
use crate::sim::GameHook;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    GameStart {
        game: usize,
        players: usize,
        hand_size: usize,
        rounds: usize,
        menu: Vec<String>,
    },
    Pick {
        game: usize,
        round: usize,
        turn: usize,
        seat: usize,
        card: String,
        /// Hand counts before the pick.
        hand: Vec<u32>,
    },
    RoundEnd {
        game: usize,
        round: usize,
        deltas: Vec<i64>,
        scores: Vec<i64>,
    },
    GameEnd {
        game: usize,
        final_scores: Vec<i64>,
        dessert_deltas: Vec<i64>,
        winners: Vec<usize>,
    },
}

/// Game hook that accumulates log events for one or more games.
pub struct GameRecorder {
    game: usize,
    started: bool,
    pub events: Vec<LogEvent>,
}

impl GameRecorder {
    pub fn new() -> Self {
        GameRecorder {
            game: 0,
            started: false,
            events: Vec::new(),
        }
    }

    /// Advances the game counter; call between games.
    pub fn next_game(&mut self) {
        self.game += 1;
        self.started = false;
    }
}

impl Default for GameRecorder {
    fn default() -> Self {
        Self::new()
    }
}

impl GameHook for GameRecorder {
    fn on_game_begin(&mut self, game_index: usize) {
        self.game = game_index;
        self.started = false;
    }

    fn on_pick(&mut self, state: &GameState, seat: usize, _obs: &Observation, action: KindId) {
        if !self.started {
            self.started = true;
            self.events.push(LogEvent::GameStart {
                game: self.game,
                players: state.config().players,
                hand_size: state.config().hand_size,
                rounds: state.config().rounds,
                menu: state.config().menu.names(),
            });
        }
        self.events.push(LogEvent::Pick {
            game: self.game,
            round: state.round(),
            turn: state.turn(),
            seat,
            card: state.config().menu.kind(action).name.clone(),
            hand: state.hand(seat).counts().to_vec(),
        });
    }

    fn on_round_end(&mut self, state: &GameState, deltas: &[i64]) {
        self.events.push(LogEvent::RoundEnd {
            game: self.game,
            round: state.round() - 1,
            deltas: deltas.to_vec(),
            scores: state.scores().to_vec(),
        });
    }

    fn on_game_end(&mut self, _state: &GameState, final_result: &FinalResult) {
        self.events.push(LogEvent::GameEnd {
            game: self.game,
            final_scores: final_result.final_scores.clone(),
            dessert_deltas: final_result.dessert_deltas.clone(),
            winners: final_result.winners.clone(),
        });
    }
}

pub fn write_jsonl(events: &[LogEvent], mut writer: impl Write) -> Result<()> {
    for event in events {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<LogEvent>> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: LogEvent = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("bad log line {}: {e}", i + 1)))?;
        events.push(event);
    }
    Ok(events)
}

#[derive(Debug, Clone, Serialize)]
pub struct KindPointStat {
    pub name: String,
    pub total_points: f64,
    pub copies_played: u64,
    pub mean_points: f64,
    /// False when the kind never hit a board in the logs.
    pub played: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorityFromLogs {
    /// Kind names, best first.
    pub ranking: Vec<String>,
    pub stats: Vec<KindPointStat>,
    pub games: usize,
}

/// Builds a priority list from completed games in the logs by attributing
/// each scored point to cards and ranking kinds by mean points per copy
/// played (never-played kinds rank last, flagged).
pub fn priority_from_logs(events: &[LogEvent], catalog: &Catalog) -> Result<PriorityFromLogs> {
    if events.is_empty() {
        return Err(Error::Input("empty game logs".into()));
    }

    let mut menu: Option<Menu> = None;
    let mut totals: Vec<f64> = Vec::new();
    let mut copies: Vec<u64> = Vec::new();
    let mut games = 0usize;

    // Per-game replay state.
    let mut boards: Vec<Board> = Vec::new();
    let mut dessert_counts: Vec<Vec<u32>> = Vec::new();
    let mut current_round = 0usize;
    let mut pending_round = false; // boards hold unscored plays
    let mut picks_this_turn: Vec<(usize, KindId)> = Vec::new();
    let mut current_turn = 0usize;

    // Collects the same-turn simultaneous picks to apply miso voiding.
    fn flush_turn(
        boards: &mut [Board],
        menu: &Menu,
        turn: usize,
        picks: &mut Vec<(usize, KindId)>,
    ) {
        let miso: Vec<usize> = picks
            .iter()
            .filter(|&&(_, k)| matches!(menu.kind(k).rule, ScoreRule::Miso { .. }))
            .map(|&(seat, _)| seat)
            .collect();
        for &(seat, kind) in picks.iter() {
            let idx = boards[seat].play(turn, kind, menu);
            if miso.len() >= 2 && matches!(menu.kind(kind).rule, ScoreRule::Miso { .. }) {
                boards[seat].miso_voided.push(idx);
            }
        }
        picks.clear();
    }

    for event in events {
        match event {
            LogEvent::GameStart {
                players,
                menu: names,
                ..
            } => {
                let m = match &menu {
                    Some(m) => {
                        if m.names() != *names {
                            return Err(Error::Input(
                                "logs mix games with different menus".into(),
                            ));
                        }
                        m.clone()
                    }
                    None => {
                        let m = Menu::from_names(catalog, names, false)?;
                        totals = vec![0.0; m.len()];
                        copies = vec![0; m.len()];
                        menu = Some(m.clone());
                        m
                    }
                };
                boards = vec![Board::empty(m.len()); *players];
                dessert_counts = vec![vec![0; m.len()]; *players];
                current_round = 0;
                current_turn = 0;
                pending_round = false;
                picks_this_turn.clear();
            }
            LogEvent::Pick {
                round,
                turn,
                seat,
                card,
                ..
            } => {
                let m = menu
                    .as_ref()
                    .ok_or_else(|| Error::Input("pick before game_start".into()))?;
                let kind = m
                    .id_of(card)
                    .ok_or_else(|| Error::Input(format!("unknown card {card:?} in log")))?;
                if *round != current_round || *turn != current_turn {
                    flush_turn(&mut boards, m, current_turn, &mut picks_this_turn);
                    current_round = *round;
                    current_turn = *turn;
                }
                picks_this_turn.push((*seat, kind));
                if m.kind(kind).category == crate::cards::Category::Dessert {
                    dessert_counts[*seat][kind] += 1;
                }
                pending_round = true;
            }
            LogEvent::RoundEnd { .. } => {
                let m = menu
                    .as_ref()
                    .ok_or_else(|| Error::Input("round_end before game_start".into()))?;
                flush_turn(&mut boards, m, current_turn, &mut picks_this_turn);
                attribute_round(&boards, m, &mut totals, &mut copies);
                for b in boards.iter_mut() {
                    *b = Board::empty(m.len());
                }
                pending_round = false;
            }
            LogEvent::GameEnd { .. } => {
                let m = menu
                    .as_ref()
                    .ok_or_else(|| Error::Input("game_end before game_start".into()))?;
                if pending_round {
                    // Logs without round_end markers: score what is left.
                    flush_turn(&mut boards, m, current_turn, &mut picks_this_turn);
                    attribute_round(&boards, m, &mut totals, &mut copies);
                    pending_round = false;
                }
                attribute_desserts(&dessert_counts, m, &mut totals, &mut copies);
                games += 1;
            }
        }
    }
    if games == 0 {
        return Err(Error::Input("logs contain no completed games".into()));
    }
    let m = menu.expect("games > 0 implies a menu");

    let mut stats: Vec<KindPointStat> = (0..m.len())
        .map(|k| KindPointStat {
            name: m.kind(k).name.clone(),
            total_points: totals[k],
            copies_played: copies[k],
            mean_points: if copies[k] > 0 {
                totals[k] / copies[k] as f64
            } else {
                0.0
            },
            played: copies[k] > 0,
        })
        .collect();
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| {
        stats[b]
            .played
            .cmp(&stats[a].played)
            .then(
                stats[b]
                    .mean_points
                    .partial_cmp(&stats[a].mean_points)
                    .expect("finite means"),
            )
            .then(stats[b].copies_played.cmp(&stats[a].copies_played))
            .then(a.cmp(&b))
    });
    let ranking: Vec<String> = order.iter().map(|&k| m.kind(k).name.clone()).collect();
    stats.sort_by(|a, b| {
        let pa = ranking.iter().position(|n| *n == a.name).unwrap();
        let pb = ranking.iter().position(|n| *n == b.name).unwrap();
        pa.cmp(&pb)
    });
    Ok(PriorityFromLogs {
        ranking,
        stats,
        games,
    })
}

/// Attributes one completed round's board points to kinds.
fn attribute_round(boards: &[Board], menu: &Menu, totals: &mut [f64], copies: &mut [u64]) {
    for (seat, board) in boards.iter().enumerate() {
        for kind in 0..menu.len() {
            let count = board.counts[kind];
            if count == 0 {
                continue;
            }
            if menu.kind(kind).category != crate::cards::Category::Dessert {
                copies[kind] += count as u64;
            }
            match &menu.kind(kind).rule {
                ScoreRule::Nigiri { points } => {
                    let boosted: Vec<&(usize, usize)> = board
                        .wasabi_pairings
                        .iter()
                        .filter(|&&(_, n)| board.play_order[n].kind == kind)
                        .collect();
                    let plain = count as i64 - boosted.len() as i64;
                    totals[kind] += (plain * points) as f64;
                    for &&(w, _) in &boosted {
                        let mult = match menu.kind(board.play_order[w].kind).rule {
                            ScoreRule::Wasabi { multiplier } => multiplier,
                            _ => 1,
                        };
                        // Tripled value split 2:1 nigiri:wasabi.
                        let total_value = (mult * points) as f64;
                        totals[kind] += total_value * 2.0 / 3.0;
                        totals[board.play_order[w].kind] += total_value / 3.0;
                    }
                }
                ScoreRule::Wasabi { .. } => {
                    // Credited via its paired nigiri; unused wasabi earns 0.
                }
                ScoreRule::SetBonus { set_size, points } => {
                    totals[kind] += ((count / set_size) as i64 * points) as f64;
                }
                ScoreRule::Miso { points } => {
                    let voided = board
                        .miso_voided
                        .iter()
                        .filter(|&&i| board.play_order[i].kind == kind)
                        .count() as u32;
                    totals[kind] += ((count - voided) as i64 * points) as f64;
                }
                ScoreRule::IconMajority { first, second } => {
                    let mine = board.icons_of(kind, menu);
                    let award = match icon_rank(mine, boards, kind, menu) {
                        MajorityRank::First => *first,
                        MajorityRank::Second => *second,
                        MajorityRank::None => 0,
                    };
                    totals[kind] += award as f64;
                }
                ScoreRule::LargestCategorySet => {
                    totals[kind] += (count as i64 * board.largest_category_group(menu) as i64) as f64;
                }
                ScoreRule::CategoryMajority { points } => {
                    let mine = board.distinct_categories(menu);
                    let best_other = boards
                        .iter()
                        .enumerate()
                        .filter(|&(s, _)| s != seat)
                        .map(|(_, b)| b.distinct_categories(menu))
                        .max()
                        .unwrap_or(0);
                    if mine >= best_other {
                        totals[kind] += (count as i64 * points) as f64;
                    }
                }
                ScoreRule::CountMostFewest { most, fewest } => {
                    let all: Vec<u32> = boards.iter().map(|b| b.counts[kind]).collect();
                    totals[kind] += most_fewest_award(count, &all, *most, *fewest) as f64;
                }
                ScoreRule::CountTable { table } => {
                    let award = table
                        .iter()
                        .rev()
                        .find(|&&(min, _)| count >= min)
                        .map_or(0, |&(_, points)| points);
                    totals[kind] += award as f64;
                }
                ScoreRule::DessertSet { .. } | ScoreRule::DessertMostFewest { .. } => {
                    // Dessert points attribute once at game end.
                }
            }
        }
    }
}

/// Attributes end-game dessert points to dessert kinds.
fn attribute_desserts(
    dessert_counts: &[Vec<u32>],
    menu: &Menu,
    totals: &mut [f64],
    copies: &mut [u64],
) {
    let players = dessert_counts.len();
    for kind in menu.dessert_ids() {
        for seat in 0..players {
            copies[kind] += dessert_counts[seat][kind] as u64;
        }
        match &menu.kind(kind).rule {
            ScoreRule::DessertSet { set_size, points } => {
                for seat in 0..players {
                    totals[kind] +=
                        ((dessert_counts[seat][kind] / set_size) as i64 * points) as f64;
                }
            }
            ScoreRule::DessertMostFewest { most, fewest } => {
                let all: Vec<u32> = (0..players).map(|s| dessert_counts[s][kind]).collect();
                for seat in 0..players {
                    if all[seat] > 0 {
                        totals[kind] +=
                            most_fewest_award(all[seat], &all, *most, *fewest) as f64;
                    }
                }
            }
            _ => unreachable!("dessert kinds carry dessert rules"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Agent, RandomAgent};
    use crate::cards::{my_first_meal, Catalog, GameConfig};
    use crate::sim::{derive_seed, play_game};

    fn standard_config(seed: u64) -> GameConfig {
        let catalog = Catalog::builtin();
        let menu = my_first_meal(&catalog).unwrap();
        GameConfig::standard(&catalog, menu, seed).unwrap()
    }

    fn record_games(n: usize, seed: u64) -> Vec<LogEvent> {
        let config = standard_config(seed);
        let agents: Vec<&dyn Agent> = vec![&RandomAgent, &RandomAgent, &RandomAgent, &RandomAgent];
        let mut recorder = GameRecorder::new();
        for g in 0..n {
            play_game(&agents, &config, derive_seed(seed, g as u64), &mut recorder).unwrap();
            recorder.next_game();
        }
        recorder.events
    }

    #[test]
    fn jsonl_roundtrip() {
        let events = record_games(2, 5);
        let mut buf = Vec::new();
        write_jsonl(&events, &mut buf).unwrap();
        let back = read_jsonl(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(events, back);
    }

    #[test]
    fn recorder_event_counts() {
        let events = record_games(3, 7);
        let picks = events
            .iter()
            .filter(|e| matches!(e, LogEvent::Pick { .. }))
            .count();
        assert_eq!(picks, 3 * 27 * 4);
        let starts = events
            .iter()
            .filter(|e| matches!(e, LogEvent::GameStart { .. }))
            .count();
        assert_eq!(starts, 3);
        let ends = events
            .iter()
            .filter(|e| matches!(e, LogEvent::GameEnd { .. }))
            .count();
        assert_eq!(ends, 3);
    }

    #[test]
    fn empty_logs_rejected() {
        let catalog = Catalog::builtin();
        assert!(matches!(
            priority_from_logs(&[], &catalog),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn squid_only_toy_log() {
        // Logs where only squid nigiri is ever played: mean 3.0, ranked
        // first among played kinds; everything else flagged unplayed.
        let catalog = Catalog::builtin();
        let menu = my_first_meal(&catalog).unwrap();
        let mut events = vec![LogEvent::GameStart {
            game: 0,
            players: 2,
            hand_size: 1,
            rounds: 1,
            menu: menu.names(),
        }];
        for seat in 0..2 {
            events.push(LogEvent::Pick {
                game: 0,
                round: 0,
                turn: 0,
                seat,
                card: "squid_nigiri".into(),
                hand: vec![],
            });
        }
        events.push(LogEvent::RoundEnd {
            game: 0,
            round: 0,
            deltas: vec![3, 3],
            scores: vec![3, 3],
        });
        events.push(LogEvent::GameEnd {
            game: 0,
            final_scores: vec![3, 3],
            dessert_deltas: vec![0, 0],
            winners: vec![0, 1],
        });
        let report = priority_from_logs(&events, &catalog).unwrap();
        assert_eq!(report.ranking[0], "squid_nigiri");
        assert_eq!(report.stats[0].mean_points, 3.0);
        assert_eq!(report.stats[0].copies_played, 2);
        assert!(report.stats.iter().skip(1).all(|s| !s.played));
        assert!(report.stats.iter().skip(1).all(|s| s.mean_points == 0.0));
    }

    #[test]
    fn toy_round_manual_attribution() {
        // DERIVED oracle: hand-computed attribution for a crafted round.
        // Seat 0: wasabi then squid (9 -> squid 6, wasabi 3), 2 tempura (5).
        // Seat 1: 2 maki (most icons: 6 to maki), 1 egg (1).
        let catalog = Catalog::builtin();
        let menu = my_first_meal(&catalog).unwrap();
        let make_pick = |seat: usize, turn: usize, card: &str| LogEvent::Pick {
            game: 0,
            round: 0,
            turn,
            seat,
            card: card.into(),
            hand: vec![],
        };
        let events = vec![
            LogEvent::GameStart {
                game: 0,
                players: 2,
                hand_size: 4,
                rounds: 1,
                menu: menu.names(),
            },
            make_pick(0, 0, "wasabi"),
            make_pick(1, 0, "maki"),
            make_pick(0, 1, "squid_nigiri"),
            make_pick(1, 1, "maki"),
            make_pick(0, 2, "tempura"),
            make_pick(1, 2, "egg_nigiri"),
            make_pick(0, 3, "tempura"),
            make_pick(1, 3, "egg_nigiri"),
            LogEvent::RoundEnd {
                game: 0,
                round: 0,
                deltas: vec![14, 8],
                scores: vec![14, 8],
            },
            LogEvent::GameEnd {
                game: 0,
                final_scores: vec![14, 8],
                dessert_deltas: vec![0, 0],
                winners: vec![0],
            },
        ];
        let report = priority_from_logs(&events, &catalog).unwrap();
        let stat = |name: &str| {
            report
                .stats
                .iter()
                .find(|s| s.name == name)
                .unwrap_or_else(|| panic!("{name} missing"))
        };
        assert_eq!(stat("squid_nigiri").total_points, 6.0);
        assert_eq!(stat("wasabi").total_points, 3.0);
        assert_eq!(stat("tempura").total_points, 5.0);
        assert_eq!(stat("tempura").mean_points, 2.5);
        assert_eq!(stat("maki").total_points, 6.0);
        assert_eq!(stat("maki").mean_points, 3.0);
        assert_eq!(stat("egg_nigiri").total_points, 2.0);
        // Ranking: squid 6.0, wasabi 3.0, maki 3.0, tempura 2.5, egg 1.0.
        assert_eq!(report.ranking[0], "squid_nigiri");
    }

    #[test]
    fn attribution_totals_match_engine_scoring() {
        // Anti-drift oracle: over random games, summed attributed points
        // equal the engine's scores except for zero-copy fewest penalties
        // (which have no card to attribute to). The default menu has no
        // such rule (GTIC is a set dessert), so equality is exact.
        let catalog = Catalog::builtin();
        let config = standard_config(40);
        let agents: Vec<&dyn Agent> = vec![&RandomAgent, &RandomAgent, &RandomAgent, &RandomAgent];
        let mut recorder = GameRecorder::new();
        let mut engine_total = 0.0;
        for g in 0..10 {
            let outcome =
                play_game(&agents, &config, derive_seed(41, g), &mut recorder).unwrap();
            engine_total += outcome.final_scores.iter().sum::<i64>() as f64;
            recorder.next_game();
        }
        let report = priority_from_logs(&recorder.events, &catalog).unwrap();
        let attributed: f64 = report.stats.iter().map(|s| s.total_points).sum();
        assert!(
            (attributed - engine_total).abs() < 1e-9,
            "attributed {attributed} vs engine {engine_total}"
        );
    }
}
