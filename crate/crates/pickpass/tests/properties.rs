//! Property tests for the engine and analysis invariants.

use pickpass::agents::{priority_act, PriorityList};
use pickpass::cards::{my_first_meal, Catalog, GameConfig};
use pickpass::game::{new_game, random_legal, step, Hand};
use pickpass::interpret::{kendall_tau_ids, preference_matrix, PreferenceSample};
use pickpass::observe::{encode, FeatureLayout, MemoryTracker};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn standard_config(seed: u64) -> GameConfig {
    let catalog = Catalog::builtin();
    let menu = my_first_meal(&catalog).unwrap();
    GameConfig::standard(&catalog, menu, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Conservation, rotation, and equal-hands hold along random games.
    #[test]
    fn engine_invariants_hold(seed in 0u64..10_000, action_seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
        let mut state = new_game(standard_config(seed)).unwrap();
        while !state.is_finished() {
            let before = state.hands().to_vec();
            let in_round: u32 = state.hands().iter().map(Hand::total).sum::<u32>()
                + state.boards().iter().map(|b| b.total()).sum::<u32>();
            let actions: Vec<_> = (0..4)
                .map(|s| random_legal(state.hand(s), &mut rng).unwrap())
                .collect();
            let result = step(&state, &actions).unwrap();
            let next = result.state;

            let sizes: Vec<u32> = next.hands().iter().map(Hand::total).collect();
            prop_assert!(sizes.windows(2).all(|w| w[0] == w[1]), "equal hands");

            if result.round_deltas.is_none() {
                // Mid-round: total cards conserved, hands rotated left.
                let after: u32 = next.hands().iter().map(Hand::total).sum::<u32>()
                    + next.boards().iter().map(|b| b.total()).sum::<u32>();
                prop_assert_eq!(in_round, after, "conservation");
                for seat in 0..4 {
                    let mut expected = before[(seat + 1) % 4].clone();
                    let mut counts = expected.counts().to_vec();
                    counts[actions[(seat + 1) % 4]] -= 1;
                    expected = Hand::from_counts(counts);
                    prop_assert_eq!(next.hand(seat), &expected, "rotation");
                }
            }
            state = next;
        }
    }

    /// Identical configs and action sequences give identical trajectories.
    #[test]
    fn deterministic_replay(seed in 0u64..10_000) {
        let mut rng_a = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let mut rng_b = rng_a.clone();
        let mut a = new_game(standard_config(seed)).unwrap();
        let mut b = new_game(standard_config(seed)).unwrap();
        for _ in 0..27 {
            let actions_a: Vec<_> = (0..4)
                .map(|s| random_legal(a.hand(s), &mut rng_a).unwrap())
                .collect();
            let actions_b: Vec<_> = (0..4)
                .map(|s| random_legal(b.hand(s), &mut rng_b).unwrap())
                .collect();
            prop_assert_eq!(&actions_a, &actions_b);
            a = step(&a, &actions_a).unwrap().state;
            b = step(&b, &actions_b).unwrap().state;
            prop_assert_eq!(a.hands(), b.hands());
            prop_assert_eq!(a.scores(), b.scores());
        }
        prop_assert!(a.is_finished() && b.is_finished());
    }

    /// priority_act depends only on which kinds are present, never on counts.
    #[test]
    fn priority_act_ignores_copy_counts(
        mask in 1u32..(1 << 10),
        extra in prop::collection::vec(0u32..4, 10),
        perm_seed in 0u64..1000,
    ) {
        let menu = standard_config(0).menu;
        let mut order: Vec<usize> = (0..10).collect();
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        order.shuffle(&mut rng);
        let list = PriorityList::new(order, &menu).unwrap();

        let ones: Vec<u32> = (0..10).map(|k| (mask >> k) & 1).collect();
        let padded: Vec<u32> = ones
            .iter()
            .zip(&extra)
            .map(|(&p, &e)| if p > 0 { p + e } else { 0 })
            .collect();
        let a = priority_act(&Hand::from_counts(ones), &list).unwrap();
        let b = priority_act(&Hand::from_counts(padded), &list).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Kendall tau is symmetric and 1 on identical rankings.
    #[test]
    fn kendall_tau_symmetry(perm_a in 0u64..5000, perm_b in 0u64..5000, n in 2usize..12) {
        use rand::seq::SliceRandom;
        let mut a: Vec<usize> = (0..n).collect();
        let mut b: Vec<usize> = (0..n).collect();
        a.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_a));
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_b));
        let ab = kendall_tau_ids(&a, &b).unwrap();
        let ba = kendall_tau_ids(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(kendall_tau_ids(&a, &a).unwrap(), 1.0);
    }

    /// Preference matrices tally every sample exactly once and stay
    /// antisymmetric in wins vs trials.
    #[test]
    fn preference_matrix_totals(choices in prop::collection::vec((0usize..6, 0usize..6), 0..200)) {
        let samples: Vec<PreferenceSample> = choices
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(chosen, alternative)| PreferenceSample {
                features: vec![],
                chosen,
                alternative,
            })
            .collect();
        let m = preference_matrix(&samples, 6);
        prop_assert_eq!(m.total_trials(), samples.len() as u64);
        for a in 0..6 {
            prop_assert_eq!(m.wins[a][a], 0, "diagonal is zero");
            for b in 0..6 {
                prop_assert_eq!(m.wins[a][b] + m.wins[b][a], m.trials(a, b));
            }
        }
    }

    /// Encoded features are nonnegative counts/flags with the documented
    /// layout length, at any reachable state.
    #[test]
    fn encode_layout_stable(seed in 0u64..5000, steps in 0usize..27) {
        let config = standard_config(seed);
        let layout = FeatureLayout::new(&config, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = new_game(config).unwrap();
        let mut tracker = MemoryTracker::start_round(&state);
        for _ in 0..steps {
            if state.is_finished() {
                break;
            }
            let actions: Vec<_> = (0..4)
                .map(|s| random_legal(state.hand(s), &mut rng).unwrap())
                .collect();
            let turn = state.turn();
            state = step(&state, &actions).unwrap().state;
            if state.turn() == 0 {
                if !state.is_finished() {
                    tracker = MemoryTracker::start_round(&state);
                }
            } else {
                tracker.record_turn(turn, &actions).unwrap();
            }
        }
        if !state.is_finished() {
            for seat in 0..4 {
                let obs = encode(&state, &tracker, seat, &layout);
                prop_assert_eq!(obs.features.len(), layout.total_len());
                prop_assert!(obs.features.iter().all(|&v| v >= 0.0));
                prop_assert_eq!(obs.legal_mask.len(), 10);
                for kind in 0..10 {
                    prop_assert_eq!(obs.legal_mask[kind], state.hand(seat).count(kind) > 0);
                }
            }
        }
    }
}
