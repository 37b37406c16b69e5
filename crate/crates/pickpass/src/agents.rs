//! Uniform agent interface and the baseline agents: kind-uniform random and
//! the human-like priority-list follower.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cards::{KindId, Menu};
use crate::error::{Error, Result};
use crate::game::Hand;
use crate::observe::Observation;

pub trait Agent: Send + Sync {
    fn name(&self) -> &str;

    /// Picks a legal kind given the seat's observation. Implementations must
    /// return a kind with a true legal mask entry.
    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<KindId>;

    /// Whether this agent's observation should include the memory block.
    fn wants_memory(&self) -> bool {
        false
    }
}

/// A total order over the menu's kinds, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityList {
    ranking: Vec<KindId>,
}

impl PriorityList {
    /// `ranking` must be a permutation of `0..menu.len()`.
    pub fn new(ranking: Vec<KindId>, menu: &Menu) -> Result<Self> {
        let n = menu.len();
        let mut seen = vec![false; n];
        if ranking.len() != n {
            return Err(Error::Config(format!(
                "priority list covers {} kinds but the menu has {n}",
                ranking.len()
            )));
        }
        for &k in &ranking {
            if k >= n || seen[k] {
                return Err(Error::Config(
                    "priority list must contain every menu kind exactly once".into(),
                ));
            }
            seen[k] = true;
        }
        Ok(PriorityList { ranking })
    }

    /// Strict form: `names` is exactly the menu's kinds, best first.
    pub fn from_names(names: &[String], menu: &Menu) -> Result<Self> {
        let mut ranking = Vec::with_capacity(names.len());
        for name in names {
            let id = menu
                .id_of(name)
                .ok_or_else(|| Error::Config(format!("kind {name:?} is not on the menu")))?;
            ranking.push(id);
        }
        Self::new(ranking, menu)
    }

    /// Projects a wider ordering (e.g. over a card universe) onto the menu:
    /// names not on the menu are skipped; every menu kind must appear.
    pub fn project(names: &[String], menu: &Menu) -> Result<Self> {
        let ranking: Vec<KindId> = names.iter().filter_map(|n| menu.id_of(n)).collect();
        Self::new(ranking, menu)
    }

    /// Kind ids best first.
    pub fn ranking(&self) -> &[KindId] {
        &self.ranking
    }

    /// Rank of a kind (0 = best).
    pub fn rank_of(&self, kind: KindId) -> Option<usize> {
        self.ranking.iter().position(|&k| k == kind)
    }

    pub fn to_names(&self, menu: &Menu) -> Vec<String> {
        self.ranking.iter().map(|&k| menu.kind(k).name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }
}

/// Highest-ranked kind present in the hand. Only presence matters, never the
/// copy count.
pub fn priority_act(hand: &Hand, list: &PriorityList) -> Result<KindId> {
    list.ranking
        .iter()
        .copied()
        .find(|&k| hand.count(k) > 0)
        .ok_or_else(|| Error::State("empty hand".into()))
}

/// Uniform over the kinds present in the hand (kind-uniform, not copy-uniform).
pub fn random_act(hand: &Hand, rng: &mut impl Rng) -> Result<KindId> {
    crate::game::random_legal(hand, rng).ok_or_else(|| Error::State("empty hand".into()))
}

pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<KindId> {
        let legal = obs.legal_kinds();
        if legal.is_empty() {
            return Err(Error::State("no legal action".into()));
        }
        Ok(legal[rng.random_range(0..legal.len())])
    }
}

pub struct PriorityAgent {
    list: PriorityList,
    name: String,
}

impl PriorityAgent {
    pub fn new(list: PriorityList) -> Self {
        PriorityAgent {
            list,
            name: "priority".into(),
        }
    }

    pub fn named(list: PriorityList, name: impl Into<String>) -> Self {
        PriorityAgent {
            list,
            name: name.into(),
        }
    }

    pub fn list(&self) -> &PriorityList {
        &self.list
    }
}

impl Agent for PriorityAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<KindId> {
        self.list
            .ranking
            .iter()
            .copied()
            .find(|&k| obs.legal_mask[k])
            .ok_or_else(|| Error::State("no legal action".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::{my_first_meal, Catalog};
    use rand_chacha::rand_core::SeedableRng;

    fn menu() -> Menu {
        my_first_meal(&Catalog::builtin()).unwrap()
    }

    fn list_for(menu: &Menu, best_first: &[&str]) -> PriorityList {
        let names: Vec<String> = best_first.iter().map(|s| s.to_string()).collect();
        PriorityList::from_names(&names, menu).unwrap()
    }

    #[test]
    fn priority_act_follows_rank_order() {
        let menu = menu();
        let list = list_for(
            &menu,
            &[
                "tempura",
                "squid_nigiri",
                "sashimi",
                "maki",
                "salmon_nigiri",
                "miso_soup",
                "wasabi",
                "tea",
                "egg_nigiri",
                "green_tea_ice_cream",
            ],
        );
        let tempura = menu.id_of("tempura").unwrap();
        let squid = menu.id_of("squid_nigiri").unwrap();

        let mut counts = vec![0; menu.len()];
        counts[tempura] = 1;
        counts[squid] = 3;
        let hand = Hand::from_counts(counts);
        // Tempura outranks squid regardless of copy counts.
        assert_eq!(priority_act(&hand, &list).unwrap(), tempura);

        let mut counts = vec![0; menu.len()];
        counts[squid] = 1;
        let hand = Hand::from_counts(counts);
        assert_eq!(priority_act(&hand, &list).unwrap(), squid);

        let hand = Hand::from_counts(vec![0; menu.len()]);
        assert!(matches!(priority_act(&hand, &list), Err(Error::State(_))));
    }

    #[test]
    fn priority_list_must_cover_menu() {
        let menu = menu();
        assert!(PriorityList::new(vec![0, 1, 2], &menu).is_err());
        assert!(PriorityList::new(vec![0; menu.len()], &menu).is_err());
        let ok = PriorityList::new((0..menu.len()).collect(), &menu).unwrap();
        assert_eq!(ok.len(), 10);
    }

    #[test]
    fn project_skips_foreign_names() {
        let menu = menu();
        let universe = vec![
            "pudding".to_string(), // not on this menu
            "tempura".to_string(),
            "eel".to_string(), // not on this menu
            "squid_nigiri".to_string(),
            "sashimi".to_string(),
            "maki".to_string(),
            "salmon_nigiri".to_string(),
            "miso_soup".to_string(),
            "wasabi".to_string(),
            "tea".to_string(),
            "egg_nigiri".to_string(),
            "green_tea_ice_cream".to_string(),
        ];
        let list = PriorityList::project(&universe, &menu).unwrap();
        assert_eq!(list.rank_of(menu.id_of("tempura").unwrap()), Some(0));
        assert_eq!(list.len(), 10);
    }

    #[test]
    fn random_act_is_kind_uniform() {
        let menu = menu();
        let a = menu.id_of("maki").unwrap();
        let b = menu.id_of("tea").unwrap();
        let mut counts = vec![0; menu.len()];
        counts[a] = 5;
        counts[b] = 1;
        let hand = Hand::from_counts(counts);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 20_000;
        let mut picked_a = 0;
        for _ in 0..trials {
            if random_act(&hand, &mut rng).unwrap() == a {
                picked_a += 1;
            }
        }
        let freq = picked_a as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "kind-uniform means ~1/2, got {freq}");
    }

    #[test]
    fn random_act_reproducible_under_seed() {
        let menu = menu();
        let mut counts = vec![0; menu.len()];
        counts[0] = 1;
        counts[4] = 2;
        counts[7] = 1;
        let hand = Hand::from_counts(counts);
        let seq = |seed: u64| -> Vec<KindId> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| random_act(&hand, &mut rng).unwrap()).collect()
        };
        assert_eq!(seq(3), seq(3));
        assert_ne!(seq(3), seq(4));
    }

    #[test]
    fn swapping_adjacent_ranks_only_affects_hands_with_both() {
        // Argmax invariance: changing the relative order of two kinds changes
        // the output only for hands containing both and nothing ranked above
        // either.
        let menu = menu();
        let base: Vec<String> = menu.names();
        let mut swapped = base.clone();
        swapped.swap(3, 4);
        let list_a = PriorityList::from_names(&base, &menu).unwrap();
        let list_b = PriorityList::from_names(&swapped, &menu).unwrap();
        let k3 = menu.id_of(&base[3]).unwrap();
        let k4 = menu.id_of(&base[4]).unwrap();

        // Enumerate all presence masks over the 10 kinds (2^10).
        for mask in 1u32..(1 << menu.len()) {
            let counts: Vec<u32> =
                (0..menu.len()).map(|k| ((mask >> k) & 1) as u32).collect();
            let hand = Hand::from_counts(counts);
            let a = priority_act(&hand, &list_a).unwrap();
            let b = priority_act(&hand, &list_b).unwrap();
            let both = hand.count(k3) > 0 && hand.count(k4) > 0;
            let above = base[..3]
                .iter()
                .any(|n| hand.count(menu.id_of(n).unwrap()) > 0);
            if both && !above {
                assert_ne!(a, b);
            } else {
                assert_eq!(a, b);
            }
        }
    }
}
