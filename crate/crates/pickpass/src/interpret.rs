//! Interpretability: pairwise-preference datasets from two-cards-remaining
//! decisions, precision/recall-filtered decision rules mined from bagged
//! tree ensembles, priority-list reconstruction, and ranking comparison.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, PriorityList};
use crate::cards::{GameConfig, KindId, Menu};
use crate::error::{Error, Result};
use crate::game::GameState;
use crate::observe::{FeatureLayout, Observation};
use crate::sim::{derive_seed, play_game, GameHook};

/// One forced choice: the agent held exactly two distinct kinds and chose.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreferenceSample {
    pub features: Vec<f64>,
    pub chosen: KindId,
    pub alternative: KindId,
}

/// Plays `n_games` with the agent in every seat and records a sample at each
/// turn where a hand holds exactly two cards of distinct kinds. With
/// `round_filter`, only that round index is sampled (e.g. 1 = the second of
/// three rounds).
pub fn collect_pairwise_dataset(
    agent: &dyn Agent,
    config: &GameConfig,
    n_games: usize,
    seed: u64,
    round_filter: Option<usize>,
) -> Result<Vec<PreferenceSample>> {
    struct Collector<'a> {
        samples: &'a mut Vec<PreferenceSample>,
        round_filter: Option<usize>,
    }
    impl GameHook for Collector<'_> {
        fn on_pick(&mut self, state: &GameState, seat: usize, obs: &Observation, action: KindId) {
            if let Some(round) = self.round_filter {
                if state.round() != round {
                    return;
                }
            }
            let hand = state.hand(seat);
            if hand.total() != 2 {
                return;
            }
            let kinds = hand.kinds_present();
            if kinds.len() != 2 {
                return; // two copies of one kind: no choice exists
            }
            let alternative = if kinds[0] == action { kinds[1] } else { kinds[0] };
            self.samples.push(PreferenceSample {
                features: obs.features.clone(),
                chosen: action,
                alternative,
            });
        }
    }

    let mut samples = Vec::new();
    let seats: Vec<&dyn Agent> = (0..config.players).map(|_| agent).collect();
    for g in 0..n_games {
        let mut hook = Collector {
            samples: &mut samples,
            round_filter,
        };
        play_game(&seats, config, derive_seed(seed, g as u64), &mut hook)?;
    }
    Ok(samples)
}

/// Pairwise win/trial tallies over kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    /// `wins[a][b]`: times `a` was chosen over `b`.
    pub wins: Vec<Vec<u64>>,
}

impl PreferenceMatrix {
    pub fn n(&self) -> usize {
        self.wins.len()
    }

    pub fn trials(&self, a: KindId, b: KindId) -> u64 {
        self.wins[a][b] + self.wins[b][a]
    }

    pub fn total_trials(&self) -> u64 {
        self.wins.iter().flatten().sum()
    }
}

pub fn preference_matrix(dataset: &[PreferenceSample], n: usize) -> PreferenceMatrix {
    let mut wins = vec![vec![0u64; n]; n];
    for s in dataset {
        wins[s.chosen][s.alternative] += 1;
    }
    PreferenceMatrix { wins }
}

/// Borda-style reconstruction over matrix indices: each kind scores the mean
/// of its win fractions over pairs with at least one trial; ranking by
/// descending score, ties by total trials then id.
pub fn reconstruct_ranking(matrix: &PreferenceMatrix) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = matrix.n();
    if matrix.total_trials() == 0 {
        return Err(Error::Input(
            "cannot reconstruct a ranking from an all-zero preference matrix".into(),
        ));
    }
    let mut scores = vec![0.0; n];
    let mut trial_totals = vec![0u64; n];
    for k in 0..n {
        let mut sum = 0.0;
        let mut pairs = 0;
        for j in 0..n {
            if j == k {
                continue;
            }
            let t = matrix.trials(k, j);
            if t > 0 {
                sum += matrix.wins[k][j] as f64 / t as f64;
                pairs += 1;
                trial_totals[k] += t;
            }
        }
        scores[k] = if pairs > 0 { sum / pairs as f64 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(trial_totals[b].cmp(&trial_totals[a]))
            .then(a.cmp(&b))
    });
    Ok((order, scores))
}

/// [`reconstruct_ranking`] wrapped into a menu-validated [`PriorityList`].
pub fn reconstruct_priority(
    matrix: &PreferenceMatrix,
    menu: &Menu,
) -> Result<(PriorityList, Vec<f64>)> {
    if matrix.n() != menu.len() {
        return Err(Error::Shape {
            expected: menu.len(),
            got: matrix.n(),
        });
    }
    let (order, scores) = reconstruct_ranking(matrix)?;
    Ok((PriorityList::new(order, menu)?, scores))
}

/// Kinds for which every pairwise preference was observed, grown greedily in
/// descending trial-count order. Delivers a fully-observed sub-matrix so
/// restricted reconstruction is exact (under deterministic agents the
/// higher-priority kind wins every observed trial).
pub fn observed_clique(matrix: &PreferenceMatrix) -> Vec<KindId> {
    let n = matrix.n();
    let totals: Vec<u64> = (0..n)
        .map(|k| (0..n).map(|j| matrix.trials(k, j)).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).filter(|&k| totals[k] > 0).collect();
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then(a.cmp(&b)));
    let mut clique: Vec<usize> = Vec::new();
    for k in order {
        if clique.iter().all(|&m| matrix.trials(k, m) > 0) {
            clique.push(k);
        }
    }
    clique.sort_unstable();
    clique
}

/// The sub-matrix over `kinds`, re-indexed in the given order.
pub fn restrict_matrix(matrix: &PreferenceMatrix, kinds: &[KindId]) -> PreferenceMatrix {
    let m = kinds.len();
    let mut wins = vec![vec![0u64; m]; m];
    for (i, &a) in kinds.iter().enumerate() {
        for (j, &b) in kinds.iter().enumerate() {
            wins[i][j] = matrix.wins[a][b];
        }
    }
    PreferenceMatrix { wins }
}

/// Kendall rank correlation between two orderings of the same kind set:
/// `1 - 2 * discordant / C(n,2)`.
pub fn kendall_tau_ids(a: &[KindId], b: &[KindId]) -> Result<f64> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::Input(format!(
            "rankings cover {} vs {} kinds",
            n,
            b.len()
        )));
    }
    if n < 2 {
        return Err(Error::Input("need at least two kinds to compare".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    sa.dedup();
    sb.dedup();
    if sa.len() != n || sa != sb {
        return Err(Error::Input("rankings must cover the same kind set".into()));
    }
    let pos = |list: &[KindId]| -> std::collections::BTreeMap<KindId, usize> {
        list.iter().enumerate().map(|(rank, &k)| (k, rank)).collect()
    };
    let pa = pos(a);
    let pb = pos(b);
    let mut discordant = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let da = pa[&a[i]] as i64 - pa[&a[j]] as i64;
            let db = pb[&a[i]] as i64 - pb[&a[j]] as i64;
            if da * db < 0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(1.0 - 2.0 * discordant as f64 / pairs)
}

/// [`kendall_tau_ids`] over two full priority lists.
pub fn kendall_tau(a: &PriorityList, b: &PriorityList) -> Result<f64> {
    kendall_tau_ids(a.ranking(), b.ranking())
}

// --- decision rules ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Le,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjunct {
    pub feature: usize,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Conjunct {
    fn matches(&self, x: &[f64]) -> bool {
        match self.comparator {
            Comparator::Le => x[self.feature] <= self.threshold,
            Comparator::Gt => x[self.feature] > self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub target: KindId,
    pub conjuncts: Vec<Conjunct>,
    /// Out-of-bag precision and recall.
    pub precision: f64,
    pub recall: f64,
    /// Out-of-bag matches.
    pub support: u64,
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conjuncts.iter().all(|c| c.matches(x))
    }

    /// Human-readable form, e.g.
    /// `IF own_hand[tempura] > 0.5 THEN play tempura [precision 1.00, recall 0.41]`.
    pub fn render(&self, layout: &FeatureLayout, menu: &Menu) -> String {
        let kind_names = menu.names();
        let conds: Vec<String> = self
            .conjuncts
            .iter()
            .map(|c| {
                format!(
                    "{} {} {}",
                    layout.feature_name(c.feature, &kind_names),
                    match c.comparator {
                        Comparator::Le => "<=",
                        Comparator::Gt => ">",
                    },
                    c.threshold
                )
            })
            .collect();
        format!(
            "IF {} THEN play {} [precision {:.2}, recall {:.2}, support {}]",
            conds.join(" AND "),
            menu.kind(self.target).name,
            self.precision,
            self.recall,
            self.support
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleParams {
    pub trees: usize,
    pub max_depth: usize,
    pub bootstrap_fraction: f64,
    pub min_precision: f64,
    pub min_recall: f64,
    pub max_rules_per_kind: usize,
    pub seed: u64,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            trees: 30,
            max_depth: 3,
            bootstrap_fraction: 0.7,
            min_precision: 0.5,
            min_recall: 0.01,
            max_rules_per_kind: 5,
            seed: 0,
        }
    }
}

/// Mines if-then rules per chosen kind from bagged one-vs-rest decision
/// trees: every root-to-leaf path predicting the positive class becomes a
/// candidate rule, scored out-of-bag and filtered for precision and recall.
pub fn fit_rules(dataset: &[PreferenceSample], params: &RuleParams) -> Result<Vec<Rule>> {
    if dataset.is_empty() {
        return Err(Error::Fit("empty dataset".into()));
    }
    let mut targets: Vec<KindId> = dataset.iter().map(|s| s.chosen).collect();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() < 2 {
        return Err(Error::Fit(
            "dataset needs at least two distinct chosen kinds".into(),
        ));
    }
    if !(0.0 < params.bootstrap_fraction && params.bootstrap_fraction <= 1.0) {
        return Err(Error::Fit("bootstrap_fraction must be in (0,1]".into()));
    }

    let n = dataset.len();
    let boot_size = ((n as f64 * params.bootstrap_fraction).round() as usize).max(1);
    let mut rules = Vec::new();
    for &target in &targets {
        let labels: Vec<bool> = dataset.iter().map(|s| s.chosen == target).collect();
        let mut candidates: Vec<Rule> = Vec::new();
        for tree_index in 0..params.trees {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                params.seed,
                (target as u64) << 24 | tree_index as u64,
            ));
            let mut in_bag = vec![false; n];
            let bag: Vec<usize> = (0..boot_size)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
            if oob.is_empty() {
                continue;
            }
            let oob_pos = oob.iter().filter(|&&i| labels[i]).count();
            if oob_pos == 0 {
                continue;
            }

            let tree = grow_tree(dataset, &labels, &bag, params.max_depth);
            let mut paths = Vec::new();
            collect_positive_paths(&tree, &mut Vec::new(), &mut paths);
            for conjuncts in paths {
                let matched: Vec<usize> = oob
                    .iter()
                    .copied()
                    .filter(|&i| conjuncts.iter().all(|c| c.matches(&dataset[i].features)))
                    .collect();
                if matched.is_empty() {
                    continue;
                }
                let pos = matched.iter().filter(|&&i| labels[i]).count();
                let precision = pos as f64 / matched.len() as f64;
                let recall = pos as f64 / oob_pos as f64;
                if precision >= params.min_precision && recall >= params.min_recall {
                    candidates.push(Rule {
                        target,
                        conjuncts,
                        precision,
                        recall,
                        support: matched.len() as u64,
                    });
                }
            }
        }

        // Deduplicate rules with identical feature sets, keeping the most
        // precise, then keep the top rules for this kind.
        candidates.sort_by(|a, b| {
            b.precision
                .partial_cmp(&a.precision)
                .expect("finite precision")
                .then(b.recall.partial_cmp(&a.recall).expect("finite recall"))
                .then(b.support.cmp(&a.support))
                .then(format!("{:?}", a.conjuncts).cmp(&format!("{:?}", b.conjuncts)))
        });
        let mut seen_feature_sets: Vec<Vec<usize>> = Vec::new();
        let mut kept = 0;
        for rule in candidates {
            let mut features: Vec<usize> = rule.conjuncts.iter().map(|c| c.feature).collect();
            features.sort_unstable();
            features.dedup();
            if seen_feature_sets.contains(&features) {
                continue;
            }
            seen_feature_sets.push(features);
            rules.push(rule);
            kept += 1;
            if kept >= params.max_rules_per_kind {
                break;
            }
        }
    }
    Ok(rules)
}

enum Tree {
    Leaf {
        positive: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        below: Box<Tree>,
        above: Box<Tree>,
    },
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn grow_tree(
    dataset: &[PreferenceSample],
    labels: &[bool],
    indices: &[usize],
    depth_left: usize,
) -> Tree {
    let total = indices.len();
    let pos = indices.iter().filter(|&&i| labels[i]).count();
    if depth_left == 0 || pos == 0 || pos == total {
        return Tree::Leaf {
            positive: 2 * pos > total,
        };
    }

    let n_features = dataset[indices[0]].features.len();
    let parent = gini(pos, total);
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut sorted = indices.to_vec();
    for f in 0..n_features {
        sorted.sort_by(|&a, &b| {
            dataset[a].features[f]
                .partial_cmp(&dataset[b].features[f])
                .expect("finite features")
        });
        let mut left_pos = 0usize;
        for (rank, window) in sorted.windows(2).enumerate() {
            if labels[window[0]] {
                left_pos += 1;
            }
            let (lo, hi) = (
                dataset[window[0]].features[f],
                dataset[window[1]].features[f],
            );
            if lo == hi {
                continue;
            }
            let left_total = rank + 1;
            let right_total = total - left_total;
            let right_pos = pos - left_pos;
            let weighted = (left_total as f64 * gini(left_pos, left_total)
                + right_total as f64 * gini(right_pos, right_total))
                / total as f64;
            let gain = parent - weighted;
            let threshold = 0.5 * (lo + hi);
            let better = match best {
                None => gain > 1e-12,
                Some((g, bf, bt)) => {
                    gain > g + 1e-12
                        || ((gain - g).abs() <= 1e-12 && (f < bf || (f == bf && threshold < bt)))
                }
            };
            if better {
                best = Some((gain, f, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return Tree::Leaf {
            positive: 2 * pos > total,
        };
    };
    let below_idx: Vec<usize> = indices
        .iter()
        .copied()
        .filter(|&i| dataset[i].features[feature] <= threshold)
        .collect();
    let above_idx: Vec<usize> = indices
        .iter()
        .copied()
        .filter(|&i| dataset[i].features[feature] > threshold)
        .collect();
    Tree::Split {
        feature,
        threshold,
        below: Box::new(grow_tree(dataset, labels, &below_idx, depth_left - 1)),
        above: Box::new(grow_tree(dataset, labels, &above_idx, depth_left - 1)),
    }
}

/// Collects root-to-leaf conjunct paths ending in a positive leaf, merging
/// repeated splits on one feature into the tightest bounds.
fn collect_positive_paths(tree: &Tree, path: &mut Vec<Conjunct>, out: &mut Vec<Vec<Conjunct>>) {
    match tree {
        Tree::Leaf { positive } => {
            if *positive && !path.is_empty() {
                out.push(merge_conjuncts(path));
            }
        }
        Tree::Split {
            feature,
            threshold,
            below,
            above,
        } => {
            path.push(Conjunct {
                feature: *feature,
                comparator: Comparator::Le,
                threshold: *threshold,
            });
            collect_positive_paths(below, path, out);
            path.pop();
            path.push(Conjunct {
                feature: *feature,
                comparator: Comparator::Gt,
                threshold: *threshold,
            });
            collect_positive_paths(above, path, out);
            path.pop();
        }
    }
}

fn merge_conjuncts(path: &[Conjunct]) -> Vec<Conjunct> {
    let mut out: Vec<Conjunct> = Vec::new();
    for c in path {
        if let Some(existing) = out
            .iter_mut()
            .find(|e| e.feature == c.feature && e.comparator == c.comparator)
        {
            existing.threshold = match c.comparator {
                Comparator::Le => existing.threshold.min(c.threshold),
                Comparator::Gt => existing.threshold.max(c.threshold),
            };
        } else {
            out.push(c.clone());
        }
    }
    out
}
