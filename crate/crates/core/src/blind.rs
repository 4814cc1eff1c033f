//! Specializations for blind models (a single signal, so observation
//! carries no information).
//!
//! Blind play makes the belief process deterministic: each action maps the
//! current belief to exactly one successor. Supports and super-support
//! tuples then evolve as finite deterministic automata over the action
//! alphabet, and eventually periodic action words become a complete
//! strategy class to search exhaustively within size bounds.

use std::collections::BTreeMap;

use crate::belief::{self, BeliefError, GainPartition, SuperSupport};
use crate::chain::{self, ChainError};
use crate::model::{Belief, Pomdp};
use crate::strategy::EventuallyPeriodicStrategy;

/// Most candidates a periodic search will evaluate before truncating.
pub const SEARCH_CANDIDATE_CAP: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum BlindError {
    #[error("model has {signals} signals; blind operations need exactly one")]
    NotBlind { signals: usize },
    #[error("search bounds must be at least 1, got prefix bound {max_prefix} and period bound {max_period}")]
    BadBounds { max_prefix: usize, max_period: usize },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn require_blind(pomdp: &Pomdp) -> Result<(), BlindError> {
    if crate::model::is_blind(pomdp) {
        Ok(())
    } else {
        Err(BlindError::NotBlind {
            signals: pomdp.n_signals(),
        })
    }
}

/// One deterministic belief step: the unique-signal Bayes update, whose
/// signal probability is 1.
pub fn blind_step(pomdp: &Pomdp, belief: &Belief, action: usize) -> Result<Belief, BlindError> {
    require_blind(pomdp)?;
    let (next, _prob) = belief::bayes_update(pomdp, belief, action, 0)?;
    Ok(next)
}

/// Deterministic automaton of belief supports under blind play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportAutomaton {
    pub n_actions: usize,
    /// Sorted state-index sets, breadth-first from the initial support.
    pub nodes: Vec<Vec<usize>>,
    /// `edges[node][action]` -> node.
    pub edges: Vec<Vec<usize>>,
}

/// Breadth-first closure of `Supp(p1)` under per-action image supports.
pub fn support_automaton(pomdp: &Pomdp, p1: &Belief) -> Result<SupportAutomaton, BlindError> {
    require_blind(pomdp)?;
    let root = p1.support();
    let mut nodes = vec![root.clone()];
    let mut ids = BTreeMap::from([(root, 0usize)]);
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut cursor = 0;
    while cursor < nodes.len() {
        let mut row = Vec::with_capacity(pomdp.n_actions());
        for a in 0..pomdp.n_actions() {
            let image = belief::support_update(pomdp, &nodes[cursor], a, 0);
            let id = *ids.entry(image.clone()).or_insert_with(|| {
                nodes.push(image);
                nodes.len() - 1
            });
            row.push(id);
        }
        edges.push(row);
        cursor += 1;
    }
    Ok(SupportAutomaton {
        n_actions: pomdp.n_actions(),
        nodes,
        edges,
    })
}

/// Deterministic automaton of super-support tuples under blind play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperSupportAutomaton {
    pub n_actions: usize,
    /// Tuples in breadth-first order; node 0 is the partition itself.
    pub nodes: Vec<SuperSupport>,
    pub edges: Vec<Vec<usize>>,
}

/// Closure from the partition tuple under blockwise image supports.
pub fn super_support_automaton(
    pomdp: &Pomdp,
    partition: &GainPartition,
) -> Result<SuperSupportAutomaton, BlindError> {
    require_blind(pomdp)?;
    let root = SuperSupport::from_partition(partition);
    let mut nodes = vec![root.clone()];
    let mut ids = BTreeMap::from([(root, 0usize)]);
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut cursor = 0;
    while cursor < nodes.len() {
        let mut row = Vec::with_capacity(pomdp.n_actions());
        for a in 0..pomdp.n_actions() {
            let image = nodes[cursor].after(pomdp, a, 0);
            let id = *ids.entry(image.clone()).or_insert_with(|| {
                nodes.push(image);
                nodes.len() - 1
            });
            row.push(id);
        }
        edges.push(row);
        cursor += 1;
    }
    Ok(SuperSupportAutomaton {
        n_actions: pomdp.n_actions(),
        nodes,
        edges,
    })
}

fn state_list(pomdp: &Pomdp, set: &[usize]) -> Vec<String> {
    set.iter().map(|&k| pomdp.states[k].clone()).collect()
}

fn edges_json(pomdp: &Pomdp, edges: &[Vec<usize>]) -> serde_json::Value {
    let list: Vec<serde_json::Value> = edges
        .iter()
        .enumerate()
        .flat_map(|(from, row)| {
            row.iter().enumerate().map(move |(a, &to)| (from, a, to))
        })
        .map(|(from, a, to)| {
            serde_json::json!({"from": from, "action": pomdp.actions[a], "to": to})
        })
        .collect();
    serde_json::Value::Array(list)
}

fn dot_graph(node_labels: &[String], edges: &[Vec<usize>], actions: &[String]) -> String {
    let mut out = String::from("digraph supports {\n");
    for (i, label) in node_labels.iter().enumerate() {
        out.push_str(&format!("  {i} [label=\"{label}\"];\n"));
    }
    for (from, row) in edges.iter().enumerate() {
        for (a, &to) in row.iter().enumerate() {
            out.push_str(&format!("  {from} -> {to} [label=\"{}\"];\n", actions[a]));
        }
    }
    out.push_str("}\n");
    out
}

impl SupportAutomaton {
    pub fn to_json(&self, pomdp: &Pomdp) -> String {
        let nodes: Vec<Vec<String>> =
            self.nodes.iter().map(|n| state_list(pomdp, n)).collect();
        let value = serde_json::json!({
            "initial": 0,
            "nodes": nodes,
            "edges": edges_json(pomdp, &self.edges),
        });
        let mut text = serde_json::to_string_pretty(&value).expect("automaton renders");
        text.push('\n');
        text
    }

    pub fn to_dot(&self, pomdp: &Pomdp) -> String {
        let labels: Vec<String> = self
            .nodes
            .iter()
            .map(|n| format!("{{{}}}", state_list(pomdp, n).join(",")))
            .collect();
        dot_graph(&labels, &self.edges, &pomdp.actions)
    }
}

impl SuperSupportAutomaton {
    pub fn to_json(&self, pomdp: &Pomdp) -> String {
        let nodes: Vec<Vec<Vec<String>>> = self
            .nodes
            .iter()
            .map(|t| t.blocks.iter().map(|b| state_list(pomdp, b)).collect())
            .collect();
        let value = serde_json::json!({
            "initial": 0,
            "nodes": nodes,
            "edges": edges_json(pomdp, &self.edges),
        });
        let mut text = serde_json::to_string_pretty(&value).expect("automaton renders");
        text.push('\n');
        text
    }

    pub fn to_dot(&self, pomdp: &Pomdp) -> String {
        let labels: Vec<String> = self
            .nodes
            .iter()
            .map(|t| {
                let blocks: Vec<String> = t
                    .blocks
                    .iter()
                    .map(|b| format!("{{{}}}", state_list(pomdp, b).join(",")))
                    .collect();
                format!("({})", blocks.join(","))
            })
            .collect();
        dot_graph(&labels, &self.edges, &pomdp.actions)
    }
}

/// Result of an exhaustive bounded search over eventually periodic words.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSearchReport {
    pub prefix: Vec<usize>,
    pub period: Vec<usize>,
    pub gain: f64,
    pub max_prefix: usize,
    pub max_period: usize,
    /// Candidates actually evaluated (repetitions of shorter periods are
    /// skipped without evaluation).
    pub candidates: u64,
    /// True when the candidate cap cut the enumeration short; the report
    /// is then a lower bound over the visited part only.
    pub truncated: bool,
}

/// True when `word` repeats a strictly shorter period, in which case the
/// shorter word denotes the same infinite play and was enumerated first.
fn is_repetition(word: &[usize]) -> bool {
    let n = word.len();
    (1..n).any(|d| n % d == 0 && (d..n).all(|i| word[i] == word[i - d]))
}

/// Counts up from an all-zeros word in lexicographic order.
pub(crate) fn next_word(word: &mut [usize], n_actions: usize) -> bool {
    for slot in word.iter_mut().rev() {
        *slot += 1;
        if *slot < n_actions {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Exhaustive search over prefixes shorter than `max_prefix` and periods
/// no longer than `max_period`, each evaluated exactly through the
/// transducer form. First-found argmax; rotations of a period are distinct
/// candidates because the initial belief fixes the phase.
pub fn search_periodic(
    pomdp: &Pomdp,
    p1: &Belief,
    max_prefix: usize,
    max_period: usize,
) -> Result<PeriodicSearchReport, BlindError> {
    search_periodic_capped(pomdp, p1, max_prefix, max_period, SEARCH_CANDIDATE_CAP)
}

pub fn search_periodic_capped(
    pomdp: &Pomdp,
    p1: &Belief,
    max_prefix: usize,
    max_period: usize,
    cap: u64,
) -> Result<PeriodicSearchReport, BlindError> {
    require_blind(pomdp)?;
    if max_prefix < 1 || max_period < 1 {
        return Err(BlindError::BadBounds {
            max_prefix,
            max_period,
        });
    }
    let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    let mut candidates = 0u64;
    let mut truncated = false;

    'outer: for prefix_len in 0..max_prefix {
        let mut prefix = vec![0usize; prefix_len];
        loop {
            for period_len in 1..=max_period {
                let mut period = vec![0usize; period_len];
                loop {
                    if !is_repetition(&period) {
                        if candidates == cap {
                            truncated = true;
                            break 'outer;
                        }
                        candidates += 1;
                        let word = EventuallyPeriodicStrategy::new(
                            prefix.clone(),
                            period.clone(),
                            pomdp.n_actions(),
                        )
                        .expect("enumerated words are in range");
                        let gain = chain::gain(
                            pomdp,
                            p1,
                            &word.to_finite_memory(pomdp.n_signals()),
                        )?;
                        let better = match &best {
                            None => true,
                            Some((_, _, g)) => gain > *g,
                        };
                        if better {
                            best = Some((prefix.clone(), period.clone(), gain));
                        }
                    }
                    if !next_word(&mut period, pomdp.n_actions()) {
                        break;
                    }
                }
            }
            if prefix_len == 0 || !next_word(&mut prefix, pomdp.n_actions()) {
                break;
            }
        }
    }

    let (prefix, period, gain) = best.expect("bounds admit at least one candidate");
    Ok(PeriodicSearchReport {
        prefix,
        period,
        gain,
        max_prefix,
        max_period,
        candidates,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{belief_after_history, History};
    use crate::corpus;

    fn close(x: f64, y: f64) -> bool {
        (x - y).abs() < 1e-9
    }

    #[test]
    fn blind_step_swaps_the_swap_model() {
        let pomdp = corpus::ex1();
        let start = Belief::new(vec![0.25, 0.75]).unwrap();
        let next = blind_step(&pomdp, &start, 0).unwrap();
        assert!(close(next.weights[0], 0.75));
        assert!(close(next.weights[1], 0.25));

        let even = Belief::new(vec![0.5, 0.5]).unwrap();
        let fixed = blind_step(&pomdp, &even, 1).unwrap();
        assert!(close(fixed.weights[0], 0.5));
        assert!(close(fixed.weights[1], 0.5));
    }

    #[test]
    fn blind_step_is_identity_on_the_trivial_model() {
        let pomdp = corpus::triv1();
        let next = blind_step(&pomdp, &Belief::dirac(0, 1), 0).unwrap();
        assert!(close(next.weights[0], 1.0));
    }

    #[test]
    fn signalful_models_are_rejected() {
        let pomdp = corpus::ex2();
        let err = blind_step(&pomdp, &pomdp.initial_belief.clone(), 0).unwrap_err();
        assert!(matches!(err, BlindError::NotBlind { signals: 2 }));
        assert!(support_automaton(&pomdp, &pomdp.initial_belief).is_err());
    }

    #[test]
    fn iterated_steps_match_history_folds_exactly() {
        let pomdp = corpus::ex1();
        let mut belief = Belief::new(vec![0.25, 0.75]).unwrap();
        let mut history = History::default();
        for step in 0..10 {
            let action = step % 2;
            belief = blind_step(&pomdp, &belief, action).unwrap();
            history.0.push((action, 0));
            let (folded, prob) = belief_after_history(
                &pomdp,
                &Belief::new(vec![0.25, 0.75]).unwrap(),
                &history,
            )
            .unwrap();
            assert_eq!(belief.weights, folded.weights);
            assert_eq!(prob, 1.0);
        }
    }

    #[test]
    fn full_support_collapses_to_one_node() {
        let pomdp = corpus::ex1();
        let aut = support_automaton(&pomdp, &Belief::new(vec![0.25, 0.75]).unwrap()).unwrap();
        assert_eq!(aut.nodes, vec![vec![0, 1]]);
        assert_eq!(aut.edges, vec![vec![0, 0]]);
    }

    #[test]
    fn known_start_alternates_between_two_supports() {
        let pomdp = corpus::ex1();
        let aut = support_automaton(&pomdp, &Belief::dirac(0, 2)).unwrap();
        assert_eq!(aut.nodes, vec![vec![0], vec![1]]);
        assert_eq!(aut.edges, vec![vec![1, 1], vec![0, 0]]);
    }

    #[test]
    fn trivial_support_automaton_is_a_self_loop() {
        let pomdp = corpus::triv1();
        let aut = support_automaton(&pomdp, &Belief::dirac(0, 1)).unwrap();
        assert_eq!(aut.nodes, vec![vec![0]]);
        assert_eq!(aut.edges, vec![vec![0]]);
    }

    #[test]
    fn automaton_nodes_track_belief_supports_on_every_word() {
        // Exhaustive over all action words of length <= 8: the automaton
        // node reached by the word equals the support of the stepped
        // belief, from both a full-support and a known start.
        let pomdp = corpus::ex1();
        for start in [Belief::new(vec![0.25, 0.75]).unwrap(), Belief::dirac(0, 2)] {
            let aut = support_automaton(&pomdp, &start).unwrap();
            for len in 0..=8usize {
                let mut word = vec![0usize; len];
                loop {
                    let mut belief = start.clone();
                    let mut node = 0usize;
                    for &a in &word {
                        belief = blind_step(&pomdp, &belief, a).unwrap();
                        node = aut.edges[node][a];
                    }
                    assert_eq!(aut.nodes[node], belief.support());
                    if len == 0 || !next_word(&mut word, 2) {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn swap_tuple_automaton_has_two_swapped_nodes() {
        let pomdp = corpus::ex1();
        let partition = GainPartition::new(vec![vec![0], vec![1]], vec![1.0, 0.0]).unwrap();
        let aut = super_support_automaton(&pomdp, &partition).unwrap();
        assert_eq!(aut.nodes.len(), 2);
        assert_eq!(aut.nodes[0].blocks, vec![vec![0], vec![1]]);
        assert_eq!(aut.nodes[1].blocks, vec![vec![1], vec![0]]);
        assert_eq!(aut.edges, vec![vec![1, 1], vec![0, 0]]);
    }

    #[test]
    fn single_block_tuple_automaton_collapses_to_supports() {
        let pomdp = corpus::ex1();
        let partition = GainPartition::new(vec![vec![0, 1]], vec![0.5]).unwrap();
        let tuples = super_support_automaton(&pomdp, &partition).unwrap();
        let supports =
            support_automaton(&pomdp, &Belief::new(vec![0.25, 0.75]).unwrap()).unwrap();
        let flattened: Vec<Vec<usize>> =
            tuples.nodes.iter().map(|t| t.blocks[0].clone()).collect();
        assert_eq!(flattened, supports.nodes);
        assert_eq!(tuples.edges, supports.edges);
    }

    #[test]
    fn tuples_stay_disjoint_along_constant_gain_base_words() {
        // Alternating play separates the swap model's states with constant
        // per-state gains; walking its word through the tuple automaton
        // must keep blocks disjoint at every stage.
        let pomdp = corpus::ex1();
        let base = EventuallyPeriodicStrategy::new(vec![], vec![0, 1], 2).unwrap();
        let result = chain::evaluate(
            &pomdp,
            &Belief::new(vec![0.25, 0.75]).unwrap(),
            &base.to_finite_memory(1),
        )
        .unwrap();
        assert!(chain::has_constant_gain(&result, &[0, 1]));
        let partition = GainPartition::new(vec![vec![0], vec![1]], vec![1.0, 0.0]).unwrap();
        let aut = super_support_automaton(&pomdp, &partition).unwrap();
        let mut node = 0;
        for stage in 1..=10 {
            node = aut.edges[node][base.action_at(stage)];
            assert!(aut.nodes[node].is_disjoint(), "overlap at stage {stage}");
        }
    }

    #[test]
    fn dumps_are_stable() {
        let pomdp = corpus::ex1();
        let aut = support_automaton(&pomdp, &Belief::dirac(0, 2)).unwrap();
        let json = aut.to_json(&pomdp);
        assert!(json.contains("\"nodes\""));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["nodes"][0][0], "k1");
        assert_eq!(parsed["edges"][0]["action"], "a");
        let dot = aut.to_dot(&pomdp);
        assert!(dot.starts_with("digraph supports {"));
        assert!(dot.contains("0 -> 1 [label=\"a\"];"));
        assert!(dot.ends_with("}\n"));
    }

    #[test]
    fn search_finds_the_alternating_word_from_known_weights() {
        let pomdp = corpus::ex1();
        let report =
            search_periodic(&pomdp, &Belief::new(vec![0.25, 0.75]).unwrap(), 1, 2).unwrap();
        assert_eq!(report.prefix, Vec::<usize>::new());
        assert_eq!(report.period, vec![1, 0]);
        assert!(close(report.gain, 0.75));
        // Periods (a), (b), (a,b), (b,a); repetitions skipped.
        assert_eq!(report.candidates, 4);
        assert!(!report.truncated);
    }

    #[test]
    fn search_from_a_known_start_reaches_gain_one() {
        let pomdp = corpus::ex1();
        let report = search_periodic(&pomdp, &Belief::dirac(0, 2), 1, 2).unwrap();
        assert_eq!(report.period, vec![0, 1]);
        assert!(close(report.gain, 1.0));
    }

    #[test]
    fn search_on_the_trivial_model() {
        let pomdp = corpus::triv1();
        for (n, t) in [(1, 1), (2, 3)] {
            let report = search_periodic(&pomdp, &Belief::dirac(0, 1), n, t).unwrap();
            assert!(close(report.gain, 1.0));
        }
    }

    #[test]
    fn reported_gain_matches_reevaluation() {
        let pomdp = corpus::ex1();
        let p1 = Belief::new(vec![0.25, 0.75]).unwrap();
        let report = search_periodic(&pomdp, &p1, 3, 3).unwrap();
        let word = EventuallyPeriodicStrategy::new(
            report.prefix.clone(),
            report.period.clone(),
            2,
        )
        .unwrap();
        let gain = chain::gain(&pomdp, &p1, &word.to_finite_memory(1)).unwrap();
        assert_eq!(report.gain, gain);
    }

    #[test]
    fn search_is_monotone_in_both_bounds() {
        let pomdp = corpus::ex1();
        let p1 = Belief::new(vec![0.25, 0.75]).unwrap();
        let mut by_bounds = vec![];
        for max_n in 1..=3 {
            for max_t in 1..=3 {
                let gain = search_periodic(&pomdp, &p1, max_n, max_t).unwrap().gain;
                by_bounds.push((max_n, max_t, gain));
            }
        }
        for &(n1, t1, g1) in &by_bounds {
            for &(n2, t2, g2) in &by_bounds {
                if n1 <= n2 && t1 <= t2 {
                    assert!(g1 <= g2 + 1e-12, "({n1},{t1})={g1} > ({n2},{t2})={g2}");
                }
            }
        }
    }

    #[test]
    fn tight_cap_truncates_and_flags() {
        let pomdp = corpus::ex1();
        let p1 = Belief::new(vec![0.25, 0.75]).unwrap();
        let report = search_periodic_capped(&pomdp, &p1, 1, 2, 2).unwrap();
        assert!(report.truncated);
        assert_eq!(report.candidates, 2);
        // Visited (a) and (b) only; both give the coin-flip average.
        assert!(close(report.gain, 0.5));
    }

    #[test]
    fn bad_bounds_are_rejected() {
        let pomdp = corpus::ex1();
        let p1 = Belief::new(vec![0.25, 0.75]).unwrap();
        assert!(matches!(
            search_periodic(&pomdp, &p1, 0, 2),
            Err(BlindError::BadBounds { .. })
        ));
    }

    #[test]
    fn repetition_detector_spots_powers_only() {
        assert!(is_repetition(&[0, 0]));
        assert!(is_repetition(&[0, 1, 0, 1]));
        assert!(is_repetition(&[1, 1, 1]));
        assert!(!is_repetition(&[0]));
        assert!(!is_repetition(&[0, 1]));
        assert!(!is_repetition(&[1, 0]));
        assert!(!is_repetition(&[0, 1, 1]));
        assert!(!is_repetition(&[0, 1, 0, 1, 0]));
    }
}
