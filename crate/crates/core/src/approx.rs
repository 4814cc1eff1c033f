//! Anytime two-sided bounds on the best achievable gain, and promise
//! decisions built on them.
//!
//! The lower bound enumerates deterministic finite-memory strategies in
//! increasing memory size and keeps the best exact gain found; every value
//! it reports is achieved by a concrete witness. The upper bound solves
//! the fully observed average-reward problem on the state space: an
//! informed controller can reproduce any signal-driven one, so that value
//! dominates. The gap may never close (the upper bound is not tight in
//! general), which is why budgets and explicit halt reasons exist instead
//! of a termination promise.

use crate::blind::next_word;
use crate::chain::{self, ChainError, ProductChain};
use crate::linalg::{self, LinalgError};
use crate::model::{Belief, Pomdp};
use crate::strategy::FiniteMemoryStrategy;
use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum ApproxError {
    #[error(
        "policy iteration cycled; exhaustive fallback needs |K|*|A| <= {limit}, model has {size}"
    )]
    PolicyIterationCycle { size: usize, limit: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0}")]
    Invalid(String),
}

/// Checks the breadth-first numbering convention: scanning exercised
/// updates in (state, signal) order, every state index must first appear
/// as the next unused label, and all of them must appear.
fn is_canonical(exercised: &[usize], memory: usize, n_signals: usize) -> bool {
    let mut discovered = 1;
    let mut cursor = 0;
    while cursor < discovered {
        for s in 0..n_signals {
            let target = exercised[cursor * n_signals + s];
            if target > discovered {
                return false;
            }
            if target == discovered {
                discovered += 1;
            }
        }
        cursor += 1;
    }
    discovered == memory
}

/// Streams every deterministic transducer with exactly `memory_size`
/// reachable memory states, one per reachable-isomorphism class: the
/// initial state is index 0 and the rest are numbered in breadth-first
/// discovery order. Order is deterministic: actions advance outermost,
/// exercised updates innermost, both lexicographically.
pub fn enumerate_transducers(pomdp: &Pomdp, memory_size: usize) -> TransducerIter {
    assert!(memory_size >= 1, "memory size is at least 1");
    TransducerIter {
        n_actions: pomdp.n_actions(),
        n_signals: pomdp.n_signals(),
        memory: memory_size,
        act: vec![0; memory_size],
        exercised: vec![0; memory_size * pomdp.n_signals()],
        done: false,
    }
}

#[derive(Debug)]
pub struct TransducerIter {
    n_actions: usize,
    n_signals: usize,
    memory: usize,
    act: Vec<usize>,
    exercised: Vec<usize>,
    done: bool,
}

impl TransducerIter {
    fn build(&self) -> FiniteMemoryStrategy {
        let names = (0..self.memory).map(|m| format!("m{m}")).collect();
        let rows = self
            .exercised
            .chunks(self.n_signals)
            .map(|row| row.to_vec())
            .collect();
        FiniteMemoryStrategy::from_exercised(names, 0, self.act.clone(), rows, self.n_actions)
            .expect("enumerated tables are in range")
    }

    fn advance(&mut self) {
        if next_word(&mut self.exercised, self.memory) {
            return;
        }
        if next_word(&mut self.act, self.n_actions) {
            return;
        }
        self.done = true;
    }
}

impl Iterator for TransducerIter {
    type Item = FiniteMemoryStrategy;

    fn next(&mut self) -> Option<FiniteMemoryStrategy> {
        while !self.done {
            let hit = is_canonical(&self.exercised, self.memory, self.n_signals);
            let item = hit.then(|| self.build());
            self.advance();
            if item.is_some() {
                return item;
            }
        }
        None
    }
}

/// Reduces a full transducer table to its reachable part in breadth-first
/// numbering. Returns the reachable state count and a key encoding
/// (actions, exercised updates) of the renumbered machine; two transducers
/// get equal keys exactly when their reachable parts are isomorphic.
pub fn canonical_form(
    act: &[usize],
    update: &[usize],
    n_actions: usize,
    n_signals: usize,
) -> (usize, Vec<usize>) {
    let memory = act.len();
    let mut order = vec![0usize];
    let mut label = vec![usize::MAX; memory];
    label[0] = 0;
    let mut cursor = 0;
    while cursor < order.len() {
        let m = order[cursor];
        for s in 0..n_signals {
            let target = update[m * n_actions * n_signals + act[m] * n_signals + s];
            if label[target] == usize::MAX {
                label[target] = order.len();
                order.push(target);
            }
        }
        cursor += 1;
    }
    let mut key = Vec::with_capacity(order.len() * (1 + n_signals));
    for &m in &order {
        key.push(act[m]);
    }
    for &m in &order {
        for s in 0..n_signals {
            key.push(label[update[m * n_actions * n_signals + act[m] * n_signals + s]]);
        }
    }
    (order.len(), key)
}

/// Markov chain induced on the plain state space by a stationary
/// deterministic policy of the fully observed problem.
fn policy_chain(pomdp: &Pomdp, policy: &[usize]) -> ProductChain {
    let n = pomdp.n_states();
    let mut rows = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for k in 0..n {
        let kernel = pomdp.kernel_row(k, policy[k]);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for to in 0..n {
            let p: f64 = (0..pomdp.n_signals()).map(|s| kernel[pomdp.ks(to, s)]).sum();
            if p > 0.0 {
                row.push((to, p));
            }
        }
        rows.push(row);
        rewards.push(pomdp.reward(k, policy[k]));
    }
    ProductChain {
        n_states: n,
        n_memories: 1,
        nodes: (0..n).map(|k| (k, 0)).collect(),
        lookup: (0..n).collect(),
        rows,
        rewards,
    }
}

/// Gain and bias of one policy. The bias solves (I - P)h = r - g with one
/// component pinned to zero per recurrent class, which makes the system
/// nonsingular.
fn evaluate_policy(
    pomdp: &Pomdp,
    policy: &[usize],
) -> Result<(Vec<f64>, Vec<f64>), ApproxError> {
    let chain = policy_chain(pomdp, policy);
    let analysis = chain::analyze(&chain)?;
    let gains = analysis.node_gains.clone();
    let n = chain.len();
    let mut pinned = vec![false; n];
    for class in &analysis.classes {
        pinned[*class.nodes.iter().min().expect("nonempty class")] = true;
    }
    let mut matrix = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for v in 0..n {
        if pinned[v] {
            matrix[v * n + v] = 1.0;
            continue;
        }
        matrix[v * n + v] = 1.0;
        for &(w, p) in &chain.rows[v] {
            matrix[v * n + w] -= p;
        }
        rhs[v] = chain.rewards[v] - gains[v];
    }
    let bias = linalg::solve(&matrix, n, &rhs)?;
    Ok((gains, bias))
}

/// Exhaustive fallback only runs on models this small.
const EXHAUSTIVE_LIMIT: usize = 20;

/// Optimal gain per state of the fully observed problem, by exhaustive
/// policy evaluation. Exponential in |K|; exposed for cross-checks.
pub fn perfect_info_exhaustive(pomdp: &Pomdp) -> Result<Vec<f64>, ApproxError> {
    let n = pomdp.n_states();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut policy = vec![0usize; n];
    loop {
        let chain = policy_chain(pomdp, &policy);
        let analysis = chain::analyze(&chain)?;
        for (k, b) in best.iter_mut().enumerate() {
            *b = b.max(analysis.node_gains[k]);
        }
        if !next_word(&mut policy, pomdp.n_actions()) {
            return Ok(best);
        }
    }
}

/// Optimal gain per state of the fully observed problem, by multichain
/// policy iteration: improve on gain first, then on bias among gain
/// maximizers, smallest action index on ties. A detected policy cycle
/// falls back to exhaustive enumeration when the model is small enough.
pub fn perfect_info_gains(pomdp: &Pomdp) -> Result<Vec<f64>, ApproxError> {
    let n = pomdp.n_states();
    let tol = tolerances::STRUCTURAL;
    let mut policy = vec![0usize; n];
    let mut seen = std::collections::HashSet::new();
    seen.insert(policy.clone());
    loop {
        let (gains, bias) = evaluate_policy(pomdp, &policy)?;
        let mut next = vec![0usize; n];
        for k in 0..n {
            let score = |a: usize| -> (f64, f64) {
                let kernel = pomdp.kernel_row(k, a);
                let mut gain_part = 0.0;
                let mut bias_part = pomdp.reward(k, a);
                for to in 0..n {
                    let p: f64 =
                        (0..pomdp.n_signals()).map(|s| kernel[pomdp.ks(to, s)]).sum();
                    gain_part += p * gains[to];
                    bias_part += p * bias[to];
                }
                (gain_part, bias_part)
            };
            let mut best_a = 0;
            let mut best = score(0);
            for a in 1..pomdp.n_actions() {
                let candidate = score(a);
                if candidate.0 > best.0 + tol
                    || (candidate.0 > best.0 - tol && candidate.1 > best.1 + tol)
                {
                    best = candidate;
                    best_a = a;
                }
            }
            next[k] = best_a;
        }
        if next == policy {
            return Ok(gains);
        }
        if !seen.insert(next.clone()) {
            if n * pomdp.n_actions() <= EXHAUSTIVE_LIMIT {
                return perfect_info_exhaustive(pomdp);
            }
            return Err(ApproxError::PolicyIterationCycle {
                size: n * pomdp.n_actions(),
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        policy = next;
    }
}

/// Certified upper bound on the best achievable gain from `p1`: the value
/// of the fully observed relaxation.
pub fn perfect_info_upper_bound(pomdp: &Pomdp, p1: &Belief) -> Result<f64, ApproxError> {
    let gains = perfect_info_gains(pomdp)?;
    Ok(p1.weights.iter().zip(&gains).map(|(w, g)| w * g).sum())
}

/// Stop conditions for the enumeration. Both caps are optional; with
/// neither set the loop only stops when the gap closes, which on some
/// models is never.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Budget {
    pub max_memory: Option<usize>,
    pub max_candidates: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    GapClosed,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct ApproxReport {
    /// Best exact gain found; achieved by `witness`.
    pub lower_bound: f64,
    pub witness: Option<FiniteMemoryStrategy>,
    /// Fully observed relaxation value.
    pub upper_bound: f64,
    pub candidates_evaluated: u64,
    /// Memory sizes whose canonical streams were fully enumerated.
    pub memory_sizes_exhausted: usize,
    pub halt: HaltReason,
    pub epsilon: f64,
}

/// Enumerates canonical transducers in increasing memory size, keeping the
/// best exact gain as a lower bound, until it is within `epsilon` of the
/// fully observed upper bound or the budget runs out.
pub fn anytime_approximate(
    pomdp: &Pomdp,
    p1: &Belief,
    epsilon: f64,
    budget: &Budget,
) -> Result<ApproxReport, ApproxError> {
    if !(epsilon > 0.0) {
        return Err(ApproxError::Invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let upper_bound = perfect_info_upper_bound(pomdp, p1)?;
    let mut report = ApproxReport {
        lower_bound: f64::NEG_INFINITY,
        witness: None,
        upper_bound,
        candidates_evaluated: 0,
        memory_sizes_exhausted: 0,
        halt: HaltReason::BudgetExhausted,
        epsilon,
    };
    let mut memory = 1;
    loop {
        if report.halt == HaltReason::GapClosed {
            return Ok(report);
        }
        if budget.max_memory.is_some_and(|cap| memory > cap) {
            return Ok(report);
        }
        for sigma in enumerate_transducers(pomdp, memory) {
            if budget
                .max_candidates
                .is_some_and(|cap| report.candidates_evaluated >= cap)
            {
                return Ok(report);
            }
            let gain = chain::gain(pomdp, p1, &sigma)?;
            report.candidates_evaluated += 1;
            if gain > report.lower_bound {
                report.lower_bound = gain;
                report.witness = Some(sigma);
            }
            if report.upper_bound - report.lower_bound <= epsilon {
                report.halt = HaltReason::GapClosed;
                break;
            }
        }
        if report.halt != HaltReason::GapClosed {
            report.memory_sizes_exhausted = memory;
        }
        memory += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromiseQuery {
    /// Threshold in [0,1]. The promise (not checked): the value is either
    /// at least `x + epsilon` or at most `x - epsilon`.
    pub x: f64,
    pub epsilon: f64,
    pub budget: Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    AtLeastXPlusEps,
    AtMostXMinusEps,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct DecisionReport {
    pub verdict: Verdict,
    pub x: f64,
    pub epsilon: f64,
    /// Best lower bound seen when the decision fired (negative infinity if
    /// no candidate was evaluated).
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub candidates_evaluated: u64,
    /// Transducer achieving `lower_bound`, when one was evaluated.
    pub witness: Option<FiniteMemoryStrategy>,
}

/// Decides the promise problem. A lower bound above `x - epsilon` settles
/// the at-least side; the upper bound below `x + epsilon` settles the
/// at-most side; running out of budget reports `Unknown` rather than
/// guessing, since without a witness neither side is certain.
pub fn decide_promise(
    pomdp: &Pomdp,
    p1: &Belief,
    query: &PromiseQuery,
) -> Result<DecisionReport, ApproxError> {
    if !(query.epsilon > 0.0) || !(0.0..=1.0).contains(&query.x) {
        return Err(ApproxError::Invalid(format!(
            "query needs x in [0,1] and positive epsilon, got x={} epsilon={}",
            query.x, query.epsilon
        )));
    }
    let upper_bound = perfect_info_upper_bound(pomdp, p1)?;
    let mut report = DecisionReport {
        verdict: Verdict::Unknown,
        x: query.x,
        epsilon: query.epsilon,
        lower_bound: f64::NEG_INFINITY,
        upper_bound,
        candidates_evaluated: 0,
        witness: None,
    };
    if upper_bound < query.x + query.epsilon {
        report.verdict = Verdict::AtMostXMinusEps;
        return Ok(report);
    }
    let mut memory = 1;
    loop {
        if query.budget.max_memory.is_some_and(|cap| memory > cap) {
            return Ok(report);
        }
        for sigma in enumerate_transducers(pomdp, memory) {
            if query
                .budget
                .max_candidates
                .is_some_and(|cap| report.candidates_evaluated >= cap)
            {
                return Ok(report);
            }
            let gain = chain::gain(pomdp, p1, &sigma)?;
            report.candidates_evaluated += 1;
            if gain > report.lower_bound {
                report.lower_bound = gain;
                report.witness = Some(sigma);
            }
            if report.lower_bound > query.x - query.epsilon {
                report.verdict = Verdict::AtLeastXPlusEps;
                return Ok(report);
            }
        }
        memory += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn close(x: f64, y: f64) -> bool {
        (x - y).abs() < 1e-9
    }

    #[test]
    fn canonical_counts_match_direct_reasoning() {
        assert_eq!(enumerate_transducers(&corpus::triv1(), 1).count(), 1);
        assert_eq!(enumerate_transducers(&corpus::ex1(), 1).count(), 2);
        // Two states over one signal: the first row must discover state 1,
        // the second row is free, actions are free.
        assert_eq!(enumerate_transducers(&corpus::ex1(), 2).count(), 8);
        // Two states over two signals: 3 discovering first rows, 4 second
        // rows, 4 action assignments.
        assert_eq!(enumerate_transducers(&corpus::ex2(), 2).count(), 48);
    }

    #[test]
    fn canonical_stream_matches_brute_force_dedup() {
        // Oracle: canonicalize every raw full-table transducer and count
        // the distinct reachable-isomorphism classes with all states used.
        for (pomdp, memory) in [(corpus::ex1(), 2usize), (corpus::ex2(), 2)] {
            let (na, ns) = (pomdp.n_actions(), pomdp.n_signals());
            let mut classes = std::collections::HashSet::new();
            let mut act = vec![0usize; memory];
            loop {
                let mut update = vec![0usize; memory * na * ns];
                loop {
                    let (reachable, key) = canonical_form(&act, &update, na, ns);
                    if reachable == memory {
                        classes.insert(key);
                    }
                    if !next_word(&mut update, memory) {
                        break;
                    }
                }
                if !next_word(&mut act, na) {
                    break;
                }
            }
            let streamed = enumerate_transducers(&pomdp, memory).count();
            assert_eq!(classes.len(), streamed, "mismatch on {memory}-state stream");
        }
    }

    #[test]
    fn stream_is_canonical_and_duplicate_free() {
        let pomdp = corpus::ex2();
        let mut keys = std::collections::HashSet::new();
        for sigma in enumerate_transducers(&pomdp, 3) {
            assert_eq!(sigma.initial, 0);
            let exercised: Vec<usize> = (0..3)
                .flat_map(|m| (0..2).map(move |s| (m, s)))
                .map(|(m, s)| sigma.update_of(m, sigma.act[m], s))
                .collect();
            assert!(is_canonical(&exercised, 3, 2));
            let mut key = sigma.act.clone();
            key.extend(exercised);
            assert!(keys.insert(key), "duplicate canonical form");
        }
    }

    #[test]
    fn every_raw_transducer_has_an_emitted_equivalent() {
        // Exhaustive over all full tables with two memory states on the
        // two-action two-signal model: the canonical form of each raw
        // table must appear in the stream of its reachable size, and
        // evaluate to the same gain.
        let pomdp = corpus::ex2();
        let (na, ns) = (2, 2);
        let mut by_key: std::collections::HashMap<Vec<usize>, f64> =
            std::collections::HashMap::new();
        for memory in 1..=2 {
            for sigma in enumerate_transducers(&pomdp, memory) {
                let mut exercised = Vec::new();
                for m in 0..memory {
                    for s in 0..ns {
                        exercised.push(sigma.update_of(m, sigma.act[m], s));
                    }
                }
                let mut full = vec![0usize; memory * na * ns];
                for m in 0..memory {
                    for a in 0..na {
                        for s in 0..ns {
                            full[m * na * ns + a * ns + s] = sigma.update_of(m, a, s);
                        }
                    }
                }
                let (_, key) = canonical_form(&sigma.act, &full, na, ns);
                let gain = chain::gain(&pomdp, &pomdp.initial_belief, &sigma).unwrap();
                by_key.insert(key, gain);
            }
        }
        let mut act = vec![0usize; 2];
        loop {
            let mut update = vec![0usize; 2 * na * ns];
            loop {
                let (_, key) = canonical_form(&act, &update, na, ns);
                let canonical_gain = *by_key
                    .get(&key)
                    .expect("raw transducer missing from canonical streams");
                let raw = FiniteMemoryStrategy::new(
                    vec!["m0".into(), "m1".into()],
                    0,
                    act.clone(),
                    update.clone(),
                    na,
                    ns,
                )
                .unwrap();
                let raw_gain = chain::gain(&pomdp, &pomdp.initial_belief, &raw).unwrap();
                assert!(
                    (raw_gain - canonical_gain).abs() < 1e-12,
                    "behavior mismatch"
                );
                if !next_word(&mut update, 2) {
                    break;
                }
            }
            if !next_word(&mut act, na) {
                break;
            }
        }
    }

    #[test]
    fn informed_controller_values_are_exact() {
        assert!(close(
            perfect_info_upper_bound(&corpus::triv1(), &Belief::dirac(0, 1)).unwrap(),
            1.0
        ));
        // Matching the action to the state pays every stage.
        assert!(close(
            perfect_info_upper_bound(&corpus::ex1(), &Belief::new(vec![0.25, 0.75]).unwrap())
                .unwrap(),
            1.0
        ));
        // Even informed, the branch lottery caps the value at 5/6.
        assert!(close(
            perfect_info_upper_bound(&corpus::ex2(), &Belief::dirac(0, 5)).unwrap(),
            5.0 / 6.0
        ));
    }

    #[test]
    fn policy_iteration_agrees_with_exhaustive_enumeration() {
        for pomdp in [corpus::triv1(), corpus::ex1(), corpus::ex2()] {
            let fast = perfect_info_gains(&pomdp).unwrap();
            let slow = perfect_info_exhaustive(&pomdp).unwrap();
            for (f, s) in fast.iter().zip(&slow) {
                assert!(close(*f, *s), "gain vectors differ: {fast:?} vs {slow:?}");
            }
        }
    }

    #[test]
    fn trivial_model_closes_the_gap_immediately() {
        let report = anytime_approximate(
            &corpus::triv1(),
            &Belief::dirac(0, 1),
            0.1,
            &Budget::default(),
        )
        .unwrap();
        assert_eq!(report.halt, HaltReason::GapClosed);
        assert!(close(report.lower_bound, 1.0));
        assert!(close(report.upper_bound, 1.0));
        assert_eq!(report.candidates_evaluated, 1);
        assert_eq!(report.witness.as_ref().unwrap().memory_states.len(), 1);
    }

    #[test]
    fn swap_model_keeps_a_persistent_gap() {
        // The informed bound is 1 but blind play cannot beat 3/4, so the
        // run must end on budget with the gap reported honestly.
        let report = anytime_approximate(
            &corpus::ex1(),
            &Belief::new(vec![0.25, 0.75]).unwrap(),
            0.05,
            &Budget {
                max_memory: Some(3),
                max_candidates: None,
            },
        )
        .unwrap();
        assert_eq!(report.halt, HaltReason::BudgetExhausted);
        assert!(close(report.lower_bound, 0.75));
        assert!(close(report.upper_bound, 1.0));
        assert_eq!(report.memory_sizes_exhausted, 3);
        let witness = report.witness.as_ref().unwrap();
        assert_eq!(witness.memory_states.len(), 2);
        let again = chain::gain(
            &corpus::ex1(),
            &Belief::new(vec![0.25, 0.75]).unwrap(),
            witness,
        )
        .unwrap();
        assert_eq!(again, report.lower_bound);
    }

    #[test]
    fn branch_model_halts_at_four_memories_with_zero_gap() {
        let pomdp = corpus::ex2();
        let report = anytime_approximate(
            &pomdp,
            &Belief::dirac(0, 5),
            0.05,
            &Budget {
                max_memory: Some(5),
                max_candidates: None,
            },
        )
        .unwrap();
        assert_eq!(report.halt, HaltReason::GapClosed);
        assert!(close(report.lower_bound, 5.0 / 6.0));
        assert!(close(report.upper_bound, 5.0 / 6.0));
        let witness = report.witness.as_ref().unwrap();
        assert!(witness.memory_states.len() <= 4);
        let again = chain::gain(&pomdp, &Belief::dirac(0, 5), witness).unwrap();
        assert_eq!(again, report.lower_bound);
    }

    #[test]
    fn lower_bound_is_monotone_in_the_memory_budget() {
        let pomdp = corpus::ex1();
        let p1 = Belief::new(vec![0.25, 0.75]).unwrap();
        let mut last = f64::NEG_INFINITY;
        for cap in 1..=3 {
            let report = anytime_approximate(
                &pomdp,
                &p1,
                1e-9,
                &Budget {
                    max_memory: Some(cap),
                    max_candidates: None,
                },
            )
            .unwrap();
            assert!(report.lower_bound >= last);
            last = report.lower_bound;
        }
    }

    #[test]
    fn candidate_cap_stops_mid_size() {
        let pomdp = corpus::ex1();
        let p1 = Belief::new(vec![0.25, 0.75]).unwrap();
        let report = anytime_approximate(
            &pomdp,
            &p1,
            1e-9,
            &Budget {
                max_memory: None,
                max_candidates: Some(1),
            },
        )
        .unwrap();
        assert_eq!(report.candidates_evaluated, 1);
        assert_eq!(report.halt, HaltReason::BudgetExhausted);
        assert_eq!(report.memory_sizes_exhausted, 0);
    }

    #[test]
    fn promise_decisions_on_known_values() {
        let ex2 = corpus::ex2();
        let d0 = Belief::dirac(0, 5);
        let verdict = |x: f64, epsilon: f64| {
            decide_promise(
                &ex2,
                &d0,
                &PromiseQuery {
                    x,
                    epsilon,
                    budget: Budget {
                        max_memory: Some(4),
                        max_candidates: None,
                    },
                },
            )
            .unwrap()
            .verdict
        };
        assert_eq!(verdict(0.5, 0.1), Verdict::AtLeastXPlusEps);
        assert_eq!(verdict(0.95, 0.05), Verdict::AtMostXMinusEps);

        let triv = decide_promise(
            &corpus::triv1(),
            &Belief::dirac(0, 1),
            &PromiseQuery {
                x: 0.5,
                epsilon: 0.1,
                budget: Budget::default(),
            },
        )
        .unwrap();
        assert_eq!(triv.verdict, Verdict::AtLeastXPlusEps);
    }

    #[test]
    fn exhausted_budget_reports_unknown() {
        // True value 3/4 sits inside (x - eps, x + eps): the promise is
        // violated and no budget can settle it; the verdict must stay
        // Unknown rather than pick a side.
        let report = decide_promise(
            &corpus::ex1(),
            &Belief::new(vec![0.25, 0.75]).unwrap(),
            &PromiseQuery {
                x: 0.9,
                epsilon: 0.05,
                budget: Budget {
                    max_memory: Some(3),
                    max_candidates: None,
                },
            },
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Unknown);
        assert!(close(report.lower_bound, 0.75));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let pomdp = corpus::triv1();
        let p1 = Belief::dirac(0, 1);
        assert!(anytime_approximate(&pomdp, &p1, 0.0, &Budget::default()).is_err());
        assert!(decide_promise(
            &pomdp,
            &p1,
            &PromiseQuery {
                x: 1.5,
                epsilon: 0.1,
                budget: Budget::default(),
            },
        )
        .is_err());
    }
}
