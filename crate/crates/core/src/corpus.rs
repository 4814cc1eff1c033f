//! Bundled example models and strategies.
//!
//! Three small models exercise every corner of the crate and are shipped by
//! the command-line `examples` subcommand:
//!
//! - `ex1`: two states that swap deterministically under either action,
//!   blind. Action `a` pays off in `k1`, action `b` in `k2`. Starting from
//!   belief (1/4, 3/4), playing a constant action yields 1/2 while the
//!   alternating word (b, a) yields 3/4: memory of the stage parity is
//!   worth a quarter of the payoff.
//! - `ex2`: five states, two signals. From `k0` the first signal reveals
//!   which branch was entered: `k3` loops forever under `a` paying 1, while
//!   the `k1` branch pays on a cycle that must be replayed by answering
//!   signal `s_b` with one `b`. The best achievable gain from `k0` is 5/6,
//!   and no bounded-recall table reaches more than 1/2.
//! - `triv1`: one state, one action, reward 1. Degenerate on purpose.

use crate::model::{Belief, Pomdp};
use crate::strategy::{FiniteMemoryStrategy, FiniteRecallStrategy};

fn build(
    states: &[&str],
    actions: &[&str],
    signals: &[&str],
    transitions: &[(usize, usize, usize, usize, f64)],
    rewards: &[(usize, usize, f64)],
    belief: &[f64],
) -> Pomdp {
    let n_rows = states.len() * actions.len();
    let row_len = states.len() * signals.len();
    let mut kernel = vec![vec![0.0; row_len]; n_rows];
    for &(k, a, to, s, p) in transitions {
        kernel[k * actions.len() + a][to * signals.len() + s] = p;
    }
    let mut reward_table = vec![0.0; n_rows];
    for &(k, a, g) in rewards {
        reward_table[k * actions.len() + a] = g;
    }
    Pomdp::new(
        states.iter().map(|s| s.to_string()).collect(),
        actions.iter().map(|s| s.to_string()).collect(),
        signals.iter().map(|s| s.to_string()).collect(),
        kernel,
        reward_table,
        Belief::new(belief.to_vec()).expect("corpus belief"),
    )
    .expect("corpus model")
}

/// Two-state deterministic swap, blind, initial belief (1/4, 3/4).
pub fn ex1() -> Pomdp {
    let (k1, k2) = (0, 1);
    let (a, b) = (0, 1);
    let s = 0;
    build(
        &["k1", "k2"],
        &["a", "b"],
        &["s"],
        &[
            (k1, a, k2, s, 1.0),
            (k1, b, k2, s, 1.0),
            (k2, a, k1, s, 1.0),
            (k2, b, k1, s, 1.0),
        ],
        &[(k1, a, 1.0), (k2, b, 1.0)],
        &[0.25, 0.75],
    )
}

/// Five-state branching model with two signals; value 5/6 from `k0`.
pub fn ex2() -> Pomdp {
    let (k0, k1, k2, k3, k4) = (0, 1, 2, 3, 4);
    let (a, b) = (0, 1);
    let (s_a, s_b) = (0, 1);
    build(
        &["k0", "k1", "k2", "k3", "k4"],
        &["a", "b"],
        &["s_a", "s_b"],
        &[
            (k0, a, k1, s_b, 0.5),
            (k0, a, k3, s_a, 0.5),
            (k0, b, k1, s_b, 0.5),
            (k0, b, k3, s_a, 0.5),
            (k1, a, k1, s_a, 0.5),
            (k1, a, k2, s_b, 0.5),
            (k1, b, k4, s_a, 1.0),
            (k2, a, k4, s_a, 1.0),
            (k2, b, k1, s_a, 1.0),
            (k3, a, k3, s_a, 0.5),
            (k3, a, k3, s_b, 0.5),
            (k3, b, k4, s_a, 1.0),
            (k4, a, k4, s_a, 1.0),
            (k4, b, k4, s_a, 1.0),
        ],
        // State-based rewards: 1 on k1 and k3 under both actions.
        &[
            (k1, a, 1.0),
            (k1, b, 1.0),
            (k3, a, 1.0),
            (k3, b, 1.0),
        ],
        &[1.0, 0.0, 0.0, 0.0, 0.0],
    )
}

/// One state, one action, one signal, reward 1.
pub fn triv1() -> Pomdp {
    build(
        &["k0"],
        &["a"],
        &["s"],
        &[(0, 0, 0, 0, 1.0)],
        &[(0, 0, 1.0)],
        &[1.0],
    )
}

/// The two-memory strategy playing b, a, b, a, ... on `ex1`. Worth 3/4
/// from the bundled initial belief: it pays in `k2` on odd stages and in
/// `k1` on even ones, and the swap keeps it in phase.
pub fn ex1_alternating() -> FiniteMemoryStrategy {
    let (a, b) = (0, 1);
    FiniteMemoryStrategy::from_exercised(
        vec!["m_odd".into(), "m_even".into()],
        0,
        vec![b, a],
        vec![vec![1], vec![0]],
        2,
    )
    .expect("corpus strategy")
}

/// The one-memory strategy playing a forever on `ex1`. Worth 1/2 from any
/// belief: the swap averages the two rewards.
pub fn ex1_constant_a() -> FiniteMemoryStrategy {
    FiniteMemoryStrategy::from_exercised(vec!["m".into()], 0, vec![0], vec![vec![0]], 2)
        .expect("corpus strategy")
}

/// The four-memory optimal strategy on `ex2`, worth 5/6 from `k0`.
///
/// The first signal selects a branch: `s_a` means the walk went to `k3`,
/// where playing a forever pays 1; `s_b` means `k1`, where the strategy
/// loops a and answers each later `s_b` (the move to `k2`) with a single b,
/// a cycle paying 2/3.
pub fn ex2_optimal() -> FiniteMemoryStrategy {
    let (a, b) = (0, 1);
    let (m_init, m_k3, m_k1, m_k2) = (0, 1, 2, 3);
    FiniteMemoryStrategy::from_exercised(
        vec![
            "m_init".into(),
            "m_k3".into(),
            "m_k1".into(),
            "m_k2".into(),
        ],
        m_init,
        vec![a, a, a, b],
        vec![
            vec![m_k3, m_k1],
            vec![m_k3, m_k3],
            vec![m_k1, m_k2],
            vec![m_k1, m_k2],
        ],
        2,
    )
    .expect("corpus strategy")
}

/// The one-memory strategy playing a forever on `ex2`. From the branch
/// belief (0, 1/2, 0, 1/2, 0) it is the best strategy whose per-state
/// gains are almost-surely constant: 1 from `k3`, 0 from `k1`.
pub fn ex2_always_a() -> FiniteMemoryStrategy {
    FiniteMemoryStrategy::from_exercised(vec!["m".into()], 0, vec![0], vec![vec![0, 0]], 2)
        .expect("corpus strategy")
}

/// The state distribution on `ex2` one stage after `k0`, before the signal
/// is taken into account: half `k1`, half `k3`.
pub fn ex2_branch_belief() -> Belief {
    Belief::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).expect("corpus belief")
}

/// Every recall-1 table on `ex2`: one action for the empty history and one
/// per (action, signal) pair, 2^5 = 32 tables in counter order.
pub fn ex2_recall1_strategies() -> Vec<FiniteRecallStrategy> {
    let n_words = 1 + 2 * 2;
    (0..1u32 << n_words)
        .map(|bits| {
            let table = (0..n_words).map(|i| ((bits >> i) & 1) as usize).collect();
            FiniteRecallStrategy::new(1, 2, 2, table).expect("corpus strategy")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn kernel_rows_sum_to_one() {
        for pomdp in [ex1(), ex2(), triv1()] {
            assert!(validate(&pomdp).is_valid());
        }
    }

    #[test]
    fn ex2_signals_follow_the_story() {
        let pomdp = ex2();
        // From k0, signal s_b goes with the k1 branch and s_a with k3.
        assert_eq!(pomdp.transition_prob(0, 0, 1, 1), 0.5);
        assert_eq!(pomdp.transition_prob(0, 0, 3, 0), 0.5);
        // k4 is absorbing and silent apart from s_a.
        assert_eq!(pomdp.transition_prob(4, 0, 4, 0), 1.0);
        assert_eq!(pomdp.transition_prob(4, 1, 4, 0), 1.0);
    }

    #[test]
    fn recall1_corpus_is_exhaustive_and_distinct() {
        let all = ex2_recall1_strategies();
        assert_eq!(all.len(), 32);
        for (i, s) in all.iter().enumerate() {
            for t in &all[i + 1..] {
                assert_ne!(s.table, t.table);
            }
        }
    }
}
