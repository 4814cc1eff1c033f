//! Beliefs under observation: Bayesian updates, observed histories, and
//! the support bookkeeping used by strategy surgery.
//!
//! A belief is updated by an (action, signal) pair. Supports evolve by the
//! same rule with probabilities forgotten, which is what makes the
//! super-support machinery finite: there are only finitely many tuples of
//! supports, so tracking them per block of a gain partition is automaton
//! work, not measure theory.

use serde::{Deserialize, Serialize};

use crate::model::{Belief, Pomdp};
use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum BeliefError {
    #[error(
        "observation (action `{action}`, signal `{signal}`) has probability {probability:e} under the current belief"
    )]
    ImpossibleObservation {
        action: String,
        signal: String,
        probability: f64,
    },
    #[error("{0}")]
    Mismatch(String),
}

/// An observed history: the (action, signal) pairs seen so far, oldest
/// first. Indices refer to the model's declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct History(pub Vec<(usize, usize)>);

impl History {
    /// Parses `"a:s_b,a:s_a"` against the model's action and signal names.
    pub fn parse(text: &str, pomdp: &Pomdp) -> Result<Self, BeliefError> {
        let mut steps = Vec::new();
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Ok(History(steps));
        }
        for part in trimmed.split(',') {
            let (a, s) = part.trim().split_once(':').ok_or_else(|| {
                BeliefError::Mismatch(format!("history step `{part}` is not `action:signal`"))
            })?;
            let a = pomdp
                .action_index(a.trim())
                .ok_or_else(|| BeliefError::Mismatch(format!("unknown action `{a}`")))?;
            let s = pomdp
                .signal_index(s.trim())
                .ok_or_else(|| BeliefError::Mismatch(format!("unknown signal `{s}`")))?;
            steps.push((a, s));
        }
        Ok(History(steps))
    }

    pub fn render(&self, pomdp: &Pomdp) -> String {
        self.0
            .iter()
            .map(|&(a, s)| format!("{}:{}", pomdp.actions[a], pomdp.signals[s]))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Probability of each signal when playing `action` from `belief`.
pub fn signal_probabilities(pomdp: &Pomdp, belief: &Belief, action: usize) -> Vec<f64> {
    let mut out = vec![0.0; pomdp.n_signals()];
    for (k, w) in belief.weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let row = pomdp.kernel_row(k, action);
        for to in 0..pomdp.n_states() {
            for s in 0..pomdp.n_signals() {
                out[s] += w * row[pomdp.ks(to, s)];
            }
        }
    }
    out
}

/// Bayesian update of `belief` after playing `action` and seeing `signal`.
/// Returns the posterior and the signal's probability. Observing a signal
/// whose probability is below the impossible-event cutoff is an error, not
/// a division by ~zero.
pub fn bayes_update(
    pomdp: &Pomdp,
    belief: &Belief,
    action: usize,
    signal: usize,
) -> Result<(Belief, f64), BeliefError> {
    if belief.weights.len() != pomdp.n_states() {
        return Err(BeliefError::Mismatch(format!(
            "belief over {} states, model has {}",
            belief.weights.len(),
            pomdp.n_states()
        )));
    }
    let mut unnormalized = vec![0.0; pomdp.n_states()];
    for (k, w) in belief.weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let row = pomdp.kernel_row(k, action);
        for to in 0..pomdp.n_states() {
            unnormalized[to] += w * row[pomdp.ks(to, signal)];
        }
    }
    let total: f64 = unnormalized.iter().sum();
    if total <= tolerances::IMPOSSIBLE_EVENT {
        return Err(BeliefError::ImpossibleObservation {
            action: pomdp.actions[action].clone(),
            signal: pomdp.signals[signal].clone(),
            probability: total,
        });
    }
    for w in &mut unnormalized {
        *w /= total;
    }
    Ok((Belief { weights: unnormalized }, total))
}

/// Folds [`bayes_update`] over a history. Returns the posterior and the
/// probability of observing that signal sequence under those actions.
pub fn belief_after_history(
    pomdp: &Pomdp,
    p1: &Belief,
    history: &History,
) -> Result<(Belief, f64), BeliefError> {
    let mut belief = p1.clone();
    let mut probability = 1.0;
    for &(a, s) in &history.0 {
        let (next, p) = bayes_update(pomdp, &belief, a, s)?;
        belief = next;
        probability *= p;
    }
    Ok((belief, probability))
}

/// States reachable from `support` in one step given (action, signal),
/// ignoring probabilities below the structural cutoff. Sorted.
pub fn support_update(pomdp: &Pomdp, support: &[usize], action: usize, signal: usize) -> Vec<usize> {
    let mut hit = vec![false; pomdp.n_states()];
    for &k in support {
        let row = pomdp.kernel_row(k, action);
        for to in 0..pomdp.n_states() {
            if row[pomdp.ks(to, signal)] > tolerances::STRUCTURAL {
                hit[to] = true;
            }
        }
    }
    hit.iter()
        .enumerate()
        .filter_map(|(k, h)| h.then_some(k))
        .collect()
}

/// A partition of a belief's support into blocks of equal long-run gain,
/// ordered by strictly descending gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPartition {
    /// Disjoint, nonempty, sorted blocks of state indices.
    pub blocks: Vec<Vec<usize>>,
    /// One gain per block, strictly descending.
    pub gains: Vec<f64>,
}

impl GainPartition {
    pub fn new(blocks: Vec<Vec<usize>>, gains: Vec<f64>) -> Result<Self, BeliefError> {
        if blocks.is_empty() || blocks.len() != gains.len() {
            return Err(BeliefError::Mismatch(
                "partition needs one gain per nonempty block".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for block in &blocks {
            if block.is_empty() {
                return Err(BeliefError::Mismatch("empty partition block".into()));
            }
            if block.windows(2).any(|w| w[0] >= w[1]) {
                return Err(BeliefError::Mismatch("block not sorted".into()));
            }
            for &k in block {
                if !seen.insert(k) {
                    return Err(BeliefError::Mismatch(format!(
                        "state index {k} appears in two blocks"
                    )));
                }
            }
        }
        if gains.windows(2).any(|w| w[0] <= w[1]) {
            return Err(BeliefError::Mismatch(
                "block gains must strictly decrease".into(),
            ));
        }
        Ok(GainPartition { blocks, gains })
    }

    /// Number of blocks.
    pub fn arity(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, k: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&k))
    }

    /// Union of all blocks, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// A tuple of per-block supports, evolved jointly. Blocks that die (their
/// part of the belief assigns the observed signal probability zero) stay
/// in the tuple as empty sets so the arity never changes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SuperSupport {
    pub blocks: Vec<Vec<usize>>,
}

impl SuperSupport {
    pub fn from_partition(partition: &GainPartition) -> Self {
        SuperSupport {
            blocks: partition.blocks.clone(),
        }
    }

    /// One joint step: each block's support is updated independently.
    pub fn after(&self, pomdp: &Pomdp, action: usize, signal: usize) -> Self {
        SuperSupport {
            blocks: self
                .blocks
                .iter()
                .map(|b| support_update(pomdp, b, action, signal))
                .collect(),
        }
    }

    pub fn after_history(&self, pomdp: &Pomdp, history: &History) -> Self {
        let mut current = self.clone();
        for &(a, s) in &history.0 {
            current = current.after(pomdp, a, s);
        }
        current
    }

    /// True when no state appears in two blocks.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.blocks
            .iter()
            .flatten()
            .all(|&k| seen.insert(k))
    }

    pub fn is_all_empty(&self) -> bool {
        self.blocks.iter().all(|b| b.is_empty())
    }
}

/// Super-support of a partition after a history, under the strategy that
/// generated the actions. The strategy only enters through consistency:
/// the fold rejects histories whose actions the strategy would not play,
/// and histories impossible from every block.
pub fn super_support_after_history(
    pomdp: &Pomdp,
    sigma: &crate::strategy::FiniteMemoryStrategy,
    partition: &GainPartition,
    history: &History,
) -> Result<SuperSupport, BeliefError> {
    let mut memory = sigma.initial;
    let mut tuple = SuperSupport::from_partition(partition);
    for (step, &(a, s)) in history.0.iter().enumerate() {
        if sigma.act[memory] != a {
            return Err(BeliefError::Mismatch(format!(
                "history step {}: strategy plays `{}`, history records `{}`",
                step + 1,
                pomdp.actions[sigma.act[memory]],
                pomdp.actions[a]
            )));
        }
        tuple = tuple.after(pomdp, a, s);
        if tuple.is_all_empty() {
            return Err(BeliefError::ImpossibleObservation {
                action: pomdp.actions[a].clone(),
                signal: pomdp.signals[s].clone(),
                probability: 0.0,
            });
        }
        memory = sigma.update_of(memory, a, s);
    }
    Ok(tuple)
}
