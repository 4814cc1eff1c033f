//! Strategy representations and transformations.
//!
//! Three interchangeable forms with strictly increasing generality:
//! eventually periodic action words (blind play), finite recall (the action
//! depends on a bounded window of recent history), and finite-memory
//! transducers. The conversions preserve behavior on every play, so exact
//! evaluation only ever needs the transducer form.
//!
//! The module also carries the replay construction: given a base
//! transducer whose per-state gains are almost surely constant on the
//! support of a belief, it builds a new transducer that plays the base in
//! blocks of a fixed length, restarting each block from a representative
//! history with the same super-support. The point of the construction is
//! that the per-block expected average is within epsilon of the base gain
//! from every state the play can actually be in, uniformly over blocks.

use std::collections::BTreeMap;

use crate::belief::{GainPartition, History, SuperSupport};
use crate::chain;
use crate::model::{Belief, Pomdp};
use crate::tolerances;

/// Distinct super-support tuples tracked by the closure, at most.
pub const INDEX_CAP: usize = 10_000;
/// Largest certified block length searched by [`choose_block_length`].
pub const BLOCK_LENGTH_CAP: usize = 100_000;
/// Memory-state bound for the constructed replay transducer.
pub const BLOCK_STATES_CAP: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("{0}")]
    Invalid(String),
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(
        "history step {step}: strategy plays action {expected} there, history records action {got}"
    )]
    InconsistentHistory {
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("super-support closure exceeded {cap} entries")]
    ClosureCapExceeded { cap: usize },
    #[error(
        "no block length up to {cap} certifies epsilon {epsilon}: worst defect {defect} for state {state} in block {block} of tuple {tuple}"
    )]
    BlockLengthCapExceeded {
        cap: usize,
        epsilon: f64,
        defect: f64,
        state: usize,
        block: usize,
        tuple: usize,
    },
    #[error("base gain from state {state} is not almost-surely constant")]
    NonConstantBaseGain { state: usize },
    #[error(
        "partition assigns gain {expected} to state {state}, base strategy achieves {actual}"
    )]
    PartitionGainMismatch {
        state: usize,
        expected: f64,
        actual: f64,
    },
    #[error("partition covers {partition:?} but the belief is supported on {support:?}")]
    PartitionSupportMismatch {
        partition: Vec<usize>,
        support: Vec<usize>,
    },
    #[error("replay transducer needs {states} memory states, cap is {cap}")]
    BlockTooLarge { states: usize, cap: usize },
    #[error("evaluation failed: {0}")]
    Chain(#[from] chain::ChainError),
}

/// Deterministic transducer: a memory state fixes the action, the observed
/// (action, signal) pair fixes the next memory state. Update entries for
/// actions the state never plays exist for totality; constructors fill
/// them with self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMemoryStrategy {
    pub memory_states: Vec<String>,
    pub initial: usize,
    /// Action per memory state.
    pub act: Vec<usize>,
    /// Flattened update table, indexed `m * n_actions * n_signals + a * n_signals + s`.
    pub update: Vec<usize>,
    pub n_actions: usize,
    pub n_signals: usize,
}

impl FiniteMemoryStrategy {
    pub fn new(
        memory_states: Vec<String>,
        initial: usize,
        act: Vec<usize>,
        update: Vec<usize>,
        n_actions: usize,
        n_signals: usize,
    ) -> Result<Self, StrategyError> {
        let n = memory_states.len();
        if n == 0 {
            return Err(StrategyError::Invalid("no memory states".into()));
        }
        if n_actions == 0 || n_signals == 0 {
            return Err(StrategyError::Invalid(
                "strategy needs at least one action and one signal".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &memory_states {
            if name.is_empty() {
                return Err(StrategyError::Invalid("empty memory state name".into()));
            }
            if !seen.insert(name) {
                return Err(StrategyError::Invalid(format!(
                    "duplicate memory state `{name}`"
                )));
            }
        }
        if initial >= n {
            return Err(StrategyError::Invalid(format!(
                "initial memory index {initial} out of range"
            )));
        }
        if act.len() != n {
            return Err(StrategyError::Invalid("one action per memory state".into()));
        }
        if let Some(a) = act.iter().find(|&&a| a >= n_actions) {
            return Err(StrategyError::Invalid(format!("action index {a} out of range")));
        }
        if update.len() != n * n_actions * n_signals {
            return Err(StrategyError::Invalid(format!(
                "update table has {} entries, expected {}",
                update.len(),
                n * n_actions * n_signals
            )));
        }
        if let Some(m) = update.iter().find(|&&m| m >= n) {
            return Err(StrategyError::Invalid(format!("update target {m} out of range")));
        }
        Ok(FiniteMemoryStrategy {
            memory_states,
            initial,
            act,
            update,
            n_actions,
            n_signals,
        })
    }

    /// Builds from the exercised part of the update table only:
    /// `exercised[m][s]` is the successor when the state plays its own
    /// action. Entries for other actions become self-loops.
    pub fn from_exercised(
        memory_states: Vec<String>,
        initial: usize,
        act: Vec<usize>,
        exercised: Vec<Vec<usize>>,
        n_actions: usize,
    ) -> Result<Self, StrategyError> {
        let n = memory_states.len();
        if exercised.len() != n || act.len() != n {
            return Err(StrategyError::Invalid(
                "one action and one update row per memory state".into(),
            ));
        }
        let n_signals = exercised.first().map(|r| r.len()).unwrap_or(0);
        if n_signals == 0 || exercised.iter().any(|r| r.len() != n_signals) {
            return Err(StrategyError::Invalid(
                "update rows must share one positive length".into(),
            ));
        }
        let mut update = vec![0usize; n * n_actions * n_signals];
        for m in 0..n {
            for a in 0..n_actions {
                for s in 0..n_signals {
                    let target = if a == act[m] { exercised[m][s] } else { m };
                    update[m * n_actions * n_signals + a * n_signals + s] = target;
                }
            }
        }
        Self::new(memory_states, initial, act, update, n_actions, n_signals)
    }

    #[inline]
    pub fn update_of(&self, m: usize, a: usize, s: usize) -> usize {
        self.update[m * self.n_actions * self.n_signals + a * self.n_signals + s]
    }

    /// Same transducer started elsewhere.
    pub fn with_initial(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.initial = m;
        out
    }

    /// Memory state reached by folding the update table over a history,
    /// provided the history's actions match what this strategy plays.
    pub fn memory_after(&self, history: &History) -> Result<usize, StrategyError> {
        let mut m = self.initial;
        for (step, &(a, s)) in history.0.iter().enumerate() {
            if self.act[m] != a {
                return Err(StrategyError::InconsistentHistory {
                    step: step + 1,
                    expected: self.act[m],
                    got: a,
                });
            }
            m = self.update_of(m, a, s);
        }
        Ok(m)
    }

    /// The strategy conditioned on having already seen `history`: same
    /// transducer, initial memory folded forward. Histories whose actions
    /// the strategy would not play have probability zero under it and are
    /// rejected.
    pub fn history_shift(&self, history: &History) -> Result<Self, StrategyError> {
        Ok(self.with_initial(self.memory_after(history)?))
    }
}

/// Blind strategy: play `prefix` once, then `period` forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventuallyPeriodicStrategy {
    pub prefix: Vec<usize>,
    pub period: Vec<usize>,
    pub n_actions: usize,
}

impl EventuallyPeriodicStrategy {
    pub fn new(
        prefix: Vec<usize>,
        period: Vec<usize>,
        n_actions: usize,
    ) -> Result<Self, StrategyError> {
        if period.is_empty() {
            return Err(StrategyError::Invalid("empty period".into()));
        }
        if prefix.iter().chain(&period).any(|&a| a >= n_actions) {
            return Err(StrategyError::Invalid("action index out of range".into()));
        }
        Ok(EventuallyPeriodicStrategy {
            prefix,
            period,
            n_actions,
        })
    }

    /// Action at stage `t` (1-based).
    pub fn action_at(&self, t: usize) -> usize {
        assert!(t >= 1, "stages are 1-based");
        if t <= self.prefix.len() {
            self.prefix[t - 1]
        } else {
            self.period[(t - 1 - self.prefix.len()) % self.period.len()]
        }
    }

    /// Drops the first `m - 1` actions: the strategy as seen from stage
    /// `m`. Shifting into the periodic part rotates the period.
    pub fn shift(&self, m: usize) -> Result<Self, StrategyError> {
        if m == 0 {
            return Err(StrategyError::Invalid("shift stage is 1-based".into()));
        }
        let drop = m - 1;
        if drop <= self.prefix.len() {
            return Self::new(
                self.prefix[drop..].to_vec(),
                self.period.clone(),
                self.n_actions,
            );
        }
        let rot = (drop - self.prefix.len()) % self.period.len();
        let mut period = self.period[rot..].to_vec();
        period.extend_from_slice(&self.period[..rot]);
        Self::new(Vec::new(), period, self.n_actions)
    }

    /// Position-counter transducer: one state per prefix stage, then a
    /// cycle. Signals are ignored, matching blind play.
    pub fn to_finite_memory(&self, n_signals: usize) -> FiniteMemoryStrategy {
        let p = self.prefix.len();
        let t = self.period.len();
        let names: Vec<String> = (0..p)
            .map(|i| format!("t{i}"))
            .chain((0..t).map(|j| format!("c{j}")))
            .collect();
        let act: Vec<usize> = self.prefix.iter().chain(&self.period).copied().collect();
        let exercised: Vec<Vec<usize>> = (0..p + t)
            .map(|i| {
                let next = if i + 1 < p + t { i + 1 } else { p };
                vec![next; n_signals]
            })
            .collect();
        FiniteMemoryStrategy::from_exercised(names, 0, act, exercised, self.n_actions)
            .expect("periodic transducer construction is total")
    }
}

/// Number of (action, signal) words of length at most `recall` over an
/// alphabet of `base` pairs.
pub fn word_count(recall: usize, base: usize) -> usize {
    let mut total = 1usize;
    let mut pow = 1usize;
    for _ in 0..recall {
        pow *= base;
        total += pow;
    }
    total
}

/// Strategy reading only the last `recall` (action, signal) pairs. The
/// table is indexed by word, shortest first, then lexicographic; index 0
/// is the empty word used at the start of play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteRecallStrategy {
    pub recall: usize,
    pub n_actions: usize,
    pub n_signals: usize,
    pub table: Vec<usize>,
}

impl FiniteRecallStrategy {
    pub fn new(
        recall: usize,
        n_actions: usize,
        n_signals: usize,
        table: Vec<usize>,
    ) -> Result<Self, StrategyError> {
        if n_actions == 0 || n_signals == 0 {
            return Err(StrategyError::Invalid(
                "strategy needs at least one action and one signal".into(),
            ));
        }
        let expected = word_count(recall, n_actions * n_signals);
        if table.len() != expected {
            return Err(StrategyError::Invalid(format!(
                "table has {} entries, recall {} needs {}",
                table.len(),
                recall,
                expected
            )));
        }
        if let Some(a) = table.iter().find(|&&a| a >= n_actions) {
            return Err(StrategyError::Invalid(format!("action index {a} out of range")));
        }
        Ok(FiniteRecallStrategy {
            recall,
            n_actions,
            n_signals,
            table,
        })
    }

    fn base(&self) -> usize {
        self.n_actions * self.n_signals
    }

    /// Table index of a word of (action, signal) pairs, oldest first.
    pub fn word_index(&self, word: &[(usize, usize)]) -> usize {
        let base = self.base();
        let mut offset = 0;
        let mut pow = 1;
        for _ in 0..word.len() {
            offset += pow;
            pow *= base;
        }
        let mut within = 0;
        for &(a, s) in word {
            within = within * base + (a * self.n_signals + s);
        }
        offset + within
    }

    /// Inverse of [`word_index`].
    pub fn word_of_index(&self, index: usize) -> Vec<(usize, usize)> {
        let base = self.base();
        let mut len = 0;
        let mut offset = 0;
        let mut pow = 1;
        while offset + pow <= index {
            offset += pow;
            pow *= base;
            len += 1;
        }
        let mut within = index - offset;
        let mut word = vec![(0, 0); len];
        for slot in word.iter_mut().rev() {
            let digit = within % base;
            within /= base;
            *slot = (digit / self.n_signals, digit % self.n_signals);
        }
        word
    }

    /// Action for a recent-history window (at most `recall` pairs).
    pub fn act_of(&self, window: &[(usize, usize)]) -> usize {
        let start = window.len().saturating_sub(self.recall);
        self.table[self.word_index(&window[start..])]
    }

    /// Window-automaton transducer: one state per word, updates append the
    /// observed pair and keep the most recent `recall` of them.
    pub fn to_finite_memory(&self) -> FiniteMemoryStrategy {
        let count = word_count(self.recall, self.base());
        let mut names = Vec::with_capacity(count);
        let mut update = vec![0usize; count * self.base()];
        for index in 0..count {
            let word = self.word_of_index(index);
            let name = if word.is_empty() {
                "w".to_string()
            } else {
                let mut n = String::from("w");
                for (a, s) in &word {
                    n.push_str(&format!("-a{a}s{s}"));
                }
                n
            };
            names.push(name);
            for a in 0..self.n_actions {
                for s in 0..self.n_signals {
                    let mut next = word.clone();
                    next.push((a, s));
                    if next.len() > self.recall {
                        next.remove(0);
                    }
                    update[index * self.base() + a * self.n_signals + s] =
                        self.word_index(&next);
                }
            }
        }
        FiniteMemoryStrategy::new(
            names,
            0,
            self.table.clone(),
            update,
            self.n_actions,
            self.n_signals,
        )
        .expect("window transducer construction is total")
    }
}

/// Any of the three representations, as read from a strategy file.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    FiniteMemory(FiniteMemoryStrategy),
    EventuallyPeriodic(EventuallyPeriodicStrategy),
    FiniteRecall(FiniteRecallStrategy),
}

impl Strategy {
    /// The transducer form, converting if needed. Periodic strategies need
    /// the model's signal count for a total update table.
    pub fn to_finite_memory(&self, n_signals: usize) -> FiniteMemoryStrategy {
        match self {
            Strategy::FiniteMemory(s) => s.clone(),
            Strategy::EventuallyPeriodic(s) => s.to_finite_memory(n_signals),
            Strategy::FiniteRecall(s) => s.to_finite_memory(),
        }
    }
}

fn resolve<'a>(
    kind: &'static str,
    name: &str,
    names: &'a [String],
) -> Result<usize, StrategyError> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| StrategyError::Unknown {
            kind,
            name: name.to_string(),
        })
}

#[derive(serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawStrategy {
    FiniteMemory {
        memory_states: Vec<String>,
        initial: String,
        act: BTreeMap<String, String>,
        update: BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>>,
    },
    EventuallyPeriodic {
        #[serde(default)]
        prefix: Vec<String>,
        period: Vec<String>,
    },
    FiniteRecall {
        recall: usize,
        table: BTreeMap<String, String>,
    },
}

/// Parses a `.strat.json` document against a model's names.
pub fn parse_strategy(text: &str, pomdp: &Pomdp) -> Result<Strategy, StrategyError> {
    let raw: RawStrategy =
        serde_json::from_str(text).map_err(|e| StrategyError::Syntax(e.to_string()))?;
    match raw {
        RawStrategy::FiniteMemory {
            memory_states,
            initial,
            act,
            update,
        } => {
            let m_index = |name: &str| resolve("memory state", name, &memory_states);
            let n = memory_states.len();
            let initial = m_index(&initial)?;
            let mut act_vec = vec![usize::MAX; n];
            for (m, a) in &act {
                act_vec[m_index(m)?] = pomdp
                    .action_index(a)
                    .ok_or_else(|| StrategyError::Unknown {
                        kind: "action",
                        name: a.clone(),
                    })?;
            }
            if act_vec.contains(&usize::MAX) {
                return Err(StrategyError::Invalid(
                    "act table must cover every memory state".into(),
                ));
            }
            let (na, ns) = (pomdp.n_actions(), pomdp.n_signals());
            let mut update_vec: Vec<usize> = (0..n * na * ns).map(|i| i / (na * ns)).collect();
            for (m, by_action) in &update {
                let m = m_index(m)?;
                for (a, by_signal) in by_action {
                    let a = pomdp
                        .action_index(a)
                        .ok_or_else(|| StrategyError::Unknown {
                            kind: "action",
                            name: a.clone(),
                        })?;
                    for (s, target) in by_signal {
                        let s = pomdp
                            .signal_index(s)
                            .ok_or_else(|| StrategyError::Unknown {
                                kind: "signal",
                                name: s.clone(),
                            })?;
                        update_vec[m * na * ns + a * ns + s] = m_index(target)?;
                    }
                }
            }
            Ok(Strategy::FiniteMemory(FiniteMemoryStrategy::new(
                memory_states,
                initial,
                act_vec,
                update_vec,
                na,
                ns,
            )?))
        }
        RawStrategy::EventuallyPeriodic { prefix, period } => {
            let bind = |names: &[String]| -> Result<Vec<usize>, StrategyError> {
                names
                    .iter()
                    .map(|a| {
                        pomdp.action_index(a).ok_or_else(|| StrategyError::Unknown {
                            kind: "action",
                            name: a.clone(),
                        })
                    })
                    .collect()
            };
            Ok(Strategy::EventuallyPeriodic(EventuallyPeriodicStrategy::new(
                bind(&prefix)?,
                bind(&period)?,
                pomdp.n_actions(),
            )?))
        }
        RawStrategy::FiniteRecall { recall, table } => {
            let base = pomdp.n_actions() * pomdp.n_signals();
            let mut table_vec = vec![usize::MAX; word_count(recall, base)];
            let probe = FiniteRecallStrategy {
                recall,
                n_actions: pomdp.n_actions(),
                n_signals: pomdp.n_signals(),
                table: vec![0; word_count(recall, base)],
            };
            for (key, action) in &table {
                let word = History::parse(key, pomdp)
                    .map_err(|e| StrategyError::Syntax(format!("table key `{key}`: {e}")))?;
                if word.len() > recall {
                    return Err(StrategyError::Invalid(format!(
                        "table key `{key}` longer than recall {recall}"
                    )));
                }
                table_vec[probe.word_index(&word.0)] = pomdp
                    .action_index(action)
                    .ok_or_else(|| StrategyError::Unknown {
                        kind: "action",
                        name: action.clone(),
                    })?;
            }
            if table_vec.contains(&usize::MAX) {
                return Err(StrategyError::Invalid(
                    "table must cover every word up to the recall length".into(),
                ));
            }
            Ok(Strategy::FiniteRecall(FiniteRecallStrategy::new(
                recall,
                pomdp.n_actions(),
                pomdp.n_signals(),
                table_vec,
            )?))
        }
    }
}

/// Canonical rendering: sorted keys, exercised update entries only.
/// `parse_strategy(render_strategy(s)) == s` whenever `s` keeps the
/// self-loop convention on unexercised entries.
pub fn render_strategy(pomdp: &Pomdp, strategy: &Strategy) -> String {
    let value = match strategy {
        Strategy::FiniteMemory(s) => {
            let act: BTreeMap<&str, &str> = s
                .memory_states
                .iter()
                .zip(&s.act)
                .map(|(m, &a)| (m.as_str(), pomdp.actions[a].as_str()))
                .collect();
            let mut update = BTreeMap::new();
            for (m, name) in s.memory_states.iter().enumerate() {
                let a = s.act[m];
                let row: BTreeMap<&str, &str> = (0..s.n_signals)
                    .map(|sig| {
                        (
                            pomdp.signals[sig].as_str(),
                            s.memory_states[s.update_of(m, a, sig)].as_str(),
                        )
                    })
                    .collect();
                let by_action = BTreeMap::from([(pomdp.actions[a].as_str(), row)]);
                update.insert(name.as_str(), by_action);
            }
            serde_json::json!({
                "kind": "finite_memory",
                "memory_states": s.memory_states,
                "initial": s.memory_states[s.initial],
                "act": act,
                "update": update,
            })
        }
        Strategy::EventuallyPeriodic(s) => {
            let names = |word: &[usize]| -> Vec<&str> {
                word.iter().map(|&a| pomdp.actions[a].as_str()).collect()
            };
            serde_json::json!({
                "kind": "eventually_periodic",
                "prefix": names(&s.prefix),
                "period": names(&s.period),
            })
        }
        Strategy::FiniteRecall(s) => {
            let mut table = BTreeMap::new();
            for (index, &a) in s.table.iter().enumerate() {
                let word = History(s.word_of_index(index));
                table.insert(word.render(pomdp), pomdp.actions[a].as_str());
            }
            serde_json::json!({
                "kind": "finite_recall",
                "recall": s.recall,
                "table": table,
            })
        }
    };
    let mut out = serde_json::to_string_pretty(&value).expect("strategy renders as json");
    out.push('\n');
    out
}

/// The deterministic automaton of (base memory, super-support tuple)
/// pairs reachable from the partition along positive-probability plays of
/// the base strategy. Finitely many pairs exist; each distinct tuple gets
/// an index whose representative is its first-discovered pair.
#[derive(Debug, Clone)]
pub struct SuperSupportIndex {
    /// (base memory state, tuple id), breadth-first from the start pair.
    pub pairs: Vec<(usize, usize)>,
    /// `step[pair][signal]`: successor pair, `None` when the signal has
    /// probability zero from every state in the tuple.
    pub step: Vec<Vec<Option<usize>>>,
    /// Distinct tuples in discovery order; tuple 0 is the partition.
    pub tuples: Vec<SuperSupport>,
    /// Tuple id -> first pair that carried it.
    pub representative: Vec<usize>,
}

impl SuperSupportIndex {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// Breadth-first closure of the (memory, tuple) automaton under one-step
/// propagation. The action at a pair is the base's choice at its memory
/// state, so the automaton is deterministic per signal.
pub fn super_support_index(
    pomdp: &Pomdp,
    base: &FiniteMemoryStrategy,
    partition: &GainPartition,
    cap: usize,
) -> Result<SuperSupportIndex, StrategyError> {
    let root_tuple = SuperSupport::from_partition(partition);
    let mut tuples = vec![root_tuple.clone()];
    let mut tuple_ids: BTreeMap<SuperSupport, usize> = BTreeMap::from([(root_tuple, 0)]);
    let mut pairs = vec![(base.initial, 0usize)];
    let mut pair_ids: BTreeMap<(usize, usize), usize> = BTreeMap::from([((base.initial, 0), 0)]);
    let mut representative = vec![0usize];
    let mut step: Vec<Vec<Option<usize>>> = Vec::new();

    let mut cursor = 0;
    while cursor < pairs.len() {
        let (memory, tuple_id) = pairs[cursor];
        let action = base.act[memory];
        let tuple = tuples[tuple_id].clone();
        let mut row = Vec::with_capacity(pomdp.n_signals());
        for s in 0..pomdp.n_signals() {
            let stepped = tuple.after(pomdp, action, s);
            if stepped.is_all_empty() {
                row.push(None);
                continue;
            }
            let next_memory = base.update_of(memory, action, s);
            let next_tuple_id = match tuple_ids.get(&stepped) {
                Some(&id) => id,
                None => {
                    let id = tuples.len();
                    if id >= cap {
                        return Err(StrategyError::ClosureCapExceeded { cap });
                    }
                    tuples.push(stepped.clone());
                    tuple_ids.insert(stepped, id);
                    representative.push(usize::MAX);
                    id
                }
            };
            let key = (next_memory, next_tuple_id);
            let next_pair = match pair_ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = pairs.len();
                    if id >= cap {
                        return Err(StrategyError::ClosureCapExceeded { cap });
                    }
                    pairs.push(key);
                    pair_ids.insert(key, id);
                    id
                }
            };
            if representative[next_tuple_id] == usize::MAX {
                representative[next_tuple_id] = next_pair;
            }
            row.push(Some(next_pair));
        }
        step.push(row);
        cursor += 1;
    }
    Ok(SuperSupportIndex {
        pairs,
        step,
        tuples,
        representative,
    })
}

/// Checks the gain precondition behind the replay construction: the base
/// must have almost-surely constant per-state gains on the partition's
/// states, matching the partition's block gains. Returns the evaluation
/// for reuse.
pub fn check_replay_precondition(
    pomdp: &Pomdp,
    base: &FiniteMemoryStrategy,
    partition: &GainPartition,
    p_star: &Belief,
) -> Result<chain::EvaluationResult, StrategyError> {
    let support = p_star.support();
    if partition.support() != support {
        return Err(StrategyError::PartitionSupportMismatch {
            partition: partition.support(),
            support,
        });
    }
    let result = chain::evaluate(pomdp, p_star, base)?;
    for (i, block) in partition.blocks.iter().enumerate() {
        for &k in block {
            if !result.constant_gain[k] {
                return Err(StrategyError::NonConstantBaseGain { state: k });
            }
            let actual = result.per_state_gains[k];
            if (actual - partition.gains[i]).abs() > tolerances::GAIN_GROUPING {
                return Err(StrategyError::PartitionGainMismatch {
                    state: k,
                    expected: partition.gains[i],
                    actual,
                });
            }
        }
    }
    Ok(result)
}

/// Verifies that every state of every block of every reachable tuple gets
/// exactly its block's gain when the base is restarted from that pair's
/// memory state. This is the exact-arithmetic form of the property that
/// makes block replay safe.
pub fn verify_shift_gains(
    pomdp: &Pomdp,
    base: &FiniteMemoryStrategy,
    partition: &GainPartition,
    index: &SuperSupportIndex,
) -> Result<(), StrategyError> {
    for &(memory, tuple_id) in &index.pairs {
        let shifted = base.with_initial(memory);
        let result = chain::evaluate(pomdp, &Belief::uniform(pomdp.n_states()), &shifted)?;
        for (i, block) in index.tuples[tuple_id].blocks.iter().enumerate() {
            for &k in block {
                let got = result.per_state_gains[k];
                if !result.constant_gain[k]
                    || (got - partition.gains[i]).abs() > tolerances::GAIN_GROUPING
                {
                    return Err(StrategyError::PartitionGainMismatch {
                        state: k,
                        expected: partition.gains[i],
                        actual: got,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Smallest block length `n` (up to `cap`) such that from every state of
/// every block of every tuple, restarting the base at the tuple's
/// representative memory earns an expected n-stage average within
/// `epsilon` of the block gain. One backward pass per candidate length on
/// the shared product chain.
pub fn choose_block_length(
    pomdp: &Pomdp,
    base: &FiniteMemoryStrategy,
    partition: &GainPartition,
    index: &SuperSupportIndex,
    epsilon: f64,
    cap: usize,
) -> Result<usize, StrategyError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let chain = chain::product_chain(pomdp, base)?;
    let mut sums = vec![0.0; chain.len()];
    let mut worst = (f64::INFINITY, 0usize, 0usize, 0usize);
    for n in 1..=cap {
        sums = chain::accumulate_expected_rewards(&chain, &sums);
        worst = (f64::INFINITY, 0, 0, 0);
        let mut ok = true;
        for (tuple_id, tuple) in index.tuples.iter().enumerate() {
            let (memory, _) = index.pairs[index.representative[tuple_id]];
            for (i, block) in tuple.blocks.iter().enumerate() {
                for &k in block {
                    let node = chain.node(k, memory).expect("full chain");
                    let margin = sums[node] / n as f64 - (partition.gains[i] - epsilon);
                    if margin < worst.0 {
                        worst = (margin, k, i, tuple_id);
                    }
                    if margin < 0.0 {
                        ok = false;
                    }
                }
            }
        }
        if ok {
            return Ok(n);
        }
    }
    Err(StrategyError::BlockLengthCapExceeded {
        cap,
        epsilon,
        defect: -worst.0,
        state: worst.1,
        block: worst.2,
        tuple: worst.3,
    })
}

/// Everything the replay construction needs, precomputed and checked.
#[derive(Debug, Clone)]
pub struct BlockStrategySpec {
    pub base: FiniteMemoryStrategy,
    pub partition: GainPartition,
    pub p_star: Belief,
    pub block_length: usize,
    pub index: SuperSupportIndex,
}

/// Runs the precondition check, builds the tuple closure, and certifies a
/// block length for `epsilon`.
pub fn plan_block_strategy(
    pomdp: &Pomdp,
    base: &FiniteMemoryStrategy,
    partition: &GainPartition,
    p_star: &Belief,
    epsilon: f64,
) -> Result<BlockStrategySpec, StrategyError> {
    check_replay_precondition(pomdp, base, partition, p_star)?;
    let index = super_support_index(pomdp, base, partition, INDEX_CAP)?;
    let block_length =
        choose_block_length(pomdp, base, partition, &index, epsilon, BLOCK_LENGTH_CAP)?;
    Ok(BlockStrategySpec {
        base: base.clone(),
        partition: partition.clone(),
        p_star: p_star.clone(),
        block_length,
        index,
    })
}

/// Builds the replay transducer. Memory is (pair, stage counter): within a
/// block it follows the pair automaton and plays the base's action at the
/// pair's memory state; when the counter wraps it jumps to the
/// representative pair of the tuple just reached, so every block starts at
/// a representative and the certified block-length bound applies.
pub fn build_block_strategy(
    pomdp: &Pomdp,
    spec: &BlockStrategySpec,
) -> Result<FiniteMemoryStrategy, StrategyError> {
    let n0 = spec.block_length;
    if n0 == 0 {
        return Err(StrategyError::Invalid("block length must be positive".into()));
    }
    let pairs = spec.index.pairs.len();
    let states = pairs
        .checked_mul(n0)
        .ok_or(StrategyError::BlockTooLarge {
            states: usize::MAX,
            cap: BLOCK_STATES_CAP,
        })?;
    if states > BLOCK_STATES_CAP {
        return Err(StrategyError::BlockTooLarge {
            states,
            cap: BLOCK_STATES_CAP,
        });
    }
    for row in &spec.index.step {
        for target in row.iter().flatten() {
            if spec.index.representative[spec.index.pairs[*target].1] == usize::MAX {
                return Err(StrategyError::Invalid(
                    "tuple closure is missing a representative".into(),
                ));
            }
        }
    }

    let id = |pair: usize, c: usize| pair * n0 + c;
    let mut names = Vec::with_capacity(states);
    let mut act = Vec::with_capacity(states);
    let mut exercised = Vec::with_capacity(states);
    for pair in 0..pairs {
        let (memory, _) = spec.index.pairs[pair];
        let action = spec.base.act[memory];
        for c in 0..n0 {
            names.push(format!("p{pair}c{c}"));
            act.push(action);
            let mut row = Vec::with_capacity(pomdp.n_signals());
            for s in 0..pomdp.n_signals() {
                let target = match spec.index.step[pair][s] {
                    // Impossible signals self-loop; no positive-probability
                    // play exercises them.
                    None => id(pair, c),
                    Some(next_pair) => {
                        if c + 1 < n0 {
                            id(next_pair, c + 1)
                        } else {
                            let tuple = spec.index.pairs[next_pair].1;
                            id(spec.index.representative[tuple], 0)
                        }
                    }
                };
                row.push(target);
            }
            exercised.push(row);
        }
    }
    FiniteMemoryStrategy::from_exercised(names, 0, act, exercised, pomdp.n_actions())
}
