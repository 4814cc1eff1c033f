//! Model types and the `.pomdp.json` file format.
//!
//! A model is a finite set of states, actions and signals together with a
//! kernel `q(k, a) -> distribution over (k', s)` and a reward table
//! `g(k, a) in [0, 1]`. Files list only nonzero kernel and reward entries;
//! omitted entries are zero. Declaration order of the name lists fixes all
//! indices. Probabilities are written as decimal numbers or as `"p/q"`
//! fraction strings and are never renormalized: a row that does not sum to
//! one is an error in the file, not something to repair.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tolerances;

/// A distribution over states. Entries are nonnegative and sum to one
/// within [`tolerances::VALIDATION`].
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub weights: Vec<f64>,
}

impl Belief {
    /// Builds a belief, checking nonnegativity and total mass.
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tolerances::VALIDATION {
            return Err(ModelError::BadBelief {
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        if let Some(w) = weights.iter().find(|w| **w < -tolerances::VALIDATION) {
            return Err(ModelError::BadBelief {
                reason: format!("negative weight {w}"),
            });
        }
        Ok(Belief { weights })
    }

    /// Point mass on state `k` out of `n` states.
    pub fn dirac(k: usize, n: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[k] = 1.0;
        Belief { weights }
    }

    /// Equal mass on all `n` states.
    pub fn uniform(n: usize) -> Self {
        Belief {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// State indices carrying structurally nonzero mass.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > tolerances::STRUCTURAL)
            .map(|(k, _)| k)
            .collect()
    }
}

/// A finite model with partial observation.
///
/// `kernel[k * actions.len() + a]` is a dense row over `(k', s)` pairs
/// indexed `k' * signals.len() + s`; `rewards[k * actions.len() + a]` is
/// the reward of playing `a` at `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub signals: Vec<String>,
    pub kernel: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub initial_belief: Belief,
}

impl Pomdp {
    /// Assembles a model from parts, enforcing structural invariants
    /// (nonempty distinct names, matching table shapes). Numeric invariants
    /// are checked separately by [`validate`].
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        signals: Vec<String>,
        kernel: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        initial_belief: Belief,
    ) -> Result<Self, ModelError> {
        for (kind, names) in [("state", &states), ("action", &actions), ("signal", &signals)] {
            if names.is_empty() {
                return Err(ModelError::Structure(format!("no {kind}s declared")));
            }
            let mut seen = HashMap::new();
            for name in names {
                if name.is_empty() {
                    return Err(ModelError::EmptyName { kind });
                }
                if seen.insert(name.clone(), ()).is_some() {
                    return Err(ModelError::DuplicateName {
                        kind,
                        name: name.clone(),
                    });
                }
            }
        }
        let rows = states.len() * actions.len();
        if kernel.len() != rows || rewards.len() != rows {
            return Err(ModelError::Structure(format!(
                "expected {rows} kernel rows and rewards, got {} and {}",
                kernel.len(),
                rewards.len()
            )));
        }
        let row_len = states.len() * signals.len();
        if let Some(row) = kernel.iter().find(|row| row.len() != row_len) {
            return Err(ModelError::Structure(format!(
                "kernel row of length {}, expected {row_len}",
                row.len()
            )));
        }
        if initial_belief.weights.len() != states.len() {
            return Err(ModelError::Structure(format!(
                "initial belief over {} states, model has {}",
                initial_belief.weights.len(),
                states.len()
            )));
        }
        Ok(Pomdp {
            states,
            actions,
            signals,
            kernel,
            rewards,
            initial_belief,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    /// Row index of the `(state, action)` pair.
    pub fn ka(&self, k: usize, a: usize) -> usize {
        k * self.actions.len() + a
    }

    /// Column index of the `(state, signal)` pair inside a kernel row.
    pub fn ks(&self, k: usize, s: usize) -> usize {
        k * self.signals.len() + s
    }

    /// Kernel row of `(k, a)` as a dense slice over `(k', s)` pairs.
    pub fn kernel_row(&self, k: usize, a: usize) -> &[f64] {
        &self.kernel[self.ka(k, a)]
    }

    pub fn transition_prob(&self, k: usize, a: usize, to: usize, s: usize) -> f64 {
        self.kernel[self.ka(k, a)][self.ks(to, s)]
    }

    pub fn reward(&self, k: usize, a: usize) -> f64 {
        self.rewards[self.ka(k, a)]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|s| s == name)
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == name)
    }
}

/// A model is blind when it has a single signal: observations carry no
/// information and strategies degenerate to action words.
pub fn is_blind(pomdp: &Pomdp) -> bool {
    pomdp.signals.len() == 1
}

/// One numeric defect found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowSum {
        state: String,
        action: String,
        defect: f64,
    },
    NegativeProbability {
        state: String,
        action: String,
        to: String,
        signal: String,
        value: f64,
    },
    RewardRange {
        state: String,
        action: String,
        value: f64,
    },
    BeliefMass {
        defect: f64,
    },
    BeliefNegative {
        state: String,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum {
                state,
                action,
                defect,
            } => write!(f, "kernel row ({state}, {action}) off by {defect:e}"),
            Violation::NegativeProbability {
                state,
                action,
                to,
                signal,
                value,
            } => write!(
                f,
                "negative probability {value:e} at ({state}, {action}) -> ({to}, {signal})"
            ),
            Violation::RewardRange {
                state,
                action,
                value,
            } => write!(f, "reward {value} at ({state}, {action}) outside [0, 1]"),
            Violation::BeliefMass { defect } => {
                write!(f, "initial belief mass off by {defect:e}")
            }
            Violation::BeliefNegative { state, value } => {
                write!(f, "initial belief weight {value:e} on {state} is negative")
            }
        }
    }
}

/// Outcome of checking a model's numeric invariants. Empty iff the model
/// is valid. Violations are data, not errors: reporting them is the point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks kernel row sums, probability signs, reward ranges and the
/// initial belief. Idempotent; never mutates or renormalizes.
pub fn validate(pomdp: &Pomdp) -> ValidationReport {
    let mut violations = Vec::new();
    for k in 0..pomdp.n_states() {
        for a in 0..pomdp.n_actions() {
            let row = pomdp.kernel_row(k, a);
            let sum: f64 = row.iter().sum();
            let defect = sum - 1.0;
            if defect.abs() > tolerances::VALIDATION {
                violations.push(Violation::RowSum {
                    state: pomdp.states[k].clone(),
                    action: pomdp.actions[a].clone(),
                    defect,
                });
            }
            for to in 0..pomdp.n_states() {
                for s in 0..pomdp.n_signals() {
                    let p = row[pomdp.ks(to, s)];
                    if p < -tolerances::VALIDATION {
                        violations.push(Violation::NegativeProbability {
                            state: pomdp.states[k].clone(),
                            action: pomdp.actions[a].clone(),
                            to: pomdp.states[to].clone(),
                            signal: pomdp.signals[s].clone(),
                            value: p,
                        });
                    }
                }
            }
            let g = pomdp.reward(k, a);
            if !(-tolerances::VALIDATION..=1.0 + tolerances::VALIDATION).contains(&g) {
                violations.push(Violation::RewardRange {
                    state: pomdp.states[k].clone(),
                    action: pomdp.actions[a].clone(),
                    value: g,
                });
            }
        }
    }
    let mass: f64 = pomdp.initial_belief.weights.iter().sum();
    if (mass - 1.0).abs() > tolerances::VALIDATION {
        violations.push(Violation::BeliefMass { defect: mass - 1.0 });
    }
    for (k, w) in pomdp.initial_belief.weights.iter().enumerate() {
        if *w < -tolerances::VALIDATION {
            violations.push(Violation::BeliefNegative {
                state: pomdp.states[k].clone(),
                value: *w,
            });
        }
    }
    ValidationReport { violations }
}

/// Errors from building or reading models.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("json syntax error: {0}")]
    Syntax(String),
    #[error("unknown {kind} name `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("empty {kind} name")]
    EmptyName { kind: &'static str },
    #[error("duplicate transition entry ({from}, {action}) -> ({to}, {signal})")]
    DuplicateTransition {
        from: String,
        action: String,
        to: String,
        signal: String,
    },
    #[error("duplicate reward entry ({state}, {action})")]
    DuplicateReward { state: String, action: String },
    #[error("duplicate belief entry for {state}")]
    DuplicateBeliefEntry { state: String },
    #[error("bad number `{text}`: {reason}")]
    BadNumber { text: String, reason: String },
    #[error("bad belief: {reason}")]
    BadBelief { reason: String },
    #[error("{0}")]
    Structure(String),
    #[error("model invalid:\n{0}")]
    Invalid(ValidationReport),
}

/// Decimal or `"p/q"` quantity as found in model files.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn value(&self) -> Result<f64, ModelError> {
        match self {
            Quantity::Number(x) => Ok(*x),
            Quantity::Text(t) => parse_quantity(t),
        }
    }
}

/// Parses `"0.25"` or `"1/4"`. Fractions are evaluated as a single double
/// division, so small ratios convert exactly.
pub fn parse_quantity(text: &str) -> Result<f64, ModelError> {
    let bad = |reason: &str| ModelError::BadNumber {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let trimmed = text.trim();
    if let Some((num, den)) = trimmed.split_once('/') {
        let p: f64 = num.trim().parse().map_err(|_| bad("bad numerator"))?;
        let q: f64 = den.trim().parse().map_err(|_| bad("bad denominator"))?;
        if q == 0.0 {
            return Err(bad("zero denominator"));
        }
        return Ok(p / q);
    }
    trimmed.parse().map_err(|_| bad("not a number"))
}

#[derive(Debug, Deserialize)]
struct RawTransition {
    from: String,
    action: String,
    to: String,
    signal: String,
    prob: Quantity,
}

#[derive(Debug, Deserialize)]
struct RawReward {
    state: String,
    action: String,
    value: Quantity,
}

#[derive(Debug, Deserialize)]
struct RawBeliefEntry {
    state: String,
    prob: Quantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPomdp {
    states: Vec<String>,
    actions: Vec<String>,
    signals: Vec<String>,
    #[serde(default)]
    transitions: Vec<RawTransition>,
    #[serde(default)]
    rewards: Vec<RawReward>,
    initial_belief: Vec<RawBeliefEntry>,
}

/// Parses and fully checks a model document. The result is valid: any
/// numeric violation is promoted to an error here.
pub fn parse_pomdp(text: &str) -> Result<Pomdp, ModelError> {
    let raw: RawPomdp =
        serde_json::from_str(text).map_err(|e| ModelError::Syntax(e.to_string()))?;

    let index_of = |kind: &'static str, names: &[String], name: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ModelError::UnknownName {
                kind,
                name: name.to_string(),
            })
    };

    let n_rows = raw.states.len() * raw.actions.len();
    let row_len = raw.states.len() * raw.signals.len();
    let mut kernel = vec![vec![0.0; row_len]; n_rows];
    let mut touched = vec![vec![false; row_len]; n_rows];
    for t in &raw.transitions {
        let k = index_of("state", &raw.states, &t.from)?;
        let a = index_of("action", &raw.actions, &t.action)?;
        let to = index_of("state", &raw.states, &t.to)?;
        let s = index_of("signal", &raw.signals, &t.signal)?;
        let row = k * raw.actions.len() + a;
        let col = to * raw.signals.len() + s;
        if touched[row][col] {
            return Err(ModelError::DuplicateTransition {
                from: t.from.clone(),
                action: t.action.clone(),
                to: t.to.clone(),
                signal: t.signal.clone(),
            });
        }
        touched[row][col] = true;
        kernel[row][col] = t.prob.value()?;
    }

    let mut rewards = vec![0.0; n_rows];
    let mut reward_touched = vec![false; n_rows];
    for r in &raw.rewards {
        let k = index_of("state", &raw.states, &r.state)?;
        let a = index_of("action", &raw.actions, &r.action)?;
        let row = k * raw.actions.len() + a;
        if reward_touched[row] {
            return Err(ModelError::DuplicateReward {
                state: r.state.clone(),
                action: r.action.clone(),
            });
        }
        reward_touched[row] = true;
        rewards[row] = r.value.value()?;
    }

    let mut weights = vec![0.0; raw.states.len()];
    let mut belief_touched = vec![false; raw.states.len()];
    for e in &raw.initial_belief {
        let k = index_of("state", &raw.states, &e.state)?;
        if belief_touched[k] {
            return Err(ModelError::DuplicateBeliefEntry {
                state: e.state.clone(),
            });
        }
        belief_touched[k] = true;
        weights[k] = e.prob.value()?;
    }

    let pomdp = Pomdp::new(
        raw.states,
        raw.actions,
        raw.signals,
        kernel,
        rewards,
        Belief { weights },
    )?;
    let report = validate(&pomdp);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report));
    }
    Ok(pomdp)
}

/// Canonical rendering: nonzero entries only, sorted by declaration
/// indices, probabilities as plain JSON numbers. `parse_pomdp` of the
/// output reproduces the input model exactly.
pub fn render_pomdp(pomdp: &Pomdp) -> String {
    let mut transitions = Vec::new();
    for k in 0..pomdp.n_states() {
        for a in 0..pomdp.n_actions() {
            for to in 0..pomdp.n_states() {
                for s in 0..pomdp.n_signals() {
                    let p = pomdp.transition_prob(k, a, to, s);
                    if p != 0.0 {
                        transitions.push(serde_json::json!({
                            "from": pomdp.states[k],
                            "action": pomdp.actions[a],
                            "to": pomdp.states[to],
                            "signal": pomdp.signals[s],
                            "prob": p,
                        }));
                    }
                }
            }
        }
    }
    let mut rewards = Vec::new();
    for k in 0..pomdp.n_states() {
        for a in 0..pomdp.n_actions() {
            let g = pomdp.reward(k, a);
            if g != 0.0 {
                rewards.push(serde_json::json!({
                    "state": pomdp.states[k],
                    "action": pomdp.actions[a],
                    "value": g,
                }));
            }
        }
    }
    let belief: Vec<_> = pomdp
        .initial_belief
        .weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, w)| serde_json::json!({"state": pomdp.states[k], "prob": w}))
        .collect();
    let doc = serde_json::json!({
        "states": pomdp.states,
        "actions": pomdp.actions,
        "signals": pomdp.signals,
        "transitions": transitions,
        "rewards": rewards,
        "initial_belief": belief,
    });
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

/// Parses the command-line belief syntax `k1:1/4,k2:3/4`. States not
/// listed get weight zero.
pub fn parse_belief_spec(spec: &str, pomdp: &Pomdp) -> Result<Belief, ModelError> {
    let mut weights = vec![0.0; pomdp.n_states()];
    let mut seen = vec![false; pomdp.n_states()];
    for part in spec.split(',') {
        let (name, value) = part.split_once(':').ok_or_else(|| ModelError::BadBelief {
            reason: format!("entry `{part}` is not of the form state:prob"),
        })?;
        let k = pomdp
            .state_index(name.trim())
            .ok_or_else(|| ModelError::UnknownName {
                kind: "state",
                name: name.trim().to_string(),
            })?;
        if seen[k] {
            return Err(ModelError::DuplicateBeliefEntry {
                state: name.trim().to_string(),
            });
        }
        seen[k] = true;
        weights[k] = parse_quantity(value)?;
    }
    Belief::new(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn quantities_parse_exactly() {
        assert_eq!(parse_quantity("1/2").unwrap(), 0.5);
        assert_eq!(parse_quantity("1/4").unwrap(), 0.25);
        assert_eq!(parse_quantity("0.25").unwrap(), 0.25);
        assert_eq!(parse_quantity(" 3/4 ").unwrap(), 0.75);
        assert_eq!(parse_quantity("1").unwrap(), 1.0);
        assert!(parse_quantity("1/0").is_err());
        assert!(parse_quantity("x/y").is_err());
        assert!(parse_quantity("").is_err());
    }

    #[test]
    fn corpus_models_are_valid() {
        for pomdp in [corpus::ex1(), corpus::ex2(), corpus::triv1()] {
            assert!(validate(&pomdp).is_valid(), "{}", validate(&pomdp));
        }
    }

    #[test]
    fn blindness_is_signal_count() {
        assert!(is_blind(&corpus::ex1()));
        assert!(!is_blind(&corpus::ex2()));
        assert!(is_blind(&corpus::triv1()));
    }

    #[test]
    fn render_round_trips() {
        for pomdp in [corpus::ex1(), corpus::ex2(), corpus::triv1()] {
            let rendered = render_pomdp(&pomdp);
            let back = parse_pomdp(&rendered).unwrap();
            assert_eq!(back, pomdp);
        }
    }

    #[test]
    fn perturbed_row_reports_its_defect() {
        let mut pomdp = corpus::ex1();
        let col = pomdp.ks(1, 0);
        let row = pomdp.ka(0, 0);
        pomdp.kernel[row][col] += 1e-3;
        let report = validate(&pomdp);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::RowSum {
                state,
                action,
                defect,
            } => {
                assert_eq!(state, "k1");
                assert_eq!(action, "a");
                assert!((defect - 1e-3).abs() < 1e-12);
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_rows() {
        let text = r#"{
            "states": ["x"],
            "actions": ["a"],
            "signals": ["s"],
            "transitions": [
                {"from": "x", "action": "a", "to": "x", "signal": "s", "prob": "0.9"}
            ],
            "rewards": [],
            "initial_belief": [{"state": "x", "prob": "1"}]
        }"#;
        match parse_pomdp(text) {
            Err(ModelError::Invalid(report)) => assert_eq!(report.violations.len(), 1),
            other => panic!("expected invalid-model error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_unknown_and_duplicate_names() {
        let unknown = r#"{
            "states": ["x"], "actions": ["a"], "signals": ["s"],
            "transitions": [
                {"from": "y", "action": "a", "to": "x", "signal": "s", "prob": "1"}
            ],
            "rewards": [], "initial_belief": [{"state": "x", "prob": "1"}]
        }"#;
        assert!(matches!(
            parse_pomdp(unknown),
            Err(ModelError::UnknownName { kind: "state", .. })
        ));

        let duplicate = r#"{
            "states": ["x", "x"], "actions": ["a"], "signals": ["s"],
            "transitions": [
                {"from": "x", "action": "a", "to": "x", "signal": "s", "prob": "1"}
            ],
            "rewards": [], "initial_belief": [{"state": "x", "prob": "1"}]
        }"#;
        assert!(matches!(
            parse_pomdp(duplicate),
            Err(ModelError::DuplicateName { kind: "state", .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_pomdp("{ nope").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line"), "{message}");
    }

    #[test]
    fn belief_spec_parses() {
        let pomdp = corpus::ex1();
        let belief = parse_belief_spec("k1:1/4,k2:3/4", &pomdp).unwrap();
        assert_eq!(belief.weights, vec![0.25, 0.75]);
        assert!(parse_belief_spec("k1:1/2", &pomdp).is_err());
        assert!(parse_belief_spec("k9:1", &pomdp).is_err());
    }

    #[test]
    fn belief_support_uses_structural_cutoff() {
        let belief = Belief::new(vec![1.0 - 1e-13, 1e-13]).unwrap();
        assert_eq!(belief.support(), vec![0]);
    }
}
