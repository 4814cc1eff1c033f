//! Finite partially observable MDPs with long-run average payoffs.
//!
//! The decision-maker acts on a finite state space through a kernel that
//! emits a successor state and a signal; only the signal is observed. The
//! payoff of a play is the expected lim inf of the running average reward.
//! Everything here is built around one reduction: a finite-memory strategy
//! composed with the model yields a finite Markov chain on state x memory
//! pairs, where the running average converges almost surely and the payoff
//! becomes linear algebra (recurrent classes, stationary distributions,
//! absorption probabilities).
//!
//! Main entry points:
//! - [`model::parse_pomdp`] / [`model::Pomdp`]: the model and its file format.
//! - [`chain::evaluate`]: exact gain of a finite-memory strategy.
//! - [`strategy`]: transducers, shifts, recall/periodic conversions, and the
//!   block construction that replays a base strategy from representative
//!   histories.
//! - [`blind`]: support automata and exhaustive search over eventually
//!   periodic action words for single-signal models.
//! - [`approx`]: anytime lower/upper bounds on the best achievable gain and
//!   promise decisions.
//!
//! ```
//! use pomdp_lra_core::corpus;
//! use pomdp_lra_core::chain::evaluate;
//!
//! let pomdp = corpus::ex2();
//! let sigma = corpus::ex2_optimal();
//! let result = evaluate(&pomdp, &pomdp.initial_belief, &sigma).unwrap();
//! assert!((result.overall_gain - 5.0 / 6.0).abs() < 1e-9);
//! ```

#![deny(unsafe_code)]
#![warn(missing_debug_implementations)]

pub mod approx;
pub mod belief;
pub mod blind;
pub mod chain;
pub mod corpus;
pub mod linalg;
pub mod model;
pub mod strategy;
pub mod tolerances;

pub use belief::{GainPartition, History, SuperSupport};
pub use chain::{ChainAnalysis, EvaluationResult, ProductChain};
pub use model::{Belief, Pomdp, ValidationReport};
pub use strategy::{EventuallyPeriodicStrategy, FiniteMemoryStrategy, FiniteRecallStrategy};
