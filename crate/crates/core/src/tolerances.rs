//! Numeric tolerances shared across the crate.
//!
//! Three regimes, deliberately far apart so they never shadow each other:
//! validation of user input (1e-9), structural decisions on computed
//! quantities (1e-12), and detection of genuinely impossible events (1e-15).

/// Row sums, belief sums, reward ranges and gain comparisons on user input.
/// Inputs are honest decimals or small fractions; anything off by more than
/// this is a modelling error, not rounding.
pub const VALIDATION: f64 = 1e-9;

/// Threshold below which a probability entry is treated as structurally
/// zero: support membership, product-chain edges, linear-solver pivots.
pub const STRUCTURAL: f64 = 1e-12;

/// A signal whose total probability under the current belief falls below
/// this is impossible, not merely unlikely. Conditioning on it is refused.
pub const IMPOSSIBLE_EVENT: f64 = 1e-15;

/// Gains are grouped into classes when they agree within [`VALIDATION`];
/// alias kept separate because the two uses could drift apart.
pub const GAIN_GROUPING: f64 = VALIDATION;
