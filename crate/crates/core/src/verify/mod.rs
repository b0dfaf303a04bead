//! Independent oracles and randomized verification suites.

pub mod generate;
pub mod norm;
pub mod replay;
pub mod suite;
pub mod sums;
pub mod tracked;

pub use norm::{duality_gap, norm_lower_bound, Method, NormEstimate, NormOptions, NormProblem, Operator};
pub use replay::{replay, FailurePayload, ReplayReport, Verdict};
pub use suite::{evaluate, generate_instance, run_suite, Check, CheckKind, Exponents, Extreme, Instance, SuiteName, SuiteParams, SuiteResult};
pub use sums::{power_sum_inequality, tail_integrals, Sides, TailIntegrals};

/// Relative tolerance for exact identities.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Multiplicative slack on the right-hand side of asserted inequalities.
pub const SLACK: f64 = 1.0 + 1e-9;
