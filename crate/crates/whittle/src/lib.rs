//! Whittle (marginal-productivity) indices for finite-state restless
//! bandits, under the discounted and long-run average criteria.
//!
//! The crate provides:
//!
//! * [`model`] — instance data, validation, active-set families, and the
//!   JSON instance format ([`io`]);
//! * [`linalg`] — dense LU with partial pivoting and the flop counter;
//! * [`index`] — initial-tableau construction and the CP / RP / FP
//!   adaptive-greedy pivoting engines with PCL-indexability diagnostics;
//! * [`oracle`] — an independent dynamic-programming ground truth (policy
//!   evaluation, occupation measures, λ-price value iteration, per-state
//!   index bisection, decomposition-identity checks);
//! * [`gen`] — portable random instance generation and a benchmark harness.
//!
//! Everything numerical is generic over [`scalar::Scalar`] (`f32`/`f64`);
//! the aliases below fix `f64`, the precision the shipped tolerances are
//! calibrated for.

// State-indexed loops over parallel arrays read better with explicit ids.
#![allow(clippy::needless_range_loop)]
// Checks written as `!(x > floor)` must treat non-finite values as failures.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod gen;
pub mod index;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scalar;
#[cfg(test)]
pub(crate) mod testutil;

pub use index::{
    cp_index, fp_index, initial_tableau, pcl_diagnose, rp_index, run_index, run_loop, Base,
    DiagnosisReport, Direction, EngineError, EngineKind, EngineOptions, EngineRun, IndexResult,
    IndexViolation, StepRecord, Tableau, Verdict, ViolationKind,
};
pub use linalg::{
    lu_factor, lu_solve, residual_inf_norm, scaled_residual, DenseMatrix, FlopCounter, LinalgError,
    LuFactors,
};
pub use model::{
    ActiveSet, ActiveSetFamily, BanditInstance, Criterion, Discount, ModelError, ValidationReport,
};
pub use oracle::{
    bisect_index, check_identities, marginal_metrics, occupation_measures, oracle_metrics,
    policy_metrics, solve_price, verify_indexability, IdentityReport, IndexabilityReport,
    OracleError, OracleMetrics, PriceSolution,
};
pub use scalar::Scalar;

/// Instance with the default `f64` scalar.
pub type Instance = BanditInstance<f64>;
/// Dense `f64` matrix.
pub type Mat = DenseMatrix<f64>;
/// Engine result with the default `f64` scalar.
pub type IndexResultF64 = IndexResult<f64>;
