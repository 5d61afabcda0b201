//! Sparse solutions of underdetermined linear systems `y = A x` by
//! adaptively iterative thresholding, plus the coherence-based convergence
//! bounds that govern it and a checker that holds solver traces to them.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod engine;
pub mod error;
pub mod io;
pub mod oracle;
pub mod problem;
pub mod theory;
pub mod threshold;

pub use engine::{
    landweber_step, select_threshold, solve, HaltReason, IterateState, IterationRecord,
    RecoveryResult, SolverConfig,
};
pub use error::{Error, Result};
pub use problem::{
    coherence, dynamic_range_of, generate_instance, normalize_columns, welch_bound,
    CoherenceReport, GroundTruth, InstanceSpec, MatrixEnsemble, ProblemInstance, SensingMatrix,
    SignRule,
};
pub use threshold::{apply_scalar, apply_vector, boundedness_constant, RuleKind, ThresholdRule};
