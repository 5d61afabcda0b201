//! JSON documents written by `solve` and `verify`.

use ait_core::theory::{TheoryBounds, VerificationVerdict};
use ait_core::{HaltReason, InstanceSpec, SolverConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub bundle: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k_star: Option<usize>,
    pub dr: Option<f64>,
    pub mu: f64,
    pub welch_lower_bound: f64,
    pub meta: Option<InstanceSpec>,
}

/// [`TheoryBounds`] plus the rounded identification bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    #[serde(flatten)]
    pub bounds: TheoryBounds,
    pub t_bound_floor: Option<i64>,
    pub t_bound_ceil: Option<i64>,
}

impl From<TheoryBounds> for TheoryReport {
    fn from(bounds: TheoryBounds) -> Self {
        TheoryReport {
            t_bound_floor: bounds.t_bound_floor(),
            t_bound_ceil: bounds.t_bound_ceil(),
            bounds,
        }
    }
}

/// Final error to `xstar.csv`, in the bundle's original coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalErrors {
    pub linf: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub schema: u32,
    pub instance: InstanceInfo,
    pub config: SolverConfig,
    pub halt_reason: HaltReason,
    pub diverged: bool,
    pub iterations_run: usize,
    pub final_support: Vec<usize>,
    pub support_identified_at: Option<usize>,
    pub theory: Option<TheoryReport>,
    pub verdict: Option<VerificationVerdict>,
    pub errors: Option<FinalErrors>,
    /// Wall-clock data; the only nondeterministic part of the report.
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub rule: String,
    pub k: usize,
    pub theory: TheoryReport,
    pub verdict: VerificationVerdict,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}
