//! The adaptively iterative thresholding loop:
//!
//! ```text
//! x(0) = 0
//! z(t+1) = x(t) + A^T (y - A x(t))
//! tau(t+1) = |z(t+1)|_[k+1]
//! x(t+1) = H_tau(t+1)(z(t+1))
//! ```
//!
//! Iterates live in the coordinates of the normalized matrix; only the final
//! solution is mapped back through the column scales.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ProblemInstance, SensingMatrix};
use crate::threshold::{threshold_operator, ThresholdRule};

pub const DEFAULT_STABLE_SUPPORT_WINDOW: usize = 5;
pub const DEFAULT_STALL_TOLERANCE: f64 = 1e-10;
/// Iterates whose sup-norm exceeds this multiple of `||A^T y||_inf` are
/// treated as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e12;
/// Above this many stored vector entries (`N * max_iterations`) the trace
/// keeps only `t`, `tau`, the support and the error to the truth.
pub const FULL_TRACE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rule: ThresholdRule,
    pub specified_sparsity: usize,
    pub max_iterations: usize,
    pub stall_tolerance: f64,
    pub stable_support_window: usize,
}

impl SolverConfig {
    /// Defaults: `max_iterations = 50 k + 100`, window 5, tolerance 1e-10.
    pub fn new(rule: ThresholdRule, k: usize) -> Self {
        SolverConfig {
            rule,
            specified_sparsity: k,
            max_iterations: 50 * k + 100,
            stall_tolerance: DEFAULT_STALL_TOLERANCE,
            stable_support_window: DEFAULT_STABLE_SUPPORT_WINDOW,
        }
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_stall_tolerance(mut self, tol: f64) -> Self {
        self.stall_tolerance = tol;
        self
    }

    pub fn with_stable_support_window(mut self, w: usize) -> Self {
        self.stable_support_window = w;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let k = self.specified_sparsity;
        if k == 0 || k + 1 > n {
            return Err(Error::InvalidK {
                k,
                max: n.saturating_sub(1),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        if self.stable_support_window == 0 {
            return Err(Error::InvalidConfig(
                "stable_support_window must be positive".into(),
            ));
        }
        if !(self.stall_tolerance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stall_tolerance must be >= 0, got {}",
                self.stall_tolerance
            )));
        }
        Ok(())
    }
}

/// Full iterate vectors of one step, kept unless the trace is thinned.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
}

/// One iteration: `x(t)`, `z(t)`, `tau(t)` and the support `I(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub tau: f64,
    pub pivot_index: usize,
    /// Sorted ascending.
    pub support: Vec<usize>,
    /// `||x(t) - x*||_inf` in normalized coordinates, when the truth is known.
    pub linf_err: Option<f64>,
    pub state: Option<IterateState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    MaxIterations,
    /// `x(t)` reproduced `x(t-1)` exactly.
    Stalled,
    SupportStableAndStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Solution in the caller's original column scaling.
    pub final_x: DVector<f64>,
    pub final_support: Vec<usize>,
    pub iterations_run: usize,
    pub halt_reason: HaltReason,
    pub diverged: bool,
    pub trace: Vec<IterationRecord>,
    pub trace_thinned: bool,
}

/// `x + A^T (y - A x)` through one residual vector.
pub fn landweber_step(
    a: &SensingMatrix,
    y: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
        });
    }
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: x.len(),
        });
    }
    let mut residual = y.clone();
    residual.gemv(-1.0, a.entries(), x, 1.0);
    let mut z = x.clone();
    z.gemv_tr(1.0, a.entries(), &residual, 1.0);
    Ok(z)
}

/// The `(k+1)`-th largest magnitude of `z` and the smallest index attaining it.
pub fn select_threshold(z: &[f64], k: usize) -> Result<(f64, usize)> {
    if k == 0 || k + 1 > z.len() {
        return Err(Error::InvalidK {
            k,
            max: z.len().saturating_sub(1),
        });
    }
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let (_, &mut tau, _) = mags.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let pivot = z
        .iter()
        .position(|v| v.abs() == tau)
        .expect("order statistic is attained");
    Ok((tau, pivot))
}

fn support_of(x: &DVector<f64>) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Runs the iteration from `x(0) = 0` until the stop rule fires.
///
/// Halts at the first of: an exact fixed point; the support unchanged for
/// `stable_support_window` consecutive iterations with relative sup-norm
/// change below `stall_tolerance`; `max_iterations`; divergence (reported
/// as `MaxIterations` with `diverged` set).
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<RecoveryResult> {
    let a = &instance.matrix;
    let y = &instance.observation;
    let n = a.cols();
    config.validate(n)?;
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
        });
    }
    let truth = instance.truth.as_ref().map(|t| &t.signal);
    let keep_full = n.saturating_mul(config.max_iterations) <= FULL_TRACE_LIMIT;
    let divergence_limit = DIVERGENCE_FACTOR * a.entries().tr_mul(y).amax();

    let mut x = DVector::zeros(n);
    let mut support: Vec<usize> = Vec::new();
    let mut stable_run = 0usize;
    let mut trace = Vec::new();
    let mut halt_reason = HaltReason::MaxIterations;
    let mut diverged = false;
    let mut t = 0;

    while t < config.max_iterations {
        t += 1;
        let z = landweber_step(a, y, &x)?;
        let (tau, pivot_index) = select_threshold(z.as_slice(), config.specified_sparsity)?;
        let next = threshold_operator(config.rule, &z, tau)?;
        let next_support = support_of(&next);

        if next_support == support {
            stable_run += 1;
        } else {
            stable_run = 0;
        }
        let change = (&next - &x).amax();
        let scale = next.amax();
        let exact_fixed_point = next == x;
        let relative_change = if change == 0.0 { 0.0 } else { change / scale };

        trace.push(IterationRecord {
            t,
            tau,
            pivot_index,
            support: next_support.clone(),
            linf_err: truth.map(|xs| (&next - xs).amax()),
            state: keep_full.then(|| IterateState { x: next.clone(), z }),
        });

        x = next;
        support = next_support;

        if !(scale <= divergence_limit) && scale > 0.0 {
            diverged = true;
            halt_reason = HaltReason::MaxIterations;
            break;
        }
        if exact_fixed_point {
            halt_reason = HaltReason::Stalled;
            break;
        }
        if stable_run >= config.stable_support_window && relative_change < config.stall_tolerance {
            halt_reason = HaltReason::SupportStableAndStalled;
            break;
        }
    }

    Ok(RecoveryResult {
        final_x: a.to_original(&x),
        final_support: support,
        iterations_run: t,
        halt_reason,
        diverged,
        trace,
        trace_thinned: !keep_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_instance, normalize_columns, GroundTruth, InstanceSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn small_matrix() -> SensingMatrix {
        normalize_columns(&DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.0, 0.6, 0.0, 1.0, 0.8],
        ))
        .unwrap()
    }

    // Independent matrix-vector oracle: explicit index loops.
    fn landweber_oracle(a: &DMatrix<f64>, y: &[f64], x: &[f64]) -> Vec<f64> {
        let (m, n) = a.shape();
        let mut r = vec![0.0; m];
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..n {
                s += a[(i, j)] * x[j];
            }
            r[i] = y[i] - s;
        }
        (0..n)
            .map(|j| x[j] + (0..m).map(|i| a[(i, j)] * r[i]).sum::<f64>())
            .collect()
    }

    #[test]
    fn landweber_hand_example() {
        let a = small_matrix();
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let z = landweber_step(&a, &y, &x).unwrap();
        let oracle = landweber_oracle(a.entries(), y.as_slice(), x.as_slice());
        assert_abs_diff_eq!(z.as_slice(), &[1.0, 2.0, 1.6][..], epsilon = 1e-14);
        assert_abs_diff_eq!(z.as_slice(), &oracle[..], epsilon = 1e-14);
    }

    #[test]
    fn landweber_zero_iterate_and_fixed_point() {
        let inst = generate_instance(&InstanceSpec::new(16, 32, 3, 4.0, 11)).unwrap();
        let a = &inst.matrix;
        let y = &inst.observation;
        let z0 = landweber_step(a, y, &DVector::zeros(32)).unwrap();
        assert_abs_diff_eq!(z0, a.entries().tr_mul(y), epsilon = 1e-14);
        let xs = &inst.truth.as_ref().unwrap().signal;
        let z = landweber_step(a, y, xs).unwrap();
        assert_abs_diff_eq!(z, xs.clone(), epsilon = 1e-13);
    }

    #[test]
    fn landweber_dimension_mismatch() {
        let a = small_matrix();
        let err = landweber_step(&a, &DVector::zeros(3), &DVector::zeros(3));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn threshold_selection_examples() {
        assert_eq!(
            select_threshold(&[3.0, 1.0, 2.0, 0.5], 2).unwrap(),
            (1.0, 1)
        );
        assert_eq!(select_threshold(&[2.0, 2.0, 2.0], 1).unwrap(), (2.0, 0));
        assert_eq!(select_threshold(&[-4.0, 1.0, -3.0], 1).unwrap(), (3.0, 2));
        assert!(matches!(
            select_threshold(&[1.0, 2.0], 2),
            Err(Error::InvalidK { .. })
        ));
        assert!(matches!(
            select_threshold(&[1.0, 2.0], 0),
            Err(Error::InvalidK { .. })
        ));
        // strict gate zeroes every tied component
        let z = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let x = threshold_operator(ThresholdRule::hard(), &z, 2.0).unwrap();
        assert_eq!(x, DVector::zeros(3));
    }

    #[test]
    fn zero_data_halts_after_one_iteration() {
        let inst = generate_instance(&InstanceSpec::new(8, 16, 0, 1.0, 1)).unwrap();
        let res = solve(&inst, &SolverConfig::new(ThresholdRule::soft(), 2)).unwrap();
        assert_eq!(res.iterations_run, 1);
        assert_eq!(res.halt_reason, HaltReason::Stalled);
        assert_eq!(res.final_x, DVector::zeros(16));
        assert!(res.final_support.is_empty());
    }

    #[test]
    fn solve_is_deterministic_and_sparse() {
        let inst = generate_instance(&InstanceSpec::new(32, 64, 3, 2.0, 4)).unwrap();
        let cfg = SolverConfig::new(ThresholdRule::half(), 5);
        let a = solve(&inst, &cfg).unwrap();
        let b = solve(&inst, &cfg).unwrap();
        assert_eq!(a, b);
        for rec in &a.trace {
            assert!(rec.support.len() <= 5);
            let state = rec.state.as_ref().unwrap();
            for i in 0..64 {
                let inside = rec.support.binary_search(&i).is_ok();
                assert_eq!(inside, state.z[i].abs() > rec.tau);
                assert_eq!(inside, state.x[i] != 0.0);
            }
        }
    }

    #[test]
    fn hard_rule_fixed_point_at_truth() {
        // One-sparse truth: z(1) = A^T y has |z_j| = |x_j| on the support and
        // mu |x_j| elsewhere, so hard thresholding lands on x* immediately.
        let spec = InstanceSpec::new(16, 32, 1, 1.0, 9);
        let inst = generate_instance(&spec).unwrap();
        let res = solve(&inst, &SolverConfig::new(ThresholdRule::hard(), 1)).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        assert_eq!(res.final_support, truth.support);
        assert_abs_diff_eq!(res.final_x, truth.signal.clone(), epsilon = 1e-12);
    }

    #[test]
    fn final_solution_uses_original_scaling() {
        let raw = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 4.0, 1.0]);
        let a = normalize_columns(&raw).unwrap();
        let x_norm = DVector::from_vec(vec![3.0, 0.0, 0.0]);
        let y = a.apply(&x_norm);
        let truth = GroundTruth::from_signal(x_norm);
        let inst = ProblemInstance::new(a, y, Some(truth), 0).unwrap();
        let res = solve(&inst, &SolverConfig::new(ThresholdRule::hard(), 1)).unwrap();
        assert_abs_diff_eq!(res.final_x[0], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            &raw * &res.final_x,
            inst.observation.clone(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn invalid_config_rejected() {
        let inst = generate_instance(&InstanceSpec::new(8, 16, 2, 1.0, 1)).unwrap();
        let bad_k = SolverConfig::new(ThresholdRule::hard(), 16);
        assert!(matches!(solve(&inst, &bad_k), Err(Error::InvalidK { .. })));
        let bad_iter = SolverConfig::new(ThresholdRule::hard(), 2).with_max_iterations(0);
        assert!(solve(&inst, &bad_iter).is_err());
    }

    #[test]
    fn max_iterations_cap() {
        let inst = generate_instance(&InstanceSpec::new(8, 16, 3, 10.0, 2)).unwrap();
        let cfg = SolverConfig::new(ThresholdRule::soft(), 3).with_max_iterations(3);
        let res = solve(&inst, &cfg).unwrap();
        assert!(res.iterations_run <= 3);
        assert_eq!(res.trace.len(), res.iterations_run);
    }
}
