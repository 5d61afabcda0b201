//! Independent reference solvers for small problems: exhaustive search for
//! the sparsest exact solution, and orthogonal matching pursuit.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::SensingMatrix;

/// Upper limit on `C(N, k_max)` for [`brute_force_sparsest`].
pub const ENUMERATION_GUARD: u128 = 1_000_000;
/// A support reproduces `y` when its least-squares residual is below this
/// fraction of `||y||_2`.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x: DVector<f64>,
    /// Sorted ascending.
    pub support: Vec<usize>,
    pub residual_norm: f64,
    /// Supports tried (brute force) or greedy rounds run (OMP).
    pub enumerated_supports: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Least-squares fit of `y` on the columns in `support` through the
/// Cholesky factor of the restricted Gram matrix.
fn restricted_fit(a: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Option<DVector<f64>> {
    let sub = a.select_columns(support);
    let gram = sub.tr_mul(&sub);
    let rhs = sub.tr_mul(y);
    gram.cholesky().map(|ch| ch.solve(&rhs))
}

fn embed(n: usize, support: &[usize], coeffs: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (&i, &v) in support.iter().zip(coeffs.iter()) {
        x[i] = v;
    }
    x
}

fn check_rhs(a: &SensingMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Smallest support (then lexicographically first) whose least-squares
/// fit reproduces `y`, searching sizes `1..=k_max`.
pub fn brute_force_sparsest(
    a: &SensingMatrix,
    y: &DVector<f64>,
    k_max: usize,
) -> Result<OracleResult> {
    check_rhs(a, y)?;
    let n = a.cols();
    let k_max = k_max.min(n);
    let count = binomial(n, k_max);
    if count > ENUMERATION_GUARD {
        return Err(Error::TooLarge(count));
    }
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(OracleResult {
            x: DVector::zeros(n),
            support: Vec::new(),
            residual_norm: 0.0,
            enumerated_supports: 0,
        });
    }
    let tol = RESIDUAL_TOL * y_norm;
    let mut enumerated = 0;
    for size in 1..=k_max {
        for support in (0..n).combinations(size) {
            enumerated += 1;
            let Some(coeffs) = restricted_fit(a.entries(), y, &support) else {
                continue;
            };
            let x = embed(n, &support, &coeffs);
            let residual_norm = (a.apply(&x) - y).norm();
            if residual_norm <= tol {
                return Ok(OracleResult {
                    x,
                    support,
                    residual_norm,
                    enumerated_supports: enumerated,
                });
            }
        }
    }
    Err(Error::NoSolution(k_max))
}

/// Orthogonal matching pursuit for `k_star` rounds, stopping early once the
/// residual falls below [`RESIDUAL_TOL`]` * ||y||`. Correlation ties go to
/// the lowest index.
pub fn omp_baseline(a: &SensingMatrix, y: &DVector<f64>, k_star: usize) -> Result<OracleResult> {
    check_rhs(a, y)?;
    if k_star >= a.rows() {
        return Err(Error::InvalidShape(format!(
            "OMP needs k* < M, got k* = {k_star}, M = {}",
            a.rows()
        )));
    }
    let n = a.cols();
    let tol = RESIDUAL_TOL * y.norm();
    let mut selected: Vec<usize> = Vec::new();
    let mut x = DVector::zeros(n);
    let mut residual = y.clone();
    let mut rounds = 0;
    while selected.len() < k_star && residual.norm() > tol {
        rounds += 1;
        let corr = a.entries().tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in corr.iter().enumerate() {
            if selected.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| v.abs() > b) {
                best = Some((j, v.abs()));
            }
        }
        let (j, _) = best.expect("k* < M < N leaves unselected columns");
        selected.push(j);
        selected.sort_unstable();
        let coeffs = restricted_fit(a.entries(), y, &selected)
            .ok_or_else(|| Error::SingularRefit(selected.clone()))?;
        x = embed(n, &selected, &coeffs);
        residual = y - a.apply(&x);
    }
    let support = (0..n).filter(|&i| x[i] != 0.0).collect();
    Ok(OracleResult {
        residual_norm: residual.norm(),
        x,
        support,
        enumerated_supports: rounds,
    })
}
