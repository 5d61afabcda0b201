//! Linear-system data model: column-normalized sensing matrices, sparse
//! ground truth, coherence, and seeded random instances.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns with l2 norm below this are rejected by [`normalize_columns`].
pub const ZERO_COLUMN_TOL: f64 = 1e-14;

/// Maximum allowed `||A x* - y||_inf` for a consistent instance, relative to
/// `max(1, ||y||_inf)`.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// A dense `M x N` matrix with unit-norm columns, together with the l2 norms
/// its columns had before normalization.
///
/// Solutions computed against the normalized matrix map back to the
/// original coordinates as `x_original[j] = x_normalized[j] / scale[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    column_scales: Vec<f64>,
}

impl SensingMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column_scales(&self) -> &[f64] {
        &self.column_scales
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Maps a coefficient vector expressed against the normalized columns
    /// back to the caller's original column scaling.
    pub fn to_original(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter().zip(&self.column_scales).map(|(v, s)| v / s),
        )
    }

    /// Inverse of [`SensingMatrix::to_original`].
    pub fn to_normalized(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter().zip(&self.column_scales).map(|(v, s)| v * s),
        )
    }

    /// `A x` with the normalized entries.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }
}

/// Scales every column of `raw` to unit l2 norm, recording the original norms.
pub fn normalize_columns(raw: &DMatrix<f64>) -> Result<SensingMatrix> {
    let (rows, cols) = raw.shape();
    if rows >= cols {
        return Err(Error::NotUnderdetermined { rows, cols });
    }
    let mut entries = raw.clone();
    let mut column_scales = Vec::with_capacity(cols);
    for (j, mut col) in entries.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm >= ZERO_COLUMN_TOL) {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
        column_scales.push(norm);
    }
    Ok(SensingMatrix {
        entries,
        column_scales,
    })
}

/// Result of [`coherence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu: f64,
    pub welch_lower_bound: f64,
    pub argmax_pair: (usize, usize),
}

/// Mutual coherence `max_{i != j} |<A_i, A_j>|` of a normalized matrix.
///
/// Ties resolve to the lexicographically smallest pair `(i, j)`, `i < j`.
pub fn coherence(a: &SensingMatrix) -> CoherenceReport {
    let n = a.cols();
    let gram = a.entries.tr_mul(&a.entries);
    let mut mu = 0.0;
    let mut argmax_pair = (0, 1.min(n.saturating_sub(1)));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = gram[(i, j)].abs();
            if v > mu {
                mu = v;
                argmax_pair = (i, j);
            }
        }
    }
    CoherenceReport {
        mu,
        welch_lower_bound: welch_bound(a.rows(), n).unwrap_or(0.0),
        argmax_pair,
    }
}

/// Welch lower bound `sqrt((N - M) / (M (N - 1)))` on the coherence of any
/// `M x N` matrix with unit-norm columns.
pub fn welch_bound(m: usize, n: usize) -> Result<f64> {
    if m == 0 || n <= m {
        return Err(Error::InvalidShape(format!(
            "Welch bound needs N > M >= 1, got M = {m}, N = {n}"
        )));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(((n - m) / (m * (n - 1.0))).sqrt())
}

/// `max |x_i| / min |x_i|` over `support`.
pub fn dynamic_range_of(x: &[f64], support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &i in support {
        let v = x
            .get(i)
            .ok_or(Error::DimensionMismatch {
                expected: i + 1,
                actual: x.len(),
            })?
            .abs();
        if v == 0.0 {
            return Err(Error::ZeroOnSupport(i));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi / lo)
}

/// The sparse solution `x*` of a consistent system.
///
/// `support` is ordered by descending magnitude (ties by ascending index),
/// so `support[0]` is the largest component.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub signal: DVector<f64>,
    pub support: Vec<usize>,
    pub sparsity: usize,
    pub dynamic_range: f64,
}

impl GroundTruth {
    pub fn from_signal(signal: DVector<f64>) -> Self {
        let mut support: Vec<usize> = (0..signal.len()).filter(|&i| signal[i] != 0.0).collect();
        support.sort_by(|&a, &b| signal[b].abs().total_cmp(&signal[a].abs()).then(a.cmp(&b)));
        let dynamic_range = if support.is_empty() {
            1.0
        } else {
            dynamic_range_of(signal.as_slice(), &support)
                .expect("support is nonzero by construction")
        };
        GroundTruth {
            sparsity: support.len(),
            support,
            signal,
            dynamic_range,
        }
    }

    /// `|x*_r| / |x*_{r+1}|` for consecutive support ranks.
    pub fn adjacent_ratios(&self) -> Vec<f64> {
        self.support
            .windows(2)
            .map(|w| self.signal[w[0]].abs() / self.signal[w[1]].abs())
            .collect()
    }

    pub fn min_magnitude(&self) -> f64 {
        self.support
            .last()
            .map(|&i| self.signal[i].abs())
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub matrix: SensingMatrix,
    pub observation: DVector<f64>,
    pub truth: Option<GroundTruth>,
    pub seed: u64,
}

impl ProblemInstance {
    /// Validates dimensions and, when `truth` is present, that `A x* = y`.
    pub fn new(
        matrix: SensingMatrix,
        observation: DVector<f64>,
        truth: Option<GroundTruth>,
        seed: u64,
    ) -> Result<Self> {
        if observation.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: observation.len(),
            });
        }
        if let Some(t) = &truth {
            if t.signal.len() != matrix.cols() {
                return Err(Error::DimensionMismatch {
                    expected: matrix.cols(),
                    actual: t.signal.len(),
                });
            }
            let gap = (matrix.apply(&t.signal) - &observation).amax();
            let scale = observation.amax().max(1.0);
            if gap > CONSISTENCY_TOL * scale {
                return Err(Error::InvalidShape(format!(
                    "ground truth is inconsistent with the observation: ||Ax* - y||_inf = {gap:e}"
                )));
            }
        }
        Ok(ProblemInstance {
            matrix,
            observation,
            truth,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignRule {
    #[default]
    Random,
    Positive,
}

/// Distribution of the generated sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixEnsemble {
    /// i.i.d. standard Gaussian entries, columns normalized.
    #[default]
    Gaussian,
    /// `[I_M | H_M D / sqrt(M)]` restricted to `N - M` random Hadamard
    /// columns with random signs `D`, columns shuffled. Coherence is exactly
    /// `1/sqrt(M)`; requires `M` a power of two and `N <= 2M`.
    SpikeHadamard,
}

/// Parameters of a generated instance; also the `meta.json` of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k_star: usize,
    pub dr: f64,
    #[serde(default)]
    pub signs: SignRule,
    #[serde(default)]
    pub ensemble: MatrixEnsemble,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(m: usize, n: usize, k_star: usize, dr: f64, seed: u64) -> Self {
        InstanceSpec {
            m,
            n,
            k_star,
            dr,
            signs: SignRule::Random,
            ensemble: MatrixEnsemble::Gaussian,
            seed,
        }
    }

    pub fn with_signs(mut self, signs: SignRule) -> Self {
        self.signs = signs;
        self
    }

    pub fn with_ensemble(mut self, ensemble: MatrixEnsemble) -> Self {
        self.ensemble = ensemble;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.k_star < self.m && self.m < self.n) {
            return Err(Error::InvalidShape(format!(
                "need k* < M < N, got k* = {}, M = {}, N = {}",
                self.k_star, self.m, self.n
            )));
        }
        if !(self.dr >= 1.0) || !self.dr.is_finite() {
            return Err(Error::InvalidShape(format!(
                "dynamic range must be finite and >= 1, got {}",
                self.dr
            )));
        }
        if self.ensemble == MatrixEnsemble::SpikeHadamard
            && (!self.m.is_power_of_two() || self.n > 2 * self.m)
        {
            return Err(Error::InvalidShape(format!(
                "spike_hadamard needs M a power of two and N <= 2M, got M = {}, N = {}",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Draws a consistent instance `y = A x*` as a pure function of `spec`.
///
/// Nonzero magnitudes are log-uniformly spaced over `[1, Dr]`, so every
/// adjacent ratio `|x*_r| / |x*_{r+1}|` equals `Dr^{1/(k*-1)}`. The matrix
/// returned is the normalized draw, which is also the posed system, so its
/// column scales are all one.
pub fn generate_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw = match spec.ensemble {
        MatrixEnsemble::Gaussian => {
            DMatrix::from_fn(spec.m, spec.n, |_, _| rng.sample::<f64, _>(StandardNormal))
        }
        MatrixEnsemble::SpikeHadamard => spike_hadamard(spec.m, spec.n, &mut rng),
    };
    let normalized = normalize_columns(&raw)?;
    let matrix = SensingMatrix {
        entries: normalized.entries,
        column_scales: vec![1.0; spec.n],
    };

    let positions = index::sample(&mut rng, spec.n, spec.k_star).into_vec();
    let mut signal = DVector::zeros(spec.n);
    for (rank, &pos) in positions.iter().enumerate() {
        let magnitude = log_uniform_magnitude(rank, spec.k_star, spec.dr);
        let sign = match spec.signs {
            SignRule::Positive => 1.0,
            SignRule::Random => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        signal[pos] = sign * magnitude;
    }
    let observation = matrix.apply(&signal);
    let truth = GroundTruth::from_signal(signal);
    ProblemInstance::new(matrix, observation, Some(truth), spec.seed)
}

fn log_uniform_magnitude(rank: usize, k_star: usize, dr: f64) -> f64 {
    if k_star <= 1 || rank + 1 == k_star {
        return 1.0;
    }
    if rank == 0 {
        return dr;
    }
    let frac = (k_star - 1 - rank) as f64 / (k_star - 1) as f64;
    dr.powf(frac)
}

fn sylvester_hadamard(m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < m {
        let s = h.nrows();
        let mut next = DMatrix::zeros(2 * s, 2 * s);
        next.view_mut((0, 0), (s, s)).copy_from(&h);
        next.view_mut((0, s), (s, s)).copy_from(&h);
        next.view_mut((s, 0), (s, s)).copy_from(&h);
        next.view_mut((s, s), (s, s)).copy_from(&(-&h));
        h = next;
    }
    h
}

fn spike_hadamard(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let h = sylvester_hadamard(m) / (m as f64).sqrt();
    let picked = index::sample(rng, m, n - m).into_vec();
    let mut columns: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            e
        })
        .collect();
    for j in picked {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        columns.push(h.column(j) * sign);
    }
    columns.shuffle(rng);
    DMatrix::from_columns(&columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_small_matrix() {
        let raw = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 1.0, 4.0, 2.0, 0.0]);
        let a = normalize_columns(&raw).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[0.6, 0.0, 1.0, 0.8, 1.0, 0.0]);
        assert_abs_diff_eq!(a.entries(), &expected, epsilon = 1e-15);
        assert_eq!(a.column_scales(), &[5.0, 2.0, 1.0]);
    }

    #[test]
    fn normalize_unit_matrix_is_identity() {
        let raw = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.6, 0.0, 1.0, 0.8]);
        let a = normalize_columns(&raw).unwrap();
        assert_abs_diff_eq!(a.entries(), &raw, epsilon = 1e-15);
        for s in a.column_scales() {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_zero_column_and_tall_matrix() {
        let raw = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(matches!(normalize_columns(&raw), Err(Error::ZeroColumn(1))));
        let tall = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            normalize_columns(&tall),
            Err(Error::NotUnderdetermined { rows: 3, cols: 3 })
        ));
    }

    #[test]
    fn coherence_of_duplicate_column() {
        let raw = DMatrix::from_row_slice(
            3,
            4,
            &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        let rep = coherence(&normalize_columns(&raw).unwrap());
        assert_eq!(rep.mu, 1.0);
        assert_eq!(rep.argmax_pair, (0, 3));
    }

    #[test]
    fn coherence_of_diagonal_column() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let raw = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, h, 0.0, 1.0, h]);
        let rep = coherence(&normalize_columns(&raw).unwrap());
        assert_abs_diff_eq!(rep.mu, h, epsilon = 1e-12);
        assert_eq!(rep.argmax_pair, (0, 2));
    }

    #[test]
    fn welch_values() {
        assert_abs_diff_eq!(welch_bound(3, 6).unwrap(), (0.2f64).sqrt(), epsilon = 1e-15);
        assert_eq!(welch_bound(1, 2).unwrap(), 1.0);
        let w = welch_bound(100, 10_000).unwrap();
        assert_abs_diff_eq!(w, 0.099_503_719_020_998_9, epsilon = 1e-12);
        assert!(w < 1.0 / 10.0);
        assert!(welch_bound(4, 4).is_err());
    }

    #[test]
    fn dynamic_range_examples() {
        assert_eq!(dynamic_range_of(&[5.0, 0.0, -0.5], &[0, 2]).unwrap(), 10.0);
        assert_eq!(dynamic_range_of(&[1.0, 1.0], &[0, 1]).unwrap(), 1.0);
        assert!(matches!(
            dynamic_range_of(&[1.0], &[]),
            Err(Error::EmptySupport)
        ));
        assert!(matches!(
            dynamic_range_of(&[1.0, 0.0], &[0, 1]),
            Err(Error::ZeroOnSupport(1))
        ));
    }

    #[test]
    fn generated_equal_magnitudes_when_dr_is_one() {
        let inst = generate_instance(&InstanceSpec::new(8, 16, 2, 1.0, 7)).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        assert_eq!(truth.sparsity, 2);
        for &i in &truth.support {
            assert_eq!(truth.signal[i].abs(), 1.0);
        }
        let gap = (inst.matrix.apply(&truth.signal) - &inst.observation).amax();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn generated_dynamic_range_is_exact() {
        let inst = generate_instance(&InstanceSpec::new(8, 16, 3, 10.0, 1)).unwrap();
        let truth = inst.truth.unwrap();
        assert_abs_diff_eq!(truth.dynamic_range, 10.0, epsilon = 1e-12);
        let inst = generate_instance(&InstanceSpec::new(16, 32, 5, 4.0, 2)).unwrap();
        let truth = inst.truth.unwrap();
        let dr = dynamic_range_of(truth.signal.as_slice(), &truth.support).unwrap();
        assert_abs_diff_eq!(dr, 4.0, epsilon = 1e-12);
        let ratios = truth.adjacent_ratios();
        for r in &ratios {
            assert_abs_diff_eq!(*r, 4f64.powf(0.25), epsilon = 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = InstanceSpec::new(8, 16, 2, 1.0, 7);
        assert_eq!(
            generate_instance(&spec).unwrap(),
            generate_instance(&spec).unwrap()
        );
        let other = generate_instance(&InstanceSpec::new(8, 16, 2, 1.0, 8)).unwrap();
        assert_ne!(generate_instance(&spec).unwrap(), other);
    }

    #[test]
    fn generation_rejects_bad_shapes() {
        assert!(generate_instance(&InstanceSpec::new(16, 8, 2, 1.0, 0)).is_err());
        assert!(generate_instance(&InstanceSpec::new(8, 16, 8, 1.0, 0)).is_err());
        assert!(generate_instance(&InstanceSpec::new(8, 16, 2, 0.5, 0)).is_err());
        let bad = InstanceSpec::new(6, 10, 2, 1.0, 0).with_ensemble(MatrixEnsemble::SpikeHadamard);
        assert!(generate_instance(&bad).is_err());
    }

    #[test]
    fn spike_hadamard_coherence() {
        let spec =
            InstanceSpec::new(64, 128, 3, 4.0, 5).with_ensemble(MatrixEnsemble::SpikeHadamard);
        let inst = generate_instance(&spec).unwrap();
        let mu = coherence(&inst.matrix).mu;
        assert_abs_diff_eq!(mu, 1.0 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn support_sorted_by_magnitude() {
        let x = DVector::from_vec(vec![0.0, -2.0, 5.0, 0.0, 2.0]);
        let t = GroundTruth::from_signal(x);
        assert_eq!(t.support, vec![2, 1, 4]);
        assert_eq!(t.dynamic_range, 2.5);
        assert_eq!(t.min_magnitude(), 2.0);
    }

    #[test]
    fn empty_truth() {
        let spec = InstanceSpec::new(8, 16, 0, 1.0, 3);
        let inst = generate_instance(&spec).unwrap();
        let t = inst.truth.unwrap();
        assert_eq!(t.sparsity, 0);
        assert_eq!(t.dynamic_range, 1.0);
        assert_eq!(inst.observation.amax(), 0.0);
    }

    #[test]
    fn coordinate_maps_round_trip() {
        let raw = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 1.0, 4.0, 2.0, 0.0]);
        let a = normalize_columns(&raw).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let orig = a.to_original(&x);
        // A_raw * x_orig == A_norm * x_norm
        assert_abs_diff_eq!(&raw * &orig, a.apply(&x), epsilon = 1e-14);
        assert_abs_diff_eq!(a.to_normalized(&orig), x, epsilon = 1e-15);
    }
}
