use ait_core::oracle::{brute_force_sparsest, omp_baseline};
use ait_core::{
    coherence, generate_instance, normalize_columns, solve, InstanceSpec, SolverConfig,
    ThresholdRule,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solvers_agree_with_unique_sparsest(seed in 0u64..10_000, k_star in 1usize..3) {
        let inst = generate_instance(&InstanceSpec::new(8, 12, k_star, 2.0, seed)).unwrap();
        let mu = coherence(&inst.matrix).mu;
        let bf = brute_force_sparsest(&inst.matrix, &inst.observation, 3).unwrap();
        let s = bf.support.len() as f64;
        prop_assume!(s <= 0.5 * (1.0 + 1.0 / mu));

        let omp = omp_baseline(&inst.matrix, &inst.observation, k_star).unwrap();
        if omp.residual_norm <= 1e-9 * inst.observation.norm() {
            prop_assert_eq!(&omp.support, &bf.support);
        }
        let ait = solve(&inst, &SolverConfig::new(ThresholdRule::hard(), k_star)).unwrap();
        let fit = (inst.matrix.apply(&inst.matrix.to_normalized(&ait.final_x)) - &inst.observation).norm();
        if fit <= 1e-9 * inst.observation.norm() {
            prop_assert_eq!(&ait.final_support, &bf.support);
        }
    }

    #[test]
    fn brute_force_is_permutation_invariant(seed in 0u64..10_000, shift in 1usize..12) {
        let inst = generate_instance(&InstanceSpec::new(8, 12, 2, 3.0, seed)).unwrap();
        let a = inst.matrix.entries();
        // column j of the permuted matrix is column perm[j] of the original
        let perm: Vec<usize> = (0..12).map(|j| (j * 5 + shift) % 12).collect();
        let permuted = normalize_columns(&DMatrix::from_fn(8, 12, |i, j| a[(i, perm[j])])).unwrap();
        let base = brute_force_sparsest(&inst.matrix, &inst.observation, 2).unwrap();
        let moved = brute_force_sparsest(&permuted, &inst.observation, 2).unwrap();
        let mut relabeled: Vec<usize> = moved.support.iter().map(|&j| perm[j]).collect();
        relabeled.sort_unstable();
        prop_assert_eq!(relabeled, base.support);
    }
}
