//! Property tests for evaluation plans: fold assignments must partition the
//! dataset with near-perfect stratification for any class mix, seed, and k.

use optcomb::dataset::{bootstrap_plan, stratified_kfold, LabeledDataset};
use optcomb::Matrix;
use proptest::prelude::*;

fn toy(n_pos: usize, n_neg: usize) -> LabeledDataset {
    let rows: Vec<Vec<f64>> = (0..n_pos + n_neg).map(|i| vec![i as f64, (i * i) as f64]).collect();
    let mut targets = vec![1i8; n_pos];
    targets.extend(vec![-1i8; n_neg]);
    LabeledDataset::new(
        Matrix::from_rows(&rows),
        targets,
        vec!["a".into(), "b".into()],
        "toy".into(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn folds_partition_and_stratify(
        n_pos in 1usize..40,
        n_neg in 1usize..40,
        k_frac in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let n = n_pos + n_neg;
        prop_assume!(n >= 2);
        let k = 2 + ((k_frac * (n - 2) as f64) as usize).min(n - 2);
        let ds = toy(n_pos, n_neg);
        let plan = stratified_kfold(&ds, k, seed).unwrap();

        // Partition: every instance in exactly one test fold.
        prop_assert_eq!(plan.assignments.len(), n);
        let mut seen = vec![0usize; k];
        for &f in &plan.assignments {
            prop_assert!(f < k);
            seen[f] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c > 0), "empty fold in {:?}", seen);

        // Per-class imbalance at most one.
        for class in [1i8, -1i8] {
            let mut counts = vec![0usize; k];
            for (i, &t) in ds.targets.iter().enumerate() {
                if t == class {
                    counts[plan.assignments[i]] += 1;
                }
            }
            let lo = counts.iter().min().unwrap();
            let hi = counts.iter().max().unwrap();
            prop_assert!(hi - lo <= 1, "class {} counts {:?}", class, counts);
        }

        // Train/test split is exact complement.
        for fold in 0..k {
            let test = plan.test_indices(fold);
            let train = plan.train_indices(fold);
            prop_assert_eq!(test.len() + train.len(), n);
        }
    }

    #[test]
    fn bootstrap_replicates_are_well_formed(
        n in 2usize..60,
        d in 1usize..20,
        seed in 0u64..1000,
    ) {
        let ds = toy(n / 2 + 1, n - n / 2 - 1 + 1);
        let n = ds.n();
        let plan = bootstrap_plan(&ds, d, seed).unwrap();
        prop_assert_eq!(plan.replicates.len(), d);
        for (replicate, oob) in plan.replicates.iter().zip(&plan.oob_sets) {
            prop_assert_eq!(replicate.len(), n);
            prop_assert!(!oob.is_empty());
            prop_assert!(replicate.iter().all(|&i| i < n));
            let in_bag: std::collections::HashSet<_> = replicate.iter().copied().collect();
            prop_assert!(oob.iter().all(|i| !in_bag.contains(i)));
            // OOB sets come out sorted and deduplicated by construction.
            prop_assert!(oob.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
