mod support;

use joinsafe_core::classifiers::svm::{MatchMatrix, SmoParams};
use joinsafe_core::classifiers::{train_svm_categorical, train_tree, KernelSpec, SplitCriterion, TreeParams};
use joinsafe_core::relational::{apply_feature_view, FeatureView};
use joinsafe_core::simulation::{ScenarioSpec, SimConfig, World};
use proptest::prelude::*;

#[test]
fn tree_root_split_matches_enumeration() {
    for seed in 0..200 {
        support::tree_root_matches(seed).unwrap();
    }
}

#[test]
fn smo_dual_matches_exhaustive_optimum() {
    for seed in 0..100 {
        support::smo_matches_oracle(seed).unwrap();
    }
}

#[test]
fn logreg_gradient_matches_central_differences() {
    for seed in 0..5 {
        let e = support::logreg_fd_error(seed);
        assert!(e <= 1e-5, "seed {seed}: relative error {e}");
    }
}

#[test]
fn naive_bayes_hand_fixtures() {
    support::nb_fixtures().unwrap();
}

#[test]
fn duplicated_support_vector_leaves_decisions_unchanged() {
    // a duplicated training row shares its multiplier with the copy
    let base = support::dataset(&[3, 2], vec![vec![0, 1, 2, 0, 1, 2], vec![0, 0, 1, 1, 0, 1]], vec![0, 1, 1, 0, 1, 1]);
    let dup = support::dataset(
        &[3, 2],
        vec![vec![0, 1, 2, 0, 1, 2, 0], vec![0, 0, 1, 1, 0, 1, 0]],
        vec![0, 1, 1, 0, 1, 1, 0],
    );
    let spec = KernelSpec::rbf(10.0, 0.5);
    let params = SmoParams { tol: 1e-10, max_passes: 10_000 };
    let a = train_svm_categorical(&base, &spec, &params).unwrap();
    let b = train_svm_categorical(&dup, &spec, &params).unwrap();
    for x in 0..3 {
        for z in 0..2 {
            let da = a.decision_codes(&[x, z]).unwrap();
            let db = b.decision_codes(&[x, z]).unwrap();
            assert!((da - db).abs() < 1e-6, "({x},{z}): {da} vs {db}");
        }
    }
}

#[test]
fn match_counts_reproduce_one_hot_dot_products() {
    let mut r = support::rng(5);
    let d = support::random_dataset(&mut r, 12, &[3, 4, 2]);
    let rows = d.rows();
    let m = MatchMatrix::between(&rows, &rows, 3);
    let enc = joinsafe_core::relational::one_hot_encode(&d).unwrap();
    for i in 0..12 {
        for j in 0..12 {
            let dot: f64 = enc.row(i).iter().zip(enc.row(j)).map(|(a, b)| a * b).sum();
            assert_eq!(dot, m.get(i, j) as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Overwriting a test row's foreign block with the block its FK dictates
    /// never changes a JoinAll tree's prediction.
    #[test]
    fn fd_shortcut_leaves_tree_predictions_unchanged(seed in 0u64..1000, n_r in 2usize..30) {
        let cfg = SimConfig { n_s: 200, n_r, d_s: 2, d_r: 2, seed };
        let world = World::new(cfg, ScenarioSpec::onexr(0.1)).unwrap();
        let train = apply_feature_view(&world.sample(200, seed).unwrap().star, &FeatureView::JoinAll).unwrap();
        let tree = train_tree(&train, TreeParams::unpruned(), SplitCriterion::Gini).unwrap();
        let test = apply_feature_view(&world.sample(50, seed ^ 1).unwrap().star, &FeatureView::JoinAll).unwrap();
        let fk = test.feature_index("fk").unwrap();
        let xr: Vec<usize> = (0..2).map(|i| test.feature_index(&format!("xr{i}")).unwrap()).collect();
        for row in 0..test.n_rows() {
            let mut ex = test.row(row);
            let block = world.dimension().feature_row(ex[fk]).unwrap();
            for (k, &f) in xr.iter().enumerate() {
                ex[f] = block[k];
            }
            prop_assert_eq!(tree.predict(&ex).unwrap(), tree.predict(&test.row(row)).unwrap());
        }
    }

    /// Node count never grows with cp or minsplit.
    #[test]
    fn pruning_is_monotone(seed in 0u64..1000) {
        let mut r = support::rng(seed);
        let d = support::random_dataset(&mut r, 80, &[3, 4, 2]);
        let full = train_tree(&d, TreeParams::unpruned(), SplitCriterion::Gini).unwrap();
        let mut prev = usize::MAX;
        for cp in [0.0, 1e-4, 1e-3, 0.01, 0.1] {
            let n = full.with_params(TreeParams::new(1, cp).unwrap()).node_count();
            prop_assert!(n <= prev);
            prev = n;
        }
        let mut prev = usize::MAX;
        for ms in [1, 10, 100, 1000] {
            let n = full.with_params(TreeParams::new(ms, 0.0).unwrap()).node_count();
            prop_assert!(n <= prev);
            prev = n;
        }
    }
}
