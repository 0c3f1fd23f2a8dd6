//! Recovery metrics and the cross-validation harness.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use survclust::evaluate::{
    accuracy, apply_matching, confusion_matrix, fit_fold, match_clusters, permutation_importance,
    roc_auc, roc_auc_ovr, run_cv_experiment, FoldPlan,
};
use survclust::neural::NetworkParams;
use survclust::simulate::{generate_cohort, CohortSpec};
use survclust::survival::multivariate_logrank_hard;
use survclust::{Error, FeatureMatrix, LossConfig, NetworkSpec, SoftAssignment, Standardizer, SurvivalRecord, TrainConfig};

/// Area under the empirical ROC polyline, walking thresholds from high to
/// low and integrating with trapezoids.
fn trapezoid_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let p = positive.iter().filter(|&&x| x).count() as f64;
    let q = positive.len() as f64 - p;
    let (mut fpr0, mut tpr0, mut area) = (0.0, 0.0, 0.0);
    for t in thresholds {
        let tp = scores.iter().zip(positive).filter(|(&s, &y)| s >= t && y).count() as f64;
        let fp = scores.iter().zip(positive).filter(|(&s, &y)| s >= t && !y).count() as f64;
        let (fpr, tpr) = (fp / q, tp / p);
        area += (fpr - fpr0) * (tpr + tpr0) / 2.0;
        fpr0 = fpr;
        tpr0 = tpr;
    }
    area
}

#[test]
fn auc_matches_trapezoid_oracle_on_ten_points() {
    let scores = [0.9, 0.8, 0.8, 0.7, 0.55, 0.5, 0.5, 0.4, 0.3, 0.1];
    let positive = [true, true, false, true, false, true, false, false, true, false];
    let auc = roc_auc(&scores, &positive).unwrap();
    assert_abs_diff_eq!(auc, trapezoid_auc(&scores, &positive), epsilon = 1e-12);
    // 25 pairs: 16 wins and 2 ties
    assert_abs_diff_eq!(auc, 17.0 / 25.0, epsilon = 1e-12);
}

#[test]
fn auc_edge_cases() {
    assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]), Some(1.0));
    assert_eq!(roc_auc(&[0.4; 6], &[true, false, true, false, false, true]), Some(0.5));
    assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), None);
    let soft = SoftAssignment::one_hot(&[0, 0, 0], 2).unwrap();
    assert!(matches!(roc_auc_ovr(&soft, &[0, 0, 0]), Err(Error::UndefinedAuc { .. })));
}

#[test]
fn confusion_matches_hand_tally() {
    let truth = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
    let pred = [0, 0, 1, 2, 1, 1, 1, 0, 2, 2, 0, 0];
    let c = confusion_matrix(&pred, &truth, 3).unwrap();
    let expected = [[0.5, 0.25, 0.25], [0.25, 0.75, 0.0], [0.5, 0.0, 0.5]];
    for t in 0..3 {
        for p in 0..3 {
            assert_abs_diff_eq!(c[t][p], expected[t][p], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(c[t].iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
    // balanced classes: mean diagonal equals accuracy
    let diag = (0..3).map(|i| c[i][i]).sum::<f64>() / 3.0;
    assert_abs_diff_eq!(diag, accuracy(&pred, &truth), epsilon = 1e-12);
    let constant = confusion_matrix(&[0, 0, 0], &[0, 1, 1], 2).unwrap();
    assert_eq!(constant, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
    assert!(matches!(confusion_matrix(&[0, 1], &[0, 0], 2), Err(Error::UndefinedRow { class: 1 })));
}

#[test]
fn matching_recovers_shifted_labels() {
    let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
    assert_eq!(match_clusters(&truth, &truth, 3).unwrap(), vec![0, 1, 2]);
    let shifted: Vec<usize> = truth.iter().map(|&t| (t + 1) % 3).collect();
    let perm = match_clusters(&shifted, &truth, 3).unwrap();
    assert_eq!(perm, vec![2, 0, 1]);
    assert_eq!(accuracy(&apply_matching(&shifted, &perm), &truth), 1.0);
    assert!(matches!(match_clusters(&[0], &[0], 9), Err(Error::UnsupportedK(9))));
}

fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_is_exhaustive_optimum(seed in any::<u64>(), k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..30).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..30).map(|_| rng.random_range(0..k)).collect();
        let perm = match_clusters(&pred, &truth, k).unwrap();
        let hits = |p: &[usize]| pred.iter().zip(&truth).filter(|(&a, &b)| p[a] == b).count();
        let best = all_permutations(k).iter().map(|p| hits(p)).max().unwrap();
        prop_assert_eq!(hits(&perm), best);
        // no transposition improves it
        for a in 0..k {
            for b in (a + 1)..k {
                let mut q = perm.clone();
                q.swap(a, b);
                prop_assert!(hits(&q) <= hits(&perm));
            }
        }
    }

    #[test]
    fn auc_invariant_under_monotone_maps(seed in any::<u64>(), n in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64 / 12.0).collect();
        let mut positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        positive[0] = true;
        positive[n - 1] = false;
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let a = roc_auc(&scores, &positive).unwrap();
        prop_assert!((a - roc_auc(&mapped, &positive).unwrap()).abs() < 1e-12);
        prop_assert!((a - trapezoid_auc(&scores, &positive)).abs() < 1e-12);
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn fold_plan_partitions_indices() {
    let plan = FoldPlan::new(103, 5, 9).unwrap();
    let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..103).collect::<Vec<_>>());
    let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    for f in 0..5 {
        let train = plan.train_indices(f);
        assert!(train.iter().all(|i| !plan.test_indices(f).contains(i)));
        assert_eq!(train.len() + plan.test_indices(f).len(), 103);
    }
    assert!(matches!(FoldPlan::new(10, 1, 0), Err(Error::InvalidPlan(_))));
}

#[test]
fn standardization_uses_training_folds_only() {
    let cohort = generate_cohort(&CohortSpec::three_group(300, 2)).unwrap();
    let plan = FoldPlan::new(cohort.len(), 3, 2).unwrap();
    let spec = NetworkSpec::new(vec![3, 8, 3], 2);
    for fold in 0..3 {
        let fit = fit_fold(&cohort, &plan, fold, &spec, &quick_train(), &LossConfig::default()).unwrap();
        let expected = Standardizer::fit(&cohort.features.select(&plan.train_indices(fold))).unwrap();
        assert_eq!(fit.standardizer, expected);
        assert_eq!(fit.test_probs.n(), plan.test_indices(fold).len());
    }
}

#[test]
fn cv_is_deterministic() {
    let cohort = generate_cohort(&CohortSpec::three_group(400, 6)).unwrap();
    let plan = FoldPlan::new(cohort.len(), 4, 6).unwrap();
    let spec = NetworkSpec::new(vec![3, 8, 3], 6);
    let a = run_cv_experiment(&cohort, &spec, &quick_train(), &LossConfig::default(), &plan).unwrap();
    let b = run_cv_experiment(&cohort, &spec, &quick_train(), &LossConfig::default(), &plan).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.folds.len(), 4);
    let pooled = a.pooled.confusion.unwrap();
    for row in pooled {
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn fold_without_events_is_named() {
    let mut cohort = generate_cohort(&CohortSpec::three_group(60, 1)).unwrap();
    let plan = FoldPlan::new(60, 3, 1).unwrap();
    for &i in plan.test_indices(1) {
        cohort.records[i].event = false;
    }
    let spec = NetworkSpec::new(vec![3, 4, 3], 1);
    let err = run_cv_experiment(&cohort, &spec, &quick_train(), &LossConfig::default(), &plan).unwrap_err();
    match err {
        Error::NoEvents { context: Some(c) } => assert!(c.contains("fold 1"), "{c}"),
        other => panic!("unexpected {other:?}"),
    }
}

/// Subjects whose hazard rises with `x`; the network scores cluster 1 by
/// `weights · features`.
fn importance_setup(features: &FeatureMatrix, weights: &[f64], x: &[f64], seed: u64) -> (NetworkParams, Vec<SurvivalRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<SurvivalRecord> = x
        .iter()
        .map(|&v| {
            let u: f64 = rng.random_range(1e-12..1.0);
            let t = -u.ln() / (1.5 * v).exp();
            SurvivalRecord::new(t.min(3.0), t < 3.0).unwrap()
        })
        .collect();
    let spec = NetworkSpec::new(vec![features.cols(), 2], 0);
    let mut params = NetworkParams::zeros(&spec).unwrap();
    params.weights_mut(0)[features.cols()..].copy_from_slice(weights);
    (params, records)
}

#[test]
fn permutation_importance_behaviour() {
    let n = 600;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let metric = |soft: &SoftAssignment, records: &[SurvivalRecord]| {
        Ok(multivariate_logrank_hard(records, &soft.argmax(), 2).map_or(0.0, |t| t.statistic))
    };

    // informative column plus a constant column
    let alone = FeatureMatrix::from_rows(&(0..n).map(|i| vec![x[i], 1.0]).collect::<Vec<_>>()).unwrap();
    let (p1, rec) = importance_setup(&alone, &[4.0, 0.0], &x, 5);
    let imp_alone = permutation_importance(&p1, &alone, &rec, metric, 10, 3).unwrap();
    assert_eq!(imp_alone[1], 0.0);
    assert!(imp_alone[0] > 0.0);
    let again = permutation_importance(&p1, &alone, &rec, metric, 10, 3).unwrap();
    assert_eq!(imp_alone, again);

    // the same signal split across two identical copies
    let dup = FeatureMatrix::from_rows(&(0..n).map(|i| vec![x[i], x[i], noise[i]]).collect::<Vec<_>>()).unwrap();
    let (p2, rec2) = importance_setup(&dup, &[2.0, 2.0, 0.0], &x, 5);
    assert_eq!(rec, rec2);
    let imp_dup = permutation_importance(&p2, &dup, &rec2, metric, 10, 3).unwrap();
    assert!(imp_dup[0] < imp_alone[0] && imp_dup[1] < imp_alone[0], "{imp_dup:?} vs {imp_alone:?}");
    assert_eq!(imp_dup[2], 0.0);
}
