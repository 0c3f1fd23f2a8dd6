//! Properties of the partial logrank objective and the balance barrier.

mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survclust::loss::{
    balance_penalty, partial_event_table, partial_logrank_statistic, penalty_exponent,
    total_objective, LossConfig, SoftAssignment,
};
use survclust::survival::multivariate_logrank_hard;
use survclust::{Error, SurvivalRecord};

use common::{brute_force_logrank, random_instance, rel_close};

fn random_soft(seed: u64, n: usize, k: usize) -> SoftAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits: Vec<f64> = (0..n * k).map(|_| rng.random_range(-3.0..3.0)).collect();
    SoftAssignment::from_logits(n, k, &logits).unwrap()
}

const EXACT: LossConfig = LossConfig {
    penalty_weight: 0.1,
    prob_floor: 1e-4,
    variance_ridge: 0.0,
};

#[test]
fn penalty_reference_points() {
    for k in 2..=6 {
        assert_abs_diff_eq!(balance_penalty(&vec![1.0 / k as f64; k], 1e-4), 0.0, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(penalty_exponent(3), 0.5_f64.ln() / (1.0_f64 / 3.0).ln(), epsilon = 1e-15);
    let a = 0.5_f64.ln() / (1.0_f64 / 3.0).ln();
    let direct = [0.9_f64, 0.05, 0.05]
        .iter()
        .map(|m| 1.0 / (m.powf(a) - m.powf(2.0 * a)))
        .sum::<f64>()
        / 3.0
        - 4.0;
    let p = balance_penalty(&[0.9, 0.05, 0.05], 1e-4);
    assert_abs_diff_eq!(p, direct, epsilon = 1e-12);
    assert!(p > balance_penalty(&[0.5, 0.25, 0.25], 1e-4));
}

#[test]
fn penalty_grows_along_lines_through_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 2..=6 {
        let u = 1.0 / k as f64;
        for _ in 0..20 {
            let mut dir: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = dir.iter().sum::<f64>() / k as f64;
            dir.iter_mut().for_each(|d| *d -= mean);
            // largest step that keeps every mean inside the clamp interval
            let t_max = dir
                .iter()
                .map(|&d| if d > 0.0 { (1.0 - 1e-4 - u) / d } else if d < 0.0 { (1e-4 - u) / d } else { f64::INFINITY })
                .fold(f64::INFINITY, f64::min);
            let mut prev = 0.0;
            for step in 1..=100 {
                let t = t_max * step as f64 / 100.0;
                let m: Vec<f64> = dir.iter().map(|d| u + t * d).collect();
                let p = balance_penalty(&m, 1e-4);
                assert!(p > 0.0 && p >= prev - 1e-12, "k={k} step={step} p={p} prev={prev}");
                prev = p;
            }
        }
    }
}

#[test]
fn uniform_assignment_has_no_signal() {
    let (records, _) = random_instance(3, 30, 3, 0.3);
    let v = total_objective(&SoftAssignment::uniform(30, 3), &records, &LossConfig::default()).unwrap();
    assert!(v.statistic.abs() < 1e-12);
    assert_abs_diff_eq!(v.penalty, 0.0, epsilon = 1e-12);
}

#[test]
fn all_censored_is_rejected_by_statistic() {
    let records = vec![SurvivalRecord::censored(1.0), SurvivalRecord::censored(2.0)];
    let soft = SoftAssignment::uniform(2, 2);
    assert!(matches!(
        partial_logrank_statistic(&soft, &records, &EXACT),
        Err(Error::NoEvents { .. })
    ));
    let v = total_objective(&soft, &records, &EXACT).unwrap();
    assert_eq!(v.events, 0);
    assert_eq!(v.total, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn one_hot_equals_hard_and_oracle(seed in any::<u64>(), n in 2usize..=50, k in 2usize..=4, cp in 0.0f64..0.7) {
        let (records, labels) = random_instance(seed, n, k, cp);
        let soft = SoftAssignment::one_hot(&labels, k).unwrap();
        match multivariate_logrank_hard(&records, &labels, k) {
            Ok(hard) => {
                let partial = partial_logrank_statistic(&soft, &records, &EXACT).unwrap();
                prop_assert!(rel_close(partial, hard.statistic, 1e-9), "{} vs {}", partial, hard.statistic);
                let oracle = brute_force_logrank(&records, &labels, k).unwrap();
                prop_assert!(rel_close(partial, oracle.max(0.0), 1e-9));
            }
            Err(Error::SingularVariance) => {
                prop_assert!(matches!(partial_logrank_statistic(&soft, &records, &EXACT), Err(Error::SingularVariance)));
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn partial_table_conserves_mass(seed in any::<u64>(), n in 2usize..40, k in 2usize..5) {
        let (records, _) = random_instance(seed, n, k, 0.3);
        let soft = random_soft(seed, n, k);
        let t = partial_event_table(&soft, &records).unwrap();
        for j in 0..t.times.len() {
            let d: f64 = t.per_group_events[j].iter().sum();
            let r: f64 = t.per_group_at_risk[j].iter().sum();
            prop_assert!((d - t.events_total[j]).abs() < 1e-9);
            prop_assert!((r - t.at_risk_total[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_under_column_permutation(seed in any::<u64>(), n in 6usize..40) {
        let (records, _) = random_instance(seed, n, 3, 0.3);
        let soft = random_soft(seed, n, 3);
        let a = total_objective(&soft, &records, &EXACT);
        let b = total_objective(&soft.reorder_columns(&[1, 2, 0]), &records, &EXACT);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(rel_close(a.statistic, b.statistic, 1e-8));
            prop_assert!(rel_close(a.penalty, b.penalty, 1e-12));
        }
    }

    #[test]
    fn invariant_under_time_rescaling_and_monotone_maps(seed in any::<u64>(), n in 6usize..40, scale in 0.01f64..100.0) {
        let (records, _) = random_instance(seed, n, 3, 0.3);
        let soft = random_soft(seed, n, 3);
        let cfg = LossConfig::default();
        let scaled: Vec<_> = records.iter().map(|r| SurvivalRecord::new(r.time * scale, r.event).unwrap()).collect();
        let mapped: Vec<_> = records.iter().map(|r| SurvivalRecord::new(r.time.ln_1p().exp2(), r.event).unwrap()).collect();
        if let Ok(a) = total_objective(&soft, &records, &cfg) {
            let b = total_objective(&soft, &scaled, &cfg).unwrap();
            let c = total_objective(&soft, &mapped, &cfg).unwrap();
            prop_assert!(rel_close(a.total, b.total, 1e-9));
            prop_assert!(rel_close(a.total, c.total, 1e-9));
        }
    }

    #[test]
    fn invariant_under_subject_reordering(seed in any::<u64>(), n in 6usize..40) {
        let (records, _) = random_instance(seed, n, 3, 0.3);
        let soft = random_soft(seed, n, 3);
        let order: Vec<usize> = (0..n).rev().collect();
        let rev_records: Vec<_> = order.iter().map(|&i| records[i]).collect();
        let cfg = LossConfig::default();
        if let Ok(a) = total_objective(&soft, &records, &cfg) {
            let b = total_objective(&soft.select(&order), &rev_records, &cfg).unwrap();
            prop_assert!(rel_close(a.total, b.total, 1e-9));
            for (i, &o) in order.iter().enumerate() {
                for g in 0..3 {
                    let x = a.grad_probs[o * 3 + g];
                    let y = b.grad_probs[i * 3 + g];
                    prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn total_is_statistic_minus_weighted_penalty(seed in any::<u64>(), n in 4usize..30, lambda in 0.0f64..10.0) {
        let (records, _) = random_instance(seed, n, 3, 0.3);
        let soft = random_soft(seed, n, 3);
        let cfg = LossConfig { penalty_weight: lambda, ..LossConfig::default() };
        if let Ok(v) = total_objective(&soft, &records, &cfg) {
            prop_assert!(v.statistic >= 0.0);
            prop_assert!(v.penalty >= 0.0);
            prop_assert!((v.total - (v.statistic - lambda * v.penalty)).abs() < 1e-12 * v.total.abs().max(1.0));
        }
    }
}
