//! Ground-truth recovery metrics and the cross-validation harness.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Cohort, FeatureMatrix, Standardizer};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, SoftAssignment};
use crate::neural::{forward, train, NetworkParams, NetworkSpec, TrainConfig};
use crate::survival::{concordance_index, multivariate_logrank_hard, SurvivalRecord};

pub const MAX_MATCH_K: usize = 8;

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn contingency(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "prediction/truth length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut table = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::invalid(format!("label outside [0, {k})")));
        }
        table[p][t] += 1;
    }
    Ok(table)
}

/// Permutation `perm` (cluster → truth class) maximizing the number of
/// subjects with `perm[pred[i]] == truth[i]`. Exhaustive over all k!
/// permutations in lexicographic order; the first maximum wins.
pub fn match_clusters(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<usize>> {
    if k > MAX_MATCH_K {
        return Err(Error::UnsupportedK(k));
    }
    let table = contingency(pred, truth, k)?;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_score = None;
    loop {
        let score: usize = (0..k).map(|c| table[c][perm[c]]).sum();
        if best_score.map_or(true, |b| score > b) {
            best_score = Some(score);
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}

pub fn apply_matching(pred: &[usize], perm: &[usize]) -> Vec<usize> {
    pred.iter().map(|&p| perm[p]).collect()
}

/// Column order that puts cluster `q` in column `perm[q]`.
pub fn matched_column_order(perm: &[usize]) -> Vec<usize> {
    let mut order = vec![0; perm.len()];
    for (cluster, &class) in perm.iter().enumerate() {
        order[class] = cluster;
    }
    order
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / pred.len().max(1) as f64
}

/// Area under the ROC curve through the Mann–Whitney statistic with
/// mid-ranks for ties.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&s| positive[s]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// One-vs-rest AUC per class, using column `c` of `probs` as the score for
/// class `c`.
pub fn roc_auc_ovr(probs: &SoftAssignment, truth: &[usize]) -> Result<Vec<f64>> {
    if probs.n() != truth.len() {
        return Err(Error::invalid("probabilities and truth differ in length"));
    }
    (0..probs.k())
        .map(|c| {
            let scores: Vec<f64> = probs.rows().map(|r| r[c]).collect();
            let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            roc_auc(&scores, &positive).ok_or(Error::UndefinedAuc { class: c })
        })
        .collect()
}

/// Rows are truth classes, columns predictions; each row sums to one.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<f64>>> {
    let table = contingency(pred, truth, k)?;
    (0..k)
        .map(|t| {
            let total: usize = (0..k).map(|p| table[p][t]).sum();
            if total == 0 {
                return Err(Error::UndefinedRow { class: t });
            }
            Ok((0..k).map(|p| table[p][t] as f64 / total as f64).collect())
        })
        .collect()
}

/// Logrank test restricted to the clusters that actually occur.
fn logrank_on_present(records: &[SurvivalRecord], labels: &[usize], k: usize) -> Option<(f64, f64, Vec<f64>)> {
    let mut remap = vec![usize::MAX; k];
    let mut present = 0;
    for &l in labels {
        if remap[l] == usize::MAX {
            remap[l] = present;
            present += 1;
        }
    }
    if present < 2 {
        return None;
    }
    let compact: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    let test = multivariate_logrank_hard(records, &compact, present).ok()?;
    // observed/expected per original cluster
    let mut ratio = vec![f64::NAN; k];
    for (orig, &c) in remap.iter().enumerate() {
        if c != usize::MAX && test.expected[c] > 0.0 {
            ratio[orig] = test.observed[c] / test.expected[c];
        }
    }
    Some((test.statistic, test.p_value, ratio))
}

/// Cluster order by increasing observed/expected event ratio, so cluster 0
/// is the lowest-risk group. Clusters that never occur go last.
pub fn risk_order(soft: &SoftAssignment, records: &[SurvivalRecord]) -> Vec<usize> {
    let k = soft.k();
    let labels = soft.argmax();
    let ratio = logrank_on_present(records, &labels, k)
        .map(|(_, _, r)| r)
        .unwrap_or_else(|| vec![f64::NAN; k]);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let key = |g: usize| if ratio[g].is_nan() { f64::INFINITY } else { ratio[g] };
        key(a).total_cmp(&key(b)).then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n: usize,
    pub cluster_sizes: Vec<usize>,
    /// Cluster → truth class.
    pub matching: Option<Vec<usize>>,
    pub auc_per_class: Option<Vec<f64>>,
    /// Rows truth, columns matched prediction.
    pub confusion: Option<Vec<Vec<f64>>>,
    pub accuracy: Option<f64>,
    pub hard_logrank_statistic: Option<f64>,
    pub hard_logrank_p: Option<f64>,
    /// Risk score per subject is Σ_g p_g · (O_g / E_g) of the predicted clusters.
    pub c_index: Option<f64>,
}

/// Recovery metrics for one assignment. Without `truth` only the survival
/// metrics are filled in.
pub fn recovery_report(
    soft: &SoftAssignment,
    records: &[SurvivalRecord],
    truth: Option<&[usize]>,
) -> Result<RecoveryReport> {
    if soft.n() != records.len() {
        return Err(Error::invalid("assignment and records differ in length"));
    }
    let k = soft.k();
    let labels = soft.argmax();
    let mut cluster_sizes = vec![0; k];
    labels.iter().for_each(|&l| cluster_sizes[l] += 1);

    let logrank = logrank_on_present(records, &labels, k);
    let c_index = logrank.as_ref().and_then(|(_, _, ratio)| {
        let scores: Vec<f64> = soft
            .rows()
            .map(|p| {
                p.iter()
                    .zip(ratio)
                    .map(|(pg, r)| if r.is_nan() { 0.0 } else { pg * r })
                    .sum()
            })
            .collect();
        concordance_index(&scores, records).ok()
    });

    let mut report = RecoveryReport {
        n: soft.n(),
        cluster_sizes,
        matching: None,
        auc_per_class: None,
        confusion: None,
        accuracy: None,
        hard_logrank_statistic: logrank.as_ref().map(|l| l.0),
        hard_logrank_p: logrank.as_ref().map(|l| l.1),
        c_index,
    };
    if let Some(truth) = truth {
        let perm = match_clusters(&labels, truth, k)?;
        let matched = apply_matching(&labels, &perm);
        let matched_soft = soft.reorder_columns(&matched_column_order(&perm));
        report.auc_per_class = Some(roc_auc_ovr(&matched_soft, truth)?);
        report.confusion = Some(confusion_matrix(&matched, truth, k)?);
        report.accuracy = Some(accuracy(&matched, truth));
        report.matching = Some(perm);
    }
    Ok(report)
}

// ── Cross-validation ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    /// Sorted withheld indices of each fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Shuffles `0..n` and cuts it into folds whose sizes differ by at most one.
    pub fn new(n: usize, n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::InvalidPlan(format!(
                "need at least 2 folds, got {n_folds} (training set would be empty)"
            )));
        }
        if n < n_folds {
            return Err(Error::InvalidPlan(format!("{n} subjects cannot fill {n_folds} folds")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = n / n_folds;
        let extra = n % n_folds;
        let mut folds = Vec::with_capacity(n_folds);
        let mut start = 0;
        for f in 0..n_folds {
            let len = base + usize::from(f < extra);
            let mut fold = order[start..start + len].to_vec();
            fold.sort_unstable();
            folds.push(fold);
            start += len;
        }
        Ok(Self {
            n_folds,
            seed,
            folds,
        })
    }

    pub fn len(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub skipped_batches: usize,
    pub report: RecoveryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub pooled: RecoveryReport,
    /// How ROC scores were formed.
    pub roc_scores: String,
    /// Predicted (aligned) cluster of every withheld subject, in fold order.
    #[serde(skip)]
    pub pooled_labels: Vec<usize>,
}

/// Everything produced while fitting one fold.
pub struct FoldFit {
    pub params: NetworkParams,
    pub standardizer: Standardizer,
    pub test_probs: SoftAssignment,
    pub report: FoldReport,
}

fn check_events(records: &[SurvivalRecord], indices: &[usize], what: String) -> Result<()> {
    if indices.iter().any(|&i| records[i].event) {
        Ok(())
    } else {
        Err(Error::NoEvents {
            context: Some(what),
        })
    }
}

/// Trains a network, then reorders its outputs by increasing risk on the
/// training data.
pub fn train_ordered(
    spec: &NetworkSpec,
    features: &FeatureMatrix,
    records: &[SurvivalRecord],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<crate::neural::TrainOutcome> {
    let mut outcome = train(spec, records, features, train_cfg, loss_cfg)?;
    let soft = forward(&outcome.params, features)?;
    let order = risk_order(&soft, records);
    outcome.params.permute_outputs(&order);
    Ok(outcome)
}

/// Fits one fold: standardization and training see only the training
/// indices; predictions are made on the withheld indices.
pub fn fit_fold(
    cohort: &Cohort,
    plan: &FoldPlan,
    fold: usize,
    spec: &NetworkSpec,
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<FoldFit> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    check_events(&cohort.records, &train_idx, format!("training folds of fold {fold}"))?;
    check_events(&cohort.records, test_idx, format!("withheld fold {fold}"))?;

    let standardizer = Standardizer::fit(&cohort.features.select(&train_idx))?;
    let train_x = standardizer.transform(&cohort.features.select(&train_idx))?;
    let test_x = standardizer.transform(&cohort.features.select(test_idx))?;
    let train_records: Vec<SurvivalRecord> = train_idx.iter().map(|&i| cohort.records[i]).collect();
    let test_records: Vec<SurvivalRecord> = test_idx.iter().map(|&i| cohort.records[i]).collect();

    let fold_spec = NetworkSpec {
        seed: spec.seed.wrapping_add(fold as u64),
        ..spec.clone()
    };
    let fold_cfg = TrainConfig {
        seed: train_cfg.seed.wrapping_add(fold as u64),
        ..*train_cfg
    };
    let outcome = train_ordered(&fold_spec, &train_x, &train_records, &fold_cfg, loss_cfg)?;
    let test_probs = forward(&outcome.params, &test_x)?;
    let test_truth: Option<Vec<usize>> = cohort
        .truth
        .as_ref()
        .map(|t| test_idx.iter().map(|&i| t[i]).collect());
    let report = recovery_report(&test_probs, &test_records, test_truth.as_deref())?;
    Ok(FoldFit {
        params: outcome.params,
        standardizer,
        test_probs,
        report: FoldReport {
            fold,
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            initial_objective: outcome.initial.objective,
            final_objective: outcome.history.last().map_or(f64::NAN, |h| h.objective),
            skipped_batches: outcome.skipped_batches,
            report,
        },
    })
}

/// k-fold cross-validation. Each fold's withheld predictions are aligned
/// (matched to truth when available, otherwise ordered by training risk) and
/// pooled in fold order for the pooled report.
pub fn run_cv_experiment(
    cohort: &Cohort,
    spec: &NetworkSpec,
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    plan: &FoldPlan,
) -> Result<CvReport> {
    if plan.len() != cohort.len() {
        return Err(Error::InvalidPlan(format!(
            "plan covers {} subjects, cohort has {}",
            plan.len(),
            cohort.len()
        )));
    }
    if cohort.features.rows() != cohort.len() {
        return Err(Error::invalid("features and records differ in length"));
    }
    let k = spec.outputs();
    let mut folds = Vec::with_capacity(plan.n_folds);
    let mut pooled_probs = Vec::with_capacity(cohort.len() * k);
    let mut pooled_records = Vec::with_capacity(cohort.len());
    let mut pooled_truth = Vec::with_capacity(cohort.len());
    for fold in 0..plan.n_folds {
        let fit = fit_fold(cohort, plan, fold, spec, train_cfg, loss_cfg)?;
        log::info!(
            "fold {fold}: objective {:.3} -> {:.3}",
            fit.report.initial_objective,
            fit.report.final_objective
        );
        let aligned = match &fit.report.report.matching {
            Some(perm) => fit.test_probs.reorder_columns(&matched_column_order(perm)),
            None => fit.test_probs.clone(),
        };
        pooled_probs.extend_from_slice(aligned.as_slice());
        for &i in plan.test_indices(fold) {
            pooled_records.push(cohort.records[i]);
            if let Some(t) = &cohort.truth {
                pooled_truth.push(t[i]);
            }
        }
        folds.push(fit.report);
    }
    let pooled_soft = SoftAssignment::new(pooled_records.len(), k, pooled_probs)?;
    let truth = cohort.truth.as_ref().map(|_| pooled_truth.as_slice());
    let pooled = recovery_report(&pooled_soft, &pooled_records, truth)?;
    Ok(CvReport {
        folds,
        pooled,
        roc_scores: "soft probabilities of matched clusters".to_string(),
        pooled_labels: pooled_soft.argmax(),
    })
}

/// Drop in `metric` when each feature column is shuffled, averaged over
/// `repeats` seeded permutations.
pub fn permutation_importance<M>(
    params: &NetworkParams,
    features: &FeatureMatrix,
    records: &[SurvivalRecord],
    metric: M,
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    M: Fn(&SoftAssignment, &[SurvivalRecord]) -> Result<f64>,
{
    let baseline = metric(&forward(params, features)?, records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut importances = Vec::with_capacity(features.cols());
    for j in 0..features.cols() {
        let column = features.column(j);
        let mut drop = 0.0;
        for _ in 0..repeats.max(1) {
            let mut shuffled = column.clone();
            shuffled.shuffle(&mut rng);
            let mut permuted = features.clone();
            for (i, v) in shuffled.into_iter().enumerate() {
                permuted.set(i, j, v);
            }
            drop += baseline - metric(&forward(params, &permuted)?, records)?;
        }
        importances.push(drop / repeats.max(1) as f64);
    }
    Ok(importances)
}
