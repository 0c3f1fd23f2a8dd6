//! Differentiable multivariate logrank objective on soft group assignments.
//!
//! With membership probabilities `p[i][g]` in place of hard indicators the
//! observed events become `O[g][j] = Σ_{i ∈ D(t_j)} p[i][g]` and the group
//! risk masses `R[g][j] = Σ_{i ∈ R(t_j)} p[i][g]`. Expected events and the
//! hypergeometric covariance follow the classical formulas, so one-hot
//! assignments reproduce the hard statistic.
//!
//! The training objective is `total = L − λ·P(p̄)`, where `P` is a barrier on
//! the batch-mean class probabilities that is zero at `1/k` and grows toward
//! the simplex boundary. **Larger is better**: the trainer ascends `total`
//! (it descends `−total`).
//!
//! Gradients are exact and hand-derived. With `w = V⁻¹Z` on the reduced
//! (k−1) system, `∂L/∂Z = 2w` and `∂L/∂V = −wwᵀ`, which gives per event row
//!
//! ```text
//! ∂L/∂O[g][j] = 2 w_g
//! ∂L/∂R[g][j] = −2 w_g d_j / N_j − c_j (w_g² − 2 w_g Σ_a w_a r_a) / N_j
//! ```
//!
//! with `r_a = R[a][j] / N_j` and `c_j = d_j (N_j − d_j) / (N_j − 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::survival::{EventTable, RiskSetIndex, SurvivalRecord};

/// Row-stochastic n×k matrix of group membership probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    n: usize,
    k: usize,
    probs: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-7;

impl SoftAssignment {
    /// Validates a row-major n×k probability matrix.
    pub fn new(n: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("soft assignment needs k >= 1"));
        }
        if probs.len() != n * k {
            return Err(Error::invalid(format!(
                "expected {} probabilities for {n}x{k}, got {}",
                n * k,
                probs.len()
            )));
        }
        for (i, row) in probs.chunks(k).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self { n, k, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("ragged probability rows"));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    pub fn one_hot(labels: &[usize], k: usize) -> Result<Self> {
        let mut probs = vec![0.0; labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::invalid(format!("label {l} outside [0, {k})")));
            }
            probs[i * k + l] = 1.0;
        }
        Ok(Self { n: labels.len(), k, probs })
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            probs: vec![1.0 / k as f64; n * k],
        }
    }

    /// Row-wise softmax of row-major n×k logits.
    pub fn from_logits(n: usize, k: usize, logits: &[f64]) -> Result<Self> {
        if logits.len() != n * k || k == 0 {
            return Err(Error::invalid("logit matrix shape mismatch"));
        }
        let mut probs = Vec::with_capacity(n * k);
        for row in logits.chunks(k) {
            softmax_into(row, &mut probs);
        }
        Ok(Self { n, k, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.k)
    }

    pub fn class_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.k];
        for row in self.rows() {
            for (m, p) in means.iter_mut().zip(row) {
                *m += p;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.n as f64);
        means
    }

    /// Argmax per row; ties go to the lowest index.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows()
            .map(|row| {
                let mut best = 0;
                for g in 1..row.len() {
                    if row[g] > row[best] {
                        best = g;
                    }
                }
                best
            })
            .collect()
    }

    /// New assignment whose column `c` is this assignment's column `order[c]`.
    pub fn reorder_columns(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.k);
        let mut probs = Vec::with_capacity(self.probs.len());
        for row in self.rows() {
            probs.extend(order.iter().map(|&c| row[c]));
        }
        Self {
            n: self.n,
            k: self.k,
            probs,
        }
    }

    /// Rows at the given subject indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut probs = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            probs.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            k: self.k,
            probs,
        }
    }
}

pub(crate) fn softmax_into(row: &[f64], out: &mut Vec<f64>) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    let mut sum = 0.0;
    for &z in row {
        let e = (z - max).exp();
        sum += e;
        out.push(e);
    }
    out[start..].iter_mut().for_each(|e| *e /= sum);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// λ, the weight of the balance penalty.
    pub penalty_weight: f64,
    /// Class means are clamped to `[prob_floor, 1 − prob_floor]` for the penalty.
    pub prob_floor: f64,
    /// Added to the diagonal of the reduced covariance before solving.
    pub variance_ridge: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            penalty_weight: 0.1,
            prob_floor: 1e-4,
            variance_ridge: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.penalty_weight >= 0.0) || !self.penalty_weight.is_finite() {
            return Err(Error::invalid("penalty_weight must be finite and >= 0"));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 1.0 / k as f64) {
            return Err(Error::invalid(format!(
                "prob_floor must lie in (0, 1/{k}), got {}",
                self.prob_floor
            )));
        }
        if !(self.variance_ridge >= 0.0) || !self.variance_ridge.is_finite() {
            return Err(Error::invalid("variance_ridge must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Objective value together with its gradient with respect to the
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub statistic: f64,
    pub penalty: f64,
    pub total: f64,
    /// ∂total/∂p, row-major n×k.
    pub grad_probs: Vec<f64>,
    /// Number of observed events in the evaluated set; zero means the value
    /// and gradient were defined as zero.
    pub events: usize,
}

fn check_alignment(soft: &SoftAssignment, records: &[SurvivalRecord]) -> Result<()> {
    if soft.n() != records.len() {
        return Err(Error::invalid(format!(
            "soft assignment has {} rows but there are {} records",
            soft.n(),
            records.len()
        )));
    }
    Ok(())
}

/// Event table with fractional group masses.
pub fn partial_event_table(
    soft: &SoftAssignment,
    records: &[SurvivalRecord],
) -> Result<EventTable> {
    check_alignment(soft, records)?;
    let index = RiskSetIndex::new(records)?;
    Ok(index.table(soft.k(), |i| soft.row(i)))
}

struct StatisticParts {
    statistic: f64,
    /// ∂L/∂p, row-major.
    grad: Option<Vec<f64>>,
}

fn logrank_parts(
    index: &RiskSetIndex,
    soft: &SoftAssignment,
    ridge: f64,
    want_grad: bool,
) -> Result<StatisticParts> {
    let k = soft.k();
    if k < 2 {
        return Err(Error::invalid("logrank objective needs k >= 2"));
    }
    let m = k - 1;
    let table = index.table(k, |i| soft.row(i));
    let rows = table.rows();

    let mut z = vec![0.0; m];
    let mut v = SquareMatrix::zeros(m);
    let mut coef = vec![0.0; rows];
    for j in 0..rows {
        let n = table.at_risk_total[j];
        let d = table.events_total[j];
        let risk = &table.per_group_at_risk[j];
        let events = &table.per_group_events[j];
        for g in 0..m {
            z[g] += events[g] - risk[g] * d / n;
        }
        if n > 1.0 {
            let c = d * (n - d) / (n - 1.0);
            coef[j] = c;
            for a in 0..m {
                let ra = risk[a] / n;
                v.add(a, a, c * ra);
                for b in 0..m {
                    v.add(a, b, -c * ra * risk[b] / n);
                }
            }
        }
    }
    v.add_diagonal(ridge);
    let w = v.solve_spd(&z)?;
    let statistic = z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();

    if !want_grad {
        return Ok(StatisticParts {
            statistic,
            grad: None,
        });
    }

    // prefix[x][g] = Σ_{j < x} ∂L/∂R[g][j]
    let mut prefix = vec![0.0; (rows + 1) * k];
    for j in 0..rows {
        let n = table.at_risk_total[j];
        let d = table.events_total[j];
        let risk = &table.per_group_at_risk[j];
        let s2: f64 = (0..m).map(|a| w[a] * risk[a] / n).sum();
        for g in 0..k {
            let dr = if g < m {
                -2.0 * w[g] * d / n - coef[j] * (w[g] * w[g] - 2.0 * s2 * w[g]) / n
            } else {
                0.0
            };
            prefix[(j + 1) * k + g] = prefix[j * k + g] + dr;
        }
    }
    let mut grad = vec![0.0; soft.n() * k];
    for i in 0..soft.n() {
        let base = index.exit_row[i] * k;
        let out = &mut grad[i * k..(i + 1) * k];
        out.copy_from_slice(&prefix[base..base + k]);
        if index.event_row[i].is_some() {
            for g in 0..m {
                out[g] += 2.0 * w[g];
            }
        }
    }
    Ok(StatisticParts {
        statistic,
        grad: Some(grad),
    })
}

/// Soft multivariate logrank statistic `ZᵀV⁻¹Z` on the reduced (k−1) system.
pub fn partial_logrank_statistic(
    soft: &SoftAssignment,
    records: &[SurvivalRecord],
    config: &LossConfig,
) -> Result<f64> {
    check_alignment(soft, records)?;
    let index = RiskSetIndex::new(records)?;
    Ok(logrank_parts(&index, soft, config.variance_ridge, false)?.statistic)
}

/// Exponent that maps `1/k` to `1/2`.
pub fn penalty_exponent(k: usize) -> f64 {
    (0.5_f64).ln() / (1.0 / k as f64).ln()
}

/// Balance barrier `P = (1/k) Σ_g 1 / (m_g^α − m_g^{2α}) − 4` on class means
/// clamped to `[floor, 1 − floor]`. Zero exactly when every mean is `1/k`.
pub fn balance_penalty(class_means: &[f64], prob_floor: f64) -> f64 {
    penalty_with_gradient(class_means, prob_floor).0
}

/// Penalty value and its derivative with respect to each (unclamped) mean.
pub fn penalty_with_gradient(class_means: &[f64], prob_floor: f64) -> (f64, Vec<f64>) {
    let k = class_means.len();
    let alpha = penalty_exponent(k);
    let kf = k as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; k];
    for (g, &mean) in class_means.iter().enumerate() {
        let clamped = mean.clamp(prob_floor, 1.0 - prob_floor);
        let y = clamped.powf(alpha);
        let denom = y - y * y;
        sum += 1.0 / denom;
        if clamped == mean {
            let dy = alpha * clamped.powf(alpha - 1.0);
            grad[g] = -(1.0 - 2.0 * y) * dy / (denom * denom) / kf;
        }
    }
    (sum / kf - 4.0, grad)
}

/// `total = L − λ·P` and its gradient with respect to the probabilities.
///
/// A set without observed events carries no logrank information; value and
/// gradient are then zero and `events` is 0.
pub fn total_objective(
    soft: &SoftAssignment,
    records: &[SurvivalRecord],
    config: &LossConfig,
) -> Result<LossValue> {
    check_alignment(soft, records)?;
    config.validate(soft.k())?;
    let events = records.iter().filter(|r| r.event).count();
    if events == 0 {
        crate::survival::validate_records(records)?;
        return Ok(LossValue {
            statistic: 0.0,
            penalty: 0.0,
            total: 0.0,
            grad_probs: vec![0.0; soft.n() * soft.k()],
            events: 0,
        });
    }
    let index = RiskSetIndex::new(records)?;
    let parts = logrank_parts(&index, soft, config.variance_ridge, true)?;
    let mut grad = parts.grad.expect("gradient requested");

    let (penalty, dpen) = penalty_with_gradient(&soft.class_means(), config.prob_floor);
    let lambda = config.penalty_weight;
    let k = soft.k();
    let scale = lambda / soft.n() as f64;
    for row in grad.chunks_mut(k) {
        for g in 0..k {
            row[g] -= scale * dpen[g];
        }
    }
    Ok(LossValue {
        statistic: parts.statistic,
        penalty,
        total: parts.statistic - lambda * penalty,
        grad_probs: grad,
        events,
    })
}

/// Objective evaluated on softmax(logits), with gradients for both.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitObjective {
    pub value: LossValue,
    /// ∂total/∂logits, row-major n×k. Each row sums to zero.
    pub grad_logits: Vec<f64>,
}

pub fn objective_from_logits(
    n: usize,
    k: usize,
    logits: &[f64],
    records: &[SurvivalRecord],
    config: &LossConfig,
) -> Result<LogitObjective> {
    let soft = SoftAssignment::from_logits(n, k, logits)?;
    let value = total_objective(&soft, records, config)?;
    let grad_logits = softmax_backward(&soft, &value.grad_probs);
    Ok(LogitObjective { value, grad_logits })
}

/// ∂total/∂logits for row-wise softmax logits.
pub fn gradient_wrt_logits(
    n: usize,
    k: usize,
    logits: &[f64],
    records: &[SurvivalRecord],
    config: &LossConfig,
) -> Result<Vec<f64>> {
    Ok(objective_from_logits(n, k, logits, records, config)?.grad_logits)
}

/// Chains a gradient on probabilities through the softmax Jacobian.
pub(crate) fn softmax_backward(soft: &SoftAssignment, grad_probs: &[f64]) -> Vec<f64> {
    let k = soft.k();
    let mut out = Vec::with_capacity(grad_probs.len());
    for (p, gp) in soft.rows().zip(grad_probs.chunks(k)) {
        let dot: f64 = p.iter().zip(gp).map(|(a, b)| a * b).sum();
        out.extend(p.iter().zip(gp).map(|(pi, gi)| pi * (gi - dot)));
    }
    out
}
