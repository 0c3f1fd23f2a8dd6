//! Classical survival statistics on hard group labels.
//!
//! - [`build_event_table`]: per event time counts of events and subjects at risk
//! - [`kaplan_meier`]: product-limit curve with Greenwood log-scale 95% bands
//! - [`multivariate_logrank_hard`]: k-group logrank test
//! - [`concordance_index`]: Harrell's c-index
//!
//! Tie convention: a subject censored at an event time is still at risk at
//! that time (events precede censoring).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// One subject's follow-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` if the event was observed, `false` if right-censored.
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::invalid(format!(
                "survival time must be finite and >= 0, got {time}"
            )));
        }
        Ok(Self { time, event })
    }

    pub fn event(time: f64) -> Self {
        Self::new(time, true).expect("valid event time")
    }

    pub fn censored(time: f64) -> Self {
        Self::new(time, false).expect("valid censoring time")
    }
}

/// Builds records from parallel slices of times and event flags.
pub fn records_from(times: &[f64], events: &[bool]) -> Result<Vec<SurvivalRecord>> {
    if times.len() != events.len() {
        return Err(Error::invalid(format!(
            "times/events length mismatch: {} vs {}",
            times.len(),
            events.len()
        )));
    }
    times
        .iter()
        .zip(events)
        .map(|(&t, &e)| SurvivalRecord::new(t, e))
        .collect()
}

pub(crate) fn validate_records(records: &[SurvivalRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("no survival records"));
    }
    for r in records {
        if !r.time.is_finite() || r.time < 0.0 {
            return Err(Error::invalid(format!(
                "survival time must be finite and >= 0, got {}",
                r.time
            )));
        }
    }
    Ok(())
}

/// Risk-set bookkeeping shared by the hard and soft event tables.
///
/// Subject `i` is at risk in event rows `0..exit_row[i]` and, if its event
/// was observed, contributes to row `event_row[i]`.
#[derive(Debug, Clone)]
pub struct RiskSetIndex {
    pub times: Vec<f64>,
    pub events_total: Vec<f64>,
    pub at_risk_total: Vec<f64>,
    pub exit_row: Vec<usize>,
    pub event_row: Vec<Option<usize>>,
}

impl RiskSetIndex {
    pub fn new(records: &[SurvivalRecord]) -> Result<Self> {
        validate_records(records)?;
        let mut times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
        if times.is_empty() {
            return Err(Error::no_events());
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        let rows = times.len();

        let mut events_total = vec![0.0; rows];
        let mut exits = vec![0.0; rows + 1];
        let mut exit_row = Vec::with_capacity(records.len());
        let mut event_row = Vec::with_capacity(records.len());
        for r in records {
            let exit = times.partition_point(|&t| t <= r.time);
            exit_row.push(exit);
            exits[exit] += 1.0;
            if r.event {
                let j = exit - 1;
                events_total[j] += 1.0;
                event_row.push(Some(j));
            } else {
                event_row.push(None);
            }
        }
        // subjects with exit > j are at risk at row j
        let mut at_risk_total = vec![0.0; rows];
        let mut running = 0.0;
        for j in (0..rows).rev() {
            running += exits[j + 1];
            at_risk_total[j] = running;
        }
        Ok(Self {
            times,
            events_total,
            at_risk_total,
            exit_row,
            event_row,
        })
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn subjects(&self) -> usize {
        self.exit_row.len()
    }

    /// Event table under arbitrary (possibly fractional) memberships.
    /// `membership(i)` returns subject `i`'s length-`k` membership row.
    pub fn table<'a, F>(&self, k: usize, membership: F) -> EventTable
    where
        F: Fn(usize) -> &'a [f64],
    {
        let rows = self.rows();
        let mut per_group_events = vec![vec![0.0; k]; rows];
        let mut exits = vec![vec![0.0; k]; rows + 1];
        for i in 0..self.subjects() {
            let m = membership(i);
            debug_assert_eq!(m.len(), k);
            let bucket = &mut exits[self.exit_row[i]];
            for g in 0..k {
                bucket[g] += m[g];
            }
            if let Some(j) = self.event_row[i] {
                for g in 0..k {
                    per_group_events[j][g] += m[g];
                }
            }
        }
        let mut per_group_at_risk = vec![vec![0.0; k]; rows];
        let mut running = vec![0.0; k];
        for j in (0..rows).rev() {
            for g in 0..k {
                running[g] += exits[j + 1][g];
            }
            per_group_at_risk[j].copy_from_slice(&running);
        }
        EventTable {
            k,
            times: self.times.clone(),
            events_total: self.events_total.clone(),
            at_risk_total: self.at_risk_total.clone(),
            per_group_events,
            per_group_at_risk,
        }
    }
}

/// Per distinct event time: totals and per-group events / at-risk masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable {
    pub k: usize,
    pub times: Vec<f64>,
    pub events_total: Vec<f64>,
    pub at_risk_total: Vec<f64>,
    /// `[row][group]`
    pub per_group_events: Vec<Vec<f64>>,
    /// `[row][group]`
    pub per_group_at_risk: Vec<Vec<f64>>,
}

impl EventTable {
    pub fn rows(&self) -> usize {
        self.times.len()
    }

    /// Expected events `R_g(t_j) / |R(t_j)| * d_j`, indexed `[row][group]`.
    pub fn expected(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|j| {
                let ratio = self.events_total[j] / self.at_risk_total[j];
                self.per_group_at_risk[j].iter().map(|r| r * ratio).collect()
            })
            .collect()
    }

    /// Per-group totals of observed and expected events.
    pub fn observed_expected(&self) -> (Vec<f64>, Vec<f64>) {
        let mut observed = vec![0.0; self.k];
        let mut expected = vec![0.0; self.k];
        for (j, e_row) in self.expected().iter().enumerate() {
            for g in 0..self.k {
                observed[g] += self.per_group_events[j][g];
                expected[g] += e_row[g];
            }
        }
        (observed, expected)
    }

    /// Hypergeometric covariance of the group event counts summed over
    /// event times. A time with a single subject at risk contributes nothing.
    pub fn variance(&self) -> SquareMatrix {
        let k = self.k;
        let mut v = SquareMatrix::zeros(k);
        for j in 0..self.rows() {
            let n = self.at_risk_total[j];
            let d = self.events_total[j];
            if n <= 1.0 {
                continue;
            }
            let c = d * (n - d) / (n - 1.0);
            let risk = &self.per_group_at_risk[j];
            for a in 0..k {
                let ra = risk[a] / n;
                for b in 0..k {
                    let rb = risk[b] / n;
                    let delta = if a == b { 1.0 } else { 0.0 };
                    v.add(a, b, c * ra * (delta - rb));
                }
            }
        }
        v
    }
}

/// Event table for hard labels in `[0, k)`.
pub fn build_event_table(
    records: &[SurvivalRecord],
    labels: &[usize],
    k: usize,
) -> Result<EventTable> {
    if records.is_empty() {
        return Err(Error::invalid("no survival records"));
    }
    if labels.len() != records.len() {
        return Err(Error::invalid(format!(
            "labels/records length mismatch: {} vs {}",
            labels.len(),
            records.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} outside [0, {k})")));
    }
    let index = RiskSetIndex::new(records)?;
    let one_hot: Vec<Vec<f64>> = (0..k)
        .map(|g| (0..k).map(|h| if g == h { 1.0 } else { 0.0 }).collect())
        .collect();
    Ok(index.table(k, |i| one_hot[labels[i]].as_slice()))
}

// ── Kaplan–Meier ────────────────────────────────────────────────────────────

const Z_975: f64 = 1.959_963_984_540_054;

/// Right-continuous step function produced by [`kaplan_meier`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvivalCurve {
    /// Distinct event times, increasing.
    pub times: Vec<f64>,
    /// Survival just after each time.
    pub survival: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub at_risk: Vec<f64>,
    pub events: Vec<f64>,
}

impl StepSurvivalCurve {
    /// S(t); equals 1 before the first event time.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// First time at which S(t) ≤ 0.5, if the curve gets there.
    pub fn median(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.survival)
            .find(|(_, &s)| s <= 0.5)
            .map(|(&t, _)| t)
    }
}

/// Product-limit estimator with 95% bands from Greenwood's variance on the
/// log-survival scale, clipped to [0, 1].
pub fn kaplan_meier(records: &[SurvivalRecord]) -> Result<StepSurvivalCurve> {
    let index = RiskSetIndex::new(records)?;
    let rows = index.rows();
    let mut curve = StepSurvivalCurve {
        times: index.times.clone(),
        survival: Vec::with_capacity(rows),
        ci_lower: Vec::with_capacity(rows),
        ci_upper: Vec::with_capacity(rows),
        at_risk: index.at_risk_total.clone(),
        events: index.events_total.clone(),
    };
    let mut s = 1.0;
    let mut greenwood = 0.0;
    for j in 0..rows {
        let n = index.at_risk_total[j];
        let d = index.events_total[j];
        s *= 1.0 - d / n;
        if n > d {
            greenwood += d / (n * (n - d));
        } else {
            greenwood = f64::INFINITY;
        }
        let (lo, hi) = if s > 0.0 && greenwood.is_finite() {
            let half = Z_975 * greenwood.sqrt();
            ((s * (-half).exp()).clamp(0.0, 1.0), (s * half.exp()).clamp(0.0, 1.0))
        } else {
            (0.0, 0.0)
        };
        curve.survival.push(s);
        curve.ci_lower.push(lo.min(s));
        curve.ci_upper.push(hi.max(s));
    }
    Ok(curve)
}

// ── Logrank ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogrankTest {
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    statrs::function::gamma::gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// k-group logrank test on hard labels.
///
/// V has rank k−1 (its rows sum to zero), so the quadratic form uses the
/// leading (k−1)×(k−1) block and the first k−1 entries of Z.
pub fn multivariate_logrank_hard(
    records: &[SurvivalRecord],
    labels: &[usize],
    k: usize,
) -> Result<LogrankTest> {
    if k < 2 {
        return Err(Error::invalid("logrank test needs k >= 2"));
    }
    let table = build_event_table(records, labels, k)?;
    let (observed, expected) = table.observed_expected();
    let z: Vec<f64> = observed
        .iter()
        .zip(&expected)
        .take(k - 1)
        .map(|(o, e)| o - e)
        .collect();
    let v = table.variance().leading(k - 1);
    let w = v.solve_spd(&z)?;
    let statistic = z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    Ok(LogrankTest {
        statistic,
        p_value: chi_square_sf(statistic, k - 1),
        degrees_of_freedom: k - 1,
        observed,
        expected,
    })
}

// ── Concordance ─────────────────────────────────────────────────────────────

/// Harrell's c-index. Higher score means predicted shorter survival.
///
/// A pair is comparable when the subject with the shorter time had an event;
/// at equal times an event paired with a censoring counts, two events do not.
/// Score ties count one half.
pub fn concordance_index(risk_scores: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if risk_scores.len() != records.len() {
        return Err(Error::invalid(format!(
            "scores/records length mismatch: {} vs {}",
            risk_scores.len(),
            records.len()
        )));
    }
    let mut comparable = 0.0_f64;
    let mut concordant = 0.0_f64;
    for i in 0..records.len() {
        if !records[i].event {
            continue;
        }
        for j in 0..records.len() {
            if i == j {
                continue;
            }
            let earlier = records[i].time < records[j].time
                || (records[i].time == records[j].time && !records[j].event);
            if !earlier {
                continue;
            }
            comparable += 1.0;
            if risk_scores[i] > risk_scores[j] {
                concordant += 1.0;
            } else if risk_scores[i] == risk_scores[j] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0.0 {
        return Err(Error::UndefinedCIndex);
    }
    Ok(concordant / comparable)
}
