//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survclust::SurvivalRecord;

/// Direct summation over distinct event times, one subject at a time,
/// followed by a dense inverse of the leading (k−1) block.
pub fn brute_force_logrank(records: &[SurvivalRecord], labels: &[usize], k: usize) -> Option<f64> {
    let mut event_times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut z = vec![0.0; k];
    let mut v = DMatrix::<f64>::zeros(k, k);
    for &t in &event_times {
        let mut n_g = vec![0.0; k];
        let mut d_g = vec![0.0; k];
        for (r, &g) in records.iter().zip(labels) {
            if r.time >= t {
                n_g[g] += 1.0;
            }
            if r.event && r.time == t {
                d_g[g] += 1.0;
            }
        }
        let n: f64 = n_g.iter().sum();
        let d: f64 = d_g.iter().sum();
        for g in 0..k {
            z[g] += d_g[g] - n_g[g] * d / n;
        }
        if n > 1.0 {
            let c = d * (n - d) / (n - 1.0);
            for g in 0..k {
                for h in 0..k {
                    let delta = if g == h { 1.0 } else { 0.0 };
                    v[(g, h)] += c * (n_g[g] / n) * (delta - n_g[h] / n);
                }
            }
        }
    }
    let m = k - 1;
    let vm = v.view((0, 0), (m, m)).into_owned();
    let zm = DVector::from_column_slice(&z[..m]);
    let inv = vm.try_inverse()?;
    Some((zm.transpose() * inv * &zm)[(0, 0)])
}

/// Textbook product-limit estimate evaluated right after each distinct
/// event time: (time, survival, Greenwood sum).
pub fn textbook_km(records: &[SurvivalRecord]) -> Vec<(f64, f64, f64)> {
    let mut times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut s = 1.0;
    let mut gw = 0.0;
    let mut out = Vec::new();
    for t in times {
        let n = records.iter().filter(|r| r.time >= t).count() as f64;
        let d = records.iter().filter(|r| r.event && r.time == t).count() as f64;
        s *= 1.0 - d / n;
        gw += if n > d { d / (n * (n - d)) } else { f64::INFINITY };
        out.push((t, s, gw));
    }
    out
}

/// Pair-by-pair Harrell c-index written from the definition.
pub fn brute_force_cindex(scores: &[f64], records: &[SurvivalRecord]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..records.len() {
        for b in (a + 1)..records.len() {
            let (i, j) = if records[a].time < records[b].time
                || (records[a].time == records[b].time && records[a].event && !records[b].event)
            {
                (a, b)
            } else if records[b].time < records[a].time
                || (records[a].time == records[b].time && records[b].event && !records[a].event)
            {
                (b, a)
            } else {
                continue;
            };
            if !records[i].event {
                continue;
            }
            den += 1.0;
            num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Random instance with coarse (tied) times and random censoring; at least
/// one event is guaranteed.
pub fn random_instance(seed: u64, n: usize, k: usize, censor_prob: f64) -> (Vec<SurvivalRecord>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records: Vec<SurvivalRecord> = (0..n)
        .map(|_| {
            let t = rng.random_range(0..25) as f64 + 0.5;
            SurvivalRecord::new(t, !rng.random_bool(censor_prob)).unwrap()
        })
        .collect();
    if !records.iter().any(|r| r.event) {
        records[0].event = true;
    }
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    (records, labels)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
