//! Synthetic cohorts with known prognostic groups.
//!
//! Each subject draws a group, Gaussian features from that group's mixture
//! component and a Weibull event time by inverse-transform sampling. Two
//! censoring mechanisms compete with the event: an exponential censoring
//! time and a fixed administrative horizon.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Cohort, FeatureMatrix};
use crate::error::{Error, Result};
use crate::survival::SurvivalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullGroup {
    /// ρ
    pub shape: f64,
    /// λ
    pub scale: f64,
}

impl WeibullGroup {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        let g = Self { shape, scale };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.shape) || !ok(self.scale) {
            return Err(Error::InvalidSpec(format!(
                "Weibull shape and scale must be finite and positive, got ({}, {})",
                self.shape, self.scale
            )));
        }
        Ok(())
    }

    pub fn median(&self) -> f64 {
        self.scale * std::f64::consts::LN_2.powf(1.0 / self.shape)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            1.0 - (-(t / self.scale).powf(self.shape)).exp()
        }
    }
}

/// The three prognostic groups of the reference synthetic experiment.
pub const REFERENCE_GROUPS: [WeibullGroup; 3] = [
    WeibullGroup {
        shape: 0.539,
        scale: 3068.812,
    },
    WeibullGroup {
        shape: 0.898,
        scale: 5114.687,
    },
    WeibullGroup {
        shape: 1.257,
        scale: 7160.562,
    },
];

pub const DEFAULT_CENSOR_SCALE: f64 = 10_000.0;
pub const DEFAULT_ADMIN_HORIZON: f64 = 4_000.0;

/// `T = λ (−ln(1 − u))^{1/ρ}` for `u` in (0, 1).
pub fn weibull_sample(group: &WeibullGroup, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!("uniform draw must lie in (0, 1), got {u}")));
    }
    group.validate()?;
    Ok(group.scale * (-(1.0 - u).ln()).powf(1.0 / group.shape))
}

/// Competing censoring mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Censoring {
    /// Mean of the exponential censoring time.
    pub censor_scale: f64,
    /// Follow-up ends here for everyone.
    pub admin_horizon: f64,
}

impl Default for Censoring {
    fn default() -> Self {
        Self {
            censor_scale: DEFAULT_CENSOR_SCALE,
            admin_horizon: DEFAULT_ADMIN_HORIZON,
        }
    }
}

impl Censoring {
    fn validate(&self) -> Result<()> {
        if !(self.censor_scale > 0.0) || !(self.admin_horizon > 0.0) {
            return Err(Error::InvalidSpec(
                "censor_scale and admin_horizon must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Draws an event time and a censoring time and returns the observed
    /// record. The event counts only if it strictly precedes both censoring
    /// times.
    pub fn observe<R: Rng + ?Sized>(&self, group: &WeibullGroup, rng: &mut R) -> Result<SurvivalRecord> {
        let event_time = weibull_sample(group, rng.sample(Open01))?;
        let u: f64 = rng.sample(Open01);
        let censor_time = -self.censor_scale * (1.0 - u).ln();
        let censor = censor_time.min(self.admin_horizon);
        if event_time < censor {
            SurvivalRecord::new(event_time, true)
        } else {
            SurvivalRecord::new(censor, false)
        }
    }
}

/// One mixture component: survival law plus Gaussian feature distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub weibull: WeibullGroup,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub groups: Vec<GroupSpec>,
    #[serde(flatten)]
    pub censoring: Censoring,
    pub n: usize,
    pub seed: u64,
}

/// Side length of the equilateral triangle on which the default feature
/// means sit.
pub const DEFAULT_MEAN_SPACING: f64 = 3.0;

impl CohortSpec {
    /// Three equally weighted groups with the reference Weibull laws and
    /// unit-covariance 3-D Gaussian features whose means form an equilateral
    /// triangle of side [`DEFAULT_MEAN_SPACING`].
    pub fn three_group(n: usize, seed: u64) -> Self {
        let s = DEFAULT_MEAN_SPACING;
        let means = [
            vec![0.0, 0.0, 0.0],
            vec![s, 0.0, 0.0],
            vec![s / 2.0, s * 3f64.sqrt() / 2.0, 0.0],
        ];
        let identity: Vec<Vec<f64>> = (0..3)
            .map(|r| (0..3).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
            .collect();
        let groups = REFERENCE_GROUPS
            .iter()
            .zip(means)
            .map(|(w, mean)| GroupSpec {
                weibull: *w,
                mean,
                covariance: identity.clone(),
                weight: 1.0 / 3.0,
            })
            .collect();
        Self {
            groups,
            censoring: Censoring::default(),
            n,
            seed,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.groups.first().map(|g| g.mean.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::InvalidSpec("at least one group is required".into()));
        }
        self.censoring.validate()?;
        let dim = self.feature_dim();
        let mut total = 0.0;
        for (g, group) in self.groups.iter().enumerate() {
            group.weibull.validate()?;
            if !(group.weight >= 0.0) {
                return Err(Error::InvalidSpec(format!("group {g}: negative weight")));
            }
            total += group.weight;
            if group.mean.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "group {g}: mean has {} entries, expected {dim}",
                    group.mean.len()
                )));
            }
            covariance_factor(&group.covariance, dim)
                .map_err(|e| Error::InvalidSpec(format!("group {g}: {e}")))?;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("group weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// `A` with `A Aᵀ = Σ` for a symmetric positive semi-definite `Σ`.
fn covariance_factor(cov: &[Vec<f64>], dim: usize) -> std::result::Result<DMatrix<f64>, String> {
    if cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
        return Err(format!("covariance must be {dim}x{dim}"));
    }
    let m = DMatrix::from_fn(dim, dim, |r, c| cov[r][c]);
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    if m.iter().any(|v| !v.is_finite()) {
        return Err("covariance has non-finite entries".into());
    }
    for r in 0..dim {
        for c in 0..r {
            if (m[(r, c)] - m[(c, r)]).abs() > 1e-12 * scale {
                return Err("covariance is not symmetric".into());
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err("covariance is not positive semi-definite".into());
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Samples a cohort; `truth` holds each subject's generating group.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let dim = spec.feature_dim();
    let factors: Vec<DMatrix<f64>> = spec
        .groups
        .iter()
        .map(|g| covariance_factor(&g.covariance, dim).map_err(Error::InvalidSpec))
        .collect::<Result<_>>()?;
    let mut cumulative = Vec::with_capacity(spec.groups.len());
    let mut acc = 0.0;
    for g in &spec.groups {
        acc += g.weight;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = FeatureMatrix::zeros(spec.n, dim);
    let mut records = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let u: f64 = rng.random::<f64>() * acc;
        let g = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(spec.groups.len() - 1);
        let group = &spec.groups[g];
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for r in 0..dim {
            let mut x = group.mean[r];
            for c in 0..dim {
                x += factors[g][(r, c)] * z[c];
            }
            features.set(i, r, x);
        }
        records.push(spec.censoring.observe(&group.weibull, &mut rng)?);
        truth.push(g);
    }
    Ok(Cohort {
        features,
        records,
        truth: Some(truth),
    })
}

// ── Digits ──────────────────────────────────────────────────────────────────

/// Assignment of digits 1–9 to three groups: `order[0..3]` form group 0,
/// `order[3..6]` group 1 and `order[6..9]` group 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitGrouping {
    pub order: [u8; 9],
}

impl DigitGrouping {
    pub fn identity() -> Self {
        Self {
            order: [1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }

    pub fn from_order(order: [u8; 9]) -> Result<Self> {
        let mut seen = [false; 10];
        for &d in &order {
            if !(1..=9).contains(&d) || seen[d as usize] {
                return Err(Error::invalid("digit order must be a permutation of 1..=9"));
            }
            seen[d as usize] = true;
        }
        Ok(Self { order })
    }

    /// Fixed permutation derived from `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut order = Self::identity().order;
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { order }
    }

    pub fn group_of(&self, digit: u8) -> Result<usize> {
        if digit == 0 {
            return Err(Error::invalid("digit 0 is excluded from the grouping"));
        }
        self.order
            .iter()
            .position(|&d| d == digit)
            .map(|p| p / 3)
            .ok_or_else(|| Error::invalid(format!("digit {digit} outside 1..=9")))
    }
}

/// Maps digit labels (1–9) to groups through the seeded permutation.
pub fn digits_to_groups(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let grouping = DigitGrouping::seeded(seed);
    labels.iter().map(|&d| grouping.group_of(d)).collect()
}

/// 8×8 digit images with labels, one image per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitImages {
    pub pixels: FeatureMatrix,
    pub labels: Vec<u8>,
}

impl DigitImages {
    /// Reads `label,pixel_0,...,pixel_63` rows.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let width = rdr.headers()?.len();
        if width < 2 {
            return Err(Error::Data("digits CSV needs a label and pixel columns".into()));
        }
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = |what: &str| Error::Data(format!("digits row {}: bad {what}", line + 1));
            let label: u8 = row.get(0).unwrap_or("").trim().parse().map_err(|_| bad("label"))?;
            if label > 9 {
                return Err(bad("label"));
            }
            labels.push(label);
            for c in 1..width {
                data.push(row.get(c).unwrap_or("").trim().parse::<f64>().map_err(|_| bad("pixel"))?);
            }
        }
        let pixels = FeatureMatrix::new(labels.len(), width - 1, data)?;
        Ok(Self { pixels, labels })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Drops digit 0, maps the remaining digits to the three reference groups
/// and simulates a censored survival outcome for each image.
pub fn digits_cohort(
    images: &DigitImages,
    grouping: &DigitGrouping,
    censoring: &Censoring,
    seed: u64,
) -> Result<Cohort> {
    censoring.validate()?;
    let keep: Vec<usize> = (0..images.labels.len())
        .filter(|&i| images.labels[i] != 0)
        .collect();
    if keep.is_empty() {
        return Err(Error::invalid("no digits 1-9 present"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(keep.len());
    let mut truth = Vec::with_capacity(keep.len());
    for &i in &keep {
        let g = grouping.group_of(images.labels[i])?;
        records.push(censoring.observe(&REFERENCE_GROUPS[g], &mut rng)?);
        truth.push(g);
    }
    Ok(Cohort {
        features: images.pixels.select(&keep),
        records,
        truth: Some(truth),
    })
}
