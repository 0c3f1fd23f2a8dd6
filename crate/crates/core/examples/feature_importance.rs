//! Permutation importance of each input feature for a trained clusterer,
//! measured as the drop in the hard logrank statistic of its predictions.
//! A pure-noise column is appended to the synthetic features as a control.
//!
//! ```bash
//! cargo run --release -p survclust --example feature_importance
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use survclust::evaluate::{permutation_importance, train_ordered};
use survclust::simulate::{generate_cohort, CohortSpec};
use survclust::survival::multivariate_logrank_hard;
use survclust::{FeatureMatrix, LossConfig, NetworkSpec, Standardizer, TrainConfig};

fn main() -> survclust::Result<()> {
    let seed = 3;
    let cohort = generate_cohort(&CohortSpec::three_group(2000, seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rows: Vec<Vec<f64>> = (0..cohort.len())
        .map(|i| {
            let mut r = cohort.features.row(i).to_vec();
            r.push(StandardNormal.sample(&mut rng));
            r
        })
        .collect();
    let raw = FeatureMatrix::from_rows(&rows)?;
    let x = Standardizer::fit(&raw)?.transform(&raw)?;

    let spec = NetworkSpec::new(vec![x.cols(), 16, 3], seed);
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let outcome = train_ordered(&spec, &x, &cohort.records, &cfg, &LossConfig::default())?;

    let statistic = |soft: &survclust::SoftAssignment, records: &[survclust::SurvivalRecord]| {
        Ok(multivariate_logrank_hard(records, &soft.argmax(), soft.k()).map_or(0.0, |t| t.statistic))
    };
    let importance = permutation_importance(&outcome.params, &x, &cohort.records, statistic, 10, seed)?;
    let names = ["x0", "x1", "x2 (no group signal)", "noise"];
    for (name, v) in names.iter().zip(&importance) {
        println!("{name:<24} {v:>9.2}");
    }
    Ok(())
}
