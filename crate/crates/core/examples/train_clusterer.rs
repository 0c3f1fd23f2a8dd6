//! Train one network on a synthetic cohort, inspect the training history,
//! save and reload a checkpoint, then plot Kaplan–Meier curves of the
//! predicted clusters.
//!
//! ```bash
//! cargo run --release -p survclust --example train_clusterer -- /tmp/survclust-demo
//! ```

use std::path::PathBuf;

use survclust::evaluate::{recovery_report, train_ordered};
use survclust::neural::{forward, Checkpoint};
use survclust::report::{cluster_curves, history_csv, km_csv, km_svg, recovery_text};
use survclust::simulate::{generate_cohort, CohortSpec};
use survclust::{LossConfig, NetworkSpec, Standardizer, TrainConfig};

fn main() -> survclust::Result<()> {
    env_logger::init();
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "survclust-demo".into()));
    std::fs::create_dir_all(&out_dir)?;

    let seed = 5;
    let train_set = generate_cohort(&CohortSpec::three_group(2000, seed))?;
    let test_set = generate_cohort(&CohortSpec::three_group(1000, seed + 1000))?;
    let standardizer = Standardizer::fit(&train_set.features)?;
    let x = standardizer.transform(&train_set.features)?;

    let spec = NetworkSpec::new(vec![3, 16, 3], seed);
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let outcome = train_ordered(&spec, &x, &train_set.records, &cfg, &LossConfig::default())?;
    for h in outcome.history.iter().step_by(10) {
        println!("epoch {:>3}: objective {:>9.3}  statistic {:>9.3}  penalty {:.4}", h.epoch, h.objective, h.statistic, h.penalty);
    }
    std::fs::write(out_dir.join("history.csv"), history_csv(&outcome.history))?;

    let ckpt = Checkpoint::new(&outcome.params, seed, Some(standardizer));
    let text = ckpt.to_json()?;
    std::fs::write(out_dir.join("checkpoint.json"), &text)?;
    let restored = Checkpoint::from_json(&text)?;
    assert_eq!(restored, ckpt);

    let params = restored.params()?;
    let test_x = restored.standardizer.as_ref().expect("saved").transform(&test_set.features)?;
    let soft = forward(&params, &test_x)?;
    let report = recovery_report(&soft, &test_set.records, test_set.truth.as_deref())?;
    print!("\n{}", recovery_text("independent test cohort", &report));

    let curves = cluster_curves(&test_set.records, &soft.argmax(), params.k());
    std::fs::write(out_dir.join("km.csv"), km_csv(&curves))?;
    std::fs::write(out_dir.join("km.svg"), km_svg(&curves))?;
    println!("\noutputs in {}", out_dir.display());
    Ok(())
}
