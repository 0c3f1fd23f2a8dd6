//! Five-fold cross-validated recovery of the three synthetic risk groups.
//!
//! ```bash
//! cargo run --release -p survclust --example synthetic_recovery -- 3000 1
//! ```

use survclust::evaluate::{run_cv_experiment, FoldPlan};
use survclust::report::cv_text;
use survclust::simulate::{generate_cohort, CohortSpec};
use survclust::{LossConfig, NetworkSpec, TrainConfig};

fn main() -> survclust::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(3000, |a| a.parse().expect("n"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let cohort = generate_cohort(&CohortSpec::three_group(n, seed))?;
    println!(
        "cohort: {} subjects, censoring rate {:.3}",
        cohort.len(),
        cohort.censoring_rate()
    );

    let spec = NetworkSpec::new(vec![3, 16, 3], seed);
    let train = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let plan = FoldPlan::new(cohort.len(), 5, seed)?;
    let report = run_cv_experiment(&cohort, &spec, &train, &LossConfig::default(), &plan)?;
    print!("{}", cv_text(&report));
    Ok(())
}
