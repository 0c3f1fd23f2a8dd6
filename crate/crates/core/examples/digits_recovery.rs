//! Digits 1–9 of the 8×8 handwritten digits set are split into three groups,
//! each group gets its own Weibull survival law, and a 64 → 32 → 3 network is
//! trained on raw pixels from survival outcomes alone.
//!
//! ```bash
//! cargo run --release -p survclust --example digits_recovery -- crates/core/tests/fixtures/digits8x8.csv 1
//! ```

use survclust::config::TrainSection;
use survclust::evaluate::{run_cv_experiment, FoldPlan};
use survclust::report::cv_text;
use survclust::simulate::{digits_cohort, Censoring, DigitGrouping, DigitImages};

fn main() -> survclust::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "crates/core/tests/fixtures/digits8x8.csv".into());
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let images = DigitImages::load(path.as_ref())?;
    let grouping = DigitGrouping::seeded(seed);
    for g in 0..3 {
        let digits: Vec<u8> = (1..=9).filter(|&d| grouping.group_of(d).ok() == Some(g)).collect();
        println!("group {g}: digits {digits:?}");
    }
    let cohort = digits_cohort(&images, &grouping, &Censoring::default(), seed)?;
    println!("{} images, censoring rate {:.3}", cohort.len(), cohort.censoring_rate());

    let section = TrainSection::digits_reference();
    let spec = section.network_spec(cohort.features.cols(), seed)?;
    let plan = FoldPlan::new(cohort.len(), 5, seed)?;
    let report = run_cv_experiment(&cohort, &spec, &section.train_config(seed)?, &section.loss_config()?, &plan)?;
    print!("{}", cv_text(&report));
    Ok(())
}
