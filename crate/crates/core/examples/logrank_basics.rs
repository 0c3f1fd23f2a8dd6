//! Classical survival summaries on a tiny two-arm data set: Kaplan–Meier
//! curves, the hard logrank test and Harrell's c-index.
//!
//! ```bash
//! cargo run -p survclust --example logrank_basics
//! ```

use survclust::survival::{
    build_event_table, concordance_index, kaplan_meier, multivariate_logrank_hard, records_from,
};

fn main() -> survclust::Result<()> {
    let times = [6.0, 6.0, 6.0, 7.0, 10.0, 13.0, 16.0, 22.0, 23.0, 1.0, 1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 5.0, 5.0];
    let events = [
        true, true, true, false, true, true, true, true, false, true, true, true, true, true, true,
        true, true, false,
    ];
    let arm: Vec<usize> = (0..times.len()).map(|i| usize::from(i >= 9)).collect();
    let records = records_from(&times, &events)?;

    for g in 0..2 {
        let members: Vec<_> = records.iter().zip(&arm).filter(|(_, &a)| a == g).map(|(r, _)| *r).collect();
        let km = kaplan_meier(&members)?;
        println!("arm {g}: median {:?}", km.median());
        println!("   time  at_risk  events  survival   95% CI");
        for j in 0..km.times.len() {
            println!(
                "  {:>5}  {:>7}  {:>6}  {:>8.4}  [{:.3}, {:.3}]",
                km.times[j], km.at_risk[j], km.events[j], km.survival[j], km.ci_lower[j], km.ci_upper[j]
            );
        }
    }

    let table = build_event_table(&records, &arm, 2)?;
    let (observed, expected) = table.observed_expected();
    println!("\nobserved {observed:?}\nexpected {expected:.3?}");

    let test = multivariate_logrank_hard(&records, &arm, 2)?;
    println!(
        "logrank chi2 = {:.4} on {} df, p = {:.3e}",
        test.statistic, test.degrees_of_freedom, test.p_value
    );

    // arm 1 dies earlier, so its membership is a sensible risk score
    let risk: Vec<f64> = arm.iter().map(|&a| a as f64).collect();
    println!("c-index of arm membership: {:.4}", concordance_index(&risk, &records)?);
    Ok(())
}
