//! The differentiable objective: soft memberships, the partial logrank
//! statistic, the balance barrier and the exact gradient, checked against a
//! central finite difference.
//!
//! ```bash
//! cargo run -p survclust --example soft_logrank
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survclust::loss::{balance_penalty, objective_from_logits, total_objective, LossConfig, SoftAssignment};
use survclust::survival::{multivariate_logrank_hard, SurvivalRecord};

fn main() -> survclust::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, k) = (40, 3);
    let records: Vec<SurvivalRecord> = (0..n)
        .map(|_| SurvivalRecord::new(rng.random_range(0.1..10.0), rng.random_bool(0.7)))
        .collect::<Result<_, _>>()?;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let cfg = LossConfig::default();

    // one-hot memberships reproduce the hard test
    let hard = multivariate_logrank_hard(&records, &labels, k)?;
    let exact = LossConfig { variance_ridge: 0.0, ..cfg };
    let one_hot = total_objective(&SoftAssignment::one_hot(&labels, k)?, &records, &exact)?;
    println!("hard statistic     {:.12}", hard.statistic);
    println!("one-hot partial    {:.12}", one_hot.statistic);

    // uniform memberships carry no signal
    let uniform = total_objective(&SoftAssignment::uniform(n, k), &records, &cfg)?;
    println!("uniform partial    {:.3e}", uniform.statistic);

    for means in [[1.0 / 3.0; 3], [0.5, 0.25, 0.25], [0.9, 0.05, 0.05]] {
        println!("penalty at {means:.3?} = {:.4}", balance_penalty(&means, cfg.prob_floor));
    }

    let logits: Vec<f64> = (0..n * k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let at = objective_from_logits(n, k, &logits, &records, &cfg)?;
    println!(
        "\nsoft objective {:.6} (statistic {:.6}, penalty {:.6})",
        at.value.total, at.value.statistic, at.value.penalty
    );
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..logits.len() {
        let mut up = logits.clone();
        let mut down = logits.clone();
        up[j] += h;
        down[j] -= h;
        let fu = objective_from_logits(n, k, &up, &records, &cfg)?.value.total;
        let fd = objective_from_logits(n, k, &down, &records, &cfg)?.value.total;
        let numeric = (fu - fd) / (2.0 * h);
        worst = worst.max((numeric - at.grad_logits[j]).abs());
    }
    println!("max |analytic - finite difference| over {} logits: {worst:.2e}", logits.len());
    Ok(())
}
