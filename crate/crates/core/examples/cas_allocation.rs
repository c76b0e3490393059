//! Constrained Aumann-Shapley allocation averaged over the 120 orderings of
//! the liquidity horizons, next to the Euler split.
use frtb_ima::allocation::{allocate, mean_eta, Scheme};
use frtb_ima::es::{EsConfig, ScalingContext};
use frtb_ima::profile::LiquidityLadder;
use frtb_ima::sim::random_portfolio;
use frtb_ima::PermutationTable;

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let (current, _, _) = random_portfolio(21, 3, 250)?;
    let ctx = ScalingContext::from_cubes(&current, None, None, &ladder, 0.5)?;
    let cfg = EsConfig::default();

    // mean eta weights for bucket ES (1, 2, 2, 1, 3)
    let perms = PermutationTable::new();
    let es = [1.0, 2.0, 2.0, 1.0, 3.0];
    let weights: Vec<String> = (0..5).map(|j| format!("{:.4}", mean_eta(&es, &perms, j, false))).collect();
    println!("mean eta: {}", weights.join(" "));

    let euler = allocate(Scheme::Euler, &ctx, &cfg)?;
    let cas = allocate(Scheme::Cas, &ctx, &cfg)?;
    for (n, id) in cas.position_ids.iter().enumerate() {
        println!(
            "{id}: euler {:8.4}  cas {:8.4}",
            euler.totals[n], cas.totals[n]
        );
    }
    println!("both sum to {:.4}", cas.grand_total());
    Ok(())
}
