//! Euler allocation of the IMCC to positions and buckets, compared with the
//! Euler allocation of the plain ES of the netted portfolio.
use frtb_ima::allocation::{allocate, regular_euler_alloc, Scheme};
use frtb_ima::es::{EsConfig, ScalingContext};
use frtb_ima::profile::LiquidityLadder;
use frtb_ima::sim::random_portfolio;

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let (current, _, _) = random_portfolio(3, 5, 250)?;
    let ctx = ScalingContext::from_cubes(&current, None, None, &ladder, 0.5)?;
    let cfg = EsConfig::default();
    let table = allocate(Scheme::Euler, &ctx, &cfg)?;
    let regular = regular_euler_alloc(&current, &cfg)?;
    println!("IMCC {:.4}  regular ES {:.4}", table.imcc_total, regular.es);
    for (n, id) in table.position_ids.iter().enumerate() {
        println!(
            "{id}: {:6.2}% of IMCC, {:6.2}% of regular ES",
            100.0 * table.totals[n] / table.imcc_total,
            100.0 * regular.position_total(n) / regular.es
        );
    }
    let rec = table.reconciliation();
    println!("allocated {:.6}, gap {:.2e}", rec.grand_total, rec.abs_gap);
    Ok(())
}
