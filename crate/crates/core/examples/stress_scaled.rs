//! Stress-scaled allocation on the two-position study: the plain schemes
//! ignore where the stress period hurts, the scaled ones move capital to the
//! stressed buckets.
use frtb_ima::allocation::{allocate, Scheme};
use frtb_ima::es::{reduced_set_check, EsConfig};
use frtb_ima::profile::{LiquidityLadder, RiskClass};
use frtb_ima::sim::Preset;

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let cfg = EsConfig::default();
    for name in ["sim43.setA", "sim43.setB"] {
        let (_, ctx) = Preset::by_name(name)?.with_seed(0).context(&ladder)?;
        let check = reduced_set_check(&ctx, &cfg)?;
        let cm = &check.rows[RiskClass::CM.index()];
        println!("{name}: CM reduced/full ES {:.2}", cm.ratio.unwrap_or(f64::NAN));
        let plain = allocate(Scheme::Euler, &ctx, &cfg)?;
        let scaled = allocate(Scheme::EulerScaled, &ctx, &cfg)?;
        for (n, class, k) in [(1, RiskClass::CM, 3), (0, RiskClass::EQ, 2)] {
            let pct = |t: &frtb_ima::AllocationTable| 100.0 * t.raw_bucket(n, class.index(), k) / t.imcc_total;
            println!(
                "  {} {}d P{}: euler {:5.2}%  euler-scaled {:5.2}%",
                class.code(),
                ladder.days(k),
                n + 1,
                pct(&plain),
                pct(&scaled)
            );
        }
    }
    Ok(())
}
