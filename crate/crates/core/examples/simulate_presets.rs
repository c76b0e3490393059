//! Simulated presets against their closed-form normal references.
use frtb_ima::es::{imcc, regular_es, EsConfig};
use frtb_ima::profile::LiquidityLadder;
use frtb_ima::sim::{analytic_reference, Preset, PRESET_NAMES};

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let cfg = EsConfig::default();
    println!("{:<13} {:>9} {:>9} {:>9} {:>9}", "preset", "IMCC", "analytic", "ES", "analytic");
    for name in PRESET_NAMES {
        let preset = Preset::by_name(name)?;
        let (sum_i, sum_e) = (0..10).try_fold((0.0, 0.0), |(a, b), seed| {
            let (sim, ctx) = preset.clone().with_seed(seed).context(&ladder)?;
            Ok::<_, frtb_ima::FrtbError>((a + imcc(&ctx, &cfg)?.imcc_total, b + regular_es(&sim.current, &cfg)?))
        })?;
        let a = analytic_reference(&preset, &cfg, &ladder)?;
        println!(
            "{name:<13} {:9.3} {:9.3} {:9.3} {:9.3}",
            sum_i / 10.0,
            a.imcc_total,
            sum_e / 10.0,
            a.regular_es
        );
    }
    Ok(())
}
