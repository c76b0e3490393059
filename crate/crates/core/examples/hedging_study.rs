//! IMCC against regular ES under risk-factor, horizon and position hedges.
use frtb_ima::allocation::{allocate, regular_euler_alloc, Scheme};
use frtb_ima::es::{imcc, regular_es, EsConfig};
use frtb_ima::profile::LiquidityLadder;
use frtb_ima::sim::Preset;

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let cfg = EsConfig::default();
    for name in ["sim42.i", "sim42.ii", "sim42.iii"] {
        let preset = Preset::by_name(name)?;
        let (sim, ctx) = preset.clone().with_seed(1).context(&ladder)?;
        let charge = imcc(&ctx, &cfg)?.imcc_total;
        let es = regular_es(&sim.current, &cfg)?;
        let euler = allocate(Scheme::Euler, &ctx, &cfg)?;
        let regular = regular_euler_alloc(&sim.current, &cfg)?;
        println!(
            "{name:<10} IMCC {charge:6.3}  ES {es:6.3}  ratio {:5.2}  min bucket euler {:6.2}%  regular {:6.2}%  ({})",
            charge / es,
            100.0 * min(&euler.second_step) / euler.imcc_total,
            100.0 * min(&regular.raw) / regular.es,
            preset.description
        );
    }
    Ok(())
}
