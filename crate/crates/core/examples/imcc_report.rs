//! Capital charge of a random portfolio with a stress period and a reduced
//! risk-factor set.
use frtb_ima::es::{imcc, reduced_set_check, EsConfig, ScalingContext};
use frtb_ima::profile::{row_label, LiquidityLadder};
use frtb_ima::sim::random_portfolio;

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let (current, stress, mask) = random_portfolio(7, 4, 250)?;
    let ctx = ScalingContext::from_cubes(&current, Some(&stress), Some(&mask), &ladder, 0.5)?;
    let cfg = EsConfig::default();
    let report = imcc(&ctx, &cfg)?;
    for row in 0..6 {
        let ratio = report.stress_ratio[row].map_or("-".to_string(), |r| format!("{r:.3}"));
        println!(
            "{:>3}  class ES {:8.4}  stress ratio {:>6}  IMCC {:8.4}",
            row_label(row),
            report.class_es[row],
            ratio,
            report.imcc_class[row]
        );
    }
    println!("IMCC total {:.4}", report.imcc_total);
    let check = reduced_set_check(&ctx, &cfg)?;
    println!("reduced set covers >= {:.0}% in every class: {}", 100.0 * check.threshold, check.all_pass());
    Ok(())
}
