//! Liquidity-horizon adjustment of a hand-built cube under both bucket
//! conventions.
use frtb_ima::profile::{BucketConvention, LiquidityLadder, RiskClass, ScenarioCube};
use frtb_ima::adjust;

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let m = 4;
    for convention in [BucketConvention::Cascade, BucketConvention::Isolated] {
        let mut cube = ScenarioCube::zeros(1, m, convention)?;
        cube.bucket_mut(0, RiskClass::EQ.index(), 0).copy_from_slice(&[1.0, -0.5, 0.2, 0.0]);
        cube.bucket_mut(0, RiskClass::EQ.index(), 2).copy_from_slice(&[0.3, 0.3, -0.1, 0.4]);
        let profile = adjust(&cube, &ladder);
        println!("{convention:?}");
        for j in 0..5 {
            println!("  LH {:>3}d  scale {:.4}  {:?}", ladder.days(j), ladder.scale(j), profile.bucket(RiskClass::EQ.index(), j));
        }
    }
    Ok(())
}
