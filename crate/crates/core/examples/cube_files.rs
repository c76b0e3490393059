//! Writes a simulated cube and mask to disk and reads them back.
use frtb_ima::io::{read_cube, read_mask, sidecar_path, write_cube, write_mask};
use frtb_ima::profile::LiquidityLadder;
use frtb_ima::sim::Preset;

fn main() -> frtb_ima::Result<()> {
    let ladder = LiquidityLadder::default();
    let preset = Preset::by_name("sim43.setA")?;
    let sim = preset.simulate()?;
    let dir = std::env::temp_dir().join("frtb-cube-files");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("current.csv");
    write_cube(&path, &sim.current, &ladder, None)?;
    let mask_path = dir.join("mask.json");
    if let Some(mask) = &preset.mask {
        write_mask(&mask_path, mask, &ladder)?;
    }
    let back = read_cube(&path, &ladder)?;
    assert_eq!(back.raw(), sim.current.raw());
    let mask = read_mask(&mask_path, &ladder)?;
    println!("{} and {} round-trip", path.display(), sidecar_path(&path).display());
    println!("excluded buckets: {:?}", mask.excluded());
    Ok(())
}
