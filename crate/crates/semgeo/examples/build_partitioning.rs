//! Construct a three-level partitioning over a synthetic world and inspect
//! its cells.
//!
//! ```bash
//! cargo run --example build_partitioning
//! ```

use semgeo::hierarchy::{build_hierarchy, AddressVector};
use semgeo::partitioning::{construct_multi, CenterMode};
use semgeo::synth::{generate_world, WorldConfig};

fn main() -> semgeo::Result<()> {
    let world = generate_world(&WorldConfig::default());
    println!(
        "world: {} samples in {} cities",
        world.samples.len(),
        world.cities.len()
    );

    let addresses: Vec<AddressVector> = world
        .samples
        .iter()
        .map(|s| s.address.clone().expect("synthetic samples carry addresses"))
        .collect();
    let build = build_hierarchy(&addresses)?;

    let samples: Vec<_> = world
        .samples
        .iter()
        .zip(&build.remapped)
        .map(|(s, r)| (s.coordinate, r.clone().unwrap()))
        .collect();

    // thresholds chosen so the levels land on districts, cities, countries
    let taus = [50, 200, 1000];
    let mp = construct_multi(&build.forest, &samples, &taus, CenterMode::Spherical)?;
    for (i, level) in mp.levels().iter().enumerate() {
        println!(
            "level {i}: tau_min {:>4} -> {:>3} cells",
            level.tau_min(),
            level.len()
        );
    }

    // walk one fine cell up the levels
    let fine_cell = mp.finest().cells()[0];
    let center = mp.finest().center(fine_cell).unwrap();
    println!(
        "cell {fine_cell}: center ({:.4}, {:.4}), {} carrying samples",
        center.lat_deg(),
        center.lon_deg(),
        mp.finest().count(fine_cell).unwrap()
    );
    for level in 1..mp.n_levels() {
        let coarse = mp.cell_at_level(fine_cell, level)?;
        println!("  at level {level}: {coarse}");
    }
    Ok(())
}
