//! Assign samples to cells and score the resulting predictions with the
//! accuracy-at-radius metric.
//!
//! ```bash
//! cargo run --example assign_and_evaluate
//! ```

use semgeo::geo::{accuracy_at, great_circle_distance, STANDARD_RADII_KM};
use semgeo::hierarchy::{build_hierarchy, AddressVector};
use semgeo::partitioning::{assign, construct_partitioning, CenterMode};
use semgeo::synth::{generate_world, WorldConfig};

fn main() -> semgeo::Result<()> {
    let world = generate_world(&WorldConfig::default());
    let addresses: Vec<AddressVector> = world
        .samples
        .iter()
        .map(|s| s.address.clone().unwrap())
        .collect();
    let build = build_hierarchy(&addresses)?;
    let training: Vec<_> = world
        .samples
        .iter()
        .zip(&build.remapped)
        .map(|(s, r)| (s.coordinate, r.clone().unwrap()))
        .collect();
    let partitioning = construct_partitioning(&build.forest, &training, 50, CenterMode::Spherical)?;
    println!("partitioning with {} cells at tau 50", partitioning.len());

    // predict every sample at the center of its own cell and measure errors
    let mut pairs = Vec::new();
    let mut worst = 0.0f64;
    for (coordinate, address) in &training {
        let cell = assign(address, &partitioning).expect("training samples are assignable");
        let predicted = partitioning.center(cell).unwrap();
        worst = worst.max(great_circle_distance(*coordinate, predicted));
        pairs.push((*coordinate, predicted));
    }
    println!("worst error {worst:.2} km");

    let table = accuracy_at(&pairs, &STANDARD_RADII_KM)?;
    println!("radius_km  accuracy");
    for entry in &table.entries {
        println!("{:>9}  {:>7.1}%", entry.radius_km, entry.accuracy * 100.0);
    }
    Ok(())
}
