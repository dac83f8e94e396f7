//! Flat (f) versus hierarchical (f*) scoring of per-level class
//! probabilities, plus the multi-level cross-entropy value.
//!
//! ```bash
//! cargo run --example hierarchical_prediction
//! ```

use semgeo::geo::GeoCoordinate;
use semgeo::hierarchy::{build_hierarchy, AddressVector, LocationId};
use semgeo::inference::{
    flat_predict, hierarchical_predict, multi_level_cross_entropy, LevelProbabilities,
};
use semgeo::partitioning::{construct_multi, CenterMode};

fn main() -> semgeo::Result<()> {
    // two regions, two fine cells each; coarse cells N10 and N20
    let mut chains: Vec<(GeoCoordinate, AddressVector)> = Vec::new();
    for _ in 0..3 {
        chains.push((GeoCoordinate::new(0.0, 0.0)?, "N1 N10".parse()?));
        chains.push((GeoCoordinate::new(1.0, 1.0)?, "N3 N10".parse()?));
        chains.push((GeoCoordinate::new(50.0, 50.0)?, "N2 N20".parse()?));
        chains.push((GeoCoordinate::new(51.0, 51.0)?, "N4 N20".parse()?));
    }
    let addresses: Vec<AddressVector> = chains.iter().map(|(_, a)| a.clone()).collect();
    let build = build_hierarchy(&addresses)?;
    let samples: Vec<_> = chains
        .iter()
        .zip(&build.remapped)
        .map(|((c, _), r)| (*c, r.clone().unwrap()))
        .collect();
    let mp = construct_multi(&build.forest, &samples, &[3, 6], CenterMode::Spherical)?;
    let names = |cells: &[LocationId]| {
        cells
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("fine cells:   {}", names(mp.level(0).cells()));
    println!("coarse cells: {}", names(mp.level(1).cells()));

    // the fine level slightly prefers N2, but the coarse level is confident
    // the sample belongs to N10 territory
    let probs = LevelProbabilities::new(
        vec![vec![0.40, 0.55, 0.05, 0.00], vec![0.9, 0.1]],
        &mp,
    )?;
    let flat = flat_predict(&probs, &mp)?;
    let starred = hierarchical_predict(&probs, &mp)?;
    println!("f  picks {} at {}", flat.cell, flat.coordinate);
    println!("f* picks {} at {}", starred.cell, starred.coordinate);

    // loss against the true chain N1 -> N10
    let truth = [
        "N1".parse::<LocationId>()?,
        "N10".parse::<LocationId>()?,
    ];
    let loss = multi_level_cross_entropy(&probs, &truth, &mp)?;
    println!("multi-level cross-entropy vs (N1, N10): {loss:.4}");
    Ok(())
}
