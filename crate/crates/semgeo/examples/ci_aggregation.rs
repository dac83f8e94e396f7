//! Aggregate concept-influence records into spatial error intervals and
//! compare two dilation settings.
//!
//! ```bash
//! cargo run --example ci_aggregation
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semgeo::concept::{aggregate, beta_delta, standard_intervals, CiRecord};

fn synth_records(rng: &mut ChaCha8Rng, boost: f64) -> Vec<CiRecord> {
    let concepts: &[(u16, f64)] = &[(1, 1.4), (2, 0.9), (3, 0.2)];
    let mut records = Vec::new();
    for i in 0..600 {
        let (concept, level) = concepts[i % concepts.len()];
        let ci = (level + rng.gen_range(-0.15..0.15) + if concept == 1 { boost } else { 0.0 })
            .max(0.0);
        let gcd_error_km = match rng.gen_range(0..3) {
            0 => rng.gen_range(0.0..25.0),
            1 => rng.gen_range(25.0..750.0),
            _ => rng.gen_range(750.0..2500.0),
        };
        records.push(CiRecord {
            sample_id: format!("img{i}"),
            concept,
            relative_size: 0.2,
            tki: ci * 0.2,
            ci,
            gcd_error_km,
        });
    }
    records
}

fn main() -> semgeo::Result<()> {
    let intervals = standard_intervals();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // pretend these came from two runs, beta = 0 and beta = 3; the dilated
    // run slightly boosts concept 1 everywhere
    let undilated = synth_records(&mut rng, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dilated = synth_records(&mut rng, 0.25);

    let agg0 = aggregate(&undilated, &intervals, 10)?;
    let agg3 = aggregate(&dilated, &intervals, 10)?;
    println!("concept  interval        |s|  median    mean");
    for a in &agg0 {
        println!(
            "{:>7}  {:<13} {:>4}  {:>6.3}  {:>6.3}",
            a.concept,
            a.interval.to_string(),
            a.count,
            a.median,
            a.mean
        );
    }

    println!("\ndelta of medians, dilated minus undilated:");
    for d in beta_delta(&agg3, &agg0)? {
        println!(
            "{:>7}  {:<13} {:>+6.2}",
            d.concept,
            d.interval.to_string(),
            d.delta_median
        );
    }
    Ok(())
}
