//! Score how much each visual concept contributes to a prediction, given an
//! explanation raster and a segmentation raster.
//!
//! ```bash
//! cargo run --example concept_influence
//! ```

use semgeo::concept::{ci_score, CiParams, ExplanationMap, SegmentationMap};

const SKY: u16 = 1;
const TOWER: u16 = 2;
const GRASS: u16 = 3;

fn main() -> semgeo::Result<()> {
    // 64x64 scene: sky on top, a thin tower in the middle, grass below
    let (w, h) = (64usize, 64usize);
    let mut labels = vec![GRASS; w * h];
    for y in 0..h {
        for x in 0..w {
            if y < 28 {
                labels[y * w + x] = SKY;
            }
            if (28..44).contains(&y) && (30..34).contains(&x) {
                labels[y * w + x] = TOWER;
            }
        }
    }
    let segmentation = SegmentationMap::new(w, h, labels)?;

    // the attribution mass sits on the tower and bleeds into the adjacent sky
    let mut values = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f32 - 31.5;
            let dy = y as f32 - 30.0;
            values[y * w + x] = (-(dx * dx + dy * dy) / 40.0).exp();
        }
    }
    let explanation = ExplanationMap::new(w, h, values)?;

    let params = CiParams {
        k: 120,
        ..CiParams::default()
    };
    println!("k = {}, s_min = {}", params.k, params.s_min);
    println!("concept  beta  rel_size     tki      ci");
    for beta in [0u32, 3] {
        let params = CiParams { beta, ..params };
        for (name, concept) in [("sky", SKY), ("tower", TOWER), ("grass", GRASS)] {
            match ci_score(&explanation, &segmentation, concept, &params)? {
                Some(s) => println!(
                    "{name:<8} {beta:>4}  {:>8.4}  {:>6.3}  {:>6.3}",
                    s.relative_size, s.tki, s.ci
                ),
                None => println!("{name:<8} {beta:>4}  below s_min, filtered"),
            }
        }
    }
    // the tower is small but soaks up attribution, so its ci dwarfs its
    // relative size; dilation (beta = 3) credits boundary pixels to it
    Ok(())
}
