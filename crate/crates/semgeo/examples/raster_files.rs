//! PFM and PGM raster files: writing, reading, and the endianness handling
//! of the PFM scale line.
//!
//! ```bash
//! cargo run --example raster_files
//! ```

use semgeo::concept::{channel_max, ChannelStack, SegmentationMap};
use semgeo::formats::{read_pfm, read_pgm, write_pfm_with, write_pgm, PfmEndianness};

fn main() -> semgeo::Result<()> {
    let dir = std::env::temp_dir().join("semgeo-example-rasters");
    std::fs::create_dir_all(&dir)?;

    // three-channel float raster, as an attribution method would emit it
    let (w, h) = (8usize, 4usize);
    let values: Vec<f32> = (0..w * h * 3).map(|i| (i as f32 * 0.37).sin()).collect();
    let stack = ChannelStack::new(w, h, 3, values)?;

    for endianness in [PfmEndianness::Little, PfmEndianness::Big] {
        let path = dir.join(format!("map_{endianness:?}.pfm"));
        write_pfm_with(&path, &stack, endianness)?;
        let back = read_pfm(&path)?;
        println!(
            "{} ({} bytes): identical after read = {}",
            path.display(),
            std::fs::metadata(&path)?.len(),
            back == stack
        );
    }

    // explanation maps are the per-pixel channel maximum
    let explanation = channel_max(&stack);
    println!(
        "channel_max: {}x{}x{} -> {}x{}",
        stack.width(),
        stack.height(),
        stack.channels(),
        explanation.width(),
        explanation.height()
    );

    // label raster with the 16-bit PGM writer
    let labels: Vec<u16> = (0..w * h).map(|i| (i % 150) as u16).collect();
    let segmentation = SegmentationMap::new(w, h, labels)?;
    let pgm = dir.join("labels.pgm");
    write_pgm(&pgm, &segmentation)?;
    let back = read_pgm(&pgm)?;
    println!(
        "{}: labels preserved = {}",
        pgm.display(),
        back == segmentation
    );
    Ok(())
}
