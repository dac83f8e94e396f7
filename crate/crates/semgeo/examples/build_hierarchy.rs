//! Build a location forest from raw address vectors.
//!
//! ```bash
//! cargo run --example build_hierarchy
//! ```

use semgeo::hierarchy::{build_hierarchy, AddressVector};

fn main() -> semgeo::Result<()> {
    // Address vectors as a reverse geocoder would emit them, finest first.
    // The third vector disagrees about the parent of N1 (N5 instead of W2),
    // and the last two form a deliberate loop between N8 and N9.
    let addresses: Vec<AddressVector> = [
        "N1 W2 R3",
        "N1 W2 R3",
        "N1 N5 R3",
        "N4 W2 R3",
        "N8 N9",
        "N9 N8",
    ]
    .iter()
    .map(|text| text.parse())
    .collect::<semgeo::Result<_>>()?;

    let build = build_hierarchy(&addresses)?;
    println!(
        "multigraph: {} nodes, {} edges",
        build.graph_nodes, build.graph_edges
    );
    println!(
        "forest: {} nodes, {} roots, {} cycle edge(s) removed",
        build.forest.node_count(),
        build.forest.roots().count(),
        build.prune.cycles_broken()
    );

    // N1 keeps its most frequent parent (W2, seen twice) and the minority
    // edge to N5 disappears
    let n1: semgeo::hierarchy::LocationId = "N1".parse()?;
    println!("parent of N1: {:?}", build.forest.parent_of(n1));

    // remapping replaces any vector by the forest path of its finest element
    let noisy: AddressVector = "N1 N5 R3".parse()?;
    println!("remap {noisy} -> {}", build.forest.remap(&noisy)?);

    for (address, remapped) in addresses.iter().zip(&build.remapped) {
        match remapped {
            Some(path) => println!("  {address:<10} => {path}"),
            None => println!("  {address:<10} => dropped"),
        }
    }
    Ok(())
}
