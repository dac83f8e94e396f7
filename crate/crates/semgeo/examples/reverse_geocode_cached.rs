//! Reverse geocoding through the disk cache, fully offline: the bundled
//! recorded response stands in for the network.
//!
//! ```bash
//! cargo run --example reverse_geocode_cached
//! ```

use semgeo::geo::GeoCoordinate;
use semgeo::geocode::{GeocodeClient, GeocodeConfig};

const RECORDED: &str = include_str!("../tests/fixtures/queen_mary.json");

fn main() -> semgeo::Result<()> {
    let cache_dir = std::env::temp_dir().join("semgeo-example-geocode-cache");
    let config = GeocodeConfig::new(&cache_dir);
    // with a live service you would set config.base_url and a proper
    // config.user_agent here; this example never leaves the machine
    let client = GeocodeClient::new(config)?;

    let coordinate = GeoCoordinate::new(33.75262, -118.19005)?;
    client.seed_cache(coordinate, RECORDED)?;
    println!("cache file: {}", client.cache_path(coordinate).display());

    for round in 1..=2 {
        let result = client.reverse(coordinate)?;
        println!(
            "call {round}: from_cache = {}, network requests so far = {}",
            result.from_cache,
            client.request_count()
        );
        if round == 1 {
            println!("address vector, fine to coarse:");
            for record in &result.records {
                println!(
                    "  {:<11} {:<20} admin_level {:>2}  area {}",
                    record.id.to_string(),
                    record.localname,
                    record.admin_level,
                    record.is_area
                );
            }
        }
    }
    Ok(())
}
