//! Deterministic synthetic datasets for examples and end-to-end tests: a
//! small world of compact "cities", each with districts, cities, and
//! countries forming three-level address vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formats::GeoSample;
use crate::geo::GeoCoordinate;
use crate::hierarchy::{AddressVector, LocationId};

const KM_PER_DEG: f64 = 111.19;

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub seed: u64,
    pub n_cities: usize,
    pub samples_per_city: usize,
    pub districts_per_city: usize,
    pub n_countries: usize,
    /// Maximum sample distance from the city center; keeps every city inside
    /// a disc of twice this radius.
    pub city_radius_km: f64,
    /// Minimum sample distance from the city center, so samples never sit on
    /// top of the eventual cell center.
    pub min_ring_km: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_cities: 20,
            samples_per_city: 250,
            districts_per_city: 5,
            n_countries: 4,
            city_radius_km: 10.0,
            min_ring_km: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct City {
    pub district_ids: Vec<LocationId>,
    pub city_id: LocationId,
    pub country_id: LocationId,
    pub center: GeoCoordinate,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub samples: Vec<GeoSample>,
    pub cities: Vec<City>,
}

/// Generates the world. Samples are placed on rings around their city
/// center with radii cycling through the `[min_ring, city_radius]` range,
/// which guarantees that (a) every sample of a city lies within
/// `city_radius_km` of its center and (b) each district contains samples
/// several kilometers apart.
pub fn generate_world(config: &WorldConfig) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cities = Vec::with_capacity(config.n_cities);
    let mut samples = Vec::new();

    let columns = 5usize;
    for c in 0..config.n_cities {
        let row = c / columns;
        let column = c % columns;
        let center = GeoCoordinate::new(
            -45.0 + row as f64 * 30.0 + rng.gen_range(-2.0..2.0),
            -144.0 + column as f64 * 72.0 + rng.gen_range(-2.0..2.0),
        )
        .expect("grid stays in range");

        let city_id = LocationId::way(100 + c as u64);
        let country_id = LocationId::relation(1 + (c % config.n_countries) as u64);
        let district_ids: Vec<LocationId> = (0..config.districts_per_city)
            .map(|d| LocationId::node(10_000 + c as u64 * 100 + d as u64))
            .collect();

        let ring_steps = 5;
        for j in 0..config.samples_per_city {
            let district = district_ids[j % config.districts_per_city];
            let step = (j / config.districts_per_city) % ring_steps;
            let radius_km = config.min_ring_km
                + step as f64 * (config.city_radius_km - config.min_ring_km)
                    / (ring_steps - 1) as f64;
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let dlat = radius_km * angle.sin() / KM_PER_DEG;
            let dlon =
                radius_km * angle.cos() / (KM_PER_DEG * center.lat_deg().to_radians().cos());
            let coordinate =
                GeoCoordinate::new(center.lat_deg() + dlat, center.lon_deg() + dlon)
                    .expect("offsets stay in range");
            let address =
                AddressVector::new(vec![district, city_id, country_id]).expect("unique ids");
            samples.push(GeoSample {
                sample_id: format!("city{c:02}-s{j:04}"),
                coordinate,
                address: Some(address),
            });
        }
        cities.push(City {
            district_ids,
            city_id,
            country_id,
            center,
        });
    }
    SyntheticWorld { samples, cities }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::great_circle_distance;

    #[test]
    fn world_is_deterministic_for_a_seed() {
        let a = generate_world(&WorldConfig::default());
        let b = generate_world(&WorldConfig::default());
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn samples_stay_within_their_city_disc() {
        let config = WorldConfig {
            n_cities: 6,
            samples_per_city: 40,
            ..WorldConfig::default()
        };
        let world = generate_world(&config);
        for (i, sample) in world.samples.iter().enumerate() {
            let city = &world.cities[i / config.samples_per_city];
            let distance = great_circle_distance(sample.coordinate, city.center);
            assert!(
                distance < config.city_radius_km * 1.1,
                "sample {} is {distance} km out",
                sample.sample_id
            );
            assert!(distance > config.min_ring_km * 0.8);
        }
    }

    #[test]
    fn addresses_are_three_levels_with_shared_city() {
        let world = generate_world(&WorldConfig::default());
        for (i, sample) in world.samples.iter().enumerate() {
            let address = sample.address.as_ref().unwrap();
            assert_eq!(address.len(), 3);
            let city = &world.cities[i / 250];
            assert_eq!(address.locations()[1], city.city_id);
            assert_eq!(address.locations()[2], city.country_id);
        }
    }
}
