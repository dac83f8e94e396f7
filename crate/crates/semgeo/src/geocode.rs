//! Reverse-geocoding client for a Nominatim-compatible HTTP service, with a
//! coordinate-keyed disk cache.
//!
//! The service contract is `GET {base_url}/reverse?lat=..&lon=..&format=jsonv2
//! &addressdetails=1`, answered with a JSON object whose `address` member is
//! the fine-to-coarse component array; each component carries `osm_type`,
//! `osm_id`, `localname`, and the usual metadata fields. Raw response bodies
//! are cached on disk keyed by the coordinate rounded to five decimals
//! (about one meter), and cache hits never touch the network.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::formats::LocationRecord;
use crate::geo::GeoCoordinate;
use crate::hierarchy::{AddressVector, LocationId, SourceKind};

/// Decimal places of the cache key; five is roughly one meter.
pub const CACHE_PRECISION: usize = 5;

#[derive(Debug, Clone)]
pub struct GeocodeConfig {
    pub base_url: String,
    pub user_agent: String,
    pub timeout: Duration,
    /// Minimum spacing between network requests (public-service etiquette).
    pub min_interval: Duration,
    pub max_retries: u32,
    pub retry_backoff: Duration,
    pub cache_dir: PathBuf,
}

impl GeocodeConfig {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            base_url: "https://nominatim.openstreetmap.org".into(),
            user_agent: concat!("semgeo/", env!("CARGO_PKG_VERSION")).into(),
            timeout: Duration::from_secs(10),
            min_interval: Duration::from_secs(1),
            max_retries: 3,
            retry_backoff: Duration::from_millis(500),
            cache_dir: cache_dir.into(),
        }
    }
}

/// One reverse-geocoding result.
#[derive(Debug, Clone)]
pub struct GeocodeResult {
    pub address: AddressVector,
    pub records: Vec<LocationRecord>,
    pub from_cache: bool,
}

pub struct GeocodeClient {
    config: GeocodeConfig,
    agent: ureq::Agent,
    requests: AtomicU64,
    last_request: Mutex<Option<Instant>>,
}

impl GeocodeClient {
    pub fn new(config: GeocodeConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.cache_dir)?;
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .user_agent(config.user_agent.as_str())
            .http_status_as_error(false)
            .build();
        Ok(Self {
            agent: ureq::Agent::new_with_config(agent_config),
            config,
            requests: AtomicU64::new(0),
            last_request: Mutex::new(None),
        })
    }

    /// Number of network requests issued so far (cache hits excluded).
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    /// Cache file used for a coordinate.
    pub fn cache_path(&self, coordinate: GeoCoordinate) -> PathBuf {
        self.config.cache_dir.join(format!(
            "{}.json",
            cache_key(coordinate)
        ))
    }

    /// Stores a raw response body for a coordinate, e.g. a recorded fixture.
    pub fn seed_cache(&self, coordinate: GeoCoordinate, raw_body: &str) -> Result<()> {
        write_atomically(&self.cache_path(coordinate), raw_body.as_bytes())
    }

    /// Resolves a coordinate to its address hierarchy, from cache when
    /// possible.
    pub fn reverse(&self, coordinate: GeoCoordinate) -> Result<GeocodeResult> {
        let cache_path = self.cache_path(coordinate);
        if let Ok(raw) = std::fs::read_to_string(&cache_path) {
            let (address, records) = parse_reverse_response(&raw)?;
            return Ok(GeocodeResult {
                address,
                records,
                from_cache: true,
            });
        }
        let raw = self.fetch(coordinate)?;
        let (address, records) = parse_reverse_response(&raw)?;
        // only cache bodies that parsed, so a bad response is retried later
        write_atomically(&cache_path, raw.as_bytes())?;
        Ok(GeocodeResult {
            address,
            records,
            from_cache: false,
        })
    }

    fn fetch(&self, coordinate: GeoCoordinate) -> Result<String> {
        let url = format!(
            "{}/reverse?lat={}&lon={}&format=jsonv2&addressdetails=1",
            self.config.base_url.trim_end_matches('/'),
            coordinate.lat_deg(),
            coordinate.lon_deg(),
        );
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.retry_backoff * (1 << (attempt - 1)));
            }
            self.respect_rate_limit();
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.agent.get(&url).call() {
                Ok(mut response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response
                            .body_mut()
                            .read_to_string()
                            .map_err(|e| Error::Service(format!("reading body: {e}")));
                    }
                    last_error = format!("HTTP {status}");
                    // client errors other than rate limiting will not improve
                    if status.is_client_error() && status.as_u16() != 429 {
                        break;
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Service(format!(
            "reverse geocoding {url} failed after {} attempts: {last_error}",
            self.config.max_retries + 1
        )))
    }

    fn respect_rate_limit(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(at) = *last {
            let elapsed = at.elapsed();
            if elapsed < self.config.min_interval {
                std::thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

/// Rounded, sign-normalized cache key: `33.75260_-118.18970`.
pub fn cache_key(coordinate: GeoCoordinate) -> String {
    let quantize = |v: f64| {
        let rounded = format!("{v:.0$}", CACHE_PRECISION);
        // avoid distinct keys for -0.00000 and 0.00000
        if rounded.trim_start_matches('-').trim_matches(['0', '.']).is_empty() {
            rounded.trim_start_matches('-').to_string()
        } else {
            rounded
        }
    };
    format!(
        "{}_{}",
        quantize(coordinate.lat_deg()),
        quantize(coordinate.lon_deg())
    )
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ReverseResponse {
    address: Vec<AddressComponent>,
}

#[derive(Debug, Deserialize)]
struct AddressComponent {
    osm_type: Option<String>,
    osm_id: Option<u64>,
    localname: Option<String>,
    #[serde(alias = "class")]
    category: Option<String>,
    #[serde(rename = "type")]
    loc_type: Option<String>,
    admin_level: Option<u8>,
    isarea: Option<bool>,
    isaddress: Option<bool>,
    wikidata: Option<String>,
    wikipedia: Option<String>,
    population: Option<u64>,
    place: Option<String>,
    geometry: Option<serde_json::Value>,
}

/// Parses a reverse-geocoding response body into the fine-to-coarse address
/// vector and per-location metadata. Postal codes are dropped, as are
/// components flagged `isaddress: false` and components without a stable
/// location id; duplicate ids keep their first occurrence.
pub fn parse_reverse_response(raw: &str) -> Result<(AddressVector, Vec<LocationRecord>)> {
    let bad = |reason: String| Error::BadResponse {
        reason,
        body_prefix: raw.chars().take(120).collect(),
    };
    let response: ReverseResponse =
        serde_json::from_str(raw).map_err(|e| bad(format!("not a reverse response: {e}")))?;

    let mut locations: Vec<LocationId> = Vec::new();
    let mut records: Vec<LocationRecord> = Vec::new();
    for component in response.address {
        if component.loc_type.as_deref() == Some("postcode")
            || component.category.as_deref() == Some("postcode")
        {
            continue;
        }
        if component.isaddress == Some(false) {
            continue;
        }
        let (Some(kind_text), Some(osm_id)) = (&component.osm_type, component.osm_id) else {
            continue;
        };
        let kind = match kind_text.as_str() {
            "N" | "node" => SourceKind::Node,
            "W" | "way" => SourceKind::Way,
            "R" | "relation" => SourceKind::Relation,
            other => return Err(bad(format!("unknown osm_type '{other}'"))),
        };
        let id = LocationId { kind, id: osm_id };
        if locations.contains(&id) {
            continue;
        }
        locations.push(id);
        records.push(LocationRecord {
            id,
            localname: component.localname.unwrap_or_default(),
            category: component.category.unwrap_or_default(),
            loc_type: component.loc_type.unwrap_or_default(),
            admin_level: component.admin_level.unwrap_or(15).min(15),
            is_area: component.isarea.unwrap_or(false),
            wikidata: component.wikidata,
            wikipedia: component.wikipedia,
            population: component.population,
            place: component.place,
            geometry: component.geometry,
        });
    }
    let address = AddressVector::new(locations)
        .map_err(|_| bad("no usable address components".into()))?;
    Ok((address, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coord(lat: f64, lon: f64) -> GeoCoordinate {
        GeoCoordinate::new(lat, lon).unwrap()
    }

    const RESPONSE: &str = r#"{
      "place_id": 99,
      "address": [
        {"localname": "The Docks", "osm_type": "W", "osm_id": 11, "class": "historic",
         "type": "ship", "admin_level": 15, "isarea": true, "isaddress": true},
        {"localname": "90802", "osm_type": null, "osm_id": null, "type": "postcode",
         "isaddress": true},
        {"localname": "Harborville", "osm_type": "R", "osm_id": 22, "category": "boundary",
         "type": "administrative", "admin_level": 8, "isarea": true, "isaddress": true,
         "wikidata": "Q1", "population": 1000, "place": "city"},
        {"localname": "Ignored", "osm_type": "R", "osm_id": 33, "type": "administrative",
         "isaddress": false},
        {"localname": "Harborville", "osm_type": "R", "osm_id": 22, "type": "administrative"},
        {"localname": "Freedonia", "osm_type": "R", "osm_id": 44, "category": "boundary",
         "type": "administrative", "admin_level": 2, "isarea": true, "place": "country"}
      ]
    }"#;

    #[test]
    fn response_parses_to_filtered_vector() {
        let (address, records) = parse_reverse_response(RESPONSE).unwrap();
        assert_eq!(
            address.locations(),
            &[
                LocationId::way(11),
                LocationId::relation(22),
                LocationId::relation(44)
            ]
        );
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].localname, "The Docks");
        assert_eq!(records[1].place.as_deref(), Some("city"));
        assert_eq!(records[2].admin_level, 2);
    }

    #[test]
    fn postal_code_components_never_reach_the_vector() {
        let with_coded_postcode = RESPONSE.replace(
            r#""osm_type": null, "osm_id": null, "type": "postcode""#,
            r#""osm_type": "R", "osm_id": 77, "type": "postcode""#,
        );
        let (address, _) = parse_reverse_response(&with_coded_postcode).unwrap();
        assert!(!address.locations().contains(&LocationId::relation(77)));
    }

    #[test]
    fn garbage_bodies_are_structured_errors() {
        let err = parse_reverse_response("<html>offline</html>").unwrap_err();
        match err {
            Error::BadResponse { body_prefix, .. } => {
                assert!(body_prefix.contains("<html>"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse_reverse_response(r#"{"address": []}"#).is_err());
    }

    #[test]
    fn cache_keys_are_rounded_and_sign_normalized() {
        assert_eq!(
            cache_key(coord(33.752601, -118.189702)),
            "33.75260_-118.18970"
        );
        assert_eq!(cache_key(coord(0.000001, -0.000001)), "0.00000_0.00000");
        assert_eq!(
            cache_key(coord(33.7526014, -118.1897021)),
            cache_key(coord(33.7526008, -118.1897018))
        );
    }

    #[test]
    fn cache_hits_skip_the_network() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = GeocodeConfig::new(dir.path().join("cache"));
        // unroutable address; any network attempt would fail loudly
        config.base_url = "http://127.0.0.1:1".into();
        config.max_retries = 0;
        config.min_interval = Duration::from_millis(0);
        let client = GeocodeClient::new(config).unwrap();
        let location = coord(10.0, 20.0);
        client.seed_cache(location, RESPONSE).unwrap();
        let result = client.reverse(location).unwrap();
        assert!(result.from_cache);
        assert_eq!(client.request_count(), 0);
        // a second call is also served from cache
        let again = client.reverse(location).unwrap();
        assert!(again.from_cache);
        assert_eq!(client.request_count(), 0);
    }

    #[test]
    fn network_responses_are_cached_for_the_next_call() {
        use std::io::{Read, Write};
        // one-shot local HTTP server delivering the canned response
        let listener = match std::net::TcpListener::bind("127.0.0.1:0") {
            Ok(listener) => listener,
            // sandboxed environments without loopback sockets skip this path
            Err(_) => return,
        };
        let port = listener.local_addr().unwrap().port();
        let served = std::thread::spawn(move || {
            for _ in 0..1 {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buffer = [0u8; 4096];
                let _ = stream.read(&mut buffer);
                let body = RESPONSE.as_bytes();
                let header = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                    body.len()
                );
                stream.write_all(header.as_bytes()).unwrap();
                stream.write_all(body).unwrap();
            }
        });

        let dir = tempfile::tempdir().unwrap();
        let mut config = GeocodeConfig::new(dir.path().join("cache"));
        config.base_url = format!("http://127.0.0.1:{port}");
        config.min_interval = Duration::from_millis(0);
        config.max_retries = 0;
        let client = GeocodeClient::new(config).unwrap();
        let location = coord(33.7526, -118.1897);

        let first = client.reverse(location).unwrap();
        assert!(!first.from_cache);
        assert_eq!(client.request_count(), 1);
        served.join().unwrap();

        // the server is gone; only the cache can answer now
        let second = client.reverse(location).unwrap();
        assert!(second.from_cache);
        assert_eq!(client.request_count(), 1);
        assert_eq!(second.address.locations(), first.address.locations());
    }
}
