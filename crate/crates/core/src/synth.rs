//! Seeded synthetic cities and trips with planted clusters.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded with `seed_from_u64`, a
//! portable generator whose stream is fixed across platforms. Draws happen in
//! a fixed documented order, so identical `(spec, seed)` pairs reproduce
//! identical output.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{haversine_distance, locate, GeoPoint, StateSpace, Tract, HOURS_PER_WEEK};
use crate::hypotheses::HypothesisMatrix;
use crate::hypotheses::{CENSUS_INDICATOR_KEYS, EMPLOYMENT_KEYS, POVERTY_KEYS, RACE_KEYS, VENUE_CATEGORY_KEYS};
use crate::ingest::{RawTripRecord, Trip};
use crate::{Error, Result};

const KM_PER_DEG_LAT: f64 = 110.574;
const KM_PER_DEG_LON_EQUATOR: f64 = 111.320;
const KM_PER_MILE: f64 = 1.609344;

/// Grid quadrant, with rows counted from the south and columns from the west.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    SouthWest,
    SouthEast,
    NorthWest,
    NorthEast,
}

/// How one property column is filled.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyPattern {
    Constant(f64),
    /// Independent uniform draw per tract in `[low, high)`.
    Uniform {
        low: f64,
        high: f64,
    },
    /// `inside` for tracts in the quadrant, `outside` elsewhere.
    Quadrant {
        quadrant: Quadrant,
        inside: f64,
        outside: f64,
    },
}

/// Ordered property columns. Uniform draws are taken property by property,
/// tract by tract.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyRecipe {
    pub properties: Vec<(String, PropertyPattern)>,
}

impl PropertyRecipe {
    /// Every column the default hypothesis catalog reads, with nightlife venues
    /// concentrated in the south-west quadrant.
    pub fn default_city() -> Self {
        use PropertyPattern::*;
        let mut p: Vec<(String, PropertyPattern)> = Vec::new();
        let mut add = |key: &str, pattern: PropertyPattern| {
            if !p.iter().any(|(k, _)| k == key) {
                p.push((key.to_string(), pattern));
            }
        };
        add("venues_all", Uniform { low: 50.0, high: 400.0 });
        add(
            "checkins",
            Uniform {
                low: 1_000.0,
                high: 20_000.0,
            },
        );
        for key in VENUE_CATEGORY_KEYS {
            if key == "venues_nightlife" {
                add(
                    key,
                    Quadrant {
                        quadrant: self::Quadrant::SouthWest,
                        inside: 120.0,
                        outside: 2.0,
                    },
                );
            } else {
                add(key, Uniform { low: 1.0, high: 40.0 });
            }
        }
        for key in RACE_KEYS.iter().chain(&POVERTY_KEYS).chain(&EMPLOYMENT_KEYS) {
            add(key, Uniform { low: 0.01, high: 1.0 });
        }
        for key in CENSUS_INDICATOR_KEYS {
            match key {
                "area_sqkm" => {}
                "population" => add(
                    key,
                    Uniform {
                        low: 1_000.0,
                        high: 8_000.0,
                    },
                ),
                k if k.starts_with("pct_") => add(k, Uniform { low: 0.01, high: 1.0 }),
                k => add(k, Uniform { low: 0.1, high: 10.0 }),
            }
        }
        Self { properties: p }
    }
}

/// A regular grid city.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// South-west corner.
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub cell_km: f64,
    pub recipe: PropertyRecipe,
}

impl GridSpec {
    /// A city south of the default landmarks, on lower Manhattan coordinates.
    pub fn default_city(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            origin_lat: 40.700,
            origin_lon: -74.020,
            cell_km: 0.8,
            recipe: PropertyRecipe::default_city(),
        }
    }

    fn in_quadrant(&self, row: usize, col: usize, q: Quadrant) -> bool {
        let south = (row as f64 + 0.5) < self.rows as f64 / 2.0;
        let west = (col as f64 + 0.5) < self.cols as f64 / 2.0;
        match q {
            Quadrant::SouthWest => south && west,
            Quadrant::SouthEast => south && !west,
            Quadrant::NorthWest => !south && west,
            Quadrant::NorthEast => !south && !west,
        }
    }
}

/// Builds a grid of square tracts, indexed row-major from the south-west.
pub fn generate_state_space(spec: &GridSpec, seed: u64) -> Result<StateSpace> {
    if spec.rows < 2 || spec.cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid must be at least 2x2, got {}x{}",
            spec.rows, spec.cols
        )));
    }
    if !(spec.cell_km.is_finite() && spec.cell_km > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cell size must be positive, got {}",
            spec.cell_km
        )));
    }
    let dlat = spec.cell_km / KM_PER_DEG_LAT;
    let dlon = spec.cell_km / (KM_PER_DEG_LON_EQUATOR * spec.origin_lat.to_radians().cos());
    let n = spec.rows * spec.cols;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (key, pattern) in &spec.recipe.properties {
        let values = (0..n)
            .map(|index| {
                let (row, col) = (index / spec.cols, index % spec.cols);
                match pattern {
                    PropertyPattern::Constant(v) => *v,
                    PropertyPattern::Uniform { low, high } => rng.gen_range(*low..*high),
                    PropertyPattern::Quadrant {
                        quadrant,
                        inside,
                        outside,
                    } => {
                        if spec.in_quadrant(row, col, *quadrant) {
                            *inside
                        } else {
                            *outside
                        }
                    }
                }
            })
            .collect();
        columns.push((key.clone(), values));
    }

    let mut tracts = Vec::with_capacity(n);
    for index in 0..n {
        let (row, col) = (index / spec.cols, index % spec.cols);
        let lat0 = spec.origin_lat + row as f64 * dlat;
        let lon0 = spec.origin_lon + col as f64 * dlon;
        let polygon = vec![
            GeoPoint::new(lat0, lon0)?,
            GeoPoint::new(lat0, lon0 + dlon)?,
            GeoPoint::new(lat0 + dlat, lon0 + dlon)?,
            GeoPoint::new(lat0 + dlat, lon0)?,
        ];
        let properties: BTreeMap<String, f64> = columns.iter().map(|(k, v)| (k.clone(), v[index])).collect();
        tracts.push(Tract::new(
            format!("{:06}", (index + 1) * 100),
            index,
            GeoPoint::new(lat0 + dlat / 2.0, lon0 + dlon / 2.0)?,
            spec.cell_km * spec.cell_km,
            Some(polygon),
            properties,
        )?);
    }
    StateSpace::new(tracts)
}

/// One planted rank-1 pattern: hour, pickup and dropoff drawn independently.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCluster {
    /// `(hour of week, sampling weight)`.
    pub hours: Vec<(usize, f64)>,
    pub pickup_weights: Vec<f64>,
    pub dropoff_weights: Vec<f64>,
    pub trip_count: usize,
}

impl PlantedCluster {
    /// Uniform over every hour, pickup and dropoff.
    pub fn background(size: usize, trip_count: usize) -> Self {
        Self {
            hours: (0..HOURS_PER_WEEK).map(|h| (h, 1.0)).collect(),
            pickup_weights: vec![1.0; size],
            dropoff_weights: vec![1.0; size],
            trip_count,
        }
    }
}

fn categorical(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "{what} weights must be finite and non-negative"
        )));
    }
    WeightedIndex::new(weights).map_err(|_| Error::Degenerate(format!("{what} weights have zero sum")))
}

/// Draws every cluster's trips in order; within a trip the draw order is
/// hour, pickup, dropoff.
pub fn generate_trips(clusters: &[PlantedCluster], space: &StateSpace, seed: u64) -> Result<Vec<Trip>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trips = Vec::with_capacity(clusters.iter().map(|c| c.trip_count).sum());
    for cluster in clusters {
        for (what, w) in [
            ("pickup", &cluster.pickup_weights),
            ("dropoff", &cluster.dropoff_weights),
        ] {
            if w.len() != space.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{what} weights have length {}, state space has {}",
                    w.len(),
                    space.len()
                )));
            }
        }
        if let Some((h, _)) = cluster.hours.iter().find(|(h, _)| *h >= HOURS_PER_WEEK) {
            return Err(Error::OutOfBounds {
                index: *h,
                size: HOURS_PER_WEEK,
            });
        }
        let hour_weights: Vec<f64> = cluster.hours.iter().map(|(_, w)| *w).collect();
        let hours = categorical(&hour_weights, "hour")?;
        let pickups = categorical(&cluster.pickup_weights, "pickup")?;
        let dropoffs = categorical(&cluster.dropoff_weights, "dropoff")?;
        for _ in 0..cluster.trip_count {
            let hour = cluster.hours[hours.sample(&mut rng)].0;
            let pickup = pickups.sample(&mut rng);
            let dropoff = dropoffs.sample(&mut rng);
            trips.push(Trip::new(hour, pickup, dropoff));
        }
    }
    Ok(trips)
}

/// Draws `count` transitions whose law is the row-normalized hypothesis:
/// pickup from `start_weights`, then dropoff from that pickup's row.
pub fn generate_from_hypothesis(
    q: &HypothesisMatrix,
    start_weights: &[f64],
    count: usize,
    seed: u64,
    hour: usize,
) -> Result<Vec<Trip>> {
    if start_weights.len() != q.size() {
        return Err(Error::ShapeMismatch(format!(
            "start weights have length {}, hypothesis has {} states",
            start_weights.len(),
            q.size()
        )));
    }
    if hour >= HOURS_PER_WEEK {
        return Err(Error::OutOfBounds {
            index: hour,
            size: HOURS_PER_WEEK,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let starts = categorical(start_weights, "start")?;
    let mut rows: Vec<Option<WeightedIndex<f64>>> = vec![None; q.size()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trips = Vec::with_capacity(count);
    for _ in 0..count {
        let pickup = starts.sample(&mut rng);
        if rows[pickup].is_none() {
            let row = q.q().row(pickup).to_vec();
            rows[pickup] =
                Some(WeightedIndex::new(&row).map_err(|_| {
                    Error::Degenerate(format!("hypothesis `{}` has no belief in row {pickup}", q.name()))
                })?);
        }
        let dropoff = rows[pickup].as_ref().unwrap().sample(&mut rng);
        trips.push(Trip::new(hour, pickup, dropoff));
    }
    Ok(trips)
}

/// Monday 2013-01-07, the first day of the reference week.
pub fn reference_monday() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2013, 1, 7)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
}

fn point_in_tract(space: &StateSpace, index: usize, rng: &mut ChaCha8Rng) -> GeoPoint {
    let tract = space.tract(index);
    let Some(ring) = &tract.polygon else {
        return tract.centroid;
    };
    let (mut lat_min, mut lat_max, mut lon_min, mut lon_max) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in ring {
        lat_min = lat_min.min(p.lat());
        lat_max = lat_max.max(p.lat());
        lon_min = lon_min.min(p.lon());
        lon_max = lon_max.max(p.lon());
    }
    for _ in 0..1000 {
        // Stay off the boundary so the point locates unambiguously.
        let u: f64 = rng.gen_range(0.05..0.95);
        let v: f64 = rng.gen_range(0.05..0.95);
        if let Ok(p) = GeoPoint::new(lat_min + u * (lat_max - lat_min), lon_min + v * (lon_max - lon_min)) {
            if locate(p, space) == Some(index) {
                return p;
            }
        }
    }
    tract.centroid
}

/// Turns trips into raw records inside the reference week: random minute
/// within the hour, endpoints uniform inside the tracts, plausible distance,
/// duration and passenger count.
pub fn render_records(trips: &[Trip], space: &StateSpace, seed: u64) -> Vec<RawTripRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let monday = reference_monday();
    trips
        .iter()
        .map(|trip| {
            let offset = Duration::hours(trip.hour as i64) + Duration::seconds(rng.gen_range(0..3600));
            let pickup = point_in_tract(space, trip.pickup_tract, &mut rng);
            let dropoff = point_in_tract(space, trip.dropoff_tract, &mut rng);
            let km = haversine_distance(pickup, dropoff);
            let miles = ((km / KM_PER_MILE) * 100.0).round() / 100.0;
            RawTripRecord {
                pickup_datetime: monday + offset,
                pickup,
                dropoff,
                trip_distance: miles.max(0.1),
                trip_time_in_secs: (km / 18.0 * 3600.0).round() + 60.0,
                passenger_count: rng.gen_range(1..=4),
            }
        })
        .collect()
}

/// Friday and Saturday night hours with sampling weights peaking after midnight.
pub const WEEKEND_NIGHT_HOURS: [(usize, f64); 10] = [
    (118, 1.0), // Friday 22:00
    (119, 2.0),
    (120, 3.0), // Saturday 00:00
    (121, 2.0),
    (122, 1.0),
    (142, 2.0), // Saturday 22:00
    (143, 3.0),
    (144, 3.0), // Sunday 00:00
    (145, 2.0),
    (146, 1.0),
];

/// A generated city with its planted clusters and trips.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub space: StateSpace,
    pub clusters: Vec<PlantedCluster>,
    pub trips: Vec<Trip>,
}

/// Weekend-night rides toward nightlife venues plus uniform background traffic.
///
/// The planted cluster samples dropoffs in proportion to `venues_nightlife`
/// and pickups uniformly. The state space uses `seed`; trips use `seed + 1`.
pub fn nightlife_scenario(
    rows: usize,
    cols: usize,
    planted_trips: usize,
    background_trips: usize,
    seed: u64,
) -> Result<Scenario> {
    let space = generate_state_space(&GridSpec::default_city(rows, cols), seed)?;
    let nightlife: Vec<f64> = space
        .tracts()
        .iter()
        .map(|t| t.property("venues_nightlife").unwrap_or(0.0))
        .collect();
    let clusters = vec![
        PlantedCluster {
            hours: WEEKEND_NIGHT_HOURS.to_vec(),
            pickup_weights: vec![1.0; space.len()],
            dropoff_weights: nightlife,
            trip_count: planted_trips,
        },
        PlantedCluster::background(space.len(), background_trips),
    ];
    let trips = generate_trips(&clusters, &space, seed.wrapping_add(1))?;
    Ok(Scenario { space, clusters, trips })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub fn small_city() -> StateSpace {
        generate_state_space(&GridSpec::default_city(4, 5), 42).unwrap()
    }
}
