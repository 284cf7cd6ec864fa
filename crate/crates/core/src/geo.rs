//! Tract state space, geodesic distance, point location and hour-of-week
//! discretization.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, Timelike};
use ndarray::Array2;
use rayon::prelude::*;

use crate::{Error, Result};

/// Mean Earth radius (IUGG) in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Lower bound for the distance between two distinct tracts.
pub const MIN_TRACT_DISTANCE_KM: f64 = 1e-6;

/// Number of hour-of-week states.
pub const HOURS_PER_WEEK: usize = 168;

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let valid =
            lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon);
        if !valid {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle distance in kilometers on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// One discrete state: a census tract with its centroid, area and properties.
#[derive(Debug, Clone, PartialEq)]
pub struct Tract {
    pub id: String,
    pub index: usize,
    pub centroid: GeoPoint,
    pub area_sqkm: f64,
    pub polygon: Option<Vec<GeoPoint>>,
    pub properties: BTreeMap<String, f64>,
}

impl Tract {
    pub fn new(
        id: impl Into<String>,
        index: usize,
        centroid: GeoPoint,
        area_sqkm: f64,
        polygon: Option<Vec<GeoPoint>>,
        properties: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidTract { id: id.clone(), reason };
        if !(area_sqkm.is_finite() && area_sqkm > 0.0) {
            return Err(invalid(format!("area must be positive, got {area_sqkm}")));
        }
        if let Some(ring) = &polygon {
            if ring.len() < 3 {
                return Err(invalid(format!(
                    "polygon needs at least 3 vertices, got {}",
                    ring.len()
                )));
            }
        }
        if let Some((key, value)) = properties.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!(
                "property `{key}` must be finite and non-negative, got {value}"
            )));
        }
        Ok(Self {
            id,
            index,
            centroid,
            area_sqkm,
            polygon,
            properties,
        })
    }

    /// Looks up a named property. The key `area_sqkm` resolves to the tract
    /// area unless a property column of that name overrides it.
    pub fn property(&self, key: &str) -> Option<f64> {
        match self.properties.get(key) {
            Some(v) => Some(*v),
            None if key == AREA_KEY => Some(self.area_sqkm),
            None => None,
        }
    }
}

/// Property key under which the tract area is exposed.
pub const AREA_KEY: &str = "area_sqkm";

/// The ordered tract set plus the precomputed centroid distance matrix.
#[derive(Debug, Clone)]
pub struct StateSpace {
    tracts: Vec<Tract>,
    distances: Array2<f64>,
}

impl StateSpace {
    /// Builds a state space with haversine centroid-to-centroid distances.
    pub fn new(tracts: Vec<Tract>) -> Result<Self> {
        let tracts = order_tracts(tracts)?;
        let n = tracts.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            haversine_distance(tracts[i].centroid, tracts[j].centroid).max(MIN_TRACT_DISTANCE_KM)
                        }
                    })
                    .collect()
            })
            .collect();
        let distances = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
        Ok(Self { tracts, distances })
    }

    /// Builds a state space with an explicit distance matrix, e.g. for
    /// abstract fixtures. Off-diagonal entries are clamped to
    /// [`MIN_TRACT_DISTANCE_KM`].
    pub fn with_distances(tracts: Vec<Tract>, mut distances: Array2<f64>) -> Result<Self> {
        let tracts = order_tracts(tracts)?;
        let n = tracts.len();
        if distances.dim() != (n, n) {
            return Err(Error::ShapeMismatch(format!(
                "distance matrix {:?} for {n} tracts",
                distances.dim()
            )));
        }
        for i in 0..n {
            if distances[[i, i]] != 0.0 {
                return Err(Error::InvalidStateSpace(format!(
                    "distance diagonal must be zero at {i}"
                )));
            }
            for j in 0..n {
                let d = distances[[i, j]];
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::InvalidStateSpace(format!(
                        "distance ({i},{j}) must be finite and non-negative, got {d}"
                    )));
                }
                if d != distances[[j, i]] {
                    return Err(Error::InvalidStateSpace(format!(
                        "distance matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        for ((i, j), d) in distances.indexed_iter_mut() {
            if i != j {
                *d = d.max(MIN_TRACT_DISTANCE_KM);
            }
        }
        Ok(Self { tracts, distances })
    }

    pub fn len(&self) -> usize {
        self.tracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracts.is_empty()
    }

    pub fn tracts(&self) -> &[Tract] {
        &self.tracts
    }

    pub fn tract(&self, index: usize) -> &Tract {
        &self.tracts[index]
    }

    pub fn distances(&self) -> &Array2<f64> {
        &self.distances
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[[i, j]]
    }
}

fn order_tracts(mut tracts: Vec<Tract>) -> Result<Vec<Tract>> {
    if tracts.is_empty() {
        return Err(Error::InvalidStateSpace("no tracts".into()));
    }
    tracts.sort_by_key(|t| t.index);
    for (expected, tract) in tracts.iter().enumerate() {
        if tract.index != expected {
            return Err(Error::InvalidStateSpace(format!(
                "tract indices must be a permutation of 0..{}; tract {} has index {}",
                tracts.len(),
                tract.id,
                tract.index
            )));
        }
    }
    Ok(tracts)
}

/// Maps a point to a tract index.
///
/// Polygon containment wins (even-odd rule, boundary inclusive, lowest index
/// on overlap). A state space without any polygon falls back to the nearest
/// centroid. Otherwise a point outside every polygon locates to `None`.
pub fn locate(p: GeoPoint, space: &StateSpace) -> Option<usize> {
    let mut any_polygon = false;
    for tract in space.tracts() {
        if let Some(ring) = &tract.polygon {
            any_polygon = true;
            if polygon_contains(ring, p) {
                return Some(tract.index);
            }
        }
    }
    if any_polygon {
        return None;
    }
    space
        .tracts()
        .iter()
        .map(|t| (t.index, haversine_distance(p, t.centroid)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(index, _)| index)
}

/// Even-odd containment test in planar (lon, lat) space. Points on an edge
/// or vertex count as inside.
pub fn polygon_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let (x, y) = (p.lon, p.lat);
    let n = ring.len();
    let mut inside = false;
    for k in 0..n {
        let a = ring[k];
        let b = ring[(k + 1) % n];
        let (x1, y1, x2, y2) = (a.lon, a.lat, b.lon, b.lat);
        if on_segment(x, y, x1, y1, x2, y2) {
            return true;
        }
        if (y1 > y) != (y2 > y) {
            let x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(x: f64, y: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> bool {
    let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
    let scale = ((x2 - x1).abs() + (y2 - y1).abs()).max(f64::MIN_POSITIVE);
    if cross.abs() > 1e-12 * scale {
        return false;
    }
    x >= x1.min(x2) && x <= x1.max(x2) && y >= y1.min(y2) && y <= y1.max(y2)
}

/// Hour-of-week index: `24 * weekday + hour` with Monday = 0.
pub fn hour_of_week<T: Datelike + Timelike>(t: &T) -> usize {
    t.weekday().num_days_from_monday() as usize * 24 + t.hour() as usize
}

const FIXED_COLUMNS: [&str; 5] = ["tract_id", "lat", "lon", "area_sqkm", "polygon"];

/// Reads a tracts file: header `tract_id,lat,lon,area_sqkm,polygon` followed
/// by numeric property columns. Tract indices follow row order.
pub fn read_tracts<R: Read>(reader: R) -> Result<StateSpace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let id_col = position("tract_id").ok_or_else(|| Error::Parse("missing column tract_id".into()))?;
    let lat_col = position("lat").ok_or_else(|| Error::Parse("missing column lat".into()))?;
    let lon_col = position("lon").ok_or_else(|| Error::Parse("missing column lon".into()))?;
    let area_col = position("area_sqkm").ok_or_else(|| Error::Parse("missing column area_sqkm".into()))?;
    let polygon_col = position("polygon");
    let property_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !FIXED_COLUMNS.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut tracts = Vec::new();
    for (index, record) in rdr.records().enumerate() {
        let record = record?;
        let line = index + 2;
        let field = |col: usize| record.get(col).unwrap_or("");
        let number = |col: usize| -> Result<f64> {
            field(col).parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "line {line}: column `{}` is not a number: `{}`",
                    &headers[col],
                    field(col)
                ))
            })
        };
        let centroid = GeoPoint::new(number(lat_col)?, number(lon_col)?)?;
        let polygon = match polygon_col.map(field) {
            Some(text) if !text.is_empty() => {
                Some(parse_polygon(text).map_err(|e| Error::Parse(format!("line {line}: {e}")))?)
            }
            _ => None,
        };
        let mut properties = BTreeMap::new();
        for (col, name) in &property_cols {
            properties.insert(name.clone(), number(*col)?);
        }
        tracts.push(Tract::new(
            field(id_col),
            index,
            centroid,
            number(area_col)?,
            polygon,
            properties,
        )?);
    }
    StateSpace::new(tracts)
}

fn parse_polygon(text: &str) -> Result<Vec<GeoPoint>> {
    text.split(';')
        .filter(|pair| !pair.trim().is_empty())
        .map(|pair| {
            let mut parts = pair.split_whitespace();
            let (Some(lat), Some(lon), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("bad polygon vertex `{pair}`")));
            };
            let lat = lat
                .parse()
                .map_err(|_| Error::Parse(format!("bad polygon latitude `{lat}`")))?;
            let lon = lon
                .parse()
                .map_err(|_| Error::Parse(format!("bad polygon longitude `{lon}`")))?;
            GeoPoint::new(lat, lon)
        })
        .collect()
}

/// Writes a tracts file in the format accepted by [`read_tracts`]. Property
/// columns are the sorted union of all tract property keys.
pub fn write_tracts<W: Write>(writer: W, space: &StateSpace) -> Result<()> {
    let keys: Vec<&String> = {
        let mut keys: Vec<&String> = space.tracts().iter().flat_map(|t| t.properties.keys()).collect();
        keys.sort();
        keys.dedup();
        keys
    };
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(keys.iter().map(|k| k.as_str()));
    wtr.write_record(&header)?;
    for tract in space.tracts() {
        let polygon = tract
            .polygon
            .as_ref()
            .map(|ring| {
                ring.iter()
                    .map(|p| format!("{} {}", p.lat, p.lon))
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        let mut row = vec![
            tract.id.clone(),
            tract.centroid.lat.to_string(),
            tract.centroid.lon.to_string(),
            tract.area_sqkm.to_string(),
            polygon,
        ];
        for key in &keys {
            row.push(tract.properties.get(*key).copied().unwrap_or(0.0).to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn square(lat0: f64, lon0: f64, size: f64) -> Vec<GeoPoint> {
        vec![
            pt(lat0, lon0),
            pt(lat0, lon0 + size),
            pt(lat0 + size, lon0 + size),
            pt(lat0 + size, lon0),
        ]
    }

    fn tract(index: usize, lat: f64, lon: f64, polygon: Option<Vec<GeoPoint>>) -> Tract {
        Tract::new(format!("T{index}"), index, pt(lat, lon), 1.0, polygon, BTreeMap::new()).unwrap()
    }

    #[test]
    fn rejects_invalid_coordinates() {
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::INFINITY).is_err());
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(-90.0, 180.0).is_ok());
    }

    #[test]
    fn haversine_identity() {
        let p = pt(40.74111, -73.98972);
        assert_eq!(haversine_distance(p, p), 0.0);
    }

    #[test]
    fn haversine_flatiron_to_times_square() {
        // Frozen from an independent chord-length computation: 1.8788319532 km.
        let flatiron = pt(40.74111, -73.98972);
        let times_square = pt(40.75773, -73.98570);
        let d = haversine_distance(flatiron, times_square);
        assert!((d - 1.878832).abs() < 1e-6, "got {d}");
    }

    proptest! {
        #[test]
        fn haversine_is_symmetric(
            lat1 in -90.0f64..=90.0, lon1 in -180.0f64..=180.0,
            lat2 in -90.0f64..=90.0, lon2 in -180.0f64..=180.0,
        ) {
            let (a, b) = (pt(lat1, lon1), pt(lat2, lon2));
            let (ab, ba) = (haversine_distance(a, b), haversine_distance(b, a));
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        }
    }

    #[test]
    fn distance_matrix_invariants() {
        let tracts = vec![
            tract(0, 40.70, -74.00, None),
            tract(1, 40.71, -74.00, None),
            tract(2, 40.70, -74.00, None), // coincides with tract 0
        ];
        let space = StateSpace::new(tracts).unwrap();
        let d = space.distances();
        for i in 0..3 {
            assert_eq!(d[[i, i]], 0.0);
            for j in 0..3 {
                assert_eq!(d[[i, j]], d[[j, i]]);
                if i != j {
                    assert!(d[[i, j]] >= MIN_TRACT_DISTANCE_KM);
                }
            }
        }
        assert_eq!(d[[0, 2]], MIN_TRACT_DISTANCE_KM);
    }

    #[test]
    fn indices_must_be_a_permutation() {
        let tracts = vec![tract(0, 40.7, -74.0, None), tract(2, 40.8, -74.0, None)];
        assert!(matches!(StateSpace::new(tracts), Err(Error::InvalidStateSpace(_))));
        assert!(StateSpace::new(vec![]).is_err());
    }

    #[test]
    fn tract_validation() {
        let mut props = BTreeMap::new();
        props.insert("x".to_string(), -1.0);
        assert!(Tract::new("a", 0, pt(0.0, 0.0), 1.0, None, props).is_err());
        assert!(Tract::new("a", 0, pt(0.0, 0.0), 0.0, None, BTreeMap::new()).is_err());
        let two = vec![pt(0.0, 0.0), pt(1.0, 1.0)];
        assert!(Tract::new("a", 0, pt(0.0, 0.0), 1.0, Some(two), BTreeMap::new()).is_err());
    }

    #[test]
    fn locate_inside_polygon() {
        let tracts = vec![
            tract(0, 0.5, 0.5, Some(square(0.0, 0.0, 1.0))),
            tract(1, 0.5, 1.5, Some(square(0.0, 1.0, 1.0))),
        ];
        let space = StateSpace::new(tracts).unwrap();
        assert_eq!(locate(pt(0.3, 1.4), &space), Some(1));
        assert_eq!(locate(pt(0.3, 0.2), &space), Some(0));
        // Shared edge: both contain it, lowest index wins.
        assert_eq!(locate(pt(0.5, 1.0), &space), Some(0));
        // Outer boundary counts as inside.
        assert_eq!(locate(pt(1.0, 1.5), &space), Some(1));
        assert_eq!(locate(pt(0.0, 0.0), &space), Some(0));
    }

    #[test]
    fn locate_outside_all_polygons() {
        let tracts = vec![
            tract(0, 0.5, 0.5, Some(square(0.0, 0.0, 1.0))),
            tract(1, 0.5, 1.5, Some(square(0.0, 1.0, 1.0))),
        ];
        let space = StateSpace::new(tracts).unwrap();
        assert_eq!(locate(pt(5.0, 5.0), &space), None);
        assert_eq!(locate(pt(0.5, -0.1), &space), None);
    }

    #[test]
    fn locate_nearest_centroid_without_polygons() {
        let tracts: Vec<Tract> = (0..8).map(|i| tract(i, 40.0 + 0.01 * i as f64, -74.0, None)).collect();
        let space = StateSpace::new(tracts).unwrap();
        assert_eq!(locate(pt(40.0502, -74.0001), &space), Some(5));
        assert_eq!(locate(pt(40.0502, -74.0001), &space), Some(5));
    }

    #[test]
    fn polygon_concave() {
        // U shape: the notch is outside.
        let ring = vec![
            pt(0.0, 0.0),
            pt(0.0, 3.0),
            pt(3.0, 3.0),
            pt(3.0, 2.0),
            pt(1.0, 2.0),
            pt(1.0, 1.0),
            pt(3.0, 1.0),
            pt(3.0, 0.0),
        ];
        assert!(polygon_contains(&ring, pt(2.0, 0.5)));
        assert!(!polygon_contains(&ring, pt(2.0, 1.5)));
        assert!(polygon_contains(&ring, pt(0.5, 1.5)));
    }

    #[test]
    fn hour_of_week_examples() {
        let at = |d: u32, h: u32, m: u32| {
            // 2013-01-07 is a Monday.
            NaiveDate::from_ymd_opt(2013, 1, 7 + d)
                .unwrap()
                .and_hms_opt(h, m, 0)
                .unwrap()
        };
        assert_eq!(hour_of_week(&at(0, 0, 30)), 0);
        assert_eq!(hour_of_week(&at(6, 23, 59)), 167);
        assert_eq!(hour_of_week(&at(2, 9, 0)), 57);
        for d in 0..7 {
            for h in 0..24 {
                assert!(hour_of_week(&at(d, h, 0)) < HOURS_PER_WEEK);
            }
        }
    }

    #[test]
    fn tracts_file_roundtrip() {
        let text = "tract_id,lat,lon,area_sqkm,polygon,venues_nightlife,pct_white\n\
                    005600,40.74111,-73.98972,0.2,40.74 -73.99;40.74 -73.98;40.75 -73.98,12,0.5\n\
                    011900,40.75773,-73.98570,0.3,,3,0.25\n";
        let space = read_tracts(text.as_bytes()).unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(space.tract(0).id, "005600");
        assert_eq!(space.tract(0).polygon.as_ref().unwrap().len(), 3);
        assert!(space.tract(1).polygon.is_none());
        assert_eq!(space.tract(1).property("venues_nightlife"), Some(3.0));
        assert_eq!(space.tract(1).property("area_sqkm"), Some(0.3));
        assert_eq!(space.tract(1).property("missing"), None);

        let mut out = Vec::new();
        write_tracts(&mut out, &space).unwrap();
        let again = read_tracts(out.as_slice()).unwrap();
        assert_eq!(again.tracts(), space.tracts());
    }

    #[test]
    fn tracts_file_errors() {
        let missing = "tract_id,lat,area_sqkm\nA,1,1\n";
        assert!(read_tracts(missing.as_bytes()).is_err());
        let bad_number = "tract_id,lat,lon,area_sqkm,polygon,x\nA,1,2,1,,abc\n";
        assert!(matches!(read_tracts(bad_number.as_bytes()), Err(Error::Parse(_))));
    }
}
