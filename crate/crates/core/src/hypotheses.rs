//! Belief matrices over tract-to-tract transitions.
//!
//! Every builder returns a [`HypothesisMatrix`] whose entry `q[i][j]` is the
//! relative belief in a move from tract `i` to tract `j`. Diagonals are always
//! zero. Only row-relative magnitudes matter downstream, since elicitation
//! normalizes each row.

use std::fmt;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::{haversine_distance, GeoPoint, StateSpace};
use crate::{Error, Result};

/// A named non-negative belief matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisMatrix {
    name: String,
    q: Array2<f64>,
}

impl HypothesisMatrix {
    /// Zeroes the diagonal, then checks that every entry is finite and
    /// non-negative and that some entry is positive.
    pub fn new(name: impl Into<String>, mut q: Array2<f64>) -> Result<Self> {
        let name = name.into();
        let (rows, cols) = q.dim();
        if rows != cols {
            return Err(Error::ShapeMismatch(format!(
                "hypothesis `{name}` must be square, got {rows}x{cols}"
            )));
        }
        q.diag_mut().fill(0.0);
        if let Some(v) = q.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "hypothesis `{name}` has entry {v}; entries must be finite and non-negative"
            )));
        }
        if !q.iter().any(|v| *v > 0.0) {
            return Err(Error::Degenerate(format!("hypothesis `{name}` has no positive belief")));
        }
        Ok(Self { name, q })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn size(&self) -> usize {
        self.q.nrows()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Per-tract mass drawn from a tract property.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub name: String,
    pub w: Vec<f64>,
}

impl WeightVector {
    pub fn new(name: impl Into<String>, w: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight `{name}` has entry {v}; weights must be finite and non-negative"
            )));
        }
        Ok(Self { name, w })
    }

    pub fn from_property(space: &StateSpace, key: &str) -> Result<Self> {
        let w = space
            .tracts()
            .iter()
            .map(|t| t.property(key).ok_or_else(|| Error::MissingProperty(key.to_string())))
            .collect::<Result<Vec<f64>>>()?;
        Self::new(key, w)
    }

    /// Replaces every positive weight by 1, turning weighted sums into counts.
    pub fn indicator(&self) -> Self {
        Self {
            name: self.name.clone(),
            w: self.w.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// One feature vector per tract, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVectors {
    pub name: String,
    pub vectors: Vec<Vec<f64>>,
}

impl FeatureVectors {
    pub fn new(name: impl Into<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let name = name.into();
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "features `{name}` need dimension >= 1"
            )));
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch(format!("features `{name}` have mixed dimensions")));
        }
        if vectors.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "features `{name}` must be finite and non-negative"
            )));
        }
        Ok(Self { name, vectors })
    }

    pub fn from_properties(space: &StateSpace, name: &str, keys: &[String]) -> Result<Self> {
        let vectors = space
            .tracts()
            .iter()
            .map(|t| {
                keys.iter()
                    .map(|k| t.property(k).ok_or_else(|| Error::MissingProperty(k.clone())))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, vectors)
    }
}

/// A fixed point of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

impl Landmark {
    pub fn new(name: impl Into<String>, lat: f64, lon: f64) -> Self {
        Self {
            name: name.into(),
            lat,
            lon,
        }
    }

    pub fn point(&self) -> Result<GeoPoint> {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// Center of the Gaussian belief.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussianMode {
    /// Centered on the current tract.
    Proximity,
    /// Centered on a fixed landmark, identical for every origin.
    Centroid(Landmark),
}

/// Mass-based theories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassVariant {
    /// `w[j]`
    Density,
    /// `w[j]`, conventionally over check-ins.
    Popularity,
    /// `w[j] / dist(i,j)`
    GravitationalTarget,
    /// `w[i] · w[j] / dist(i,j)`
    GravitationalMass,
}

impl MassVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            MassVariant::Density => "density",
            MassVariant::Popularity => "popularity",
            MassVariant::GravitationalTarget => "gravitational_target",
            MassVariant::GravitationalMass => "gravitational_mass",
        }
    }
}

fn off_diagonal(size: usize, f: impl Fn(usize, usize) -> f64) -> Array2<f64> {
    Array2::from_shape_fn((size, size), |(i, j)| if i == j { 0.0 } else { f(i, j) })
}

fn check_len(space: &StateSpace, len: usize, what: &str) -> Result<()> {
    if len != space.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what} has length {len}, state space has {} tracts",
            space.len()
        )));
    }
    Ok(())
}

/// Every other tract is equally likely.
pub fn build_uniform(size: usize) -> Result<HypothesisMatrix> {
    if size < 2 {
        return Err(Error::InvalidParameter(format!(
            "uniform hypothesis needs at least 2 states, got {size}"
        )));
    }
    HypothesisMatrix::new("uniform", off_diagonal(size, |_, _| 1.0))
}

/// `q[i][j] = 1 / dist(i,j)`.
pub fn build_inverse_distance(space: &StateSpace) -> Result<HypothesisMatrix> {
    let d = space.distances();
    HypothesisMatrix::new("inverse_distance", off_diagonal(space.len(), |i, j| 1.0 / d[[i, j]]))
}

/// Gaussian belief `(1/(σ√(2π))) · exp(−dist²/(2σ²))` around the origin or a
/// landmark.
///
/// For a very small `σ` every off-diagonal entry of a row can underflow to 0.
/// Such a row is evaluated relative to its largest entry instead, which keeps
/// its normalized shape (mass on the nearest targets) and changes it only by a
/// positive row factor.
pub fn build_gaussian(space: &StateSpace, sigma: f64, mode: &GaussianMode) -> Result<HypothesisMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let n = space.len();
    let log_norm = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let exponent = |d: f64| log_norm - d * d / (2.0 * sigma * sigma);
    let log_q: Array2<f64> = match mode {
        GaussianMode::Proximity => {
            let d = space.distances();
            Array2::from_shape_fn((n, n), |(i, j)| exponent(d[[i, j]]))
        }
        GaussianMode::Centroid(landmark) => {
            let point = landmark.point()?;
            let row: Vec<f64> = space
                .tracts()
                .iter()
                .map(|t| exponent(haversine_distance(point, t.centroid)))
                .collect();
            Array2::from_shape_fn((n, n), |(_, j)| row[j])
        }
    };
    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        let peak = (0..n)
            .filter(|j| *j != i)
            .map(|j| log_q[[i, j]])
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = if peak.exp() >= f64::MIN_POSITIVE { 0.0 } else { peak };
        for j in (0..n).filter(|j| *j != i) {
            q[[i, j]] = (log_q[[i, j]] - shift).exp();
        }
    }
    let name = match mode {
        GaussianMode::Proximity => format!("proximity(sigma={sigma})"),
        GaussianMode::Centroid(l) => format!("centroid:{}(sigma={sigma})", l.name),
    };
    HypothesisMatrix::new(name, q)
}

/// Density, popularity and the two gravitational variants.
pub fn build_mass(space: &StateSpace, w: &WeightVector, variant: MassVariant) -> Result<HypothesisMatrix> {
    check_len(space, w.w.len(), "weight vector")?;
    let d = space.distances();
    let m = &w.w;
    let q = match variant {
        MassVariant::Density | MassVariant::Popularity => off_diagonal(space.len(), |_, j| m[j]),
        MassVariant::GravitationalTarget => off_diagonal(space.len(), |i, j| m[j] / d[[i, j]]),
        MassVariant::GravitationalMass => off_diagonal(space.len(), |i, j| m[i] * m[j] / d[[i, j]]),
    };
    HypothesisMatrix::new(format!("{}:{}", variant.as_str(), w.name), q)
}

/// Row `i` of the distances with tract indices, ascending by distance and
/// excluding `i` itself.
fn sorted_neighbours(space: &StateSpace, i: usize) -> Vec<(f64, usize)> {
    let mut row: Vec<(f64, usize)> = (0..space.len())
        .filter(|u| *u != i)
        .map(|u| (space.distance(i, u), u))
        .collect();
    row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    row
}

/// `q[i][j] = 1 / max(Σ_{u≠i: dist(i,u) < dist(i,j)} w[u], 1)`.
pub fn build_rank_distance(space: &StateSpace, w: &WeightVector) -> Result<HypothesisMatrix> {
    check_len(space, w.w.len(), "weight vector")?;
    let n = space.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let neighbours = sorted_neighbours(space, i);
            let mut closer: f64 = 0.0;
            let mut k = 0;
            while k < neighbours.len() {
                // Tied distances share the mass strictly closer than them.
                let group_end = neighbours[k..]
                    .iter()
                    .position(|(d, _)| *d != neighbours[k].0)
                    .map_or(neighbours.len(), |p| k + p);
                for &(_, j) in &neighbours[k..group_end] {
                    row[j] = 1.0 / closer.max(1.0);
                }
                closer += neighbours[k..group_end].iter().map(|(_, u)| w.w[*u]).sum::<f64>();
                k = group_end;
            }
            row
        })
        .collect();
    HypothesisMatrix::new(
        format!("rank_distance:{}", w.name),
        Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]),
    )
}

/// `q[i][j] = opportunities at dist(i,j) ± eps / max(opportunities closer than dist(i,j) − eps, 1)`,
/// with opportunities measured as summed weight over tracts other than `i`.
pub fn build_intervening_opportunities(space: &StateSpace, w: &WeightVector, eps: f64) -> Result<HypothesisMatrix> {
    check_len(space, w.w.len(), "weight vector")?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    let n = space.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let neighbours = sorted_neighbours(space, i);
            let mut prefix = Vec::with_capacity(neighbours.len() + 1);
            prefix.push(0.0);
            for (_, u) in &neighbours {
                prefix.push(prefix.last().unwrap() + w.w[*u]);
            }
            let mut row = vec![0.0; n];
            for &(d, j) in &neighbours {
                // Sorted order makes both sets contiguous: [lo, hi) is the
                // same-distance window and [0, lo) the strictly closer tracts.
                let lo = neighbours.partition_point(|(du, _)| *du < d - eps);
                let hi = neighbours.partition_point(|(du, _)| *du <= d + eps);
                let numerator = prefix[hi] - prefix[lo];
                let denominator = prefix[lo];
                row[j] = numerator / denominator.max(1.0);
            }
            row
        })
        .collect();
    HypothesisMatrix::new(
        format!("intervening_opportunities:{}", w.name),
        Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]),
    )
}

/// `q[i][j] = A_i·A_j / (‖A_i‖ ‖A_j‖)`, zero where either norm is zero.
pub fn build_cosine_similarity(features: &FeatureVectors) -> Result<HypothesisMatrix> {
    let v = &features.vectors;
    let norms: Vec<f64> = v.iter().map(|a| a.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let q = off_diagonal(v.len(), |i, j| {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            0.0
        } else {
            let dot: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
            dot / (norms[i] * norms[j])
        }
    });
    HypothesisMatrix::new(format!("cosine:{}", features.name), q)
}

/// A named group of property columns compared by cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub keys: Vec<String>,
}

impl FeatureGroup {
    pub fn new(name: &str, keys: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            keys: keys.iter().map(|k| k.to_string()).collect(),
        }
    }
}

/// Catalog configuration. Defaults reproduce the 70-hypothesis catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    pub landmarks: Vec<Landmark>,
    pub sigma_grid: Vec<f64>,
    /// Weight used by the Foursquare density, gravity, rank and opportunity theories.
    pub venues_key: String,
    pub checkins_key: String,
    /// One gravitational-target hypothesis per venue category.
    pub venue_categories: Vec<String>,
    pub venue_similarity: Vec<FeatureGroup>,
    /// One gravitational-target hypothesis per census indicator.
    pub census_indicators: Vec<String>,
    pub census_similarity: Vec<FeatureGroup>,
    /// Distance tolerance (km) of the intervening-opportunities "same distance" set.
    pub opportunity_eps_km: f64,
    /// Count tracts with positive weight instead of summing weights in the
    /// intervening-opportunities sets.
    pub unweighted_opportunities: bool,
}

pub const DEFAULT_SIGMA_GRID_KM: [f64; 7] = [0.01, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

pub const VENUE_CATEGORY_KEYS: [&str; 10] = [
    "venues_arts",
    "venues_education",
    "venues_food",
    "venues_nightlife",
    "venues_outdoors",
    "venues_work",
    "venues_residence",
    "venues_shop",
    "venues_travel",
    "venues_church",
];

pub const CENSUS_INDICATOR_KEYS: [&str; 20] = [
    "population",
    "area_sqkm",
    "pct_white",
    "pct_black",
    "pct_labor_force",
    "pct_unemployed",
    "pct_below_poverty",
    "pct_above_poverty",
    "libraries",
    "art_galleries",
    "theaters",
    "museums",
    "wifi_hotspots",
    "places_of_interest",
    "residential_zoning",
    "commercial_zoning",
    "manufacturing_zoning",
    "park_area",
    "historic_district_area",
    "empowerment_zone_area",
];

pub const RACE_KEYS: [&str; 7] = [
    "pct_white",
    "pct_black",
    "pct_american_indian",
    "pct_asian",
    "pct_pacific_islander",
    "pct_other_race",
    "pct_two_races",
];
pub const POVERTY_KEYS: [&str; 2] = ["pct_below_poverty", "pct_above_poverty"];
pub const EMPLOYMENT_KEYS: [&str; 3] = ["pct_employed", "pct_unemployed", "pct_labor_force"];

impl Default for CatalogConfig {
    fn default() -> Self {
        Self {
            landmarks: vec![
                Landmark::new("geographic_center", 40.79090, -73.96640),
                Landmark::new("flatiron", 40.74111, -73.98972),
                Landmark::new("times_square", 40.75773, -73.98570),
            ],
            sigma_grid: DEFAULT_SIGMA_GRID_KM.to_vec(),
            venues_key: "venues_all".into(),
            checkins_key: "checkins".into(),
            venue_categories: VENUE_CATEGORY_KEYS.iter().map(|k| k.to_string()).collect(),
            venue_similarity: vec![FeatureGroup::new("venue_categories", &VENUE_CATEGORY_KEYS)],
            census_indicators: CENSUS_INDICATOR_KEYS.iter().map(|k| k.to_string()).collect(),
            census_similarity: vec![
                FeatureGroup::new("race", &RACE_KEYS),
                FeatureGroup::new("poverty", &POVERTY_KEYS),
                FeatureGroup::new("employment", &EMPLOYMENT_KEYS),
            ],
            opportunity_eps_km: 1e-9,
            unweighted_opportunities: false,
        }
    }
}

impl CatalogConfig {
    /// Every property key the catalog reads, deduplicated, in first-use order.
    pub fn required_properties(&self) -> Vec<String> {
        let mut keys: Vec<String> = Vec::new();
        let mut push = |k: &String| {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        };
        push(&self.venues_key);
        push(&self.checkins_key);
        self.venue_categories.iter().for_each(&mut push);
        self.venue_similarity.iter().flat_map(|g| &g.keys).for_each(&mut push);
        self.census_indicators.iter().for_each(&mut push);
        self.census_similarity.iter().flat_map(|g| &g.keys).for_each(&mut push);
        keys
    }
}

/// Catalog section a hypothesis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Baseline,
    Distance,
    Foursquare,
    Census,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Baseline => "baseline",
            Category::Distance => "distance",
            Category::Foursquare => "foursquare",
            Category::Census => "census",
        }
    }
}

/// How to build one catalog hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisSpec {
    Uniform,
    InverseDistance,
    Gaussian { sigma: f64, mode: GaussianMode },
    Mass { variant: MassVariant, key: String },
    RankDistance { key: String },
    InterveningOpportunities { key: String, eps: f64, unweighted: bool },
    Cosine { group: FeatureGroup },
}

impl HypothesisSpec {
    pub fn theory(&self) -> &'static str {
        match self {
            HypothesisSpec::Uniform => "uniform",
            HypothesisSpec::InverseDistance => "inverse_distance",
            HypothesisSpec::Gaussian {
                mode: GaussianMode::Proximity,
                ..
            } => "proximity",
            HypothesisSpec::Gaussian { .. } => "centroid",
            HypothesisSpec::Mass { variant, .. } => variant.as_str(),
            HypothesisSpec::RankDistance { .. } => "rank_distance",
            HypothesisSpec::InterveningOpportunities { .. } => "intervening_opportunities",
            HypothesisSpec::Cosine { .. } => "cosine",
        }
    }

    /// Human-readable parameter summary for manifests.
    pub fn parameters(&self) -> String {
        match self {
            HypothesisSpec::Uniform | HypothesisSpec::InverseDistance => String::new(),
            HypothesisSpec::Gaussian {
                sigma,
                mode: GaussianMode::Proximity,
            } => format!("sigma_km={sigma}"),
            HypothesisSpec::Gaussian {
                sigma,
                mode: GaussianMode::Centroid(l),
            } => {
                format!("sigma_km={sigma};landmark={};lat={};lon={}", l.name, l.lat, l.lon)
            }
            HypothesisSpec::Mass { key, .. } | HypothesisSpec::RankDistance { key } => format!("weight={key}"),
            HypothesisSpec::InterveningOpportunities { key, eps, unweighted } => {
                format!("weight={key};eps_km={eps};unweighted={unweighted}")
            }
            HypothesisSpec::Cosine { group } => format!("features={}", group.keys.join("|")),
        }
    }

    pub fn name(&self) -> String {
        match self {
            HypothesisSpec::Uniform => "uniform".into(),
            HypothesisSpec::InverseDistance => "inverse_distance".into(),
            HypothesisSpec::Gaussian {
                sigma,
                mode: GaussianMode::Proximity,
            } => format!("proximity(sigma={sigma})"),
            HypothesisSpec::Gaussian {
                sigma,
                mode: GaussianMode::Centroid(l),
            } => {
                format!("centroid:{}(sigma={sigma})", l.name)
            }
            HypothesisSpec::Mass { variant, key } => format!("{}:{key}", variant.as_str()),
            HypothesisSpec::RankDistance { key } => format!("rank_distance:{key}"),
            HypothesisSpec::InterveningOpportunities { key, .. } => format!("intervening_opportunities:{key}"),
            HypothesisSpec::Cosine { group } => format!("cosine:{}", group.name),
        }
    }

    pub fn build(&self, space: &StateSpace) -> Result<HypothesisMatrix> {
        let matrix = match self {
            HypothesisSpec::Uniform => build_uniform(space.len()),
            HypothesisSpec::InverseDistance => build_inverse_distance(space),
            HypothesisSpec::Gaussian { sigma, mode } => build_gaussian(space, *sigma, mode),
            HypothesisSpec::Mass { variant, key } => {
                build_mass(space, &WeightVector::from_property(space, key)?, *variant)
            }
            HypothesisSpec::RankDistance { key } => {
                build_rank_distance(space, &WeightVector::from_property(space, key)?)
            }
            HypothesisSpec::InterveningOpportunities { key, eps, unweighted } => {
                let w = WeightVector::from_property(space, key)?;
                let w = if *unweighted { w.indicator() } else { w };
                build_intervening_opportunities(space, &w, *eps)
            }
            HypothesisSpec::Cosine { group } => {
                build_cosine_similarity(&FeatureVectors::from_properties(space, &group.name, &group.keys)?)
            }
        }?;
        Ok(matrix.with_name(self.name()))
    }
}

/// One catalog hypothesis before materialization.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub category: Category,
    pub spec: HypothesisSpec,
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.spec.name(), self.category.as_str())
    }
}

/// Lists the catalog hypotheses in a fixed order: uniform, distance-based,
/// Foursquare, census.
pub fn catalog_entries(config: &CatalogConfig) -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    let mut add = |category, spec| out.push(CatalogEntry { category, spec });

    add(Category::Baseline, HypothesisSpec::Uniform);

    add(Category::Distance, HypothesisSpec::InverseDistance);
    let mut modes = vec![GaussianMode::Proximity];
    modes.extend(config.landmarks.iter().cloned().map(GaussianMode::Centroid));
    for mode in &modes {
        for sigma in &config.sigma_grid {
            add(
                Category::Distance,
                HypothesisSpec::Gaussian {
                    sigma: *sigma,
                    mode: mode.clone(),
                },
            );
        }
    }

    let venues = config.venues_key.clone();
    add(
        Category::Foursquare,
        HypothesisSpec::Mass {
            variant: MassVariant::Density,
            key: venues.clone(),
        },
    );
    add(
        Category::Foursquare,
        HypothesisSpec::Mass {
            variant: MassVariant::Popularity,
            key: config.checkins_key.clone(),
        },
    );
    for variant in [MassVariant::GravitationalMass, MassVariant::GravitationalTarget] {
        add(
            Category::Foursquare,
            HypothesisSpec::Mass {
                variant,
                key: venues.clone(),
            },
        );
    }
    add(
        Category::Foursquare,
        HypothesisSpec::RankDistance { key: venues.clone() },
    );
    add(
        Category::Foursquare,
        HypothesisSpec::InterveningOpportunities {
            key: venues,
            eps: config.opportunity_eps_km,
            unweighted: config.unweighted_opportunities,
        },
    );
    for key in &config.venue_categories {
        add(
            Category::Foursquare,
            HypothesisSpec::Mass {
                variant: MassVariant::GravitationalTarget,
                key: key.clone(),
            },
        );
    }
    for group in &config.venue_similarity {
        add(Category::Foursquare, HypothesisSpec::Cosine { group: group.clone() });
    }

    for key in &config.census_indicators {
        add(
            Category::Census,
            HypothesisSpec::Mass {
                variant: MassVariant::GravitationalTarget,
                key: key.clone(),
            },
        );
    }
    for group in &config.census_similarity {
        add(Category::Census, HypothesisSpec::Cosine { group: group.clone() });
    }
    out
}

/// Materializes the catalog for a state space.
///
/// Fails with [`Error::MissingProperty`] if a referenced key is absent on any
/// tract, and with [`Error::InvalidParameter`] on duplicate names.
pub fn build_catalog(space: &StateSpace, config: &CatalogConfig) -> Result<Vec<HypothesisMatrix>> {
    for key in config.required_properties() {
        if space.tracts().iter().any(|t| t.property(&key).is_none()) {
            return Err(Error::MissingProperty(key));
        }
    }
    let entries = catalog_entries(config);
    let mut names: Vec<String> = entries.iter().map(|e| e.spec.name()).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!("duplicate hypothesis name `{}`", w[0])));
    }
    entries
        .par_iter()
        .map(|e| {
            e.spec.build(space).map_err(|err| match err {
                Error::Degenerate(msg) => Error::Degenerate(format!("{msg} (check its property column)")),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Tract;
    use ndarray::array;
    use std::collections::BTreeMap;

    fn abstract_space(distances: Array2<f64>) -> StateSpace {
        let n = distances.nrows();
        let tracts = (0..n)
            .map(|i| {
                Tract::new(
                    format!("T{i}"),
                    i,
                    GeoPoint::new(40.0, -74.0 + 0.01 * i as f64).unwrap(),
                    1.0,
                    None,
                    BTreeMap::new(),
                )
                .unwrap()
            })
            .collect();
        StateSpace::with_distances(tracts, distances).unwrap()
    }

    /// Tracts on a line at the given positions (km).
    fn line_space(positions: &[f64]) -> StateSpace {
        let n = positions.len();
        abstract_space(Array2::from_shape_fn((n, n), |(i, j)| {
            (positions[i] - positions[j]).abs()
        }))
    }

    fn weights(w: &[f64]) -> WeightVector {
        WeightVector::new("w", w.to_vec()).unwrap()
    }

    fn assert_zero_diagonal(h: &HypothesisMatrix) {
        assert!(h.q().diag().iter().all(|v| *v == 0.0), "{}", h.name());
    }

    #[test]
    fn matrix_validation() {
        assert!(HypothesisMatrix::new("z", Array2::zeros((3, 3))).is_err());
        assert!(HypothesisMatrix::new("neg", array![[0.0, -1.0], [1.0, 0.0]]).is_err());
        assert!(HypothesisMatrix::new("nan", array![[0.0, f64::NAN], [1.0, 0.0]]).is_err());
        assert!(HypothesisMatrix::new("rect", Array2::ones((2, 3))).is_err());
        // Diagonal-only mass is zeroed and leaves nothing.
        assert!(HypothesisMatrix::new("diag", Array2::eye(3)).is_err());
        let h = HypothesisMatrix::new("ok", Array2::ones((3, 3))).unwrap();
        assert_zero_diagonal(&h);
    }

    #[test]
    fn uniform() {
        let h = build_uniform(3).unwrap();
        assert_eq!(h.q(), &array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
        for n in 2..10 {
            let h = build_uniform(n).unwrap();
            assert_zero_diagonal(&h);
            assert_eq!(h.q().sum(), (n * (n - 1)) as f64);
        }
        assert!(build_uniform(1).is_err());
    }

    #[test]
    fn inverse_distance() {
        let space = line_space(&[0.0, 2.0, 3.0]);
        let h = build_inverse_distance(&space).unwrap();
        assert_eq!(h.q()[[0, 1]], 0.5);
        assert!(h.q()[[1, 2]] > h.q()[[1, 0]]);
        assert_eq!(h.q(), &h.q().t());
    }

    #[test]
    fn gaussian_modes() {
        let space = line_space(&[0.0, 1.0, 3.0]);
        let h = build_gaussian(&space, 1.0, &GaussianMode::Proximity).unwrap();
        assert_zero_diagonal(&h);
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((norm - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((h.q()[[0, 1]] - norm * (-0.5f64).exp()).abs() < 1e-15);
        // Largest off-diagonal entry of each row is the nearest distinct tract.
        assert!(h.q()[[0, 1]] > h.q()[[0, 2]]);
        assert!(h.q()[[2, 1]] > h.q()[[2, 0]]);

        let real = crate::synth::tests_support::small_city();
        let l = Landmark::new("flatiron", 40.74111, -73.98972);
        let h = build_gaussian(&real, 2.0, &GaussianMode::Centroid(l.clone())).unwrap();
        let q = h.q();
        for i in 0..real.len() {
            for k in 0..real.len() {
                for j in 0..real.len() {
                    if j != i && j != k {
                        assert_eq!(q[[i, j]], q[[k, j]]);
                    }
                }
            }
        }
        assert!(build_gaussian(&real, 0.0, &GaussianMode::Proximity).is_err());
        assert!(build_gaussian(&real, -1.0, &GaussianMode::Centroid(l)).is_err());
    }

    #[test]
    fn gaussian_tiny_sigma_keeps_nearest_target() {
        // Neighbours 0.4 km apart: exp(-0.16/(2e-4)) underflows.
        let space = line_space(&[0.0, 0.4, 0.9]);
        let h = build_gaussian(&space, 0.01, &GaussianMode::Proximity).unwrap();
        let q = h.q();
        assert_eq!(q[[0, 1]], 1.0);
        assert_eq!(q[[0, 2]], 0.0);
        assert_eq!(q[[2, 1]], 1.0);
    }

    #[test]
    fn mass_variants() {
        let space = line_space(&[0.0, 1.0, 3.0]);
        let h = build_mass(&space, &weights(&[2.0, 0.0, 5.0]), MassVariant::Density).unwrap();
        assert_eq!(h.q(), &array![[0.0, 0.0, 5.0], [2.0, 0.0, 5.0], [2.0, 0.0, 0.0]]);

        let base = build_mass(&space, &weights(&[1.0, 2.0, 3.0]), MassVariant::GravitationalTarget).unwrap();
        let doubled = build_mass(&space, &weights(&[1.0, 2.0, 6.0]), MassVariant::GravitationalTarget).unwrap();
        for i in 0..2 {
            assert_eq!(doubled.q()[[i, 2]], 2.0 * base.q()[[i, 2]]);
            assert_eq!(doubled.q()[[i, 1 - i]], base.q()[[i, 1 - i]]);
        }

        let h = build_mass(&space, &weights(&[0.0, 2.0, 3.0]), MassVariant::GravitationalMass).unwrap();
        assert!(h.q().row(0).iter().all(|v| *v == 0.0));
        assert_eq!(h.q()[[1, 2]], 6.0 / 2.0);

        assert!(build_mass(&space, &weights(&[1.0, 2.0]), MassVariant::Density).is_err());
    }

    #[test]
    fn mass_variants_collapse_to_uniform() {
        let n = 4;
        let space = abstract_space(Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 }));
        let ones = weights(&[1.0; 4]);
        let uniform = build_uniform(n).unwrap();
        for variant in [
            MassVariant::Density,
            MassVariant::Popularity,
            MassVariant::GravitationalTarget,
            MassVariant::GravitationalMass,
        ] {
            assert_eq!(build_mass(&space, &ones, variant).unwrap().q(), uniform.q());
        }
    }

    /// Brute-force oracle: enumerate the closer set for every (i, j).
    fn rank_oracle(space: &StateSpace, w: &[f64]) -> Array2<f64> {
        let n = space.len();
        off_diagonal(n, |i, j| {
            let closer: f64 = (0..n)
                .filter(|u| *u != i && space.distance(i, *u) < space.distance(i, j))
                .map(|u| w[u])
                .sum();
            1.0 / closer.max(1.0)
        })
    }

    fn opportunities_oracle(space: &StateSpace, w: &[f64], eps: f64) -> Array2<f64> {
        let n = space.len();
        off_diagonal(n, |i, j| {
            let dij = space.distance(i, j);
            let others = (0..n).filter(|u| *u != i);
            let num: f64 = others
                .clone()
                .filter(|u| (space.distance(i, *u) - dij).abs() <= eps)
                .map(|u| w[u])
                .sum();
            let den: f64 = others.filter(|u| space.distance(i, *u) < dij - eps).map(|u| w[u]).sum();
            num / den.max(1.0)
        })
    }

    #[test]
    fn rank_distance_examples() {
        let space = line_space(&[0.0, 1.0, 2.0]);
        let h = build_rank_distance(&space, &weights(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(h.q()[[0, 1]], 1.0);
        assert_eq!(h.q()[[0, 2]], 1.0);

        let h = build_rank_distance(&space, &weights(&[1.0, 4.0, 1.0])).unwrap();
        assert_eq!(h.q()[[0, 2]], 0.25);
        assert_eq!(h.q()[[2, 0]], 0.25);
        assert_eq!(h.q(), &rank_oracle(&space, &[1.0, 4.0, 1.0]));
    }

    #[test]
    fn rank_distance_matches_oracle_with_ties() {
        // Square corners: ties at equal side lengths.
        let s = 2f64.sqrt();
        let d = array![
            [0.0, 1.0, s, 1.0],
            [1.0, 0.0, 1.0, s],
            [s, 1.0, 0.0, 1.0],
            [1.0, s, 1.0, 0.0]
        ];
        let space = abstract_space(d);
        let w = [3.0, 0.5, 2.0, 7.0];
        assert_eq!(
            build_rank_distance(&space, &weights(&w)).unwrap().q(),
            &rank_oracle(&space, &w)
        );
        let space = crate::synth::tests_support::small_city();
        let w: Vec<f64> = (0..space.len()).map(|i| ((i * 37) % 11) as f64).collect();
        assert_eq!(
            build_rank_distance(&space, &weights(&w)).unwrap().q(),
            &rank_oracle(&space, &w)
        );
    }

    #[test]
    fn rank_distance_closer_mass_never_increases_belief() {
        let space = line_space(&[0.0, 1.0, 2.0, 4.0]);
        let before = build_rank_distance(&space, &weights(&[1.0, 2.0, 1.0, 1.0])).unwrap();
        let after = build_rank_distance(&space, &weights(&[1.0, 5.0, 1.0, 1.0])).unwrap();
        assert!(after.q()[[0, 3]] <= before.q()[[0, 3]]);
        assert!(after.q()[[0, 2]] <= before.q()[[0, 2]]);
    }

    #[test]
    fn intervening_opportunities_examples() {
        let space = line_space(&[0.0, 1.0, 3.0]);
        let h = build_intervening_opportunities(&space, &weights(&[0.0, 2.0, 4.0]), 0.0).unwrap();
        assert_eq!(h.q()[[0, 2]], 2.0);
        // Nothing closer than tract 1: denominator clamps to 1.
        assert_eq!(h.q()[[0, 1]], 2.0);

        // Distinct distances and eps = 0: numerator is w[j].
        let w = [1.5, 2.0, 4.0];
        let h = build_intervening_opportunities(&space, &weights(&w), 0.0).unwrap();
        assert_eq!(h.q()[[1, 0]], 1.5);
        assert_eq!(h.q(), &opportunities_oracle(&space, &w, 0.0));
    }

    #[test]
    fn intervening_opportunities_matches_oracle() {
        let s = 2f64.sqrt();
        let d = array![
            [0.0, 1.0, s, 1.0],
            [1.0, 0.0, 1.0, s],
            [s, 1.0, 0.0, 1.0],
            [1.0, s, 1.0, 0.0]
        ];
        let space = abstract_space(d);
        let w = [3.0, 0.5, 2.0, 7.0];
        for eps in [0.0, 1e-9, 0.5] {
            let h = build_intervening_opportunities(&space, &weights(&w), eps).unwrap();
            assert_eq!(h.q(), &opportunities_oracle(&space, &w, eps), "eps={eps}");
        }
        let space = crate::synth::tests_support::small_city();
        let w: Vec<f64> = (0..space.len()).map(|i| ((i * 13) % 7) as f64).collect();
        for eps in [1e-9, 0.3] {
            let h = build_intervening_opportunities(&space, &weights(&w), eps).unwrap();
            let oracle = opportunities_oracle(&space, &w, eps);
            for (a, b) in h.q().iter().zip(oracle.iter()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
        assert!(build_intervening_opportunities(&space, &weights(&w), -1.0).is_err());
    }

    #[test]
    fn cosine_similarity() {
        let f = FeatureVectors::new(
            "f",
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let h = build_cosine_similarity(&f).unwrap();
        assert_eq!(h.q()[[0, 1]], 1.0);
        assert_eq!(h.q()[[0, 0]], 0.0);
        assert_eq!(h.q()[[0, 2]], 0.0);
        assert!(h.q().row(3).iter().all(|v| *v == 0.0));
        assert!(h.q().column(3).iter().all(|v| *v == 0.0));
        assert!(FeatureVectors::new("bad", vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn default_catalog_has_seventy_hypotheses() {
        let config = CatalogConfig::default();
        let entries = catalog_entries(&config);
        assert_eq!(entries.len(), 70);
        let count = |c: Category| entries.iter().filter(|e| e.category == c).count();
        assert_eq!(count(Category::Baseline), 1);
        assert_eq!(count(Category::Distance), 29);
        assert_eq!(count(Category::Foursquare), 17);
        assert_eq!(count(Category::Census), 23);

        let space = crate::synth::tests_support::small_city();
        let catalog = build_catalog(&space, &config).unwrap();
        assert_eq!(catalog.len(), 70);
        let mut names: Vec<&str> = catalog.iter().map(|h| h.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 70);
        for h in &catalog {
            assert_zero_diagonal(h);
            assert!(h.q().iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn missing_property_names_the_key() {
        let space = line_space(&[0.0, 1.0, 2.0]);
        match build_catalog(&space, &CatalogConfig::default()) {
            Err(Error::MissingProperty(key)) => assert_eq!(key, "venues_all"),
            other => panic!("expected missing property, got {other:?}"),
        }
    }
}
