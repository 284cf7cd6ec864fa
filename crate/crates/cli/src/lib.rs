//! Staged batch pipeline behind the `odtrails` binary.
//!
//! Every stage reads its inputs from declared files and writes plain-text
//! artifacts under the output directory:
//!
//! ```text
//! ingest/trips_clean.csv        hour,pickup_tract,dropoff_tract
//! ingest/summary.csv            metric,value (input, accepted, one row per rejection reason)
//! factors/factors_*.csv         CP factors, scale and metadata
//! factors/trace.csv             iteration,relative_error
//! clusters/component_NN_membership.csv
//! clusters/component_NN_counts.csv
//! clusters/overall_counts.csv   pickup,dropoff,count (nonzero cells)
//! hypotheses/manifest.csv       index,name,category,theory,parameters
//! rankings/rankings.csv         cluster,hypothesis,k,log_evidence,rank
//! ```

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use odtrails::clusters::{select_cluster_trips, write_membership, ClusterSpec, DEFAULT_TOP_N};
use odtrails::evidence::{k_sweep, write_rankings, DEFAULT_K_GRID};
use odtrails::geo::{read_tracts, write_tracts, StateSpace};
use odtrails::hypotheses::{build_catalog, catalog_entries, CatalogConfig};
use odtrails::ingest::{
    clean_trips, read_counts, read_trip_records, read_trips, transition_counts, write_counts, write_trip_records,
    write_trips, RejectReason,
};
use odtrails::synth::{nightlife_scenario, render_records};
use odtrails::tensorfac::{
    build_tensor, ntf_decompose, read_factors, write_factors, FactorMetadata, NtfOptions, DEFAULT_RANK,
};

pub const INGEST_DIR: &str = "ingest";
pub const FACTORS_DIR: &str = "factors";
pub const CLUSTERS_DIR: &str = "clusters";
pub const HYPOTHESES_DIR: &str = "hypotheses";
pub const RANKINGS_DIR: &str = "rankings";
pub const CLEAN_TRIPS_FILE: &str = "trips_clean.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const RANKINGS_FILE: &str = "rankings.csv";
pub const OVERALL_CLUSTER: &str = "overall";

/// Name of the cluster of one CP component, zero-padded so names sort by index.
pub fn component_name(component: usize) -> String {
    format!("component_{component:02}")
}

/// Fitting options of the factorization stage. The seed is shared with the
/// rest of the pipeline.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NtfSection {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub epsilon: f64,
}

impl Default for NtfSection {
    fn default() -> Self {
        let d = NtfOptions::default();
        Self {
            max_iters: d.max_iters,
            rel_tol: d.rel_tol,
            epsilon: d.epsilon,
        }
    }
}

/// Pipeline configuration, read from TOML. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tracts: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    /// Extra per-tract columns keyed by `tract_id`, merged into the tract properties.
    pub properties: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub r: usize,
    pub n: usize,
    pub k_grid: Vec<f64>,
    /// Replaces the catalog's σ grid when set.
    pub sigma_grid: Option<Vec<f64>>,
    pub seed: u64,
    pub exclude_self_loops: bool,
    pub ntf: NtfSection,
    pub catalog: CatalogConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tracts: None,
            trips: None,
            properties: None,
            output_dir: None,
            r: DEFAULT_RANK,
            n: DEFAULT_TOP_N,
            k_grid: DEFAULT_K_GRID.to_vec(),
            sigma_grid: None,
            seed: 42,
            exclude_self_loops: true,
            ntf: NtfSection::default(),
            catalog: CatalogConfig::default(),
        }
    }
}

/// Command-line and environment overrides, applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tracts: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub r: Option<usize>,
    pub n: Option<usize>,
    pub k_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))?;
        for path in [
            &mut config.tracts,
            &mut config.trips,
            &mut config.properties,
            &mut config.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.tracts {
            self.tracts = Some(p.clone());
        }
        if let Some(p) = &o.trips {
            self.trips = Some(p.clone());
        }
        if let Some(p) = &o.output_dir {
            self.output_dir = Some(p.clone());
        }
        if let Some(r) = o.r {
            self.r = r;
        }
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(k) = &o.k_grid {
            self.k_grid = k.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.r == 0 {
            bail!("`r` must be at least 1");
        }
        if self.n == 0 {
            bail!("`n` must be at least 1");
        }
        if self.k_grid.is_empty() {
            bail!("`k_grid` must not be empty");
        }
        if let Some(k) = self.k_grid.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            bail!("`k_grid` entries must be finite and non-negative, got {k}");
        }
        if let Some(grid) = &self.sigma_grid {
            if let Some(s) = grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                bail!("`sigma_grid` entries must be positive, got {s}");
            }
        }
        Ok(())
    }

    pub fn ntf_options(&self) -> NtfOptions {
        NtfOptions {
            seed: self.seed,
            max_iters: self.ntf.max_iters,
            rel_tol: self.ntf.rel_tol,
            epsilon: self.ntf.epsilon,
        }
    }

    pub fn catalog_config(&self) -> CatalogConfig {
        let mut c = self.catalog.clone();
        if let Some(grid) = &self.sigma_grid {
            c.sigma_grid = grid.clone();
        }
        c
    }

    fn path(&self, value: &Option<PathBuf>, key: &str) -> anyhow::Result<PathBuf> {
        value
            .clone()
            .ok_or_else(|| anyhow!("missing `{key}` path (config key or override)"))
    }

    pub fn output(&self) -> anyhow::Result<PathBuf> {
        self.path(&self.output_dir, "output_dir")
    }

    fn stage_dir(&self, name: &str) -> anyhow::Result<PathBuf> {
        let dir = self.output()?.join(name);
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(dir)
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Factorize,
    ExtractClusters,
    BuildHypotheses,
    Rank,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Factorize,
        Stage::ExtractClusters,
        Stage::BuildHypotheses,
        Stage::Rank,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Factorize => "factorize",
            Stage::ExtractClusters => "extract-clusters",
            Stage::BuildHypotheses => "build-hypotheses",
            Stage::Rank => "rank",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A failure attributed to the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

/// Reads the tracts file and merges the optional properties file.
pub fn load_state_space(config: &PipelineConfig) -> anyhow::Result<StateSpace> {
    let path = config.path(&config.tracts, "tracts")?;
    let space = read_tracts(open(&path)?).with_context(|| format!("in tracts file {}", path.display()))?;
    let Some(props) = &config.properties else {
        return Ok(space);
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(props)?);
    let headers = rdr.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "tract_id")
        .ok_or_else(|| anyhow!("properties file {} has no `tract_id` column", props.display()))?;
    let mut tracts = space.tracts().to_vec();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let id = &record[id_col];
        let tract = tracts
            .iter_mut()
            .find(|t| t.id == id)
            .ok_or_else(|| anyhow!("properties file line {}: unknown tract `{id}`", line + 2))?;
        for (key, value) in headers.iter().zip(record.iter()).filter(|(k, _)| *k != "tract_id") {
            let v: f64 = value
                .parse()
                .map_err(|_| anyhow!("properties file line {}: `{key}` is not a number", line + 2))?;
            tract.properties.insert(key.to_string(), v);
        }
    }
    Ok(StateSpace::with_distances(tracts, space.distances().clone())?)
}

fn clean_trips_path(config: &PipelineConfig) -> anyhow::Result<PathBuf> {
    Ok(config.output()?.join(INGEST_DIR).join(CLEAN_TRIPS_FILE))
}

fn load_clean_trips(config: &PipelineConfig) -> anyhow::Result<Vec<odtrails::ingest::Trip>> {
    let path = clean_trips_path(config)?;
    read_trips(open(&path)?).with_context(|| format!("in {}", path.display()))
}

fn ingest(config: &PipelineConfig) -> anyhow::Result<String> {
    let space = load_state_space(config)?;
    let trips_path = config.path(&config.trips, "trips")?;
    let records =
        read_trip_records(open(&trips_path)?).with_context(|| format!("in trips file {}", trips_path.display()))?;
    let cleaned = clean_trips(&records, &space, config.exclude_self_loops);
    let dir = config.stage_dir(INGEST_DIR)?;
    write_trips(create(&dir.join(CLEAN_TRIPS_FILE))?, &cleaned.trips)?;
    let mut summary = create(&dir.join(SUMMARY_FILE))?;
    writeln!(summary, "metric,value")?;
    writeln!(summary, "tracts,{}", space.len())?;
    writeln!(summary, "input_records,{}", records.len())?;
    writeln!(summary, "accepted,{}", cleaned.trips.len())?;
    for reason in RejectReason::ALL {
        writeln!(summary, "rejected_{},{}", reason.as_str(), cleaned.rejected.get(reason))?;
    }
    summary.flush()?;
    Ok(format!(
        "{} of {} records accepted, {} rejected",
        cleaned.trips.len(),
        records.len(),
        cleaned.rejected.total()
    ))
}

fn factorize(config: &PipelineConfig) -> anyhow::Result<String> {
    let space = load_state_space(config)?;
    let trips = load_clean_trips(config)?;
    let tensor = build_tensor(&trips, space.len())?;
    let result = ntf_decompose(&tensor, config.r, &config.ntf_options())?;
    let dir = config.stage_dir(FACTORS_DIR)?;
    let meta = FactorMetadata {
        rank: config.r,
        seed: config.seed,
        iterations: result.trace.iterations,
        final_error: result.trace.final_error(),
    };
    write_factors(&dir, &result.factors, &meta)?;
    let mut trace = create(&dir.join(TRACE_FILE))?;
    writeln!(trace, "iteration,relative_error")?;
    for (i, e) in result.trace.errors.iter().enumerate() {
        writeln!(trace, "{i},{e}")?;
    }
    trace.flush()?;
    Ok(format!(
        "rank {} after {} iterations, relative error {:.6}{}",
        config.r,
        result.trace.iterations,
        result.trace.final_error(),
        if result.trace.overcomplete {
            " (over-complete)"
        } else {
            ""
        }
    ))
}

fn extract_clusters(config: &PipelineConfig) -> anyhow::Result<String> {
    let space = load_state_space(config)?;
    let trips = load_clean_trips(config)?;
    let factors = read_factors(&config.output()?.join(FACTORS_DIR))?;
    if factors.dims()[1] != space.len() {
        bail!(
            "factors cover {} tracts but the tracts file has {}",
            factors.dims()[1],
            space.len()
        );
    }
    let dir = config.stage_dir(CLUSTERS_DIR)?;
    for entry in fs::read_dir(&dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            fs::remove_file(&path)?;
        }
    }
    let mut sizes = Vec::new();
    for c in 0..factors.rank() {
        let spec = ClusterSpec::from_factors(&factors, c, config.n)?;
        let name = component_name(c);
        write_membership(create(&dir.join(format!("{name}_membership.csv")))?, &factors, &spec)?;
        let counts = transition_counts(&select_cluster_trips(&trips, &spec), space.len())?;
        write_counts(create(&dir.join(format!("{name}_counts.csv")))?, &counts)?;
        sizes.push(counts.total().to_string());
    }
    let overall = transition_counts(&trips, space.len())?;
    write_counts(create(&dir.join(format!("{OVERALL_CLUSTER}_counts.csv")))?, &overall)?;
    Ok(format!("{} clusters with sizes [{}]", factors.rank(), sizes.join(", ")))
}

fn build_hypotheses(config: &PipelineConfig) -> anyhow::Result<String> {
    let space = load_state_space(config)?;
    let catalog_config = config.catalog_config();
    // Building checks every required property and parameter.
    let catalog = build_catalog(&space, &catalog_config)?;
    let dir = config.stage_dir(HYPOTHESES_DIR)?;
    let mut wtr = csv::Writer::from_writer(create(&dir.join(MANIFEST_FILE))?);
    wtr.write_record(["index", "name", "category", "theory", "parameters"])?;
    for (i, entry) in catalog_entries(&catalog_config).iter().enumerate() {
        wtr.write_record([
            i.to_string(),
            entry.spec.name(),
            entry.category.as_str().to_string(),
            entry.spec.theory().to_string(),
            entry.spec.parameters(),
        ])?;
    }
    wtr.flush()?;
    Ok(format!("{} hypotheses", catalog.len()))
}

fn rank(config: &PipelineConfig) -> anyhow::Result<String> {
    let space = load_state_space(config)?;
    let catalog = build_catalog(&space, &config.catalog_config())?;
    let clusters_dir = config.output()?.join(CLUSTERS_DIR);
    let mut names: Vec<String> = fs::read_dir(&clusters_dir)
        .with_context(|| format!("cannot read {}", clusters_dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_suffix("_counts.csv"))
                .map(String::from)
        })
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no cluster counts in {}", clusters_dir.display());
    }
    let mut rows = Vec::with_capacity(names.len());
    for name in names {
        let path = clusters_dir.join(format!("{name}_counts.csv"));
        let counts = read_counts(open(&path)?, space.len()).with_context(|| format!("in {}", path.display()))?;
        rows.push((name, k_sweep(&counts, &catalog, &config.k_grid)?));
    }
    let dir = config.stage_dir(RANKINGS_DIR)?;
    write_rankings(create(&dir.join(RANKINGS_FILE))?, &rows)?;
    Ok(format!(
        "{} hypotheses ranked in {} clusters at {} values of k",
        catalog.len(),
        rows.len(),
        config.k_grid.len()
    ))
}

/// Runs one stage and returns a one-line report.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<String, StageError> {
    let outcome = config.validate().and_then(|_| match stage {
        Stage::Ingest => ingest(config),
        Stage::Factorize => factorize(config),
        Stage::ExtractClusters => extract_clusters(config),
        Stage::BuildHypotheses => build_hypotheses(config),
        Stage::Rank => rank(config),
    });
    outcome.map_err(|source| StageError { stage, source })
}

/// Runs every stage in order, stopping at the first failure.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<(Stage, String)>, StageError> {
    Stage::ALL
        .iter()
        .map(|&stage| run_stage(stage, config).map(|report| (stage, report)))
        .collect()
}

/// One row of the rankings file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RankingRow {
    pub cluster: String,
    pub hypothesis: String,
    pub k: f64,
    pub log_evidence: f64,
    pub rank: usize,
}

pub fn read_rankings(path: &Path) -> anyhow::Result<Vec<RankingRow>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    rdr.deserialize()
        .collect::<Result<Vec<RankingRow>, _>>()
        .with_context(|| format!("in {}", path.display()))
}

/// Parameters of the synthetic nightlife fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub rows: usize,
    pub cols: usize,
    pub planted_trips: usize,
    pub background_trips: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 5,
            planted_trips: 20_000,
            background_trips: 30_000,
            seed: 42,
        }
    }
}

pub const SYNTH_CONFIG_FILE: &str = "demo.cfg";

/// Writes `tracts.csv`, raw `trips.csv`, `planted.csv` with the planted
/// cluster's supports and a `demo.cfg` that runs the pipeline on them.
pub fn write_synth_fixture(dir: &Path, opts: &SynthOptions) -> anyhow::Result<String> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let scenario = nightlife_scenario(
        opts.rows,
        opts.cols,
        opts.planted_trips,
        opts.background_trips,
        opts.seed,
    )?;
    write_tracts(create(&dir.join("tracts.csv"))?, &scenario.space)?;
    let records = render_records(&scenario.trips, &scenario.space, opts.seed.wrapping_add(2));
    write_trip_records(create(&dir.join("trips.csv"))?, &records)?;

    let mut planted = csv::Writer::from_writer(create(&dir.join("planted.csv"))?);
    planted.write_record(["cluster", "kind", "index", "weight"])?;
    for (c, cluster) in scenario.clusters.iter().enumerate() {
        let c = c.to_string();
        for (h, w) in &cluster.hours {
            planted.write_record([c.as_str(), "hour", &h.to_string(), &w.to_string()])?;
        }
        for (kind, weights) in [
            ("pickup", &cluster.pickup_weights),
            ("dropoff", &cluster.dropoff_weights),
        ] {
            for (i, w) in weights.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                planted.write_record([c.as_str(), kind, &i.to_string(), &w.to_string()])?;
            }
        }
    }
    planted.flush()?;

    let mut cfg = create(&dir.join(SYNTH_CONFIG_FILE))?;
    writeln!(cfg, "tracts = \"tracts.csv\"")?;
    writeln!(cfg, "trips = \"trips.csv\"")?;
    writeln!(cfg, "output_dir = \"out\"")?;
    writeln!(cfg, "r = 2")?;
    writeln!(cfg, "n = {DEFAULT_TOP_N}")?;
    writeln!(cfg, "seed = {}", opts.seed)?;
    cfg.flush()?;
    Ok(format!(
        "{} tracts and {} trips written to {}",
        scenario.space.len(),
        records.len(),
        dir.display()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_toml_str("", Path::new("/base")).unwrap();
        assert_eq!(c.r, 7);
        assert_eq!(c.n, 10);
        assert_eq!(c.k_grid, vec![0.0, 1.0, 5.0, 10.0, 50.0, 100.0]);
        assert_eq!(c.seed, 42);
        assert!(c.exclude_self_loops);
        assert_eq!(c.ntf_options(), NtfOptions::default());
        assert_eq!(c.catalog_config(), CatalogConfig::default());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let c = PipelineConfig::from_toml_str(
            "tracts = \"t.csv\"\ntrips = \"/abs/trips.csv\"\noutput_dir = \"out\"",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(c.tracts.unwrap(), Path::new("/base/t.csv"));
        assert_eq!(c.trips.unwrap(), Path::new("/abs/trips.csv"));
        assert_eq!(c.output_dir.unwrap(), Path::new("/base/out"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::from_toml_str("rank = 3", Path::new(".")).unwrap_err();
        assert!(format!("{err:#}").contains("rank"));
        assert!(PipelineConfig::from_toml_str("[catalog]\nsigmas = [1.0]", Path::new(".")).is_err());
    }

    #[test]
    fn overrides_and_sections() {
        let mut c = PipelineConfig::from_toml_str(
            "r = 3\nsigma_grid = [1.0]\n[ntf]\nmax_iters = 20\n[catalog]\nvenues_key = \"v\"",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.ntf_options().max_iters, 20);
        assert_eq!(c.catalog_config().sigma_grid, vec![1.0]);
        assert_eq!(c.catalog_config().venues_key, "v");
        c.apply(&Overrides {
            r: Some(2),
            k_grid: Some(vec![0.0]),
            seed: Some(7),
            ..Default::default()
        });
        assert_eq!((c.r, c.seed, c.ntf_options().seed), (2, 7, 7));
        assert_eq!(c.k_grid, vec![0.0]);
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.k_grid = vec![-1.0];
        assert!(c.validate().is_err());
        c.k_grid = vec![];
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            r: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_paths_name_the_stage_and_key() {
        let err = run_stage(Stage::Ingest, &PipelineConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("stage `ingest` failed"), "{msg}");
        assert!(msg.contains("tracts"), "{msg}");
    }

    #[test]
    fn component_names_sort_by_index() {
        let mut names: Vec<String> = (0..12).map(component_name).collect();
        names.sort();
        assert_eq!(names, (0..12).map(component_name).collect::<Vec<_>>());
        assert!(component_name(11).as_str() < OVERALL_CLUSTER);
    }
}
