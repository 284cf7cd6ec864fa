//! Trip tensor construction and non-negative CP decomposition.
//!
//! The tensor `X` has modes (hour of week, pickup tract, dropoff tract). It is
//! approximated as
//!
//! ```text
//! X ≈ Σ_c λ_c · time_c ⊗ pickup_c ⊗ dropoff_c
//! ```
//!
//! with non-negative, column-L1-normalized factors. Every component `c` is one
//! mobility cluster. Factors are fitted with multiplicative updates on the
//! squared Frobenius loss, one mode at a time. The update for mode `m` is
//!
//! ```text
//! W ← W ∘ MTTKRP(X, m) ⊘ (W · G + ε)
//! ```
//!
//! where `W = U_m · diag(λ)` and `G` is the Hadamard product of the Gram
//! matrices of the other two modes. The sparse MTTKRP only touches nonzeros.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geo::HOURS_PER_WEEK;
use crate::ingest::Trip;
use crate::{Error, Result};

/// One stored tensor cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorEntry {
    pub index: [usize; 3],
    pub value: f64,
}

/// Sparse 3-way count tensor. Entries are positive and sorted
/// lexicographically by index.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTensor {
    dims: [usize; 3],
    entries: Vec<TensorEntry>,
    /// `slice_start[t]..slice_start[t + 1]` are the entries with first index `t`.
    slice_start: Vec<usize>,
}

impl MobilityTensor {
    /// Builds a tensor from `(index, value)` pairs; duplicates accumulate and
    /// zeros are dropped.
    pub fn from_entries<I>(dims: [usize; 3], entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([usize; 3], f64)>,
    {
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        let mut cells: BTreeMap<[usize; 3], f64> = BTreeMap::new();
        for (index, value) in entries {
            for (i, d) in index.iter().zip(dims) {
                if *i >= d {
                    return Err(Error::OutOfBounds { index: *i, size: d });
                }
            }
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tensor entries must be finite and non-negative, got {value}"
                )));
            }
            *cells.entry(index).or_insert(0.0) += value;
        }
        let entries: Vec<TensorEntry> = cells
            .into_iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(index, value)| TensorEntry { index, value })
            .collect();
        let mut slice_start = vec![0; dims[0] + 1];
        for e in &entries {
            slice_start[e.index[0] + 1] += 1;
        }
        for t in 0..dims[0] {
            slice_start[t + 1] += slice_start[t];
        }
        Ok(Self {
            dims,
            entries,
            slice_start,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.value).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.value * e.value).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: [usize; 3]) -> f64 {
        self.entries
            .binary_search_by(|e| e.index.cmp(&index))
            .map(|k| self.entries[k].value)
            .unwrap_or(0.0)
    }

    fn slice(&self, t: usize) -> &[TensorEntry] {
        &self.entries[self.slice_start[t]..self.slice_start[t + 1]]
    }
}

/// Builds the `168 × size × size` hour/pickup/dropoff count tensor.
pub fn build_tensor(trips: &[Trip], size: usize) -> Result<MobilityTensor> {
    MobilityTensor::from_entries(
        [HOURS_PER_WEEK, size, size],
        trips.iter().map(|t| ([t.hour, t.pickup_tract, t.dropoff_tract], 1.0)),
    )
}

/// Non-negative CP factors. Columns have unit L1 norm; magnitudes live in
/// `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub time: Array2<f64>,
    pub pickup: Array2<f64>,
    pub dropoff: Array2<f64>,
    pub scale: Array1<f64>,
}

impl FactorSet {
    pub fn rank(&self) -> usize {
        self.scale.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.time.nrows(), self.pickup.nrows(), self.dropoff.nrows()]
    }

    pub fn modes(&self) -> [&Array2<f64>; 3] {
        [&self.time, &self.pickup, &self.dropoff]
    }

    /// A factor set with the given dims and all-zero factors.
    pub fn zeros(dims: [usize; 3], rank: usize) -> Self {
        Self {
            time: Array2::zeros((dims[0], rank)),
            pickup: Array2::zeros((dims[1], rank)),
            dropoff: Array2::zeros((dims[2], rank)),
            scale: Array1::zeros(rank),
        }
    }

    /// Model value at one cell.
    pub fn value_at(&self, index: [usize; 3]) -> f64 {
        (0..self.rank())
            .map(|c| {
                self.scale[c] * self.time[[index[0], c]] * self.pickup[[index[1], c]] * self.dropoff[[index[2], c]]
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let r = self.rank();
        for (name, m) in [
            ("time", &self.time),
            ("pickup", &self.pickup),
            ("dropoff", &self.dropoff),
        ] {
            if m.ncols() != r {
                return Err(Error::ShapeMismatch(format!(
                    "{name} factor has {} columns, scale has {r}",
                    m.ncols()
                )));
            }
        }
        Ok(())
    }
}

/// Options for [`ntf_decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct NtfOptions {
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Denominator guard of the multiplicative update.
    pub epsilon: f64,
}

impl Default for NtfOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            max_iters: 500,
            rel_tol: 1e-6,
            epsilon: 1e-12,
        }
    }
}

/// Default component count.
pub const DEFAULT_RANK: usize = 7;

/// Relative reconstruction errors `‖X − M‖ / ‖X‖` recorded during fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct NtfTrace {
    /// `errors[0]` is the error of the random initialization, `errors[t]` the
    /// error after iteration `t`.
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the rank exceeds the smallest tensor dimension.
    pub overcomplete: bool,
}

impl NtfTrace {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("trace holds the initial error")
    }
}

#[derive(Debug, Clone)]
pub struct NtfResult {
    pub factors: FactorSet,
    pub trace: NtfTrace,
}

/// Rank-`r` non-negative CP decomposition by multiplicative updates.
///
/// Stops when the relative change of the error drops below `rel_tol`, when
/// the fit is exact to machine precision, or after `max_iters` iterations.
pub fn ntf_decompose(x: &MobilityTensor, r: usize, opts: &NtfOptions) -> Result<NtfResult> {
    if r == 0 {
        return Err(Error::InvalidParameter("component count must be at least 1".into()));
    }
    if opts.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    if !(opts.epsilon > 0.0 && opts.rel_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and rel_tol non-negative (epsilon={}, rel_tol={})",
            opts.epsilon, opts.rel_tol
        )));
    }
    if x.nnz() == 0 {
        return Err(Error::Degenerate("tensor has no nonzero entries".into()));
    }

    let dims = x.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut modes: Vec<Array2<f64>> = dims
        .iter()
        .map(|&d| Array2::from_shape_simple_fn((d, r), || 1.0 - rng.gen::<f64>()))
        .collect();
    let mut scale = Array1::from_elem(r, 1.0);
    for m in modes.iter_mut() {
        let norms = normalize_columns(m);
        scale *= &norms;
    }
    // Start with the model mass equal to the tensor mass.
    let mass = x.sum();
    let model_mass = scale.sum();
    scale.mapv_inplace(|s| s * mass / model_mass);

    let norm_x = x.frobenius_norm();
    let relative = |f: &FactorSet| residual_norm(x, f) / norm_x;

    let mut factors = assemble(&modes, &scale);
    let mut errors = vec![relative(&factors)];
    let mut converged = false;

    for _ in 0..opts.max_iters {
        for mode in 0..3 {
            let mttkrp = sparse_mttkrp(x, &modes, mode);
            let gram = hadamard_gram(&modes, mode);
            let mut w = &modes[mode] * &scale;
            let denom = w.dot(&gram);
            ndarray::Zip::from(&mut w)
                .and(&mttkrp)
                .and(&denom)
                .for_each(|w, &num, &den| *w = *w * num / (den + opts.epsilon));
            let norms = normalize_columns(&mut w);
            modes[mode] = w;
            scale = norms;
        }
        factors = assemble(&modes, &scale);
        let err = relative(&factors);
        let prev = *errors.last().unwrap();
        errors.push(err);
        if err <= f64::EPSILON || (prev - err).abs() <= opts.rel_tol * prev {
            converged = true;
            break;
        }
    }

    let iterations = errors.len() - 1;
    Ok(NtfResult {
        factors,
        trace: NtfTrace {
            errors,
            iterations,
            converged,
            overcomplete: r > dims.iter().copied().min().unwrap_or(0),
        },
    })
}

fn assemble(modes: &[Array2<f64>], scale: &Array1<f64>) -> FactorSet {
    FactorSet {
        time: modes[0].clone(),
        pickup: modes[1].clone(),
        dropoff: modes[2].clone(),
        scale: scale.clone(),
    }
}

/// Scales every column to unit L1 norm and returns the original norms. A zero
/// column becomes uniform with norm 0.
fn normalize_columns(m: &mut Array2<f64>) -> Array1<f64> {
    let rows = m.nrows() as f64;
    let mut norms = Array1::zeros(m.ncols());
    for (c, mut col) in m.columns_mut().into_iter().enumerate() {
        let norm: f64 = col.sum();
        norms[c] = norm;
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        } else {
            col.fill(1.0 / rows);
        }
    }
    norms
}

/// Matricized tensor times Khatri-Rao product of the two other modes,
/// accumulated over nonzeros in storage order.
fn sparse_mttkrp(x: &MobilityTensor, modes: &[Array2<f64>], mode: usize) -> Array2<f64> {
    let r = modes[0].ncols();
    let (a, b) = match mode {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut out = Array2::zeros((modes[mode].nrows(), r));
    for e in x.entries() {
        let ra = modes[a].row(e.index[a]);
        let rb = modes[b].row(e.index[b]);
        let mut target = out.row_mut(e.index[mode]);
        for c in 0..r {
            target[c] += e.value * ra[c] * rb[c];
        }
    }
    out
}

fn hadamard_gram(modes: &[Array2<f64>], mode: usize) -> Array2<f64> {
    let r = modes[0].ncols();
    let mut g = Array2::from_elem((r, r), 1.0);
    for (m, factor) in modes.iter().enumerate() {
        if m != mode {
            g *= &factor.t().dot(factor);
        }
    }
    g
}

/// `‖X − M‖_F` evaluated cell by cell, so an exact fit yields exactly zero
/// rather than a cancellation residue. Time slices are reduced in order.
fn residual_norm(x: &MobilityTensor, f: &FactorSet) -> f64 {
    let [t_dim, p_dim, d_dim] = x.dims();
    let r = f.rank();
    let dropoff: Vec<f64> = f.dropoff.iter().copied().collect();
    let partial: Vec<f64> = (0..t_dim)
        .into_par_iter()
        .map(|t| {
            let slice = x.slice(t);
            let mut cursor = 0;
            let mut coef = vec![0.0; r];
            let mut total = 0.0;
            for p in 0..p_dim {
                for (c, k) in coef.iter_mut().enumerate() {
                    *k = f.scale[c] * f.time[[t, c]] * f.pickup[[p, c]];
                }
                let active = coef.iter().any(|k| *k != 0.0);
                for (d, row) in dropoff.chunks_exact(r).enumerate().take(d_dim) {
                    let observed = match slice.get(cursor) {
                        Some(e) if e.index[1] == p && e.index[2] == d => {
                            cursor += 1;
                            e.value
                        }
                        _ => 0.0,
                    };
                    let model: f64 = if active {
                        coef.iter().zip(row).map(|(k, v)| k * v).sum()
                    } else {
                        0.0
                    };
                    let diff = observed - model;
                    total += diff * diff;
                }
            }
            total
        })
        .collect();
    partial.iter().sum::<f64>().sqrt()
}

/// `‖X − Σ_c λ_c · time_c ⊗ pickup_c ⊗ dropoff_c‖_F`.
pub fn reconstruction_error(x: &MobilityTensor, f: &FactorSet) -> Result<f64> {
    f.validate()?;
    if f.dims() != x.dims() {
        return Err(Error::ShapeMismatch(format!(
            "factor dims {:?} do not match tensor dims {:?}",
            f.dims(),
            x.dims()
        )));
    }
    Ok(residual_norm(x, f))
}

/// Run metadata stored next to the factor files.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMetadata {
    pub rank: usize,
    pub seed: u64,
    pub iterations: usize,
    pub final_error: f64,
}

pub const FACTOR_FILES: [&str; 3] = ["factors_time.csv", "factors_pickup.csv", "factors_dropoff.csv"];
pub const SCALE_FILE: &str = "factors_scale.csv";
pub const METADATA_FILE: &str = "factors_meta.txt";

/// Writes one CSV per mode (`index,c0,..`), the scale vector and a
/// `key=value` metadata file into `dir`.
pub fn write_factors(dir: &Path, f: &FactorSet, meta: &FactorMetadata) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, m) in FACTOR_FILES.iter().zip(f.modes()) {
        let mut wtr = csv::Writer::from_path(dir.join(name))?;
        let mut header = vec!["index".to_string()];
        header.extend((0..f.rank()).map(|c| format!("c{c}")));
        wtr.write_record(&header)?;
        for (i, row) in m.rows().into_iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
    }
    let mut wtr = csv::Writer::from_path(dir.join(SCALE_FILE))?;
    wtr.write_record(["component", "scale"])?;
    for (c, s) in f.scale.iter().enumerate() {
        wtr.write_record([c.to_string(), s.to_string()])?;
    }
    wtr.flush()?;

    let mut out = std::fs::File::create(dir.join(METADATA_FILE))?;
    writeln!(out, "rank={}", meta.rank)?;
    writeln!(out, "seed={}", meta.seed)?;
    writeln!(out, "iterations={}", meta.iterations)?;
    writeln!(out, "final_error={}", meta.final_error)?;
    Ok(())
}

/// Reads factor files written by [`write_factors`].
pub fn read_factors(dir: &Path) -> Result<FactorSet> {
    let mut modes = Vec::with_capacity(3);
    for name in FACTOR_FILES {
        let mut rdr = csv::Reader::from_path(dir.join(name))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("{name} row {}: {e}", line + 1)))?;
            rows.push(values);
        }
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse(format!("{name}: ragged rows")));
        }
        modes.push(Array2::from_shape_fn((rows.len(), cols), |(i, c)| rows[i][c]));
    }
    let mut rdr = csv::Reader::from_path(dir.join(SCALE_FILE))?;
    let mut scale = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let value = record
            .get(1)
            .unwrap_or("")
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("{SCALE_FILE}: {e}")))?;
        scale.push(value);
    }
    let mut modes = modes.into_iter();
    let f = FactorSet {
        time: modes.next().unwrap(),
        pickup: modes.next().unwrap(),
        dropoff: modes.next().unwrap(),
        scale: Array1::from(scale),
    };
    f.validate()?;
    Ok(f)
}
