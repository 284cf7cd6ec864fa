//! Dirichlet prior elicitation and Markov-chain marginal likelihood.
//!
//! A belief matrix `Q` becomes Dirichlet pseudo-counts row by row:
//!
//! ```text
//! alpha[i][j] = 1 + k · |S| · q'[i][j]
//! ```
//!
//! where `q'` is `Q` with every row L1-normalized (all-zero rows stay zero).
//! `k = 0` gives the flat prior for every hypothesis; larger `k` expresses a
//! stronger belief. With transition counts `n`, the log evidence is the sum
//! over rows of the Dirichlet-multinomial marginal log-likelihood
//!
//! ```text
//! lnΓ(Σ_j a_ij) − lnΓ(Σ_j (a_ij + n_ij)) + Σ_j [lnΓ(a_ij + n_ij) − lnΓ(a_ij)]
//! ```
//!
//! Hypotheses are ranked by descending log evidence.

use std::cmp::Ordering;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::hypotheses::HypothesisMatrix;
use crate::ingest::TransitionCounts;
use crate::{Error, Result};

/// Concentration values tried by default.
pub const DEFAULT_K_GRID: [f64; 6] = [0.0, 1.0, 5.0, 10.0, 50.0, 100.0];

/// The concentration used for headline rankings.
pub const HEADLINE_K: f64 = 10.0;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFICIENTS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut series = LANCZOS_COEFFICIENTS[0];
    for (k, c) in LANCZOS_COEFFICIENTS.iter().enumerate().skip(1) {
        series += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Dirichlet hyperparameters elicited from a belief matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMatrix {
    alpha: Array2<f64>,
    k: f64,
}

impl PriorMatrix {
    /// Wraps explicit pseudo-counts, e.g. for fixtures. Entries must be finite
    /// and at least 1.
    pub fn from_alpha(alpha: Array2<f64>, k: f64) -> Result<Self> {
        if alpha.nrows() != alpha.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "prior must be square, got {:?}",
                alpha.dim()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "prior entry {a} must be finite and >= 1"
            )));
        }
        Ok(Self { alpha, k })
    }

    pub fn alpha(&self) -> &Array2<f64> {
        &self.alpha
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// `alpha = 1 + k · |S| · rownormalize(q)`.
pub fn elicit_prior(q: &HypothesisMatrix, k: f64) -> Result<PriorMatrix> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k must be finite and non-negative, got {k}"
        )));
    }
    let size = q.size() as f64;
    let mut alpha = q.q().clone();
    for mut row in alpha.rows_mut() {
        let mass: f64 = row.sum();
        if mass > 0.0 {
            row.mapv_inplace(|v| 1.0 + k * size * (v / mass));
        } else {
            row.fill(1.0);
        }
    }
    Ok(PriorMatrix { alpha, k })
}

/// Log marginal likelihood of the counts under the prior, in nats.
pub fn log_evidence(n: &TransitionCounts, a: &PriorMatrix) -> Result<f64> {
    if n.counts().dim() != a.alpha.dim() {
        return Err(Error::ShapeMismatch(format!(
            "counts {:?} vs prior {:?}",
            n.counts().dim(),
            a.alpha.dim()
        )));
    }
    if a.alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("prior has non-finite entries".into()));
    }
    let mut total = 0.0;
    for (counts, alpha) in n.counts().rows().into_iter().zip(a.alpha.rows()) {
        let row_count: u64 = counts.sum();
        if row_count == 0 {
            // Every term cancels.
            continue;
        }
        let alpha_sum: f64 = alpha.sum();
        let mut row = ln_gamma(alpha_sum) - ln_gamma(alpha_sum + row_count as f64);
        for (&c, &a) in counts.iter().zip(alpha.iter()) {
            if c > 0 {
                row += ln_gamma(a + c as f64) - ln_gamma(a);
            }
        }
        total += row;
    }
    Ok(total)
}

/// One hypothesis' score within a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceResult {
    pub hypothesis: String,
    pub k: f64,
    pub log_evidence: f64,
    /// 1-based.
    pub rank: usize,
}

/// Scores every hypothesis at concentration `k` and ranks them, best first.
/// Equal evidences are ordered by name.
pub fn rank_hypotheses(n: &TransitionCounts, catalog: &[HypothesisMatrix], k: f64) -> Result<Vec<EvidenceResult>> {
    if catalog.is_empty() {
        return Err(Error::InvalidParameter("hypothesis catalog is empty".into()));
    }
    let scores: Vec<f64> = catalog
        .par_iter()
        .map(|h| log_evidence(n, &elicit_prior(h, k)?))
        .collect::<Result<_>>()?;
    let mut results: Vec<EvidenceResult> = catalog
        .iter()
        .zip(scores)
        .map(|(h, log_evidence)| EvidenceResult {
            hypothesis: h.name().to_string(),
            k,
            log_evidence,
            rank: 0,
        })
        .collect();
    results.sort_by(|a, b| {
        b.log_evidence
            .partial_cmp(&a.log_evidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.hypothesis.cmp(&b.hypothesis))
    });
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(results)
}

/// [`rank_hypotheses`] for each `k`, concatenated in the order given.
pub fn k_sweep(n: &TransitionCounts, catalog: &[HypothesisMatrix], ks: &[f64]) -> Result<Vec<EvidenceResult>> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("k grid is empty".into()));
    }
    let mut out = Vec::with_capacity(ks.len() * catalog.len());
    for &k in ks {
        out.extend(rank_hypotheses(n, catalog, k)?);
    }
    Ok(out)
}

/// Writes `cluster,hypothesis,k,log_evidence,rank` rows sorted by cluster
/// name, then `k`, then rank.
pub fn write_rankings<W: Write>(writer: W, rows: &[(String, Vec<EvidenceResult>)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["cluster", "hypothesis", "k", "log_evidence", "rank"])?;
    let mut clusters: Vec<&(String, Vec<EvidenceResult>)> = rows.iter().collect();
    clusters.sort_by(|a, b| a.0.cmp(&b.0));
    for (cluster, results) in clusters {
        let mut sorted: Vec<&EvidenceResult> = results.iter().collect();
        sorted.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.rank.cmp(&b.rank)));
        for r in sorted {
            wtr.write_record([
                cluster.clone(),
                r.hypothesis.clone(),
                r.k.to_string(),
                r.log_evidence.to_string(),
                r.rank.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
