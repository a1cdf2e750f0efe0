//! Pairwise similarity for each modality, their convex fusion, and the
//! constraint-driven choice of the fusion weight.
//!
//! Numeric rows are compared with the Mahalanobis distance under the sample
//! covariance and turned into similarities as `max_distance / distance`.
//! Text rows are weighted by damped TF-IDF (`ln(1 + count) * idf`) and
//! compared by cosine. The fused matrix is `lambda * numeric + (1 - lambda) *
//! text`, with `lambda` picked on a grid so that must-link pairs stay at least
//! as similar as any must-link/cannot-link pair while `lambda * (1 - lambda)`
//! is as large as possible.
//!
//! Every similarity matrix produced here has a zero diagonal.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_file, ConstraintSets, NumericDataset, TextDataset};
use crate::seed;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Numeric,
    Text,
    Fused,
    /// Loaded from a cache file; provenance unknown.
    External,
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SimilarityKind::Numeric => "numeric",
            SimilarityKind::Text => "text",
            SimilarityKind::Fused => "fused",
            SimilarityKind::External => "external",
        };
        f.write_str(s)
    }
}

/// Symmetric, non-negative, finite `n x n` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DMatrix<f64>,
    pub kind: SimilarityKind,
    pub lambda: Option<f64>,
}

impl SimilarityMatrix {
    pub fn new(values: DMatrix<f64>, kind: SimilarityKind, lambda: Option<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                actual: values.ncols(),
            });
        }
        let n = values.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "similarity ({i}, {j}) = {v} is not a finite non-negative number"
                    )));
                }
                if j > i && (v - values[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "similarity matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            values,
            kind,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Sample covariance (divisor n - 1) and its inverse. A singular covariance
/// gets a pseudo-inverse taken on the correlation scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub sigma: DMatrix<f64>,
    pub sigma_inv: DMatrix<f64>,
    pub rank: usize,
}

impl CovarianceModel {
    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }
}

pub fn covariance_model(data: &NumericDataset) -> Result<CovarianceModel> {
    let (n, p) = (data.n(), data.p());
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let means: Vec<f64> = (0..p).map(|c| data.values.column(c).sum() / n as f64).collect();
    let mut sigma = DMatrix::<f64>::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (data.values[(r, a)] - means[a]) * (data.values[(r, b)] - means[b]);
            }
            let v = acc / (n - 1) as f64;
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }

    // Invert on the correlation scale so features of wildly different units
    // stay well conditioned; constant features drop out.
    let sd: Vec<f64> = (0..p).map(|a| sigma[(a, a)].max(0.0).sqrt()).collect();
    if sd.iter().all(|&s| s <= f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "covariance is zero (every feature is constant); Mahalanobis distance is undefined"
                .into(),
        ));
    }
    let inv_sd: Vec<f64> = sd
        .iter()
        .map(|&s| if s > f64::MIN_POSITIVE { 1.0 / s } else { 0.0 })
        .collect();
    let corr = DMatrix::from_fn(p, p, |a, b| sigma[(a, b)] * inv_sd[a] * inv_sd[b]);
    let eig = SymmetricEigen::new(corr);
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let cutoff = largest * 1e-12 * p as f64;
    let mut corr_inv = DMatrix::<f64>::zeros(p, p);
    let mut rank = 0;
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            corr_inv += (v * v.transpose()) / ev;
        }
    }
    let sigma_inv = DMatrix::from_fn(p, p, |a, b| corr_inv[(a, b)] * inv_sd[a] * inv_sd[b]);
    // Symmetrize away round-off from the outer products.
    let sigma_inv = (&sigma_inv + sigma_inv.transpose()) * 0.5;
    Ok(CovarianceModel {
        sigma,
        sigma_inv,
        rank,
    })
}

pub fn mahalanobis(xi: &[f64], xj: &[f64], model: &CovarianceModel) -> Result<f64> {
    let p = model.p();
    for x in [xi, xj] {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: x.len(),
            });
        }
    }
    let diff: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| a - b).collect();
    let q = quadratic_form(&diff, &model.sigma_inv);
    if q < -1e-10 {
        return Err(Error::Degenerate(format!(
            "negative Mahalanobis quadratic form {q}"
        )));
    }
    Ok(q.max(0.0).sqrt())
}

fn quadratic_form(d: &[f64], m: &DMatrix<f64>) -> f64 {
    let p = d.len();
    let mut q = 0.0;
    for a in 0..p {
        let mut row = 0.0;
        for b in 0..p {
            row += m[(a, b)] * d[b];
        }
        q += d[a] * row;
    }
    q
}

fn rows_of(values: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..values.nrows())
        .map(|r| values.row(r).iter().copied().collect())
        .collect()
}

/// All pairwise Mahalanobis distances, zero diagonal.
pub fn mahalanobis_matrix(data: &NumericDataset, model: &CovarianceModel) -> Result<DMatrix<f64>> {
    let n = data.n();
    let rows = rows_of(&data.values);
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| mahalanobis(&rows[i], &rows[j], model))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = DMatrix::<f64>::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// `max_distance / distance` over all off-diagonal pairs. Exact duplicate
/// rows get `max_distance / smallest_nonzero_distance`.
pub fn numeric_similarity_matrix(data: &NumericDataset) -> Result<SimilarityMatrix> {
    let model = covariance_model(data)?;
    let dist = mahalanobis_matrix(data, &model)?;
    let n = data.n();
    let mut max_d = 0.0_f64;
    let mut min_nonzero = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = dist[(i, j)];
            max_d = max_d.max(d);
            if d > 0.0 {
                min_nonzero = min_nonzero.min(d);
            }
        }
    }
    if max_d <= 0.0 {
        return Err(Error::Degenerate("all samples coincide".into()));
    }
    let cap = max_d / min_nonzero;
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if dist[(i, j)] > 0.0 {
            max_d / dist[(i, j)]
        } else {
            cap
        }
    });
    SimilarityMatrix::new(values, SimilarityKind::Numeric, None)
}

/// Min-max rescale the off-diagonal entries to [0, 1]; the diagonal stays 0.
/// A matrix whose off-diagonal entries are all equal maps to all ones.
pub fn rescale_unit(w: &SimilarityMatrix) -> SimilarityMatrix {
    let n = w.n();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lo = lo.min(w.values[(i, j)]);
                hi = hi.max(w.values[(i, j)]);
            }
        }
    }
    let span = hi - lo;
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if span > 0.0 {
            (w.values[(i, j)] - lo) / span
        } else {
            1.0
        }
    });
    SimilarityMatrix {
        values,
        kind: w.kind,
        lambda: w.lambda,
    }
}

/// `ln(documents / documents_containing_term)`. Terms that never occur get
/// weight 0.
pub fn inverse_document_frequency(text: &TextDataset) -> Result<Vec<f64>> {
    if text.q() == 0 {
        return Err(Error::InvalidInput("empty lexicon".into()));
    }
    let n = text.n();
    if n == 0 {
        return Err(Error::InvalidInput("no documents".into()));
    }
    Ok((0..text.q())
        .map(|t| {
            let df = text.counts.column(t).iter().filter(|&&c| c > 0).count();
            if df == 0 {
                0.0
            } else {
                (n as f64 / df as f64).ln()
            }
        })
        .collect())
}

/// `ln(1 + count) * idf`; zero count gives zero weight.
pub fn damped_weight(count: f64, idf: f64) -> f64 {
    count.ln_1p() * idf
}

/// Damped TF-IDF weights, element-wise.
pub fn tfidf_weights(text: &TextDataset) -> Result<DMatrix<f64>> {
    let idf = inverse_document_frequency(text)?;
    Ok(DMatrix::from_fn(text.n(), text.q(), |r, c| {
        damped_weight(f64::from(text.counts[(r, c)]), idf[c])
    }))
}

/// Cosine of two weight vectors; 0 when either is all zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

pub fn text_similarity_matrix(text: &TextDataset) -> Result<SimilarityMatrix> {
    let h = tfidf_weights(text)?;
    let rows = rows_of(&h);
    let n = rows.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| cosine(&rows[i], &rows[j])).collect())
        .collect();
    let mut values = DMatrix::<f64>::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    SimilarityMatrix::new(values, SimilarityKind::Text, None)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda {lambda} is outside [0, 1]")));
    }
    Ok(())
}

/// `lambda * numeric + (1 - lambda) * text`, element-wise.
pub fn fuse_similarity(
    numeric: &SimilarityMatrix,
    text: &SimilarityMatrix,
    lambda: f64,
) -> Result<SimilarityMatrix> {
    check_lambda(lambda)?;
    if numeric.n() != text.n() {
        return Err(Error::DimensionMismatch {
            expected: numeric.n(),
            actual: text.n(),
        });
    }
    let values = numeric.values.zip_map(&text.values, |a, b| lambda * a + (1.0 - lambda) * b);
    Ok(SimilarityMatrix {
        values,
        kind: SimilarityKind::Fused,
        lambda: Some(lambda),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGridRow {
    pub lambda: f64,
    pub feasible: bool,
    pub satisfied_fraction: f64,
    pub mean_must_link: f64,
    pub mean_cannot_link: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub objective: f64,
    pub satisfied_fraction: f64,
    /// Whether every constraint triple holds at the chosen weight.
    pub feasible: bool,
    pub triples: usize,
    pub grid: Vec<LambdaGridRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaOptions {
    pub step: f64,
    /// Cap on evaluated (i, j, k) triples; larger universes are subsampled.
    pub max_triples: usize,
    pub seed: u64,
    /// Compare against the numeric-only similarity on the cannot-link side.
    pub literal_rhs: bool,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            max_triples: 10_000,
            seed: 0,
            literal_rhs: false,
        }
    }
}

/// Number of grid intervals for `step`; errors unless `step` divides 1.
pub fn grid_intervals(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("lambda step {step} must lie in (0, 1]")));
    }
    let intervals = (1.0 / step).round();
    if (intervals * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "lambda step {step} does not divide 1 evenly"
        )));
    }
    Ok(intervals as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Triple {
    i: usize,
    j: usize,
    k: usize,
}

/// Unordered must-link pairs crossed with cannot-link samples, fully
/// enumerated when small enough, otherwise a seeded uniform sample without
/// replacement. Triples come out in universe order.
fn constraint_triples(c: &ConstraintSets, max_triples: usize, seed_value: u64) -> Vec<Triple> {
    let m = c.must_link.len();
    let kc = c.cannot_link.len();
    let pairs = m * m.saturating_sub(1) / 2;
    let total = pairs * kc;
    let decode = |t: usize, row_start: &[usize]| {
        let pair = t / kc;
        let k = c.cannot_link[t % kc];
        // row_start[a] = index of the first pair (a, a+1).
        let a = row_start.partition_point(|&s| s <= pair) - 1;
        let b = a + 1 + (pair - row_start[a]);
        Triple {
            i: c.must_link[a],
            j: c.must_link[b],
            k,
        }
    };
    let row_start: Vec<usize> = (0..m.saturating_sub(1))
        .scan(0usize, |acc, a| {
            let s = *acc;
            *acc += m - a - 1;
            Some(s)
        })
        .collect();
    if total <= max_triples {
        (0..total).map(|t| decode(t, &row_start)).collect()
    } else {
        let mut rng = seed::rng(seed_value);
        let mut picked = rand::seq::index::sample(&mut rng, total, max_triples).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|t| decode(t, &row_start)).collect()
    }
}

/// Grid search for the fusion weight. See the module docs for the
/// constraint; when no grid weight satisfies every triple, the weight with
/// the most satisfied triples wins (then larger `lambda * (1 - lambda)`, then
/// smaller `lambda`).
pub fn optimize_lambda(
    numeric: &SimilarityMatrix,
    text: &SimilarityMatrix,
    constraints: &ConstraintSets,
    options: &LambdaOptions,
) -> Result<LambdaSolution> {
    let intervals = grid_intervals(options.step)?;
    if numeric.n() != text.n() {
        return Err(Error::DimensionMismatch {
            expected: numeric.n(),
            actual: text.n(),
        });
    }
    if let Some(&bad) = constraints
        .must_link
        .iter()
        .chain(&constraints.cannot_link)
        .find(|&&i| i >= numeric.n())
    {
        return Err(Error::InvalidInput(format!(
            "constraint index {bad} out of range for {} samples",
            numeric.n()
        )));
    }
    let triples = constraint_triples(constraints, options.max_triples, options.seed);
    if triples.is_empty() {
        return Err(Error::InvalidInput(
            "constraints yield no triples (need >= 2 must-link and >= 1 cannot-link)".into(),
        ));
    }
    let nv = &numeric.values;
    let tv = &text.values;

    let counts: Vec<(usize, LambdaGridRow)> = (0..=intervals)
        .into_par_iter()
        .map(|g| {
            let lambda = g as f64 / intervals as f64;
            let fused = |a: usize, b: usize| lambda * nv[(a, b)] + (1.0 - lambda) * tv[(a, b)];
            let mut satisfied = 0usize;
            let (mut must_sum, mut cannot_sum) = (0.0, 0.0);
            for t in &triples {
                let lhs = fused(t.i, t.j);
                let (fik, fjk) = (fused(t.i, t.k), fused(t.j, t.k));
                let (rik, rjk) = if options.literal_rhs {
                    (nv[(t.i, t.k)], nv[(t.j, t.k)])
                } else {
                    (fik, fjk)
                };
                if lhs >= rik && lhs >= rjk {
                    satisfied += 1;
                }
                must_sum += lhs;
                cannot_sum += fik + fjk;
            }
            let total = triples.len() as f64;
            (
                satisfied,
                LambdaGridRow {
                    lambda,
                    feasible: satisfied == triples.len(),
                    satisfied_fraction: satisfied as f64 / total,
                    mean_must_link: must_sum / total,
                    mean_cannot_link: cannot_sum / (2.0 * total),
                },
            )
        })
        .collect();

    // Integer objective g * (N - g) avoids float ties at symmetric points.
    let objective = |g: usize| g * (intervals - g);
    let any_feasible = counts.iter().any(|(_, r)| r.feasible);
    let best = (0..=intervals)
        .filter(|&g| !any_feasible || counts[g].1.feasible)
        .max_by(|&a, &b| {
            let key = |g: usize| (counts[g].0, objective(g));
            key(a).cmp(&key(b)).then(b.cmp(&a))
        })
        .expect("grid is non-empty");
    let row = &counts[best].1;
    Ok(LambdaSolution {
        lambda: row.lambda,
        objective: row.lambda * (1.0 - row.lambda),
        satisfied_fraction: row.satisfied_fraction,
        feasible: row.feasible,
        triples: triples.len(),
        grid: counts.into_iter().map(|(_, r)| r).collect(),
    })
}

pub fn write_lambda_grid_csv(grid: &[LambdaGridRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out =
        String::from("lambda,mean_must_link_sim,mean_cannot_link_sim,satisfied_fraction,feasible\n");
    for r in grid {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lambda, r.mean_must_link, r.mean_cannot_link, r.satisfied_fraction, r.feasible
        ));
    }
    write_file(path.as_ref(), out.as_bytes())
}

pub fn write_similarity_csv(w: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let n = w.n();
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| w.values[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Little-endian `u64` n followed by `n * n` row-major `f64` values.
pub fn write_similarity_bin(w: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = w.n();
    let mut bytes = Vec::with_capacity(8 + 8 * n * n);
    bytes.write_all(&(n as u64).to_le_bytes()).expect("vec write");
    for i in 0..n {
        for j in 0..n {
            bytes.write_all(&w.values[(i, j)].to_le_bytes()).expect("vec write");
        }
    }
    write_file(path, &bytes)
}

pub fn read_similarity_bin(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        row: 0,
        column: String::new(),
        message,
    };
    if bytes.len() < 8 {
        return Err(bad("missing 8-byte size header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(8))
        .ok_or_else(|| bad(format!("size header {n} overflows")))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for n = {n}, found {}",
            bytes.len()
        )));
    }
    let body = &bytes[8..];
    let values = DMatrix::from_fn(n, n, |i, j| {
        let off = 8 * (i * n + j);
        f64::from_le_bytes(body[off..off + 8].try_into().expect("8 bytes"))
    });
    SimilarityMatrix::new(values, SimilarityKind::External, None)
}
