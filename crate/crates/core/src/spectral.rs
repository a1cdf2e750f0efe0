//! Degree and Laplacian matrices, their smallest eigenpairs, eigengap
//! candidates for the cluster count, and the spectral embedding.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::write_file;
use crate::similarity::SimilarityMatrix;

/// Zero eigenvalues are those below this fraction of the largest one.
pub const ZERO_EIGEN_RELATIVE: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-6;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Unnormalized,
    Symmetric,
    #[default]
    RandomWalk,
}

impl fmt::Display for LaplacianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianKind::Unnormalized => "unnormalized",
            LaplacianKind::Symmetric => "symmetric",
            LaplacianKind::RandomWalk => "random_walk",
        })
    }
}

impl FromStr for LaplacianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unnormalized" => Ok(LaplacianKind::Unnormalized),
            "symmetric" | "sym" => Ok(LaplacianKind::Symmetric),
            "random_walk" | "random-walk" | "rw" => Ok(LaplacianKind::RandomWalk),
            other => Err(Error::Config(format!("unknown Laplacian kind `{other}`"))),
        }
    }
}

/// Row sums of `w`.
pub fn degree_matrix(w: &SimilarityMatrix) -> Vec<f64> {
    (0..w.n()).map(|i| w.values.row(i).iter().sum()).collect()
}

/// `D^{-1/2}` with 0 for isolated nodes.
fn inv_sqrt_degrees(degrees: &[f64]) -> Vec<f64> {
    degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub kind: LaplacianKind,
    pub degrees: Vec<f64>,
    /// `D - W`.
    pub unnormalized: DMatrix<f64>,
    /// The operator of `kind`: `D - W`, `D^{-1/2} (D - W) D^{-1/2}`, or
    /// `D^{-1} (D - W)`. Rows of isolated nodes are zero in the normalized
    /// forms.
    pub matrix: DMatrix<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// The symmetric matrix handed to the eigensolver.
    fn symmetric_operator(&self) -> DMatrix<f64> {
        match self.kind {
            LaplacianKind::Unnormalized => self.unnormalized.clone(),
            LaplacianKind::Symmetric => self.matrix.clone(),
            LaplacianKind::RandomWalk => symmetric_normalized(&self.unnormalized, &self.degrees),
        }
    }
}

fn symmetric_normalized(l: &DMatrix<f64>, degrees: &[f64]) -> DMatrix<f64> {
    let s = inv_sqrt_degrees(degrees);
    DMatrix::from_fn(l.nrows(), l.ncols(), |i, j| s[i] * l[(i, j)] * s[j])
}

pub fn laplacian(w: &SimilarityMatrix, kind: LaplacianKind) -> Laplacian {
    let degrees = degree_matrix(w);
    let n = w.n();
    let unnormalized = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            degrees[i] - w.values[(i, j)]
        } else {
            -w.values[(i, j)]
        }
    });
    let matrix = match kind {
        LaplacianKind::Unnormalized => unnormalized.clone(),
        LaplacianKind::Symmetric => symmetric_normalized(&unnormalized, &degrees),
        LaplacianKind::RandomWalk => DMatrix::from_fn(n, n, |i, j| {
            if degrees[i] > 0.0 {
                unnormalized[(i, j)] / degrees[i]
            } else {
                0.0
            }
        }),
    };
    Laplacian {
        kind,
        degrees,
        unnormalized,
        matrix,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
    pub kind: LaplacianKind,
    pub zero_multiplicity: usize,
    pub zero_threshold: f64,
    /// Largest per-pair residual, relative as in the solver contract.
    pub max_residual: f64,
}

impl SpectralDecomposition {
    pub fn retained(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn canonicalize_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return;
    }
    if let Some(&first) = v.iter().find(|x| x.abs() > ZERO_EIGEN_RELATIVE * scale) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Smallest `count` eigenpairs of the Laplacian, ascending, with canonical
/// signs (first clearly non-zero component positive).
///
/// Random-walk pairs solve `L v = lambda D v`: the symmetric normalized
/// problem is solved and eigenvectors mapped back by `D^{-1/2}`. Isolated
/// nodes keep their coordinate unscaled so their indicator vectors survive.
pub fn eigendecompose(lap: &Laplacian, count: usize) -> Result<SpectralDecomposition> {
    let n = lap.n();
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!(
            "requested {count} eigenpairs of a {n}-node Laplacian"
        )));
    }
    let op = lap.symmetric_operator();
    let eig = op
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::NotConverged {
            iterations: EIGEN_MAX_ITER,
            residual: None,
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let zero_threshold = ZERO_EIGEN_RELATIVE * largest;
    let zero_multiplicity = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v < zero_threshold || largest == 0.0)
        .count();

    let back = match lap.kind {
        LaplacianKind::RandomWalk => lap
            .degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 })
            .collect(),
        _ => vec![1.0; n],
    };

    let kernel: Vec<DVector<f64>> = order[..zero_multiplicity]
        .iter()
        .map(|&idx| eig.eigenvectors.column(idx).into_owned())
        .collect();
    // Solver-space image of the all-ones vector (D^{1/2} 1 for the
    // normalized kinds, with isolated nodes kept at 1).
    let trivial = match lap.kind {
        LaplacianKind::Unnormalized => DVector::from_element(n, 1.0),
        _ => DVector::from_iterator(
            n,
            lap.degrees
                .iter()
                .map(|&d| if d > 0.0 { d.sqrt() } else { 1.0 }),
        ),
    };
    let kernel = canonical_kernel_basis(&kernel, &trivial);

    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenvectors = DMatrix::<f64>::zeros(n, count);
    let mut max_residual = 0.0_f64;
    for (slot, &idx) in order.iter().take(count).enumerate() {
        let value = eig.eigenvalues[idx];
        let solver_vec = if slot < kernel.len() {
            kernel[slot].clone()
        } else {
            eig.eigenvectors.column(idx).into_owned()
        };
        let mut v: Vec<f64> = solver_vec
            .iter()
            .zip(&back)
            .map(|(x, s)| x * s)
            .collect();
        canonicalize_sign(&mut v);
        let vec = DVector::from_vec(v);
        let residual = pair_residual(lap, value, &vec);
        max_residual = max_residual.max(residual);
        if residual > RESIDUAL_TOL {
            return Err(Error::NotConverged {
                iterations: EIGEN_MAX_ITER,
                residual: Some(residual),
            });
        }
        eigenvalues.push(value);
        eigenvectors.set_column(slot, &vec);
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        kind: lap.kind,
        zero_multiplicity,
        zero_threshold,
        max_residual,
    })
}

/// Replace an arbitrary orthonormal basis of the zero eigenspace by a
/// canonical one: the projection of `trivial` first, then projections of the
/// coordinate axes in index order, Gram-Schmidt orthonormalized. For a graph
/// with several components the second vector is positive on the component of
/// node 0 and negative elsewhere.
fn canonical_kernel_basis(basis: &[DVector<f64>], trivial: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = basis.len();
    if m < 2 {
        return basis.to_vec();
    }
    let n = trivial.len();
    let project = |x: &DVector<f64>| -> DVector<f64> {
        basis
            .iter()
            .fold(DVector::zeros(n), |acc, b| acc + b * b.dot(x))
    };
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(m);
    let seeds = std::iter::once(trivial.clone()).chain((0..n).map(|i| {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e
    }));
    for seed in seeds {
        if out.len() == m {
            break;
        }
        let mut v = project(&seed);
        for u in &out {
            v -= u * u.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-6 {
            out.push(v / norm);
        }
    }
    if out.len() < m {
        return basis.to_vec();
    }
    out
}

/// `||L v - lambda v|| / ||v||`, or for random-walk pairs
/// `||L v - lambda D v|| / ||D v||` (0 when `D v` vanishes and so does the
/// numerator).
pub fn pair_residual(lap: &Laplacian, value: f64, v: &DVector<f64>) -> f64 {
    match lap.kind {
        LaplacianKind::Unnormalized | LaplacianKind::Symmetric => {
            let r = &lap.matrix * v - v * value;
            let norm = v.norm();
            if norm == 0.0 {
                r.norm()
            } else {
                r.norm() / norm
            }
        }
        LaplacianKind::RandomWalk => {
            let dv = DVector::from_iterator(v.len(), v.iter().zip(&lap.degrees).map(|(x, d)| x * d));
            let r = &lap.unnormalized * v - &dv * value;
            let norm = dv.norm();
            if norm == 0.0 {
                r.norm()
            } else {
                r.norm() / norm
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenGap {
    /// Candidate cluster count this gap stands for: the gap sits between
    /// eigenvalue `k` and `k + 1` (1-based).
    pub k: usize,
    pub gap: f64,
    pub spike: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigengapReport {
    pub gaps: Vec<EigenGap>,
    /// Ascending, each >= 2.
    pub candidates: Vec<usize>,
    /// Eigenvalues inspected after dropping the near-zero ones.
    pub window: usize,
    pub skipped_zero: usize,
    pub spike_threshold: f64,
    /// True when no gap passed the spike rule and the largest gap was used.
    pub fallback: bool,
}

impl EigengapReport {
    pub fn gap_for(&self, k: usize) -> Option<f64> {
        self.gaps.iter().find(|g| g.k == k).map(|g| g.gap)
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().fold(0.0_f64, |m, g| m.max(g.gap))
    }
}

/// Eigengap candidates over the `window` smallest non-zero eigenvalues.
///
/// A gap is a spike when it exceeds the mean gap by more than two sample
/// standard deviations; with no spike the first largest gap is the only
/// candidate. The window shrinks to what the decomposition retains.
pub fn eigengap_candidates(dec: &SpectralDecomposition, window: usize) -> Result<EigengapReport> {
    if window < 3 {
        return Err(Error::Config(format!("eigengap window {window} is below 3")));
    }
    let start = dec.zero_multiplicity.max(1);
    let available = dec.retained().saturating_sub(start);
    let window = window.min(available);
    if window < 2 {
        return Err(Error::InvalidInput(format!(
            "only {available} non-zero eigenvalues retained; need at least 2"
        )));
    }
    let mut gaps: Vec<EigenGap> = (start..start + window - 1)
        .map(|idx| EigenGap {
            k: idx + 1,
            gap: (dec.eigenvalues[idx + 1] - dec.eigenvalues[idx]).max(0.0),
            spike: false,
        })
        .collect();

    let m = gaps.len() as f64;
    let mean = gaps.iter().map(|g| g.gap).sum::<f64>() / m;
    let sd = if gaps.len() > 1 {
        (gaps.iter().map(|g| (g.gap - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let spike_threshold = mean + 2.0 * sd;
    for g in &mut gaps {
        g.spike = g.gap > spike_threshold;
    }
    let mut candidates: Vec<usize> = gaps.iter().filter(|g| g.spike).map(|g| g.k).collect();
    let fallback = candidates.is_empty();
    if fallback {
        let best = gaps
            .iter()
            .fold(&gaps[0], |best, g| if g.gap > best.gap { g } else { best });
        candidates.push(best.k);
    }
    Ok(EigengapReport {
        gaps,
        candidates,
        window,
        skipped_zero: start,
        spike_threshold,
        fallback,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// Row `i` holds the coordinates of sample `i`.
    pub coordinates: DMatrix<f64>,
    pub k: usize,
    /// 1-based indices of the eigenvectors used, e.g. `[2, 3, 4]`.
    pub source: Vec<usize>,
    pub row_normalized: bool,
}

/// Eigenvectors `e_2 ..= e_{k+1}` as columns; optionally each row scaled to
/// unit length (all-zero rows stay zero).
pub fn spectral_embedding(
    dec: &SpectralDecomposition,
    k: usize,
    row_normalize: bool,
) -> Result<Embedding> {
    if k == 0 {
        return Err(Error::InvalidInput("embedding dimension must be >= 1".into()));
    }
    if k + 1 > dec.retained() {
        return Err(Error::InvalidInput(format!(
            "embedding dimension {k} needs {} eigenpairs, only {} retained",
            k + 1,
            dec.retained()
        )));
    }
    let mut coordinates = dec.eigenvectors.columns(1, k).into_owned();
    if row_normalize {
        for mut row in coordinates.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
    }
    Ok(Embedding {
        coordinates,
        k,
        source: (2..=k + 1).collect(),
        row_normalized: row_normalize,
    })
}

/// `index,eigenvalue,gap,candidate` for every inspected eigenvalue.
pub fn write_eigen_report_csv(
    dec: &SpectralDecomposition,
    report: &EigengapReport,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::from("index,eigenvalue,gap,candidate\n");
    let last = (report.skipped_zero + report.window).min(dec.retained());
    for idx in 0..last {
        let k = idx + 1;
        let gap = report
            .gap_for(k)
            .map(|g| g.to_string())
            .unwrap_or_default();
        let candidate = report.candidates.contains(&k);
        out.push_str(&format!("{k},{},{gap},{candidate}\n", dec.eigenvalues[idx]));
    }
    write_file(path.as_ref(), out.as_bytes())
}

pub fn write_embedding_csv(emb: &Embedding, ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("id");
    for s in &emb.source {
        out.push_str(&format!(",e{s}"));
    }
    out.push('\n');
    for (r, id) in ids.iter().enumerate() {
        out.push_str(id);
        for c in 0..emb.k {
            out.push(',');
            out.push_str(&emb.coordinates[(r, c)].to_string());
        }
        out.push('\n');
    }
    write_file(path.as_ref(), out.as_bytes())
}
