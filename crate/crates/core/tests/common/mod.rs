//! Brute-force reference implementations shared by the integration tests.
//! Written from the definitions, deliberately naive, and independent of the
//! library code paths they check.
#![allow(dead_code)]

use asc_core::ingest::{NumericDataset, TextDataset};
use asc_core::seed;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-10;

/// Absolute below 1, relative above (CHC values run into the hundreds).
pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

pub fn rng(label: &str) -> ChaCha8Rng {
    seed::rng(seed::derive(7, label))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// ---------- random instances ----------

pub fn random_points(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect()).collect()
}

/// Labels `0..k` with every cluster used.
pub fn random_labels(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { r.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        labels.swap(i, j);
    }
    labels
}

pub fn numeric_dataset(rows: &[Vec<f64>]) -> NumericDataset {
    let n = rows.len();
    let p = rows[0].len();
    NumericDataset::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        (0..p).map(|c| format!("f{c}")).collect(),
        from_rows(rows),
    )
    .unwrap()
}

pub fn random_counts(r: &mut ChaCha8Rng, n: usize, q: usize) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| {
            (0..q)
                .map(|_| if r.random_bool(0.4) { r.random_range(1..6) } else { 0 })
                .collect()
        })
        .collect()
}

pub fn text_dataset(counts: &[Vec<u32>]) -> TextDataset {
    let n = counts.len();
    let q = counts[0].len();
    TextDataset::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        (0..q).map(|t| format!("t{t}")).collect(),
        DMatrix::from_fn(n, q, |r, c| counts[r][c]),
    )
    .unwrap()
}

/// Symmetric, non-negative, zero diagonal.
pub fn random_graph(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = if r.random_bool(0.7) { r.random_range(0.05..1.0) } else { 0.0 };
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

// ---------- linear algebra ----------

/// Gauss-Jordan with partial pivoting. `None` when singular.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        m[col].iter_mut().for_each(|x| *x /= d);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (x, p) in m[r].iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Cyclic Jacobi rotations; eigenvalues ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in m.iter_mut() {
                    let (rp, rq) = (row[p], row[q]);
                    row[p] = c * rp - s * rq;
                    row[q] = s * rp + c * rq;
                }
                let (row_p, row_q) = (m[p].clone(), m[q].clone());
                for (k, (mpk, mqk)) in row_p.into_iter().zip(row_q).enumerate() {
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn unnormalized_laplacian(w: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = w.nrows();
    (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|j| w[(i, j)]).sum();
            (0..n).map(|j| if i == j { d - w[(i, j)] } else { -w[(i, j)] }).collect()
        })
        .collect()
}

/// `I - D^{-1/2} W D^{-1/2}`; shares its spectrum with the random-walk form.
pub fn symmetric_laplacian(w: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[(i, j)]).sum()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id - w[(i, j)] / (d[i] * d[j]).sqrt()
                })
                .collect()
        })
        .collect()
}

// ---------- similarity ----------

/// Sample covariance (n - 1) inverted directly.
pub fn mahalanobis_oracle(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = rows.len();
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let cov: Vec<Vec<f64>> = (0..p)
        .map(|a| {
            (0..p)
                .map(|b| {
                    rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect();
    let inv = gauss_jordan_inverse(&cov)?;
    Some(
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d: Vec<f64> = (0..p).map(|c| rows[i][c] - rows[j][c]).collect();
                        let mut q = 0.0;
                        for a in 0..p {
                            for b in 0..p {
                                q += d[a] * inv[a][b] * d[b];
                            }
                        }
                        q.max(0.0).sqrt()
                    })
                    .collect()
            })
            .collect(),
    )
}

pub fn idf_oracle(counts: &[Vec<u32>]) -> Vec<f64> {
    let n = counts.len() as f64;
    (0..counts[0].len())
        .map(|t| {
            let df = counts.iter().filter(|r| r[t] > 0).count() as f64;
            if df == 0.0 {
                0.0
            } else {
                (n / df).ln()
            }
        })
        .collect()
}

pub fn tfidf_oracle(counts: &[Vec<u32>]) -> Vec<Vec<f64>> {
    let idf = idf_oracle(counts);
    counts
        .iter()
        .map(|r| r.iter().zip(&idf).map(|(&c, w)| (1.0 + c as f64).ln() * w).collect())
        .collect()
}

pub fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

// ---------- validity metrics ----------

fn members(labels: &[usize], c: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == c).collect()
}

fn k_of(labels: &[usize]) -> usize {
    labels.iter().max().unwrap() + 1
}

fn centroid(pts: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    (0..pts[0].len())
        .map(|d| idx.iter().map(|&i| pts[i][d]).sum::<f64>() / idx.len() as f64)
        .collect()
}

pub fn silhouette_oracle(pts: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = k_of(labels);
    let n = pts.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = members(labels, labels[i]);
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| dist(&pts[i], &pts[j])).sum::<f64>()
            / (own.len() - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i])
            .map(|c| {
                let m = members(labels, c);
                m.iter().map(|&j| dist(&pts[i], &pts[j])).sum::<f64>() / m.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

pub fn chc_oracle(pts: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = k_of(labels);
    let n = pts.len();
    let all: Vec<usize> = (0..n).collect();
    let g = centroid(pts, &all);
    let (mut between, mut within) = (0.0, 0.0);
    for c in 0..k {
        let m = members(labels, c);
        let cc = centroid(pts, &m);
        between += m.len() as f64 * dist(&cc, &g).powi(2);
        within += m.iter().map(|&i| dist(&pts[i], &cc).powi(2)).sum::<f64>();
    }
    (between / (k - 1) as f64) / (within / (n - k) as f64)
}

pub fn dbi_oracle(pts: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = k_of(labels);
    let cs: Vec<Vec<f64>> = (0..k).map(|c| centroid(pts, &members(labels, c))).collect();
    let s: Vec<f64> = (0..k)
        .map(|c| {
            let m = members(labels, c);
            m.iter().map(|&i| dist(&pts[i], &cs[c])).sum::<f64>() / m.len() as f64
        })
        .collect();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (s[i] + s[j]) / dist(&cs[i], &cs[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

pub fn intra_inter_oracle(pts: &[Vec<f64>], labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    let k = centers.len();
    let intra = pts.iter().zip(labels).map(|(p, &l)| dist(p, &centers[l])).sum::<f64>() / pts.len() as f64;
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            pairs.push(dist(&centers[a], &centers[b]));
        }
    }
    intra / (pairs.iter().sum::<f64>() / pairs.len() as f64)
}

/// Hubert-Arabie ARI from raw pair counts over all `n choose 2` pairs.
pub fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let total = both + only_a + only_b + neither;
    let sa = both + only_a;
    let sb = both + only_b;
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        1.0
    } else {
        (both - expected) / (max - expected)
    }
}

// ---------- clustering ----------

/// Smallest within-cluster sum of squares over every 2-partition.
pub fn exhaustive_two_means(pts: &[Vec<f64>]) -> f64 {
    let n = pts.len();
    let mut best = f64::INFINITY;
    // Point 0 stays in block 0, so each split is visited once.
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { 1 } else { 0 }).collect();
        best = best.min(sse(pts, &labels));
    }
    best
}

pub fn sse(pts: &[Vec<f64>], labels: &[usize]) -> f64 {
    (0..k_of(labels))
        .map(|c| {
            let m = members(labels, c);
            if m.is_empty() {
                return 0.0;
            }
            let cc = centroid(pts, &m);
            m.iter().map(|&i| dist(&pts[i], &cc).powi(2)).sum::<f64>()
        })
        .sum()
}

pub fn medoid_cost(pts: &[Vec<f64>], medoids: &[usize]) -> f64 {
    pts.iter()
        .map(|p| medoids.iter().map(|&m| dist(p, &pts[m])).fold(f64::INFINITY, f64::min))
        .sum()
}

/// No exchange of one medoid for one non-medoid lowers the cost.
pub fn is_swap_optimal(pts: &[Vec<f64>], medoids: &[usize]) -> bool {
    let base = medoid_cost(pts, medoids);
    for pos in 0..medoids.len() {
        for cand in 0..pts.len() {
            if medoids.contains(&cand) {
                continue;
            }
            let mut trial = medoids.to_vec();
            trial[pos] = cand;
            if medoid_cost(pts, &trial) < base - 1e-9 * base.max(1.0) {
                return false;
            }
        }
    }
    true
}

/// Within-block weight around 0.8, cross-block around 0.03, jittered.
pub fn planted_graph(sizes: &[usize], seed_label: &str) -> DMatrix<f64> {
    let mut r = rng(seed_label);
    let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let n = block.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = if block[i] == block[j] {
                0.8 + r.random_range(-0.15..0.15)
            } else {
                0.03 + r.random_range(-0.02..0.02)
            };
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

pub fn planted_labels(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect()
}
