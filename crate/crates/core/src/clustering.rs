//! Partitioning of embedding rows (k-means, k-medians, k-medoids) and the
//! choice of cluster count among eigengap candidates.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::silhouette;
use crate::geometry::{euclidean, manhattan, rows, sq_euclidean};
use crate::ingest::write_file;
use crate::seed;
use crate::spectral::{spectral_embedding, EigengapReport, Embedding, SpectralDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    #[default]
    Kmeans,
    Kmedians,
    Kmedoids,
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterMethod::Kmeans => "kmeans",
            ClusterMethod::Kmedians => "kmedians",
            ClusterMethod::Kmedoids => "kmedoids",
        })
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" | "k-means" => Ok(ClusterMethod::Kmeans),
            "kmedians" | "k-medians" => Ok(ClusterMethod::Kmedians),
            "kmedoids" | "k-medoids" => Ok(ClusterMethod::Kmedoids),
            other => Err(Error::Config(format!("unknown clustering method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// `k x dim`: centroids, coordinate-wise medians, or medoid rows.
    pub centers: DMatrix<f64>,
    pub k: usize,
    pub method: ClusterMethod,
    pub objective: f64,
    /// Objective after each iteration (k-means/k-medians) or after the
    /// initial set and each accepted swap (k-medoids).
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
    /// Row indices of the medoids, k-medoids only.
    pub medoids: Option<Vec<usize>>,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

fn check_k(n: usize, k: usize, dim: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds {n} points")));
    }
    if dim == 0 {
        return Err(Error::InvalidInput("points have no coordinates".into()));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Lloyd {
    /// Squared Euclidean cost, mean update.
    Means,
    /// L1 cost, coordinate-wise median update.
    Medians,
}

impl Lloyd {
    fn cost(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Lloyd::Means => sq_euclidean(a, b),
            Lloyd::Medians => manhattan(a, b),
        }
    }

    fn method(self) -> ClusterMethod {
        match self {
            Lloyd::Means => ClusterMethod::Kmeans,
            Lloyd::Medians => ClusterMethod::Kmedians,
        }
    }

    fn update(self, pts: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
        let dim = pts[0].len();
        match self {
            Lloyd::Means => {
                let mut sums = vec![vec![0.0; dim]; k];
                let mut sizes = vec![0usize; k];
                for (p, &l) in pts.iter().zip(labels) {
                    sizes[l] += 1;
                    for (s, x) in sums[l].iter_mut().zip(p) {
                        *s += x;
                    }
                }
                for (s, &m) in sums.iter_mut().zip(&sizes) {
                    s.iter_mut().for_each(|x| *x /= m as f64);
                }
                sums
            }
            Lloyd::Medians => (0..k)
                .map(|c| {
                    (0..dim)
                        .map(|d| {
                            let mut col: Vec<f64> = pts
                                .iter()
                                .zip(labels)
                                .filter(|(_, &l)| l == c)
                                .map(|(p, _)| p[d])
                                .collect();
                            median(&mut col)
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Nearest centre, lowest index on ties.
fn nearest(p: &[f64], centers: &[Vec<f64>], rule: Lloyd) -> (usize, f64) {
    let mut best = (0, rule.cost(p, &centers[0]));
    for (c, centre) in centers.iter().enumerate().skip(1) {
        let d = rule.cost(p, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Greedy farthest-point seeding from a given first point.
fn farthest_point_init(pts: &[Vec<f64>], k: usize, first: usize, rule: Lloyd) -> Vec<Vec<f64>> {
    let mut centers = vec![pts[first].clone()];
    let mut closest: Vec<f64> = pts.iter().map(|p| rule.cost(p, &pts[first])).collect();
    while centers.len() < k {
        let next = (0..pts.len()).fold(0, |b, i| if closest[i] > closest[b] { i } else { b });
        centers.push(pts[next].clone());
        for (c, p) in closest.iter_mut().zip(pts) {
            *c = c.min(rule.cost(p, &pts[next]));
        }
    }
    centers
}

/// k-means++ style seeding: first centre uniform, each next one drawn with
/// probability proportional to its cost to the nearest chosen centre.
fn weighted_init(pts: &[Vec<f64>], k: usize, seed_value: u64, rule: Lloyd) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed_value);
    let first = rng.random_range(0..pts.len());
    let mut centers = vec![pts[first].clone()];
    let mut closest: Vec<f64> = pts.iter().map(|p| rule.cost(p, &pts[first])).collect();
    while centers.len() < k {
        // All remaining points coincide with a centre: fall back to farthest.
        let next = match WeightedIndex::new(&closest) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => (0..pts.len()).fold(0, |b, i| if closest[i] > closest[b] { i } else { b }),
        };
        centers.push(pts[next].clone());
        for (c, p) in closest.iter_mut().zip(pts) {
            *c = c.min(rule.cost(p, &pts[next]));
        }
    }
    centers
}

/// Assign points; each empty cluster takes the point farthest from its
/// current centre among clusters that can spare one.
fn assign(pts: &[Vec<f64>], centers: &[Vec<f64>], rule: Lloyd) -> Vec<usize> {
    let k = centers.len();
    let mut labels = Vec::with_capacity(pts.len());
    let mut cost = Vec::with_capacity(pts.len());
    for p in pts {
        let (l, d) = nearest(p, centers, rule);
        labels.push(l);
        cost.push(d);
    }
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..pts.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |b: Option<usize>, i| match b {
                Some(j) if cost[j] >= cost[i] => Some(j),
                _ => Some(i),
            })
            .expect("k <= n leaves a cluster with a spare point");
        sizes[labels[donor]] -= 1;
        labels[donor] = empty;
        cost[donor] = 0.0;
        sizes[empty] = 1;
    }
    labels
}

struct LloydRun {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    history: Vec<f64>,
    iterations: usize,
}

/// Single-point transfers that lower the squared-error objective, taking
/// cluster sizes into account (Hartigan's rule). Lloyd fixed points can
/// still admit such moves. Returns whether anything moved.
fn hartigan_pass(
    pts: &[Vec<f64>],
    labels: &mut [usize],
    centers: &mut [Vec<f64>],
    max_rounds: usize,
) -> bool {
    let k = centers.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut moved_any = false;
    for _ in 0..max_rounds.max(1) {
        let mut moved = false;
        for (i, p) in pts.iter().enumerate() {
            let from = labels[i];
            if sizes[from] == 1 {
                continue;
            }
            let m = sizes[from] as f64;
            let removal = m / (m - 1.0) * sq_euclidean(p, &centers[from]);
            let mut best: Option<(usize, f64)> = None;
            for to in (0..k).filter(|&c| c != from) {
                let s = sizes[to] as f64;
                let add = s / (s + 1.0) * sq_euclidean(p, &centers[to]);
                if best.is_none_or(|(_, b)| add < b) {
                    best = Some((to, add));
                }
            }
            let Some((to, add)) = best else { continue };
            // Relative margin keeps round-off from cycling.
            if add < removal * (1.0 - 1e-12) {
                let (mf, st) = (m, sizes[to] as f64);
                for (d, x) in p.iter().enumerate() {
                    centers[from][d] = (centers[from][d] * mf - x) / (mf - 1.0);
                    centers[to][d] = (centers[to][d] * st + x) / (st + 1.0);
                }
                sizes[from] -= 1;
                sizes[to] += 1;
                labels[i] = to;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    if moved_any {
        // Fresh means, free of incremental drift.
        let fresh = Lloyd::Means.update(pts, labels, k);
        centers.clone_from_slice(&fresh);
    }
    moved_any
}

fn lloyd_run(pts: &[Vec<f64>], k: usize, init: Vec<Vec<f64>>, rule: Lloyd, max_iter: usize) -> LloydRun {
    let mut centers = init;
    let mut labels = assign(pts, &centers, rule);
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        centers = rule.update(pts, &labels, k);
        history.push(
            pts.iter()
                .zip(&labels)
                .map(|(p, &l)| rule.cost(p, &centers[l]))
                .sum(),
        );
        let next = assign(pts, &centers, rule);
        if next == labels {
            break;
        }
        labels = next;
    }
    if let Lloyd::Means = rule {
        if hartigan_pass(pts, &mut labels, &mut centers, max_iter) {
            history.push(
                pts.iter()
                    .zip(&labels)
                    .map(|(p, &l)| rule.cost(p, &centers[l]))
                    .sum(),
            );
        }
    }
    LloydRun {
        labels,
        centers,
        history,
        iterations,
    }
}

fn lloyd(
    points: &DMatrix<f64>,
    k: usize,
    seed_value: u64,
    max_iter: usize,
    restarts: usize,
    rule: Lloyd,
) -> Result<ClusterAssignment> {
    let n = points.nrows();
    check_k(n, k, points.ncols())?;
    let pts = rows(points);
    // Even restarts: farthest-point from distinct first points in a seeded
    // order. Odd restarts, and even ones once every first point is used,
    // sample centres with probability proportional to their cost. Greedy
    // farthest-point alone keeps picking the same outliers when one
    // embedding axis is noise.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed_value, "first-points")));
    let runs: Vec<LloydRun> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let init = if r % 2 == 0 && r / 2 < n {
                farthest_point_init(&pts, k, order[r / 2], rule)
            } else {
                weighted_init(&pts, k, seed::derive_index(seed_value, r as u64), rule)
            };
            lloyd_run(&pts, k, init, rule, max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.history.last() < best.history.last() {
                run
            } else {
                best
            }
        })
        .expect("at least one restart");
    let objective = *best.history.last().expect("at least one iteration");
    let dim = points.ncols();
    let flat: Vec<f64> = best.centers.iter().flatten().copied().collect();
    Ok(ClusterAssignment {
        labels: best.labels,
        centers: DMatrix::from_row_slice(k, dim, &flat),
        k,
        method: rule.method(),
        objective,
        objective_history: best.history,
        iterations: best.iterations,
        seed: seed_value,
        medoids: None,
    })
}

/// Lloyd's algorithm on squared Euclidean cost, finished with Hartigan
/// single-point transfers. Restarts alternate greedy farthest-point seeding
/// (distinct first centres) with cost-weighted random seeding; the lowest
/// objective wins (earliest restart on ties).
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ClusterAssignment> {
    lloyd(points, k, seed, max_iter, restarts, Lloyd::Means)
}

/// As [`kmeans`] with L1 cost and coordinate-wise medians.
pub fn kmedians(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ClusterAssignment> {
    lloyd(points, k, seed, max_iter, restarts, Lloyd::Medians)
}

fn distance_matrix(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pts.par_iter()
        .map(|a| pts.iter().map(|b| euclidean(a, b)).collect())
        .collect()
}

fn medoid_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    dist.iter()
        .map(|row| medoids.iter().map(|&m| row[m]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Best-improvement single-swap hill climbing over medoid sets, from `k`
/// random rows. Each round tries every (medoid, non-medoid) exchange and
/// applies the single best one if it strictly lowers the total distance to
/// the nearest medoid. `max_iter` caps the number of rounds.
pub fn kmedoids_hill_climb(
    points: &DMatrix<f64>,
    k: usize,
    seed_value: u64,
    max_iter: usize,
) -> Result<ClusterAssignment> {
    let n = points.nrows();
    check_k(n, k, points.ncols())?;
    let pts = rows(points);
    let dist = distance_matrix(&pts);
    let mut rng = seed::rng(seed_value);
    let mut medoids = rand::seq::index::sample(&mut rng, n, k).into_vec();
    let mut current = medoid_cost(&dist, &medoids);
    let mut history = vec![current];
    let mut rounds = 0;

    while rounds < max_iter {
        rounds += 1;
        // Nearest and second-nearest medoid distance per point.
        let mut near = vec![(0usize, f64::INFINITY); n];
        let mut second = vec![f64::INFINITY; n];
        for (o, row) in dist.iter().enumerate() {
            for (pos, &m) in medoids.iter().enumerate() {
                let d = row[m];
                if d < near[o].1 {
                    second[o] = near[o].1;
                    near[o] = (pos, d);
                } else if d < second[o] {
                    second[o] = d;
                }
            }
        }
        let is_medoid: Vec<bool> = {
            let mut v = vec![false; n];
            medoids.iter().for_each(|&m| v[m] = true);
            v
        };
        let mut best: Option<(usize, usize, f64)> = None;
        for pos in 0..k {
            let totals: Vec<Option<f64>> = (0..n)
                .into_par_iter()
                .map(|cand| {
                    if is_medoid[cand] {
                        return None;
                    }
                    let total = dist
                        .iter()
                        .enumerate()
                        .map(|(o, row)| {
                            let keep = if near[o].0 == pos { second[o] } else { near[o].1 };
                            keep.min(row[cand])
                        })
                        .sum::<f64>();
                    Some(total)
                })
                .collect();
            for (cand, total) in totals.into_iter().enumerate() {
                if let Some(t) = total {
                    if best.is_none_or(|(_, _, b)| t < b) {
                        best = Some((pos, cand, t));
                    }
                }
            }
        }
        match best {
            Some((pos, cand, total)) if total < current => {
                medoids[pos] = cand;
                current = medoid_cost(&dist, &medoids);
                history.push(current);
            }
            _ => break,
        }
    }

    let labels: Vec<usize> = dist
        .iter()
        .map(|row| {
            let mut b = 0;
            for pos in 1..k {
                if row[medoids[pos]] < row[medoids[b]] {
                    b = pos;
                }
            }
            b
        })
        .collect();
    let centers = DMatrix::from_fn(k, points.ncols(), |c, d| points[(medoids[c], d)]);
    Ok(ClusterAssignment {
        labels,
        centers,
        k,
        method: ClusterMethod::Kmedoids,
        objective: current,
        objective_history: history,
        iterations: rounds,
        seed: seed_value,
        medoids: Some(medoids),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub method: ClusterMethod,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            method: ClusterMethod::Kmeans,
            restarts: 20,
            max_iter: 300,
        }
    }
}

pub fn cluster_points(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    opts: &ClusterOptions,
) -> Result<ClusterAssignment> {
    match opts.method {
        ClusterMethod::Kmeans => kmeans(points, k, seed, opts.max_iter, opts.restarts),
        ClusterMethod::Kmedians => kmedians(points, k, seed, opts.max_iter, opts.restarts),
        ClusterMethod::Kmedoids => kmedoids_hill_climb(points, k, seed, opts.max_iter),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KScore {
    /// Normalized eigengap plus mean silhouette, maximized.
    #[default]
    GapSilhouette,
    /// Per-cluster `gap + |A - C| / max(A, C)`, worst cluster, minimized
    /// over k. `A` is the mean member-to-centre distance, `C` the distance
    /// to the nearest other centre.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub k: usize,
    pub eigengap: f64,
    pub silhouette: f64,
    pub score: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub candidates: Vec<usize>,
    pub per_candidate: Vec<CandidateScore>,
    pub chosen_k: usize,
    pub score_mode: KScore,
    /// Every candidate clustering was dominated by singletons; the largest
    /// gap decided instead.
    pub degenerate_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectKOptions {
    pub cluster: ClusterOptions,
    pub score: KScore,
    pub row_normalize: bool,
}

impl Default for SelectKOptions {
    fn default() -> Self {
        Self {
            cluster: ClusterOptions::default(),
            score: KScore::GapSilhouette,
            row_normalize: false,
        }
    }
}

fn literal_score(points: &DMatrix<f64>, a: &ClusterAssignment, gap: f64) -> f64 {
    let pts = rows(points);
    let cs = rows(&a.centers);
    let sizes = a.sizes();
    let mut spread = vec![0.0; a.k];
    for (p, &l) in pts.iter().zip(&a.labels) {
        spread[l] += euclidean(p, &cs[l]);
    }
    (0..a.k)
        .map(|i| {
            let avg = spread[i] / sizes[i] as f64;
            let sep = (0..a.k)
                .filter(|&j| j != i)
                .map(|j| euclidean(&cs[i], &cs[j]))
                .fold(f64::INFINITY, f64::min);
            let m = avg.max(sep);
            let ratio = if m > 0.0 { (avg - sep).abs() / m } else { 0.0 };
            gap + ratio
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn is_degenerate(a: &ClusterAssignment) -> bool {
    let singletons = a.sizes().iter().filter(|&&s| s == 1).count();
    2 * singletons > a.k
}

/// Seed used to cluster candidate `k`; shared by every pipeline variant so
/// that equal inputs give equal clusterings.
pub fn candidate_seed(root: u64, k: usize) -> u64 {
    seed::derive(root, &format!("cluster/k={k}"))
}

pub struct Selection {
    pub report: KSelectionReport,
    pub assignment: ClusterAssignment,
    pub embedding: Embedding,
}

/// Cluster the embedding for each eigengap candidate and keep the best by
/// the configured score (smaller k on ties). Candidates whose embedding does
/// not fit the retained spectrum, or with `k >= n`, are skipped.
pub fn select_k(
    dec: &SpectralDecomposition,
    gaps: &EigengapReport,
    seed: u64,
    opts: &SelectKOptions,
) -> Result<Selection> {
    let n = dec.eigenvectors.nrows();
    let candidates: Vec<usize> = gaps
        .candidates
        .iter()
        .copied()
        .filter(|&k| k >= 2 && k < n && k < dec.retained())
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no usable k among candidates {:?} for {n} samples",
            gaps.candidates
        )));
    }
    let max_gap = gaps.max_gap();
    let evaluated: Vec<(CandidateScore, ClusterAssignment, Embedding)> = candidates
        .par_iter()
        .map(|&k| {
            let embedding = spectral_embedding(dec, k, opts.row_normalize)?;
            let assignment =
                cluster_points(&embedding.coordinates, k, candidate_seed(seed, k), &opts.cluster)?;
            let sil = silhouette(&embedding.coordinates, &assignment.labels)?.mean;
            let gap = gaps.gap_for(k).unwrap_or(0.0);
            let score = match opts.score {
                KScore::GapSilhouette => {
                    let norm = if max_gap > 0.0 { gap / max_gap } else { 0.0 };
                    norm + sil
                }
                KScore::Literal => literal_score(&embedding.coordinates, &assignment, gap),
            };
            let degenerate = is_degenerate(&assignment);
            Ok((
                CandidateScore {
                    k,
                    eigengap: gap,
                    silhouette: sil,
                    score,
                    degenerate,
                },
                assignment,
                embedding,
            ))
        })
        .collect::<Result<_>>()?;

    let usable: Vec<usize> = (0..evaluated.len())
        .filter(|&i| !evaluated[i].0.degenerate)
        .collect();
    let degenerate_fallback = usable.is_empty();
    let pick = if degenerate_fallback {
        (0..evaluated.len())
            .reduce(|b, i| if evaluated[i].0.eigengap > evaluated[b].0.eigengap { i } else { b })
            .expect("non-empty")
    } else {
        usable
            .into_iter()
            .reduce(|b, i| {
                let (si, sb) = (evaluated[i].0.score, evaluated[b].0.score);
                let better = match opts.score {
                    KScore::GapSilhouette => si > sb,
                    KScore::Literal => si < sb,
                };
                if better {
                    i
                } else {
                    b
                }
            })
            .expect("non-empty")
    };

    let per_candidate: Vec<CandidateScore> = evaluated.iter().map(|e| e.0.clone()).collect();
    let (score, assignment, embedding) = evaluated.into_iter().nth(pick).expect("index in range");
    Ok(Selection {
        report: KSelectionReport {
            candidates,
            per_candidate,
            chosen_k: score.k,
            score_mode: opts.score,
            degenerate_fallback,
        },
        assignment,
        embedding,
    })
}

pub fn write_assignments_csv(ids: &[String], labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("id,label\n");
    for (id, l) in ids.iter().zip(labels) {
        out.push_str(&format!("{id},{l}\n"));
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Read an `id,label` file back; rows keep file order.
pub fn read_assignments_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<usize>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
        })?;
    let (mut ids, mut labels) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: String::new(),
                message: "expected id,label".into(),
            });
        }
        let label = record[1].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: "label".into(),
            message: format!("`{}` is not a cluster index", &record[1]),
        })?;
        ids.push(record[0].to_owned());
        labels.push(label);
    }
    if ids.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no rows", path.display())));
    }
    Ok((ids, labels))
}

pub fn write_k_selection_csv(report: &KSelectionReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("k,eigengap,silhouette,score,degenerate,chosen\n");
    for c in &report.per_candidate {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.k,
            c.eigengap,
            c.silhouette,
            c.score,
            c.degenerate,
            c.k == report.chosen_k
        ));
    }
    write_file(path.as_ref(), out.as_bytes())
}
