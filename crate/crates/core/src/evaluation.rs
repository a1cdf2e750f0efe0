//! Internal validity metrics, adjusted Rand index, per-cluster term
//! profiles and per-feature summary statistics.
//!
//! All distances are Euclidean. Labels are cluster indices `0..k`; every
//! cluster in that range must be non-empty.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, rows, sq_euclidean};
use crate::ingest::{write_file, NumericDataset, TextDataset};

/// Number of clusters implied by `labels`, checking every cluster is used.
pub(crate) fn cluster_count(labels: &[usize], n: usize) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidInput(format!("cluster {empty} is empty")));
    }
    Ok(k)
}

fn centroids(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut sizes = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
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

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub per_sample: Vec<f64>,
    pub mean: f64,
}

/// Mean silhouette; singleton clusters score 0, as do points with
/// `a = b = 0`.
pub fn silhouette(points: &DMatrix<f64>, labels: &[usize]) -> Result<Silhouette> {
    let n = points.nrows();
    let k = cluster_count(labels, n)?;
    if k < 2 {
        return Err(Error::InvalidInput(format!("silhouette needs k >= 2, got {k}")));
    }
    let pts = rows(points);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let per_sample: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += euclidean(&pts[i], &pts[j]);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { per_sample, mean })
}

/// Mean distance from each point to its own centre over the mean pairwise
/// distance between centres. Lower is tighter.
pub fn intra_inter_ratio(points: &DMatrix<f64>, labels: &[usize], centers: &DMatrix<f64>) -> Result<f64> {
    let n = points.nrows();
    let k = cluster_count(labels, n)?;
    if k < 2 {
        return Err(Error::InvalidInput(format!("intra/inter needs k >= 2, got {k}")));
    }
    if centers.nrows() != k || centers.ncols() != points.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: centers.nrows(),
        });
    }
    let pts = rows(points);
    let cs = rows(centers);
    let intra = pts
        .iter()
        .zip(labels)
        .map(|(p, &l)| euclidean(p, &cs[l]))
        .sum::<f64>()
        / n as f64;
    let mut inter = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            inter += euclidean(&cs[a], &cs[b]);
        }
    }
    inter /= (k * (k - 1) / 2) as f64;
    if inter == 0.0 {
        return Err(Error::Degenerate("cluster centres coincide".into()));
    }
    Ok(intra / inter)
}

/// Between-cluster over within-cluster dispersion, each divided by its
/// degrees of freedom. Infinite when every cluster has zero spread.
pub fn calinski_harabasz(points: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let n = points.nrows();
    let k = cluster_count(labels, n)?;
    if k < 2 || k >= n {
        return Err(Error::InvalidInput(format!(
            "Calinski-Harabasz needs 2 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let pts = rows(points);
    let cents = centroids(&pts, labels, k);
    let overall = centroids(&pts, &vec![0; n], 1).remove(0);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let between: f64 = cents
        .iter()
        .zip(&sizes)
        .map(|(c, &m)| m as f64 * sq_euclidean(c, &overall))
        .sum();
    let within: f64 = pts
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_euclidean(p, &cents[l]))
        .sum();
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Mean over clusters of the worst `(s_i + s_j) / d(c_i, c_j)`, where `s` is
/// the mean distance to the centroid. Lower is better.
pub fn davies_bouldin(points: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let n = points.nrows();
    let k = cluster_count(labels, n)?;
    if k < 2 {
        return Err(Error::InvalidInput(format!("Davies-Bouldin needs k >= 2, got {k}")));
    }
    let pts = rows(points);
    let cents = centroids(&pts, labels, k);
    let mut scatter = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    for (p, &l) in pts.iter().zip(labels) {
        scatter[l] += euclidean(p, &cents[l]);
        sizes[l] += 1;
    }
    for (s, &m) in scatter.iter_mut().zip(&sizes) {
        *s /= m as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0_f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(&cents[i], &cents[j]);
            if d == 0.0 {
                return Err(Error::Degenerate(format!("centroids {i} and {j} coincide")));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index from the contingency table. Two partitions with no
/// room for chance correction (both all-singletons or both one block) score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len() as u64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    let mut rows_sum = vec![0u64; ka];
    let mut cols_sum = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
        rows_sum[x] += 1;
        cols_sum[y] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows_sum.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols_sum.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Silhouette, intra/inter ratio, Calinski-Harabasz and Davies-Bouldin.
/// Undefined values (coincident centres, zero within-cluster spread) are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub silhouette: f64,
    pub intra_inter: Option<f64>,
    pub chc: Option<f64>,
    pub dbi: Option<f64>,
}

pub fn metric_bundle(points: &DMatrix<f64>, labels: &[usize], centers: &DMatrix<f64>) -> Result<MetricBundle> {
    let sil = silhouette(points, labels)?;
    let finite = |r: Result<f64>| match r {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) | Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let chc = if centers.nrows() < points.nrows() {
        finite(calinski_harabasz(points, labels))?
    } else {
        None
    };
    Ok(MetricBundle {
        silhouette: sil.mean,
        intra_inter: finite(intra_inter_ratio(points, labels, centers))?,
        chc,
        dbi: finite(davies_bouldin(points, labels))?,
    })
}

/// Per term, the share of its occurrences falling in each cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub terms: Vec<String>,
    pub k: usize,
    /// `ratios[term][cluster]`; all zero for terms that never occur.
    pub ratios: Vec<Vec<f64>>,
    /// Cluster holding the largest share, lowest index on ties.
    pub dominant: Vec<Option<usize>>,
}

pub fn word_frequency_ratio(text: &TextDataset, labels: &[usize]) -> Result<ClusterProfile> {
    if labels.len() != text.n() {
        return Err(Error::DimensionMismatch {
            expected: text.n(),
            actual: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut ratios = Vec::with_capacity(text.q());
    let mut dominant = Vec::with_capacity(text.q());
    for t in 0..text.q() {
        let mut per = vec![0u64; k];
        for (r, &l) in labels.iter().enumerate() {
            per[l] += u64::from(text.counts[(r, t)]);
        }
        let total: u64 = per.iter().sum();
        if total == 0 {
            ratios.push(vec![0.0; k]);
            dominant.push(None);
            continue;
        }
        let row: Vec<f64> = per.iter().map(|&c| c as f64 / total as f64).collect();
        let best = (0..k).fold(0, |b, c| if per[c] > per[b] { c } else { b });
        ratios.push(row);
        dominant.push(Some(best));
    }
    Ok(ClusterProfile {
        terms: text.lexicon.clone(),
        k,
        ratios,
        dominant,
    })
}

pub fn write_profile_csv(profile: &ClusterProfile, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("term");
    for c in 0..profile.k {
        out.push_str(&format!(",cluster_{c}"));
    }
    out.push_str(",dominant\n");
    for (t, term) in profile.terms.iter().enumerate() {
        out.push_str(term);
        for r in &profile.ratios[t] {
            out.push_str(&format!(",{r}"));
        }
        match profile.dominant[t] {
            Some(d) => out.push_str(&format!(",{d}\n")),
            None => out.push_str(",\n"),
        }
    }
    write_file(path.as_ref(), out.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// `100 * sd / mean`; `None` when the mean is zero.
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub features: Vec<FeatureSummary>,
}

pub fn coefficient_of_variation(mean: f64, sd: f64) -> Option<f64> {
    if mean == 0.0 {
        None
    } else {
        Some(100.0 * sd / mean)
    }
}

pub fn dataset_summary(data: &NumericDataset) -> Result<DatasetSummary> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "summary needs at least 2 samples, got {n}"
        )));
    }
    let features = data
        .features
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let col = data.values.column(c);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            FeatureSummary {
                name: name.clone(),
                mean,
                sd,
                cv: coefficient_of_variation(mean, sd),
            }
        })
        .collect();
    Ok(DatasetSummary { features })
}

/// `variable,mean,standard_deviation,coefficient_of_variation`, two decimals.
pub fn summary_csv(summary: &DatasetSummary) -> String {
    let mut out = String::from("variable,mean,standard_deviation,coefficient_of_variation\n");
    for f in &summary.features {
        let cv = f.cv.map(|v| format!("{v:.2}")).unwrap_or_default();
        out.push_str(&format!("{},{:.2},{:.2},{cv}\n", f.name, f.mean, f.sd));
    }
    out
}

pub fn write_summary_csv(summary: &DatasetSummary, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), summary_csv(summary).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[&[f64]]) -> DMatrix<f64> {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DMatrix::from_row_slice(rows.len(), d, &flat)
    }

    #[test]
    fn separated_pairs_have_silhouette_near_one() {
        let p = pts(&[&[0.0], &[1.0], &[1000.0], &[1001.0]]);
        let s = silhouette(&p, &[0, 0, 1, 1]).unwrap();
        assert!(s.mean >= 0.99);
    }

    #[test]
    fn identical_points_score_zero() {
        let p = pts(&[&[2.0, 2.0] as &[f64]; 4]);
        assert_eq!(silhouette(&p, &[0, 0, 1, 1]).unwrap().mean, 0.0);
        assert!(silhouette(&p, &[0, 0, 0, 0]).is_err());
        assert!(silhouette(&p, &[0, 0, 2, 2]).is_err());
    }

    #[test]
    fn intra_inter_zero_when_each_point_is_a_centre() {
        let p = pts(&[&[0.0], &[3.0], &[7.0]]);
        assert_eq!(intra_inter_ratio(&p, &[0, 1, 2], &p).unwrap(), 0.0);
        let c = pts(&[&[1.0], &[1.0]]);
        assert!(matches!(
            intra_inter_ratio(&pts(&[&[0.0], &[2.0]]), &[0, 1], &c),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn chc_infinite_for_zero_spread() {
        let p = pts(&[&[0.0], &[0.0], &[5.0], &[5.0]]);
        assert_eq!(calinski_harabasz(&p, &[0, 0, 1, 1]).unwrap(), f64::INFINITY);
        assert!(calinski_harabasz(&p, &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn dbi_of_duplicated_geometry() {
        let one = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[5.0, 0.0], &[6.0, 0.0]]);
        let base = davies_bouldin(&one, &[0, 0, 1, 1]).unwrap();
        let two = pts(&[
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[5.0, 0.0],
            &[6.0, 0.0],
            &[0.0, 1e6],
            &[1.0, 1e6],
            &[5.0, 1e6],
            &[6.0, 1e6],
        ]);
        let dup = davies_bouldin(&two, &[0, 0, 1, 1, 2, 2, 3, 3]).unwrap();
        assert!((dup - base).abs() < 1e-9);
    }

    #[test]
    fn ari_edge_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        let single: Vec<usize> = (0..6).collect();
        assert_eq!(adjusted_rand_index(&single, &[0; 6]).unwrap(), 0.0);
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn profile_ratios() {
        let t = TextDataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into(), "z".into()],
            DMatrix::from_row_slice(3, 3, &[2, 0, 0, 1, 0, 0, 1, 4, 0]),
        )
        .unwrap();
        let p = word_frequency_ratio(&t, &[0, 0, 1]).unwrap();
        assert_eq!(p.ratios[0], vec![0.75, 0.25]);
        assert_eq!(p.ratios[1], vec![0.0, 1.0]);
        assert_eq!(p.dominant, vec![Some(0), Some(1), None]);
    }

    #[test]
    fn constant_feature_summary() {
        let d = NumericDataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["f".into(), "z".into()],
            DMatrix::from_row_slice(3, 2, &[4.0, -1.0, 4.0, 0.0, 4.0, 1.0]),
        )
        .unwrap();
        let s = dataset_summary(&d).unwrap();
        assert_eq!(s.features[0].sd, 0.0);
        assert_eq!(s.features[0].cv, Some(0.0));
        assert_eq!(s.features[1].cv, None);
    }
}
