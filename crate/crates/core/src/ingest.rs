//! Loading numeric features, term-frequency tables and constraint sets, plus
//! a seeded generator of two-modality datasets with planted clusters.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Per-sample numeric features, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericDataset {
    pub samples: Vec<String>,
    pub features: Vec<String>,
    pub values: DMatrix<f64>,
}

impl NumericDataset {
    pub fn new(samples: Vec<String>, features: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                actual: values.nrows(),
            });
        }
        if values.ncols() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: values.ncols(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {bad}")));
        }
        check_unique_ids(&samples)?;
        Ok(Self {
            samples,
            features,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }
}

/// Raw term counts over a fixed lexicon, one row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct TextDataset {
    pub samples: Vec<String>,
    pub lexicon: Vec<String>,
    pub counts: DMatrix<u32>,
}

impl TextDataset {
    pub fn new(samples: Vec<String>, lexicon: Vec<String>, counts: DMatrix<u32>) -> Result<Self> {
        if counts.nrows() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                actual: counts.nrows(),
            });
        }
        if counts.ncols() != lexicon.len() {
            return Err(Error::DimensionMismatch {
                expected: lexicon.len(),
                actual: counts.ncols(),
            });
        }
        check_lexicon(&lexicon)?;
        check_unique_ids(&samples)?;
        Ok(Self {
            samples,
            lexicon,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.counts.nrows()
    }

    pub fn q(&self) -> usize {
        self.counts.ncols()
    }

    /// Reorder rows to follow `samples`. Alignment is by identifier; every
    /// requested id must exist and no document may be left over.
    pub fn aligned_to(&self, samples: &[String]) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::InvalidInput(format!(
                "text has {} documents but {} samples were requested",
                self.samples.len(),
                samples.len()
            )));
        }
        let index: HashMap<&str, usize> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut order = Vec::with_capacity(samples.len());
        for id in samples {
            match index.get(id.as_str()) {
                Some(&i) => order.push(i),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "sample `{id}` has no text record"
                    )))
                }
            }
        }
        let counts = DMatrix::from_fn(samples.len(), self.q(), |r, c| self.counts[(order[r], c)]);
        Self::new(samples.to_vec(), self.lexicon.clone(), counts)
    }
}

/// Must-link and cannot-link sample index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSets {
    pub must_link: Vec<usize>,
    pub cannot_link: Vec<usize>,
}

impl ConstraintSets {
    /// Validate against a dataset of `n` rows. Indices are deduplicated and
    /// sorted.
    pub fn new(must_link: Vec<usize>, cannot_link: Vec<usize>, n: usize) -> Result<Self> {
        let must: BTreeSet<usize> = must_link.into_iter().collect();
        let cannot: BTreeSet<usize> = cannot_link.into_iter().collect();
        if let Some(&bad) = must.iter().chain(cannot.iter()).find(|&&i| i >= n) {
            return Err(Error::InvalidInput(format!(
                "constraint index {bad} out of range for {n} samples"
            )));
        }
        if let Some(both) = must.intersection(&cannot).next() {
            return Err(Error::InvalidInput(format!(
                "index {both} is in both must_link and cannot_link"
            )));
        }
        Ok(Self {
            must_link: must.into_iter().collect(),
            cannot_link: cannot.into_iter().collect(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.must_link.len() < 2 || self.cannot_link.is_empty()
    }
}

fn check_unique_ids(samples: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(samples.len());
    for s in samples {
        if !seen.insert(s.as_str()) {
            return Err(Error::DuplicateId(s.clone()));
        }
    }
    Ok(())
}

fn check_lexicon(lexicon: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(lexicon.len());
    for (i, t) in lexicon.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::InvalidInput(format!("lexicon entry {i} is empty")));
        }
        if !seen.insert(t.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate lexicon term `{t}`")));
        }
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Load a numeric CSV: header `id,<feature>...`, one sample per row.
/// Rows are reported by file line (the header is line 1).
pub fn load_numeric_csv(path: impl AsRef<Path>) -> Result<NumericDataset> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: String::new(),
            message: "header needs an id column and at least one feature".into(),
        });
    }
    let features: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let p = features.len();

    let mut samples = Vec::new();
    let mut flat = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        samples.push(record[0].to_owned());
        for (c, name) in features.iter().enumerate() {
            let cell = &record[c + 1];
            let parsed = cell.parse::<f64>().ok().filter(|v| v.is_finite());
            match parsed {
                Some(v) => flat.push(v),
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: line,
                        column: name.clone(),
                        message: if cell.is_empty() {
                            "missing value".into()
                        } else {
                            format!("`{cell}` is not a finite number")
                        },
                    })
                }
            }
        }
    }
    let values = DMatrix::from_row_slice(samples.len(), p, &flat);
    NumericDataset::new(samples, features, values)
}

pub fn write_numeric_csv(data: &NumericDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("id");
    for f in &data.features {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for (r, id) in data.samples.iter().enumerate() {
        out.push_str(id);
        for c in 0..data.p() {
            out.push(',');
            out.push_str(&data.values[(r, c)].to_string());
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// One term per line.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let lexicon: Vec<String> = text
        .lines()
        .map(|l| l.trim_end_matches('\r').trim().to_owned())
        .collect();
    if lexicon.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty lexicon", path.display())));
    }
    check_lexicon(&lexicon).map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(lexicon)
}

struct Triplet {
    doc: String,
    term: usize,
    count: u32,
    line: usize,
}

fn read_triplets(path: &Path, q: usize) -> Result<Vec<Triplet>> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if i == 0 && record.get(0) == Some("doc_id") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: String::new(),
                message: "expected doc_id,term_index,count".into(),
            });
        }
        let parse_err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            row: line,
            column: column.into(),
            message,
        };
        let term: usize = record[1]
            .parse()
            .map_err(|_| parse_err("term_index", format!("`{}` is not an index", &record[1])))?;
        if term >= q {
            return Err(parse_err(
                "term_index",
                format!("term index {term} out of range for a {q}-term lexicon"),
            ));
        }
        let count: i64 = record[2]
            .parse()
            .map_err(|_| parse_err("count", format!("`{}` is not an integer", &record[2])))?;
        if count < 0 {
            return Err(parse_err("count", format!("negative count {count}")));
        }
        let count = u32::try_from(count)
            .map_err(|_| parse_err("count", format!("count {count} too large")))?;
        out.push(Triplet {
            doc: record[0].to_owned(),
            term,
            count,
            line,
        });
    }
    Ok(out)
}

/// Load sparse `doc_id,term_index,count` triplets (0-based term indices,
/// optional header) against a lexicon. Rows follow `samples`; documents with
/// no triplets are all-zero rows. Repeated (doc, term) cells accumulate.
pub fn load_term_frequency(
    matrix_path: impl AsRef<Path>,
    lexicon_path: impl AsRef<Path>,
    samples: &[String],
) -> Result<TextDataset> {
    let matrix_path = matrix_path.as_ref();
    let lexicon = load_lexicon(lexicon_path)?;
    let triplets = read_triplets(matrix_path, lexicon.len())?;
    let index: HashMap<&str, usize> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut counts = DMatrix::<u32>::zeros(samples.len(), lexicon.len());
    for t in &triplets {
        let row = *index.get(t.doc.as_str()).ok_or_else(|| Error::Parse {
            path: matrix_path.to_path_buf(),
            row: t.line,
            column: "doc_id".into(),
            message: format!("unknown doc_id `{}`", t.doc),
        })?;
        counts[(row, t.term)] = counts[(row, t.term)].saturating_add(t.count);
    }
    TextDataset::new(samples.to_vec(), lexicon, counts)
}

/// As [`load_term_frequency`], taking the document list from the triplet
/// file itself in order of first appearance.
pub fn load_term_frequency_inferred(
    matrix_path: impl AsRef<Path>,
    lexicon_path: impl AsRef<Path>,
) -> Result<TextDataset> {
    let matrix_path = matrix_path.as_ref();
    let lexicon = load_lexicon(&lexicon_path)?;
    let triplets = read_triplets(matrix_path, lexicon.len())?;
    let mut seen = HashSet::new();
    let samples: Vec<String> = triplets
        .iter()
        .filter(|t| seen.insert(t.doc.clone()))
        .map(|t| t.doc.clone())
        .collect();
    load_term_frequency(matrix_path, lexicon_path, &samples)
}

/// Dense counts: header `id,<term>...`, one document per row.
pub fn load_term_frequency_dense(path: impl AsRef<Path>) -> Result<TextDataset> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let lexicon: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut samples = Vec::new();
    let mut flat = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        samples.push(record[0].to_owned());
        for (c, term) in lexicon.iter().enumerate() {
            let v: u32 = record[c + 1].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: term.clone(),
                message: format!("`{}` is not a non-negative integer", &record[c + 1]),
            })?;
            flat.push(v);
        }
    }
    let counts = DMatrix::from_row_slice(samples.len(), lexicon.len(), &flat);
    TextDataset::new(samples, lexicon, counts)
}

/// Write the non-zero cells as sparse triplets with a header row.
pub fn write_term_frequency(text: &TextDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("doc_id,term_index,count\n");
    for (r, id) in text.samples.iter().enumerate() {
        for c in 0..text.q() {
            let v = text.counts[(r, c)];
            if v > 0 {
                out.push_str(&format!("{id},{c},{v}\n"));
            }
        }
    }
    write_file(path.as_ref(), out.as_bytes())
}

pub fn write_lexicon(lexicon: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut out = lexicon.join("\n");
    out.push('\n');
    write_file(path.as_ref(), out.as_bytes())
}

/// JSON object with `must_link` and `cannot_link` index arrays.
pub fn load_constraints(path: impl AsRef<Path>, n: usize) -> Result<ConstraintSets> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let raw: ConstraintSets = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row: e.line(),
        column: String::new(),
        message: e.to_string(),
    })?;
    ConstraintSets::new(raw.must_link, raw.cannot_link, n)
}

pub fn write_constraints(c: &ConstraintSets, path: impl AsRef<Path>) -> Result<()> {
    let mut json = serde_json::to_string_pretty(c).expect("constraint sets serialize");
    json.push('\n');
    write_file(path.as_ref(), json.as_bytes())
}

/// Parameters of the planted-cluster generator.
///
/// `numeric_groups` and `text_groups` assign planted clusters to groups:
/// clusters in the same group are indistinguishable under that modality. A
/// cluster left out of a modality's groups carries no signal there: each of
/// its samples takes a uniformly random group of that modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub clusters: usize,
    pub numeric_groups: Vec<Vec<usize>>,
    pub text_groups: Vec<Vec<usize>>,
    pub seed: u64,
    /// Standard deviation of the per-feature Gaussian noise.
    pub numeric_noise: f64,
    /// Per numeric group multiplier on `numeric_noise`; missing entries are 1.
    pub numeric_group_spread: Vec<f64>,
    /// Distance between numeric group centres, in noise-free units.
    pub numeric_separation: f64,
    pub features: usize,
    /// Poisson rate of another group's topic terms in a document.
    pub text_noise: f64,
    pub topic_rate: f64,
    pub background_rate: f64,
    pub terms_per_group: usize,
    pub background_terms: usize,
    /// Planted cluster used as the must-link set; every other sample is
    /// cannot-link.
    pub must_link_cluster: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 150,
            clusters: 3,
            numeric_groups: vec![vec![0], vec![1, 2]],
            text_groups: vec![vec![1], vec![2]],
            seed: 42,
            numeric_noise: 1.0,
            numeric_group_spread: vec![0.05, 1.0],
            numeric_separation: 6.0,
            features: 4,
            text_noise: 0.1,
            topic_rate: 3.0,
            background_rate: 1.0,
            terms_per_group: 12,
            background_terms: 8,
            must_link_cluster: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub numeric: NumericDataset,
    pub text: TextDataset,
    pub labels: Vec<usize>,
    pub constraints: ConstraintSets,
}

fn group_of(groups: &[Vec<usize>], clusters: usize, name: &str) -> Result<Vec<Option<usize>>> {
    if groups.is_empty() {
        return Err(Error::Config(format!("{name} modality needs at least one group")));
    }
    let mut owner = vec![None; clusters];
    for (g, members) in groups.iter().enumerate() {
        for &c in members {
            if c >= clusters {
                return Err(Error::Config(format!(
                    "{name} group names cluster {c}, but only {clusters} are planted"
                )));
            }
            if owner[c].is_some() {
                return Err(Error::Config(format!(
                    "{name} groups list cluster {c} twice"
                )));
            }
            owner[c] = Some(g);
        }
    }
    Ok(owner)
}

fn separates(owner: &[Option<usize>], a: usize, b: usize) -> bool {
    matches!((owner[a], owner[b]), (Some(x), Some(y)) if x != y)
}

/// Generate a two-modality dataset with planted clusters.
///
/// Sample `i` belongs to cluster `i % clusters`. Numeric rows are Gaussian
/// around a per-numeric-group centre; text rows draw Poisson counts that
/// favour the topic terms of their text group. Must-link is one planted
/// cluster, cannot-link every other sample.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticBundle> {
    if spec.clusters < 2 {
        return Err(Error::Config("need at least 2 planted clusters".into()));
    }
    if spec.n < 10 * spec.clusters {
        return Err(Error::Config(format!(
            "n = {} is below 10 x clusters = {}",
            spec.n,
            10 * spec.clusters
        )));
    }
    if spec.features == 0 || spec.terms_per_group == 0 {
        return Err(Error::Config("features and terms_per_group must be positive".into()));
    }
    if !(spec.numeric_noise > 0.0 && spec.numeric_noise.is_finite()) {
        return Err(Error::Config("numeric_noise must be positive".into()));
    }
    if spec.numeric_group_spread.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Config("numeric_group_spread entries must be positive".into()));
    }
    for rate in [spec.text_noise, spec.topic_rate, spec.background_rate] {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Config("Poisson rates must be finite and non-negative".into()));
        }
    }
    if spec.must_link_cluster >= spec.clusters {
        return Err(Error::Config(format!(
            "must-link cluster {} is not planted",
            spec.must_link_cluster
        )));
    }
    let num_group = group_of(&spec.numeric_groups, spec.clusters, "numeric")?;
    let text_group = group_of(&spec.text_groups, spec.clusters, "text")?;
    for a in 0..spec.clusters {
        for b in a + 1..spec.clusters {
            if !separates(&num_group, a, b) && !separates(&text_group, a, b) {
                return Err(Error::Config(format!(
                    "planted clusters {a} and {b} are separable under neither modality"
                )));
            }
        }
    }

    let labels: Vec<usize> = (0..spec.n).map(|i| i % spec.clusters).collect();
    let samples: Vec<String> = (0..spec.n).map(|i| format!("s{i:04}")).collect();

    // Numeric group g sits at separation * e_(g mod p), shifted along the
    // next axis for groups beyond p so centres stay distinct.
    let p = spec.features;
    let centre = |g: usize| -> Vec<f64> {
        let mut c = vec![0.0; p];
        c[g % p] += spec.numeric_separation;
        if g >= p {
            c[(g + 1) % p] += spec.numeric_separation * (g / p) as f64;
        }
        c
    };
    let mut rng = seed::rng(seed::derive(spec.seed, "synthetic/numeric"));
    let noise = Normal::new(0.0, spec.numeric_noise)
        .map_err(|e| Error::Config(format!("numeric noise: {e}")))?;
    let mut values = DMatrix::<f64>::zeros(spec.n, p);
    let n_num_groups = spec.numeric_groups.len();
    for (i, &label) in labels.iter().enumerate() {
        let g = num_group[label].unwrap_or_else(|| rng.random_range(0..n_num_groups));
        let c = centre(g);
        let spread = spec.numeric_group_spread.get(g).copied().unwrap_or(1.0);
        for f in 0..p {
            values[(i, f)] = c[f] + spread * noise.sample(&mut rng);
        }
    }
    let features: Vec<String> = (1..=p).map(|f| format!("Var{f}")).collect();
    let numeric = NumericDataset::new(samples.clone(), features, values)?;

    let n_text_groups = spec.text_groups.len();
    let q = spec.background_terms + n_text_groups * spec.terms_per_group;
    let mut lexicon: Vec<String> = (0..spec.background_terms).map(|t| format!("common{t}")).collect();
    for g in 0..n_text_groups {
        for t in 0..spec.terms_per_group {
            lexicon.push(format!("topic{g}_{t}"));
        }
    }
    let mut rng = seed::rng(seed::derive(spec.seed, "synthetic/text"));
    let mut counts = DMatrix::<u32>::zeros(spec.n, q);
    for (i, &label) in labels.iter().enumerate() {
        let own = text_group[label].unwrap_or_else(|| rng.random_range(0..n_text_groups));
        for term in 0..q {
            let rate = if term < spec.background_terms {
                spec.background_rate
            } else if (term - spec.background_terms) / spec.terms_per_group == own {
                spec.topic_rate
            } else {
                spec.text_noise
            };
            counts[(i, term)] = draw_poisson(&mut rng, rate);
        }
    }
    let text = TextDataset::new(samples, lexicon, counts)?;

    let ml = spec.must_link_cluster;
    let must: Vec<usize> = (0..spec.n).filter(|&i| labels[i] == ml).collect();
    let cannot: Vec<usize> = (0..spec.n).filter(|&i| labels[i] != ml).collect();
    let constraints = ConstraintSets::new(must, cannot, spec.n)?;

    Ok(SyntheticBundle {
        numeric,
        text,
        labels,
        constraints,
    })
}

fn draw_poisson<R: Rng>(rng: &mut R, rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let d = Poisson::new(rate).expect("positive finite rate");
    let v: f64 = d.sample(rng);
    v as u32
}
