//! End-to-end run: similarities, fusion weight, Laplacian, eigengap
//! candidates, clustering and metrics. Errors carry the step they came from.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    candidate_seed, cluster_points, select_k, ClusterAssignment, ClusterMethod, ClusterOptions,
    KScore, KSelectionReport, SelectKOptions,
};
use crate::error::{Error, Result};
use crate::evaluation::{metric_bundle, MetricBundle};
use crate::ingest::{ConstraintSets, NumericDataset, TextDataset};
use crate::seed;
use crate::similarity::{
    fuse_similarity, numeric_similarity_matrix, optimize_lambda, rescale_unit,
    text_similarity_matrix, LambdaOptions, LambdaSolution, SimilarityMatrix,
};
use crate::spectral::{
    eigendecompose, eigengap_candidates, laplacian, spectral_embedding, EigengapReport, Embedding,
    LaplacianKind, SpectralDecomposition,
};

/// Which similarity feeds the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Fused,
    Numeric,
    Text,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Fused => "fused",
            Modality::Numeric => "numeric",
            Modality::Text => "text",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(Modality::Fused),
            "numeric" => Ok(Modality::Numeric),
            "text" => Ok(Modality::Text),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

/// Coordinates in which cluster-quality metrics are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpace {
    #[default]
    Embedding,
    /// Raw numeric features; centres are the cluster centroids there.
    Numeric,
}

impl fmt::Display for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricSpace::Embedding => "embedding",
            MetricSpace::Numeric => "numeric",
        })
    }
}

impl FromStr for MetricSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(MetricSpace::Embedding),
            "numeric" => Ok(MetricSpace::Numeric),
            other => Err(Error::Config(format!("unknown metric space `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscConfig {
    /// Fixed fusion weight; `None` searches the grid.
    pub lambda: Option<f64>,
    pub lambda_step: f64,
    pub max_triples: usize,
    pub literal_lambda_rhs: bool,
    /// Min-max rescale the numeric similarity to [0, 1] before fusion.
    pub rescale_numeric: bool,
    pub laplacian: LaplacianKind,
    pub eigengap_window: usize,
    /// Skip candidate selection and cluster at this k.
    pub k: Option<usize>,
    pub k_score: KScore,
    pub method: ClusterMethod,
    pub restarts: usize,
    pub max_iter: usize,
    pub row_normalize: bool,
    pub metric_space: MetricSpace,
    pub seed: u64,
}

impl Default for AscConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            lambda_step: 0.05,
            max_triples: 10_000,
            literal_lambda_rhs: false,
            rescale_numeric: true,
            laplacian: LaplacianKind::RandomWalk,
            eigengap_window: 20,
            k: None,
            k_score: KScore::GapSilhouette,
            method: ClusterMethod::Kmeans,
            restarts: 20,
            max_iter: 300,
            row_normalize: false,
            metric_space: MetricSpace::Embedding,
            seed: 42,
        }
    }
}

impl AscConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("lambda {l} outside [0, 1]")));
            }
        }
        crate::similarity::grid_intervals(self.lambda_step)?;
        if self.eigengap_window < 3 {
            return Err(Error::Config(format!(
                "eigengap window {} is below 3",
                self.eigengap_window
            )));
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(Error::Config("restarts and max_iter must be positive".into()));
        }
        if self.max_triples == 0 {
            return Err(Error::Config("max_triples must be positive".into()));
        }
        if matches!(self.k, Some(k) if k < 2) {
            return Err(Error::Config("k must be at least 2".into()));
        }
        Ok(())
    }

    fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions {
            method: self.method,
            restarts: self.restarts,
            max_iter: self.max_iter,
        }
    }

    fn lambda_options(&self) -> LambdaOptions {
        LambdaOptions {
            step: self.lambda_step,
            max_triples: self.max_triples,
            seed: seed::derive(self.seed, "lambda/triples"),
            literal_rhs: self.literal_lambda_rhs,
        }
    }
}

/// Steps from the graph onward.
#[derive(Debug, Clone)]
pub struct SpectralRun {
    pub decomposition: SpectralDecomposition,
    pub gaps: EigengapReport,
    pub selection: KSelectionReport,
    pub embedding: Embedding,
    pub assignment: ClusterAssignment,
}

#[derive(Debug, Clone)]
pub struct AscResult {
    pub modality: Modality,
    pub similarity: SimilarityMatrix,
    /// Grid search outcome, when constraints were supplied.
    pub lambda_search: Option<LambdaSolution>,
    /// Weight actually used for fusion (`None` for single-modality runs).
    pub lambda: Option<f64>,
    pub spectral: SpectralRun,
    pub metrics: MetricBundle,
    pub metric_space: MetricSpace,
}

impl AscResult {
    pub fn k(&self) -> usize {
        self.spectral.assignment.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.spectral.assignment.labels
    }
}

/// Laplacian, eigenpairs, candidate k and clustering for a given graph
/// (steps 5 to 9).
pub fn cluster_similarity(w: &SimilarityMatrix, config: &AscConfig) -> Result<SpectralRun> {
    config.validate()?;
    let n = w.n();
    if n < 3 {
        return Err(Error::InvalidInput(format!("{n} samples; need at least 3")));
    }
    let lap = laplacian(w, config.laplacian);
    let dec = eigendecompose(&lap, n).map_err(|e| e.at_step(6, "eigendecomposition"))?;
    let gaps =
        eigengap_candidates(&dec, config.eigengap_window).map_err(|e| e.at_step(7, "eigengap"))?;

    let (selection, embedding, assignment) = match config.k {
        Some(k) => {
            let embedding =
                spectral_embedding(&dec, k, config.row_normalize).map_err(|e| e.at_step(8, "embedding"))?;
            let assignment = cluster_points(
                &embedding.coordinates,
                k,
                candidate_seed(config.seed, k),
                &config.cluster_options(),
            )
            .map_err(|e| e.at_step(9, "clustering"))?;
            let sil = crate::evaluation::silhouette(&embedding.coordinates, &assignment.labels)
                .map_err(|e| e.at_step(9, "clustering"))?
                .mean;
            let report = KSelectionReport {
                candidates: vec![k],
                per_candidate: vec![crate::clustering::CandidateScore {
                    k,
                    eigengap: gaps.gap_for(k).unwrap_or(0.0),
                    silhouette: sil,
                    score: f64::NAN,
                    degenerate: false,
                }],
                chosen_k: k,
                score_mode: config.k_score,
                degenerate_fallback: false,
            };
            (report, embedding, assignment)
        }
        None => {
            let opts = SelectKOptions {
                cluster: config.cluster_options(),
                score: config.k_score,
                row_normalize: config.row_normalize,
            };
            let s = select_k(&dec, &gaps, config.seed, &opts)
                .map_err(|e| e.at_step(9, "clustering"))?;
            (s.report, s.embedding, s.assignment)
        }
    };
    Ok(SpectralRun {
        decomposition: dec,
        gaps,
        selection,
        embedding,
        assignment,
    })
}

fn centroids_of(points: &DMatrix<f64>, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(k, points.ncols());
    let mut sizes = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l] += 1;
        for d in 0..points.ncols() {
            c[(l, d)] += points[(i, d)];
        }
    }
    for (l, &s) in sizes.iter().enumerate() {
        if s > 0 {
            for d in 0..points.ncols() {
                c[(l, d)] /= s as f64;
            }
        }
    }
    c
}

fn metrics_for(
    run: &SpectralRun,
    numeric: Option<&NumericDataset>,
    space: MetricSpace,
) -> Result<MetricBundle> {
    let a = &run.assignment;
    match space {
        MetricSpace::Embedding => metric_bundle(&run.embedding.coordinates, &a.labels, &a.centers),
        MetricSpace::Numeric => {
            let data = numeric.ok_or_else(|| {
                Error::Config("numeric metric space needs the numeric dataset".into())
            })?;
            let centers = centroids_of(&data.values, &a.labels, a.k);
            metric_bundle(&data.values, &a.labels, &centers)
        }
    }
}

fn numeric_graph(data: &NumericDataset, config: &AscConfig) -> Result<SimilarityMatrix> {
    let w = numeric_similarity_matrix(data).map_err(|e| e.at_step(1, "numeric similarity"))?;
    Ok(if config.rescale_numeric { rescale_unit(&w) } else { w })
}

fn text_graph(text: &TextDataset) -> Result<SimilarityMatrix> {
    text_similarity_matrix(text).map_err(|e| e.at_step(2, "text similarity"))
}

fn check_alignment(numeric: &NumericDataset, text: &TextDataset) -> Result<()> {
    if numeric.samples != text.samples {
        return Err(Error::InvalidInput(
            "numeric and text datasets list different sample ids".into(),
        ));
    }
    Ok(())
}

/// Full fused run. The fusion weight is `config.lambda` when set, otherwise
/// the grid optimum under `constraints`. One of the two is required.
pub fn run_asc(
    numeric: &NumericDataset,
    text: &TextDataset,
    constraints: Option<&ConstraintSets>,
    config: &AscConfig,
) -> Result<AscResult> {
    config.validate()?;
    check_alignment(numeric, text)?;
    let wn = numeric_graph(numeric, config)?;
    let wt = text_graph(text)?;

    let lambda_search = match constraints {
        Some(c) if !c.is_empty() => Some(
            optimize_lambda(&wn, &wt, c, &config.lambda_options())
                .map_err(|e| e.at_step(3, "fusion weight"))?,
        ),
        _ => None,
    };
    let lambda = match (config.lambda, &lambda_search) {
        (Some(l), _) => l,
        (None, Some(s)) => s.lambda,
        (None, None) => {
            return Err(Error::Config(
                "no fusion weight: give lambda or must-link/cannot-link constraints".into(),
            )
            .at_step(3, "fusion weight"))
        }
    };
    let w = fuse_similarity(&wn, &wt, lambda).map_err(|e| e.at_step(4, "fusion"))?;
    let spectral = cluster_similarity(&w, config)?;
    let metrics = metrics_for(&spectral, Some(numeric), config.metric_space)
        .map_err(|e| e.at_step(9, "metrics"))?;
    Ok(AscResult {
        modality: Modality::Fused,
        similarity: w,
        lambda_search,
        lambda: Some(lambda),
        spectral,
        metrics,
        metric_space: config.metric_space,
    })
}

/// Same downstream steps on one modality's similarity alone. Seeds match
/// [`run_asc`], so `lambda = 1` (numeric) and `lambda = 0` (text) coincide
/// with these runs.
pub fn run_single_modality(
    numeric: Option<&NumericDataset>,
    text: Option<&TextDataset>,
    modality: Modality,
    config: &AscConfig,
) -> Result<AscResult> {
    config.validate()?;
    let w = match modality {
        Modality::Numeric => numeric_graph(
            numeric.ok_or_else(|| Error::Config("numeric modality needs numeric data".into()))?,
            config,
        )?,
        Modality::Text => text_graph(
            text.ok_or_else(|| Error::Config("text modality needs text data".into()))?,
        )?,
        Modality::Fused => {
            return Err(Error::Config(
                "fused runs need both modalities; use run_asc".into(),
            ))
        }
    };
    if let (Some(nd), Some(td)) = (numeric, text) {
        check_alignment(nd, td)?;
    }
    let spectral = cluster_similarity(&w, config)?;
    let metrics =
        metrics_for(&spectral, numeric, config.metric_space).map_err(|e| e.at_step(9, "metrics"))?;
    Ok(AscResult {
        modality,
        similarity: w,
        lambda_search: None,
        lambda: None,
        spectral,
        metrics,
        metric_space: config.metric_space,
    })
}
