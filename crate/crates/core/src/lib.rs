//! Attributed spectral clustering: numeric and text similarities fused into
//! one graph, clustered in the Laplacian eigenspace.

pub mod cli;
pub mod clustering;
pub mod error;
pub mod evaluation;
mod geometry;
pub mod ingest;
pub mod pipeline;
pub mod seed;
pub mod similarity;
pub mod spectral;

pub use clustering::{
    kmeans, kmedians, kmedoids_hill_climb, select_k, ClusterAssignment, ClusterMethod,
    ClusterOptions, KScore, KSelectionReport,
};
pub use error::{Error, ErrorKind, Result};
pub use ingest::{ConstraintSets, NumericDataset, TextDataset};
pub use pipeline::{run_asc, run_single_modality, AscConfig, AscResult, Modality};
pub use similarity::{SimilarityKind, SimilarityMatrix};
pub use spectral::LaplacianKind;
