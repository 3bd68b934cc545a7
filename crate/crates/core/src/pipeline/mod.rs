//! Datasets, training with early stopping, detection metrics, the
//! program-level verdict and coverage reporting.

mod config;
mod dataset;
mod detect;
mod metrics;
mod train;

pub use config::PipelineConfig;
pub use dataset::{
    generate_corpus, label_counts, pretraining_sentences, read_unit, split_dataset, unit_spgs, DatasetManifest,
    ManifestEntry, ProgramSpgs, SpgOptions,
};
pub use detect::{coverage, coverage_report, detect_program, Coverage, CoverageReport, ProgramReport, SpgVerdict};
pub use metrics::{evaluate, Metrics};
pub use train::{predict_all, train, EpochStats, TrainConfig, TrainReport};

use std::path::Path;

use thiserror::Error;

use crate::embed::EmbedError;
use crate::frontend::FrontendError;
use crate::graphs::AnalysisError;
use crate::model::ModelError;
use crate::spg::SpgError;
use crate::syvc::SyvcError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Frontend {
        path: String,
        #[source]
        source: FrontendError,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Spg(#[from] SpgError),
    #[error(transparent)]
    Syvc(#[from] SyvcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> PipelineError {
        PipelineError::Io { path: path.display().to_string(), source }
    }
}
