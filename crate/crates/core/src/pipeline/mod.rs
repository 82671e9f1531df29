//! Training (visual only, or visual plus unlabeled tactile), recognition,
//! file formats, dataset generation and the benchmark harness.

mod bench;
mod config;
pub mod io;
mod manifest;
mod train;

pub use bench::{
    default_grid, render_tables, run_benchmark, BenchmarkGrid, BenchmarkReport, EvalMode, ResultRow, RunSpec, ACCURACY_FILE,
    CONFUSION_DIR,
    RESULTS_FILE,
};
pub use config::{
    AdaptMethod, AdaptationConfig, ClassifierConfig, PipelineConfig, SvmKernelKind, CONFIG_ENV,
    DEFAULT_NORMAL_NEIGHBORS,
};
pub use io::{AuditReader, CloudReader, FsReader};
pub use manifest::{derive_seed, generate_dataset, synthesize, ClassEntry, DatasetManifest, Entry, GenerationParams};
pub use train::{
    assemble, base_descriptors, cmr_train, cmr_train_files, describe_cloud, recognize, tlcmr_train,
    tlcmr_train_files, train_from_features, BaseDescriptors,
};

use std::path::Path;

use thiserror::Error;

use crate::adapt::AdaptError;
use crate::classify::ClassifyError;
use crate::cloudkit::CloudError;
use crate::descriptors::DescriptorError;
use crate::synthlab::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("transfer training needs unlabeled target clouds")]
    MissingTargetData,
    #[error("model carries no provenance; cannot rebuild its descriptor pipeline")]
    MissingProvenance,
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }
}
