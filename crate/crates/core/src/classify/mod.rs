//! Nearest-neighbor and SVM classifiers over descriptor vectors, with plain
//! or GFK-induced metrics and kernels, plus evaluation helpers.

mod eval;
mod knn;
mod svm;

pub use eval::{evaluate, kfold_cv, stratified_folds, ConfusionMatrix, CvReport};
pub use knn::KnnModel;
pub use svm::{default_gamma, BinaryMachine, SvmModel, SvmParams};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{PcaFit, Standardizer};
use crate::cloudkit::{ClassId, EqualizationParams};
use crate::descriptors::DescriptorKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data has a single class")]
    SingleClass,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("too few examples: {0}")]
    TooFewExamples(String),
    #[error("feature set has no labels")]
    MissingLabels,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Distance used by nearest-neighbor search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Euclidean,
    /// `sqrt((x - y)' G (x - y))` with a fitted kernel matrix `g`.
    Gfk { g: DMatrix<f64> },
}

impl MetricSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            MetricSpec::Euclidean => None,
            MetricSpec::Gfk { g } => Some(g.nrows()),
        }
    }
}

/// SVM kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    /// `x' G y`
    GfkLinear { g: DMatrix<f64> },
    /// `exp(-gamma (x - y)' G (x - y))`
    GfkRbf { gamma: f64, g: DMatrix<f64> },
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::GfkLinear { .. } => "gfk_linear",
            KernelSpec::GfkRbf { .. } => "gfk_rbf",
        }
    }

    fn validate(&self, dim: usize) -> Result<(), ClassifyError> {
        let gamma_ok = |g: f64| {
            if g.is_finite() && g > 0.0 {
                Ok(())
            } else {
                Err(ClassifyError::Invalid(format!("gamma must be > 0, got {g}")))
            }
        };
        let g_ok = |g: &DMatrix<f64>| {
            if g.nrows() == dim && g.ncols() == dim {
                Ok(())
            } else {
                Err(ClassifyError::DimensionMismatch {
                    expected: dim,
                    got: g.nrows(),
                })
            }
        };
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => gamma_ok(*gamma),
            KernelSpec::GfkLinear { g } => g_ok(g),
            KernelSpec::GfkRbf { gamma, g } => {
                gamma_ok(*gamma)?;
                g_ok(g)
            }
        }
    }
}

/// Map applied to a raw query descriptor before classification: optional
/// z-scoring, then optional projection onto a PCA basis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub standardize: Option<Standardizer>,
    pub projection: Option<PcaFit>,
}

impl FeatureTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let x = match &self.standardize {
            Some(s) => s.apply(x),
            None => x.clone(),
        };
        match &self.projection {
            Some(p) => p.project_vector(&x),
            None => x,
        }
    }

    /// Dimension of the raw vectors this transform accepts, if it constrains it.
    pub fn input_dim(&self) -> Option<usize> {
        self.standardize
            .as_ref()
            .map(|s| s.mean.len())
            .or_else(|| self.projection.as_ref().map(|p| p.mean.len()))
    }
}

/// How the training data was produced, kept for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub equalization: Option<EqualizationParams>,
    pub descriptor: DescriptorKind,
    pub esf_samples: usize,
    pub normal_neighbors: usize,
    pub adaptation: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Classifier {
    Knn(KnnModel),
    Svm(SvmModel),
}

impl Classifier {
    pub fn predict(&self, x: &DVector<f64>) -> Result<ClassId, ClassifyError> {
        match self {
            Classifier::Knn(m) => m.classify(x),
            Classifier::Svm(m) => m.predict(x),
        }
    }

    pub fn classes(&self) -> Vec<ClassId> {
        match self {
            Classifier::Knn(m) => m.classes(),
            Classifier::Svm(m) => m.classes().to_vec(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Classifier::Knn(m) => format!("{}nn", m.k()),
            Classifier::Svm(m) => format!("svm_{}", m.kernel().name()),
        }
    }
}

/// A classifier together with the query transform and the provenance of
/// its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub transform: FeatureTransform,
    pub provenance: Option<Provenance>,
}

impl TrainedModel {
    pub fn new(classifier: Classifier) -> Self {
        Self {
            classifier,
            transform: FeatureTransform::identity(),
            provenance: None,
        }
    }

    pub fn with_transform(mut self, transform: FeatureTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Transform a raw descriptor and classify it.
    pub fn predict(&self, raw: &DVector<f64>) -> Result<ClassId, ClassifyError> {
        if let Some(dim) = self.transform.input_dim() {
            if raw.len() != dim {
                return Err(ClassifyError::DimensionMismatch {
                    expected: dim,
                    got: raw.len(),
                });
            }
        }
        self.classifier.predict(&self.transform.apply(raw))
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Rows of `m` as owned vectors.
pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.row_iter().map(|r| r.transpose()).collect()
}
