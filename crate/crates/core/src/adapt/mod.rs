//! Unsupervised domain adaptation from the visual (source) to the tactile
//! (target) descriptor distribution: PCA subspaces, the geodesic flow
//! between them on the Grassmannian and its closed-form kernel matrix G.

mod gfk;
mod jacobi;
mod pca;

pub use gfk::{
    geodesic_point, gfk_distance, gfk_fit, gfk_fit_bases, gfk_similarity, orthonormal_complement,
    principal_angles, GfkModel, PrincipalAngles, SubspacePair,
};
pub use pca::{pca_basis, pca_fit, pca_transfer, PcaFit, PcaTransfer};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloudkit::ClassId;

/// Default subspace dimension.
pub const DEFAULT_SUBSPACE_DIM: usize = 27;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptError {
    #[error("requested dimension {requested} exceeds data rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// N x D descriptor matrix of one domain, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    vectors: DMatrix<f64>,
    pub domain: Domain,
    labels: Option<Vec<ClassId>>,
}

impl FeatureSet {
    pub fn new(vectors: DMatrix<f64>, domain: Domain) -> Result<Self, AdaptError> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(AdaptError::Invalid("feature set must be non-empty".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(AdaptError::Invalid("feature set has non-finite values".into()));
        }
        Ok(Self {
            vectors,
            domain,
            labels: None,
        })
    }

    /// Build from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>], domain: Domain) -> Result<Self, AdaptError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(AdaptError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(m, domain)
    }

    pub fn with_labels(mut self, labels: Vec<ClassId>) -> Result<Self, AdaptError> {
        if labels.len() != self.len() {
            return Err(AdaptError::DimensionMismatch {
                expected: self.len(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[ClassId]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.vectors.row_mean().transpose()
    }
}

/// Per-feature z-scoring fitted on one domain. Constant features are only
/// centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardizer {
    pub fn fit(set: &FeatureSet) -> Self {
        let mean = set.mean();
        let n = set.len() as f64;
        let scale = DVector::from_fn(set.dim(), |j, _| {
            let var = set
                .vectors
                .column(j)
                .iter()
                .map(|v| (v - mean[j]).powi(2))
                .sum::<f64>()
                / n;
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        });
        Self { mean, scale }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.mean).component_div(&self.scale)
    }

    pub fn apply_set(&self, set: &FeatureSet) -> FeatureSet {
        let mut m = set.vectors.clone();
        for mut row in m.row_iter_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - self.mean[j]) / self.scale[j];
            }
        }
        FeatureSet {
            vectors: m,
            domain: set.domain,
            labels: set.labels.clone(),
        }
    }
}
