//! Pipeline configuration, read from and written to TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::adapt::DEFAULT_SUBSPACE_DIM;
use crate::classify::SvmParams;
use crate::cloudkit::EqualizationParams;
use crate::descriptors::{DescriptorKind, DEFAULT_ESF_SAMPLES};

/// Environment variable naming a default config file for the CLI.
pub const CONFIG_ENV: &str = "CROSSMODAL_CONFIG";

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptMethod {
    None,
    Pca,
    Gfk,
}

impl fmt::Display for AdaptMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdaptMethod::None => "none",
            AdaptMethod::Pca => "pca",
            AdaptMethod::Gfk => "gfk",
        })
    }
}

impl FromStr for AdaptMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(AdaptMethod::None),
            "pca" => Ok(AdaptMethod::Pca),
            "gfk" => Ok(AdaptMethod::Gfk),
            other => Err(format!("unknown adaptation '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    pub method: AdaptMethod,
    /// Subspace dimension d.
    pub dim: usize,
    /// z-score each domain with its own statistics before fitting (pca/gfk only).
    pub standardize: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            method: AdaptMethod::None,
            dim: DEFAULT_SUBSPACE_DIM,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Knn {
        k: usize,
    },
    Svm {
        kernel: SvmKernelKind,
        #[serde(default = "default_c")]
        c: f64,
        /// RBF width; derived from the training data when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn default_c() -> f64 {
    SvmParams::default().c
}

fn default_tol() -> f64 {
    SvmParams::default().tol
}

impl ClassifierConfig {
    pub fn knn(k: usize) -> Self {
        ClassifierConfig::Knn { k }
    }

    pub fn svm(kernel: SvmKernelKind) -> Self {
        ClassifierConfig::Svm {
            kernel,
            c: default_c(),
            gamma: None,
            tol: default_tol(),
        }
    }

    /// Short name used in reports: `1nn`, `svm_rbf`, ...
    pub fn name(&self) -> String {
        match self {
            ClassifierConfig::Knn { k } => format!("{k}nn"),
            ClassifierConfig::Svm { kernel: SvmKernelKind::Linear, .. } => "svm_linear".into(),
            ClassifierConfig::Svm { kernel: SvmKernelKind::Rbf, .. } => "svm_rbf".into(),
        }
    }
}

impl FromStr for ClassifierConfig {
    type Err = String;

    /// Accepts the report names: `<k>nn`, `svm_linear`, `svm_rbf` (or `svm`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "svm" | "svm_rbf" => return Ok(Self::svm(SvmKernelKind::Rbf)),
            "svm_linear" => return Ok(Self::svm(SvmKernelKind::Linear)),
            _ => {}
        }
        s.strip_suffix("nn")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k > 0)
            .map(Self::knn)
            .ok_or_else(|| format!("unknown classifier '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Run equalization before describing clouds.
    pub preprocessing: bool,
    pub descriptor: DescriptorKind,
    pub esf_samples: usize,
    pub normal_neighbors: usize,
    pub equalization: EqualizationParams,
    pub adaptation: AdaptationConfig,
    pub classifier: ClassifierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            preprocessing: true,
            descriptor: DescriptorKind::Clue,
            esf_samples: DEFAULT_ESF_SAMPLES,
            normal_neighbors: DEFAULT_NORMAL_NEIGHBORS,
            equalization: EqualizationParams::default(),
            adaptation: AdaptationConfig::default(),
            classifier: ClassifierConfig::knn(1),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.equalization.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.esf_samples == 0 {
            return bad("esf_samples must be >= 1".into());
        }
        if self.normal_neighbors < 3 {
            return bad(format!("normal_neighbors must be >= 3, got {}", self.normal_neighbors));
        }
        if self.adaptation.method != AdaptMethod::None
            && (self.adaptation.dim == 0 || self.adaptation.dim >= self.descriptor.len())
        {
            return bad(format!(
                "subspace dimension must be in 1..{}, got {}",
                self.descriptor.len(),
                self.adaptation.dim
            ));
        }
        match self.classifier {
            ClassifierConfig::Knn { k } if k == 0 => bad("k must be >= 1".into()),
            ClassifierConfig::Svm { c, tol, gamma, .. } => {
                if !(c > 0.0 && c.is_finite() && tol > 0.0 && tol.is_finite()) {
                    return bad(format!("svm needs c > 0 and tol > 0, got c={c} tol={tol}"));
                }
                if gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
                    return bad(format!("gamma must be > 0, got {gamma:?}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Config from `path`, else from the file named by `CROSSMODAL_CONFIG`,
    /// else the defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self, PipelineError> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(&PathBuf::from(p)),
                None => Ok(Self::default()),
            },
        }
    }
}
