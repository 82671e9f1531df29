//! Global point-cloud descriptors: ESF (shape-function histograms), a single
//! centroid-anchored SHOT signature, their concatenation, and the CLUE
//! fusion (scaled principal left singular vector of the two stacked
//! descriptors).

mod esf;
mod frame;
mod fusion;
mod normals;
mod shot;

pub use esf::{compute_esf, ESF_BINS, ESF_HISTOGRAMS};
pub use frame::{reference_frame, ReferenceFrame};
pub use fusion::{compute_clue, concat_descriptor, svd_fusion, SvdFusion};
pub use normals::{estimate_normals, NormalField};
pub use shot::{compute_shot, shot_with_frame, SHOT_BINS, SHOT_DIVISIONS};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const ESF_LEN: usize = 640;
pub const SHOT_LEN: usize = 352;
pub const CONCAT_LEN: usize = SHOT_LEN + ESF_LEN;
pub const CLUE_LEN: usize = ESF_LEN;

/// Default number of ESF triplet samples.
pub const DEFAULT_ESF_SAMPLES: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescriptorError {
    #[error("too few points: have {have}, need {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("descriptor kind mismatch: expected {expected}, got {got}")]
    KindMismatch {
        expected: DescriptorKind,
        got: DescriptorKind,
    },
    #[error("normal field has {normals} entries for {points} points")]
    NormalCount { normals: usize, points: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Esf,
    Shot,
    Concat,
    Clue,
}

impl DescriptorKind {
    pub fn len(self) -> usize {
        match self {
            DescriptorKind::Esf => ESF_LEN,
            DescriptorKind::Shot => SHOT_LEN,
            DescriptorKind::Concat => CONCAT_LEN,
            DescriptorKind::Clue => CLUE_LEN,
        }
    }

    pub fn all() -> [DescriptorKind; 4] {
        [
            DescriptorKind::Shot,
            DescriptorKind::Esf,
            DescriptorKind::Concat,
            DescriptorKind::Clue,
        ]
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DescriptorKind::Esf => "esf",
            DescriptorKind::Shot => "shot",
            DescriptorKind::Concat => "concat",
            DescriptorKind::Clue => "clue",
        })
    }
}

impl FromStr for DescriptorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "esf" => Ok(DescriptorKind::Esf),
            "shot" => Ok(DescriptorKind::Shot),
            "concat" => Ok(DescriptorKind::Concat),
            "clue" => Ok(DescriptorKind::Clue),
            other => Err(format!("unknown descriptor kind '{other}'")),
        }
    }
}

/// Fixed-length descriptor vector tagged with its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    kind: DescriptorKind,
    values: Vec<f64>,
}

impl Descriptor {
    pub fn new(kind: DescriptorKind, values: Vec<f64>) -> Result<Self, DescriptorError> {
        if values.len() != kind.len() {
            return Err(DescriptorError::Invalid(format!(
                "{kind} descriptor needs {} values, got {}",
                kind.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DescriptorError::Invalid(format!("{kind} descriptor has non-finite values")));
        }
        Ok(Self { kind, values })
    }

    pub fn zeros(kind: DescriptorKind) -> Self {
        Self {
            kind,
            values: vec![0.0; kind.len()],
        }
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn expect_kind(&self, kind: DescriptorKind) -> Result<(), DescriptorError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(DescriptorError::KindMismatch {
                expected: kind,
                got: self.kind,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_lengths() {
        assert_eq!(ESF_LEN, 10 * 64);
        assert_eq!(SHOT_LEN, 32 * 11);
        assert_eq!(CONCAT_LEN, 992);
        assert_eq!(DescriptorKind::Clue.len(), 640);
    }

    #[test]
    fn constructor_checks_length_and_finiteness() {
        assert!(Descriptor::new(DescriptorKind::Shot, vec![0.0; 351]).is_err());
        let mut v = vec![0.0; 352];
        v[3] = f64::NAN;
        assert!(Descriptor::new(DescriptorKind::Shot, v).is_err());
        assert!(Descriptor::new(DescriptorKind::Shot, vec![0.5; 352]).is_ok());
    }

    #[test]
    fn kind_parses() {
        for k in DescriptorKind::all() {
            assert_eq!(k.to_string().parse::<DescriptorKind>().unwrap(), k);
        }
        assert_eq!("CLUE".parse::<DescriptorKind>().unwrap(), DescriptorKind::Clue);
    }
}
