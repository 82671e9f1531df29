//! Dataset manifests and synthetic dataset generation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{save_cloud, write_atomic, CloudReader};
use super::PipelineError;
use crate::cloudkit::{ClassId, Modality, PointCloud};
use crate::synthlab::{
    class_name, make_object, sample_tactile, sample_visual, ExplorationGrid, Pose, SensorSpec, VisualSpec,
    CATALOG_SIZE, DEFAULT_GRID_PITCH,
};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to regenerate a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub seed: u64,
    pub classes: usize,
    pub visual_per_class: usize,
    pub tactile_per_class: usize,
    /// Visual examples in the first pose group; the rest use the second.
    pub first_pose_count: usize,
    pub grid_pitch: f64,
    pub visual: VisualSpec,
    pub sensor: SensorSpec,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            seed: 42,
            classes: CATALOG_SIZE,
            visual_per_class: 40,
            tactile_per_class: 5,
            first_pose_count: 20,
            grid_pitch: DEFAULT_GRID_PITCH,
            visual: VisualSpec::default(),
            sensor: SensorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: usize,
    pub name: String,
    pub visual: Vec<PathBuf>,
    pub tactile: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationParams>,
    pub classes: Vec<ClassEntry>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

/// One cloud file of the manifest with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub class: ClassId,
    pub path: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| PipelineError::io(&file, e))?;
        let mut m: Self = toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", file.display())))?;
        m.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        let file = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| PipelineError::Config(e.to_string()))?;
        write_atomic(&file, text.as_bytes())?;
        Ok(file)
    }

    /// At least two classes, unique ids, and every referenced file present.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.classes.len() < 2 {
            return Err(PipelineError::Config("manifest needs at least two classes".into()));
        }
        let mut ids: Vec<usize> = self.classes.iter().map(|c| c.id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.classes.len() {
            return Err(PipelineError::Config("duplicate class id in manifest".into()));
        }
        for e in self.entries(Modality::Visual).iter().chain(&self.entries(Modality::Tactile)) {
            if !e.path.is_file() {
                return Err(PipelineError::Config(format!("missing cloud file {}", e.path.display())));
            }
        }
        Ok(())
    }

    /// Resolved file entries of one modality, class by class.
    pub fn entries(&self, modality: Modality) -> Vec<Entry> {
        self.classes
            .iter()
            .flat_map(|c| {
                let files = match modality {
                    Modality::Visual => &c.visual,
                    Modality::Tactile => &c.tactile,
                };
                files.iter().map(move |p| Entry {
                    class: ClassId(c.id),
                    path: self.root.join(p),
                })
            })
            .collect()
    }

    /// Load clouds of one modality; labels come from the manifest when
    /// `labeled`, otherwise the clouds carry none.
    pub fn read<R: CloudReader + ?Sized>(
        &self,
        reader: &R,
        modality: Modality,
        labeled: bool,
    ) -> Result<Vec<PointCloud>, PipelineError> {
        self.entries(modality)
            .par_iter()
            .map(|e| {
                if labeled {
                    let mut c = reader.read_labeled(&e.path)?;
                    if c.label.is_some_and(|l| l != e.class) {
                        log::warn!("{}: file label {:?} differs from manifest class {}", e.path.display(), c.label, e.class);
                    }
                    c.label = Some(e.class);
                    Ok(c)
                } else {
                    reader.read_unlabeled(&e.path)
                }
            })
            .collect()
    }
}

/// Mix parts into a seed (SplitMix64 finalizer per part).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

const VISUAL_TAG: u64 = 1;
const TACTILE_TAG: u64 = 2;

/// Clouds of a synthetic dataset in manifest order, without touching disk.
/// Visual example i of a class sits in the first pose group (yaw in
/// [0, pi)) when `i < first_pose_count`, else in the second ([pi, 2 pi)).
pub fn synthesize(params: &GenerationParams) -> Result<Vec<(ClassId, PointCloud)>, PipelineError> {
    if params.classes < 2 || params.classes > CATALOG_SIZE {
        return Err(PipelineError::Config(format!(
            "classes must be in 2..={CATALOG_SIZE}, got {}",
            params.classes
        )));
    }
    let mut jobs = Vec::new();
    for c in 0..params.classes {
        for i in 0..params.visual_per_class {
            jobs.push((c, Modality::Visual, i));
        }
        for j in 0..params.tactile_per_class {
            jobs.push((c, Modality::Tactile, j));
        }
    }
    jobs.par_iter()
        .map(|&(c, modality, i)| {
            let class = ClassId(c);
            let tag = match modality {
                Modality::Visual => VISUAL_TAG,
                Modality::Tactile => TACTILE_TAG,
            };
            let seed = derive_seed(params.seed, &[c as u64, tag, i as u64]);
            let object = make_object(class, seed)?;
            let cloud = match modality {
                Modality::Visual => {
                    let group = if i < params.first_pose_count { 0.0 } else { std::f64::consts::PI };
                    let pose = Pose {
                        yaw: object.pose.yaw / 2.0 + group,
                        ..object.pose
                    };
                    sample_visual(&object.with_pose(pose), &params.visual, derive_seed(seed, &[0]))?
                }
                Modality::Tactile => {
                    let grid = ExplorationGrid::covering(&object, params.grid_pitch)?;
                    sample_tactile(&object, &params.sensor, &grid, derive_seed(seed, &[0]))?
                }
            };
            Ok((class, cloud))
        })
        .collect()
}

/// Generate a dataset into `dir` and write its manifest.
pub fn generate_dataset(dir: &Path, params: &GenerationParams) -> Result<DatasetManifest, PipelineError> {
    let clouds = synthesize(params)?;
    let mut classes: Vec<ClassEntry> = (0..params.classes)
        .map(|c| ClassEntry {
            id: c,
            name: class_name(c).unwrap_or("unnamed").to_string(),
            visual: Vec::new(),
            tactile: Vec::new(),
        })
        .collect();
    let mut files = Vec::with_capacity(clouds.len());
    for (class, cloud) in &clouds {
        let entry = &mut classes[class.0];
        let rel = match cloud.modality {
            Modality::Visual => {
                let p = PathBuf::from(format!("visual/c{:02}_v{:03}.txt", class.0, entry.visual.len()));
                entry.visual.push(p.clone());
                p
            }
            Modality::Tactile => {
                let p = PathBuf::from(format!("tactile/c{:02}_t{:03}.txt", class.0, entry.tactile.len()));
                entry.tactile.push(p.clone());
                p
            }
        };
        files.push((rel, cloud));
    }
    files
        .par_iter()
        .map(|(rel, cloud)| save_cloud(&dir.join(rel), cloud))
        .collect::<Result<Vec<()>, _>>()?;
    let manifest = DatasetManifest {
        generation: Some(params.clone()),
        classes,
        root: dir.to_path_buf(),
    };
    manifest.save(dir)?;
    Ok(manifest)
}
