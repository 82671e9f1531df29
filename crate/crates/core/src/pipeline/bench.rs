//! Benchmark grid: cross-modal and monomodal runs over cached descriptors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AdaptMethod, AdaptationConfig, ClassifierConfig, PipelineConfig, SvmKernelKind};
use super::io::{write_atomic, CloudReader};
use super::manifest::DatasetManifest;
use super::train::{assemble, base_descriptors, train_from_features, BaseDescriptors};
use super::PipelineError;
use crate::adapt::{Domain, FeatureSet};
use crate::classify::{evaluate, kfold_cv, ConfusionMatrix};
use crate::cloudkit::{ClassId, Modality};
use crate::descriptors::DescriptorKind;

pub const RESULTS_FILE: &str = "results.csv";
pub const CONFUSION_DIR: &str = "confusion";
/// results.csv without the timing column; identical across reruns.
pub const ACCURACY_FILE: &str = "accuracy.csv";
const RESOLVED_FILE: &str = "benchmark.toml";
const FAILURES_FILE: &str = "failures.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Train on all visual clouds, test on all tactile clouds.
    CrossModal,
    /// Stratified k-fold cross-validation within the visual clouds.
    Monomodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub id: String,
    pub mode: EvalMode,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    /// Folds for monomodal runs.
    pub folds: usize,
    pub runs: Vec<RunSpec>,
}

impl BenchmarkGrid {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let g: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        for r in &g.runs {
            r.config.validate()?;
        }
        Ok(g)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grid serializes")
    }
}

fn tag(preprocessing: bool) -> &'static str {
    if preprocessing {
        "eq"
    } else {
        "raw"
    }
}

/// The standard grid around `base`:
/// cross-modal without adaptation, with and without preprocessing, for
/// every descriptor and {1,3,5}-NN and RBF SVM; cross-modal with PCA and
/// GFK for SHOT, ESF and CLUE and {1,3,5}-NN, linear and RBF SVM; and
/// monomodal visual cross-validation for SHOT, ESF and CLUE.
pub fn default_grid(base: &PipelineConfig) -> BenchmarkGrid {
    let mut runs = Vec::new();
    let plain = [
        ClassifierConfig::knn(1),
        ClassifierConfig::knn(3),
        ClassifierConfig::knn(5),
        ClassifierConfig::svm(SvmKernelKind::Rbf),
    ];
    let with_linear = [
        ClassifierConfig::knn(1),
        ClassifierConfig::knn(3),
        ClassifierConfig::knn(5),
        ClassifierConfig::svm(SvmKernelKind::Linear),
        ClassifierConfig::svm(SvmKernelKind::Rbf),
    ];
    let none = AdaptationConfig {
        method: AdaptMethod::None,
        ..base.adaptation
    };
    for preprocessing in [false, true] {
        for descriptor in DescriptorKind::all() {
            for classifier in plain {
                runs.push(RunSpec {
                    id: format!("xm-{}-{descriptor}-none-{}", tag(preprocessing), classifier.name()),
                    mode: EvalMode::CrossModal,
                    config: PipelineConfig {
                        preprocessing,
                        descriptor,
                        adaptation: none,
                        classifier,
                        ..base.clone()
                    },
                });
            }
        }
    }
    for method in [AdaptMethod::Pca, AdaptMethod::Gfk] {
        for descriptor in [DescriptorKind::Shot, DescriptorKind::Esf, DescriptorKind::Clue] {
            for classifier in with_linear {
                runs.push(RunSpec {
                    id: format!("xm-eq-{descriptor}-{method}-{}", classifier.name()),
                    mode: EvalMode::CrossModal,
                    config: PipelineConfig {
                        preprocessing: true,
                        descriptor,
                        adaptation: AdaptationConfig {
                            method,
                            ..base.adaptation
                        },
                        classifier,
                        ..base.clone()
                    },
                });
            }
        }
    }
    for descriptor in [DescriptorKind::Shot, DescriptorKind::Esf, DescriptorKind::Clue] {
        for classifier in [ClassifierConfig::knn(1), ClassifierConfig::svm(SvmKernelKind::Rbf)] {
            runs.push(RunSpec {
                id: format!("mono-eq-{descriptor}-none-{}", classifier.name()),
                mode: EvalMode::Monomodal,
                config: PipelineConfig {
                    preprocessing: true,
                    descriptor,
                    adaptation: none,
                    classifier,
                    ..base.clone()
                },
            });
        }
    }
    BenchmarkGrid { folds: 10, runs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub config_id: String,
    pub descriptor: DescriptorKind,
    pub adaptation: AdaptMethod,
    pub classifier: String,
    pub accuracy: f64,
    /// Wall-clock time of the classification batch.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub grid: BenchmarkGrid,
    pub rows: Vec<ResultRow>,
    pub confusions: Vec<(String, ConfusionMatrix)>,
    pub failures: Vec<(String, String)>,
}

impl BenchmarkReport {
    pub fn accuracy(&self, id: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.config_id == id).map(|r| r.accuracy)
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from("config_id,descriptor,adaptation,classifier,accuracy,seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.4}",
                r.config_id, r.descriptor, r.adaptation, r.classifier, r.accuracy, r.seconds
            );
        }
        out
    }

    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("config_id,descriptor,adaptation,classifier,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6}",
                r.config_id, r.descriptor, r.adaptation, r.classifier, r.accuracy
            );
        }
        out
    }

    /// Write results, confusion matrices, the resolved grid and any
    /// failures under `dir`, each file atomically.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        for (id, cm) in &self.confusions {
            write_atomic(&dir.join(CONFUSION_DIR).join(format!("{id}.csv")), cm.to_csv().as_bytes())?;
        }
        write_atomic(&dir.join(RESOLVED_FILE), self.grid.to_toml().as_bytes())?;
        if !self.failures.is_empty() {
            let text: String = self.failures.iter().map(|(id, e)| format!("{id}: {e}\n")).collect();
            write_atomic(&dir.join(FAILURES_FILE), text.as_bytes())?;
        }
        write_atomic(&dir.join(ACCURACY_FILE), self.accuracy_csv().as_bytes())?;
        write_atomic(&dir.join(RESULTS_FILE), self.results_csv().as_bytes())
    }
}

/// Everything that changes the base descriptors of a cloud.
fn cache_key(c: &PipelineConfig) -> String {
    format!(
        "{}|{:?}|{}|{}|{}",
        c.preprocessing, c.equalization, c.esf_samples, c.normal_neighbors, c.seed
    )
}

struct Described {
    visual: Vec<BaseDescriptors>,
    tactile: Vec<BaseDescriptors>,
}

fn feature_set(
    base: &[BaseDescriptors],
    kind: DescriptorKind,
    labels: Option<&[ClassId]>,
    domain: Domain,
) -> Result<FeatureSet, PipelineError> {
    let rows = base
        .iter()
        .map(|b| assemble(kind, b).map(|d| d.into_values()))
        .collect::<Result<Vec<_>, _>>()?;
    let set = FeatureSet::from_rows(&rows, domain)?;
    Ok(match labels {
        Some(l) => set.with_labels(l.to_vec())?,
        None => set,
    })
}

fn run_one(
    spec: &RunSpec,
    folds: usize,
    described: &Described,
    visual_labels: &[ClassId],
    tactile_labels: &[ClassId],
) -> Result<(ResultRow, ConfusionMatrix), PipelineError> {
    let cfg = &spec.config;
    let source = feature_set(&described.visual, cfg.descriptor, Some(visual_labels), Domain::Source)?;
    let (accuracy, cm, seconds) = match spec.mode {
        EvalMode::CrossModal => {
            let target = feature_set(&described.tactile, cfg.descriptor, None, Domain::Target)?;
            let model = train_from_features(&source, Some(&target), cfg)?;
            let test = target.with_labels(tactile_labels.to_vec())?;
            let t0 = Instant::now();
            let (acc, cm) = evaluate(&model, &test)?;
            (acc, cm, t0.elapsed().as_secs_f64())
        }
        EvalMode::Monomodal => {
            let t0 = Instant::now();
            let report = kfold_cv(&source, folds, cfg.seed, |train| {
                train_from_features(train, None, cfg).map_err(|e| crate::classify::ClassifyError::Invalid(e.to_string()))
            })?;
            (report.mean_accuracy, report.confusion, t0.elapsed().as_secs_f64())
        }
    };
    Ok((
        ResultRow {
            config_id: spec.id.clone(),
            descriptor: cfg.descriptor,
            adaptation: cfg.adaptation.method,
            classifier: cfg.classifier.name(),
            accuracy,
            seconds,
        },
        cm,
    ))
}

/// Run every configuration of `grid` on the manifest's clouds. Base
/// descriptors are computed once per distinct descriptor pipeline. A failing
/// run is recorded in `failures` and the others still complete.
pub fn run_benchmark<R: CloudReader + ?Sized>(
    manifest: &DatasetManifest,
    reader: &R,
    grid: &BenchmarkGrid,
) -> Result<BenchmarkReport, PipelineError> {
    let mut ids: Vec<&str> = grid.runs.iter().map(|r| r.id.as_str()).collect();
    ids.sort();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(PipelineError::Config("duplicate run id in benchmark grid".into()));
    }
    let visual_entries = manifest.entries(Modality::Visual);
    let tactile_entries = manifest.entries(Modality::Tactile);
    let visual_labels: Vec<ClassId> = visual_entries.iter().map(|e| e.class).collect();
    let tactile_labels: Vec<ClassId> = tactile_entries.iter().map(|e| e.class).collect();
    let needs_tactile = grid.runs.iter().any(|r| r.mode == EvalMode::CrossModal);
    let visual = manifest.read(reader, Modality::Visual, false)?;
    let tactile = if needs_tactile {
        manifest.read(reader, Modality::Tactile, false)?
    } else {
        Vec::new()
    };

    let mut pipelines: BTreeMap<String, &PipelineConfig> = BTreeMap::new();
    for r in &grid.runs {
        pipelines.entry(cache_key(&r.config)).or_insert(&r.config);
    }
    let mut cache: BTreeMap<String, Described> = BTreeMap::new();
    for (key, cfg) in pipelines {
        let t0 = Instant::now();
        let describe = |clouds: &[crate::cloudkit::PointCloud]| {
            clouds
                .par_iter()
                .map(|c| base_descriptors(c, cfg))
                .collect::<Result<Vec<_>, _>>()
        };
        let described = Described {
            visual: describe(&visual)?,
            tactile: describe(&tactile)?,
        };
        log::info!(
            "described {} clouds (preprocessing {}) in {:.1}s",
            visual.len() + tactile.len(),
            cfg.preprocessing,
            t0.elapsed().as_secs_f64()
        );
        cache.insert(key, described);
    }

    let outcomes: Vec<Result<(ResultRow, ConfusionMatrix), PipelineError>> = grid
        .runs
        .par_iter()
        .map(|spec| {
            let described = &cache[&cache_key(&spec.config)];
            run_one(spec, grid.folds, described, &visual_labels, &tactile_labels)
        })
        .collect();
    let mut report = BenchmarkReport {
        grid: grid.clone(),
        rows: Vec::new(),
        confusions: Vec::new(),
        failures: Vec::new(),
    };
    for (spec, outcome) in grid.runs.iter().zip(outcomes) {
        match outcome {
            Ok((row, cm)) => {
                log::info!("{}: {:.4}", row.config_id, row.accuracy);
                report.rows.push(row);
                report.confusions.push((spec.id.clone(), cm));
            }
            Err(e) => {
                log::error!("{}: {e}", spec.id);
                report.failures.push((spec.id.clone(), e.to_string()));
            }
        }
    }
    Ok(report)
}

/// Render results.csv as one descriptor x classifier table per run group
/// (the id up to the descriptor, plus the adaptation).
pub fn render_tables(results_csv: &str) -> Result<String, PipelineError> {
    let mut groups: BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>> = BTreeMap::new();
    let mut classifier_order: Vec<String> = Vec::new();
    for (i, line) in results_csv.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(PipelineError::Parse {
                file: RESULTS_FILE.into(),
                line: i + 1,
                msg: format!("expected 6 fields, got {}", f.len()),
            });
        }
        let prefix = f[0].split('-').take(2).collect::<Vec<_>>().join("-");
        let group = format!("{prefix} / {}", f[2]);
        if !classifier_order.iter().any(|c| c == f[3]) {
            classifier_order.push(f[3].to_string());
        }
        groups
            .entry(group)
            .or_default()
            .entry(f[1].to_string())
            .or_default()
            .insert(f[3].to_string(), f[4].to_string());
    }
    let mut out = String::new();
    for (group, rows) in groups {
        let cols: Vec<&String> = classifier_order
            .iter()
            .filter(|c| rows.values().any(|r| r.contains_key(*c)))
            .collect();
        let _ = writeln!(out, "{group}");
        let _ = write!(out, "{:<10}", "");
        for c in &cols {
            let _ = write!(out, "{c:>12}");
        }
        out.push('\n');
        for (descriptor, vals) in rows {
            let _ = write!(out, "{descriptor:<10}");
            for c in &cols {
                let v = vals.get(*c).map(String::as_str).unwrap_or("-");
                let _ = write!(out, "{v:>12}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}
