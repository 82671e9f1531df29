//! Descriptor extraction, visual-only and transfer training, recognition.

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{AdaptMethod, ClassifierConfig, PipelineConfig, SvmKernelKind};
use super::io::CloudReader;
use super::manifest::DatasetManifest;
use super::PipelineError;
use crate::adapt::{gfk_fit, pca_transfer, Domain, FeatureSet, Standardizer};
use crate::classify::{
    default_gamma, Classifier, FeatureTransform, KernelSpec, KnnModel, MetricSpec, Provenance, SvmModel, SvmParams,
    TrainedModel,
};
use crate::cloudkit::{equalize, ClassId, CloudError, Modality, PointCloud};
use crate::descriptors::{
    compute_clue, compute_esf, compute_shot, concat_descriptor, estimate_normals, Descriptor, DescriptorKind,
};

/// SHOT and ESF of one cloud; every descriptor kind derives from these.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDescriptors {
    pub shot: Descriptor,
    pub esf: Descriptor,
}

/// Equalize (if enabled), estimate normals, then SHOT and ESF.
pub fn base_descriptors(cloud: &PointCloud, config: &PipelineConfig) -> Result<BaseDescriptors, PipelineError> {
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud.into());
    }
    cloud.check_finite()?;
    let eq;
    let cloud = if config.preprocessing {
        eq = equalize(cloud, &config.equalization)?;
        &eq
    } else {
        cloud
    };
    let normals = estimate_normals(cloud, config.normal_neighbors)?;
    let shot = compute_shot(cloud, &normals)?;
    let esf = compute_esf(cloud, config.esf_samples, config.seed)?;
    Ok(BaseDescriptors { shot, esf })
}

pub fn assemble(kind: DescriptorKind, base: &BaseDescriptors) -> Result<Descriptor, PipelineError> {
    Ok(match kind {
        DescriptorKind::Shot => base.shot.clone(),
        DescriptorKind::Esf => base.esf.clone(),
        DescriptorKind::Concat => concat_descriptor(&base.shot, &base.esf)?,
        DescriptorKind::Clue => compute_clue(&base.shot, &base.esf)?,
    })
}

/// The configured descriptor of one cloud.
pub fn describe_cloud(cloud: &PointCloud, config: &PipelineConfig) -> Result<Descriptor, PipelineError> {
    assemble(config.descriptor, &base_descriptors(cloud, config)?)
}

fn describe_all(clouds: &[PointCloud], config: &PipelineConfig) -> Result<Vec<Vec<f64>>, PipelineError> {
    clouds
        .par_iter()
        .map(|c| describe_cloud(c, config).map(Descriptor::into_values))
        .collect()
}

fn provenance(config: &PipelineConfig, adaptation: String) -> Provenance {
    Provenance {
        equalization: config.preprocessing.then_some(config.equalization),
        descriptor: config.descriptor,
        esf_samples: config.esf_samples,
        normal_neighbors: config.normal_neighbors,
        adaptation,
        seed: config.seed,
    }
}

fn svm_params(classifier: &ClassifierConfig) -> SvmParams {
    match *classifier {
        ClassifierConfig::Svm { c, tol, .. } => SvmParams {
            c,
            tol,
            ..SvmParams::default()
        },
        ClassifierConfig::Knn { .. } => SvmParams::default(),
    }
}

/// Train the configured classifier on `source`, optionally under a GFK
/// kernel matrix `g`.
fn fit_classifier(
    source: &FeatureSet,
    classifier: &ClassifierConfig,
    g: Option<&nalgebra::DMatrix<f64>>,
) -> Result<Classifier, PipelineError> {
    Ok(match *classifier {
        ClassifierConfig::Knn { k } => {
            let metric = match g {
                Some(g) => MetricSpec::Gfk { g: g.clone() },
                None => MetricSpec::Euclidean,
            };
            Classifier::Knn(KnnModel::train(source, k, metric)?)
        }
        ClassifierConfig::Svm { kernel, gamma, .. } => {
            let gamma = || gamma.unwrap_or_else(|| default_gamma(source.vectors(), g));
            let kernel = match (kernel, g) {
                (SvmKernelKind::Linear, None) => KernelSpec::Linear,
                (SvmKernelKind::Rbf, None) => KernelSpec::Rbf { gamma: gamma() },
                (SvmKernelKind::Linear, Some(g)) => KernelSpec::GfkLinear { g: g.clone() },
                (SvmKernelKind::Rbf, Some(g)) => KernelSpec::GfkRbf {
                    gamma: gamma(),
                    g: g.clone(),
                },
            };
            Classifier::Svm(SvmModel::train(source, kernel, &svm_params(classifier))?)
        }
    })
}

/// Build a model from descriptor sets. `target` is required (and only its
/// vectors are used) when the configured adaptation is PCA or GFK.
pub fn train_from_features(
    source: &FeatureSet,
    target: Option<&FeatureSet>,
    config: &PipelineConfig,
) -> Result<TrainedModel, PipelineError> {
    config.validate()?;
    let method = config.adaptation.method;
    let (classifier, transform, tag) = match method {
        AdaptMethod::None => (
            fit_classifier(source, &config.classifier, None)?,
            FeatureTransform::identity(),
            "none".to_string(),
        ),
        AdaptMethod::Pca | AdaptMethod::Gfk => {
            let target = target.filter(|t| !t.is_empty()).ok_or(PipelineError::MissingTargetData)?;
            // only the target's vectors enter the adaptation
            let target = FeatureSet::new(target.vectors().clone(), Domain::Target)?;
            let (src, tgt, standardize) = if config.adaptation.standardize {
                let s = Standardizer::fit(source);
                let t = Standardizer::fit(&target);
                (s.apply_set(source), t.apply_set(&target), Some(t))
            } else {
                (source.clone(), target, None)
            };
            let d = config.adaptation.dim;
            let tag = format!("{method}(d={d}{})", if standardize.is_some() { ",z" } else { "" });
            match method {
                AdaptMethod::Gfk => {
                    let model = gfk_fit(&src, &tgt, d)?;
                    let classifier = fit_classifier(&src, &config.classifier, Some(&model.g))?;
                    (
                        classifier,
                        FeatureTransform {
                            standardize,
                            projection: None,
                        },
                        tag,
                    )
                }
                _ => {
                    let pt = pca_transfer(&src, &tgt, d)?;
                    let labels = source.labels().ok_or(crate::classify::ClassifyError::MissingLabels)?;
                    let projected = FeatureSet::new(pt.source, Domain::Source)?.with_labels(labels.to_vec())?;
                    let classifier = fit_classifier(&projected, &config.classifier, None)?;
                    (
                        classifier,
                        FeatureTransform {
                            standardize,
                            projection: Some(pt.fit),
                        },
                        tag,
                    )
                }
            }
        }
    };
    Ok(TrainedModel::new(classifier)
        .with_transform(transform)
        .with_provenance(provenance(config, tag)))
}

fn labeled_set(clouds: &[PointCloud], config: &PipelineConfig) -> Result<FeatureSet, PipelineError> {
    let labels = clouds
        .iter()
        .map(|c| {
            c.label
                .ok_or_else(|| PipelineError::Config("source cloud without a label".into()))
        })
        .collect::<Result<Vec<ClassId>, _>>()?;
    let mut classes = labels.clone();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(crate::classify::ClassifyError::SingleClass.into());
    }
    let rows = describe_all(clouds, config)?;
    Ok(FeatureSet::from_rows(&rows, Domain::Source)?.with_labels(labels)?)
}

/// Visual-only training: describe each labeled source cloud and fit the
/// classifier. Adaptation settings are ignored.
pub fn cmr_train(source: &[PointCloud], config: &PipelineConfig) -> Result<TrainedModel, PipelineError> {
    let config = PipelineConfig {
        adaptation: crate::pipeline::AdaptationConfig {
            method: AdaptMethod::None,
            ..config.adaptation
        },
        ..config.clone()
    };
    let set = labeled_set(source, &config)?;
    train_from_features(&set, None, &config)
}

/// Transfer training: labeled source clouds plus unlabeled target clouds.
/// Target labels are dropped before anything else touches the clouds.
pub fn tlcmr_train(
    source: &[PointCloud],
    target: &[PointCloud],
    config: &PipelineConfig,
) -> Result<TrainedModel, PipelineError> {
    if config.adaptation.method == AdaptMethod::None {
        return Err(PipelineError::Config("transfer training needs adaptation pca or gfk".into()));
    }
    if target.is_empty() {
        return Err(PipelineError::MissingTargetData);
    }
    if target.iter().any(|c| c.label.is_some()) {
        log::warn!("target clouds carry labels; they are ignored");
    }
    let target: Vec<PointCloud> = target
        .iter()
        .map(|c| PointCloud {
            label: None,
            ..c.clone()
        })
        .collect();
    let src = labeled_set(source, config)?;
    let tgt = FeatureSet::from_rows(&describe_all(&target, config)?, Domain::Target)?;
    train_from_features(&src, Some(&tgt), config)
}

/// Visual-only training from a manifest; reads only the visual files.
pub fn cmr_train_files<R: CloudReader + ?Sized>(
    manifest: &DatasetManifest,
    reader: &R,
    config: &PipelineConfig,
) -> Result<TrainedModel, PipelineError> {
    cmr_train(&manifest.read(reader, Modality::Visual, true)?, config)
}

/// Transfer training from a manifest; tactile files are read without labels.
pub fn tlcmr_train_files<R: CloudReader + ?Sized>(
    manifest: &DatasetManifest,
    reader: &R,
    config: &PipelineConfig,
) -> Result<TrainedModel, PipelineError> {
    let source = manifest.read(reader, Modality::Visual, true)?;
    let target = manifest.read(reader, Modality::Tactile, false)?;
    tlcmr_train(&source, &target, config)
}

/// Rebuild the model's descriptor pipeline on `cloud` and classify it:
/// equalize, SHOT, ESF, fuse, classify.
pub fn recognize(model: &TrainedModel, cloud: &PointCloud) -> Result<ClassId, PipelineError> {
    let p = model.provenance.as_ref().ok_or(PipelineError::MissingProvenance)?;
    let config = PipelineConfig {
        seed: p.seed,
        preprocessing: p.equalization.is_some(),
        descriptor: p.descriptor,
        esf_samples: p.esf_samples,
        normal_neighbors: p.normal_neighbors,
        equalization: p.equalization.unwrap_or_default(),
        ..PipelineConfig::default()
    };
    let d = describe_cloud(cloud, &config)?;
    Ok(model.predict(&DVector::from_vec(d.into_values()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::AdaptationConfig;
    use crate::synthlab::{make_object, sample_tactile, sample_visual, ExplorationGrid, SensorSpec, VisualSpec};

    fn visual(class: usize, seed: u64) -> PointCloud {
        let o = make_object(ClassId(class), seed).unwrap();
        sample_visual(&o, &VisualSpec::default(), seed).unwrap()
    }

    fn tactile(class: usize, seed: u64) -> PointCloud {
        let o = make_object(ClassId(class), seed).unwrap();
        let g = ExplorationGrid::covering(&o, 0.025).unwrap();
        sample_tactile(&o, &SensorSpec::default(), &g, seed).unwrap()
    }

    fn fast() -> PipelineConfig {
        PipelineConfig {
            esf_samples: 4000,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn knn_model_stores_every_source_descriptor() {
        let source: Vec<PointCloud> = [(1, 1), (1, 2), (1, 3), (7, 1), (7, 2), (7, 3)]
            .iter()
            .map(|&(c, s)| visual(c, s))
            .collect();
        let model = cmr_train(&source, &fast()).unwrap();
        match &model.classifier {
            Classifier::Knn(k) => assert_eq!(k.labels().len(), 6),
            other => panic!("unexpected {other:?}"),
        }
        for c in &source {
            assert_eq!(recognize(&model, c).unwrap(), c.label.unwrap());
        }
    }

    #[test]
    fn recognize_rejects_empty_and_is_repeatable() {
        let source: Vec<PointCloud> = [(0, 1), (0, 2), (13, 1), (13, 2)].iter().map(|&(c, s)| visual(c, s)).collect();
        let model = cmr_train(&source, &fast()).unwrap();
        let empty = PointCloud::new(vec![], Modality::Tactile);
        assert!(recognize(&model, &empty).is_err());
        let q = tactile(13, 9);
        let first = recognize(&model, &q).unwrap();
        for _ in 0..3 {
            assert_eq!(recognize(&model, &q).unwrap(), first);
        }
        let text = model.to_json().unwrap();
        let json = TrainedModel::from_json(&text).unwrap();
        assert_eq!(recognize(&json, &q).unwrap(), first);
        // floats must survive the round trip bit for bit
        assert_eq!(json.to_json().unwrap(), text);
    }

    #[test]
    fn single_class_rejected() {
        let source = vec![visual(2, 1), visual(2, 2)];
        assert!(cmr_train(&source, &fast()).is_err());
    }

    #[test]
    fn target_labels_never_matter() {
        let source: Vec<PointCloud> = [(3, 1), (3, 2), (3, 3), (11, 1), (11, 2), (11, 3)]
            .iter()
            .map(|&(c, s)| visual(c, s))
            .collect();
        let target: Vec<PointCloud> = [(3, 7), (11, 7), (3, 8), (11, 8)].iter().map(|&(c, s)| tactile(c, s)).collect();
        let poisoned: Vec<PointCloud> = target.iter().map(|c| c.clone().with_label(ClassId(99))).collect();
        let stripped: Vec<PointCloud> = target
            .iter()
            .map(|c| PointCloud {
                label: None,
                ..c.clone()
            })
            .collect();
        let config = PipelineConfig {
            adaptation: AdaptationConfig {
                method: AdaptMethod::Gfk,
                dim: 2,
                standardize: true,
            },
            ..fast()
        };
        let a = tlcmr_train(&source, &poisoned, &config).unwrap();
        let b = tlcmr_train(&source, &stripped, &config).unwrap();
        assert_eq!(a, b);
        assert!(matches!(tlcmr_train(&source, &[], &config), Err(PipelineError::MissingTargetData)));
        assert!(tlcmr_train(&source, &stripped, &fast()).is_err());
    }

    #[test]
    fn gfk_with_target_equal_to_source_matches_plain_training() {
        let source: Vec<PointCloud> = [(5, 1), (5, 2), (5, 3), (9, 1), (9, 2), (9, 3), (14, 1), (14, 2), (14, 3)]
            .iter()
            .map(|&(c, s)| visual(c, s))
            .collect();
        let plain = cmr_train(&source, &fast()).unwrap();
        let adapted = tlcmr_train(
            &source,
            &source,
            &PipelineConfig {
                adaptation: AdaptationConfig {
                    method: AdaptMethod::Gfk,
                    dim: 4,
                    standardize: false,
                },
                ..fast()
            },
        )
        .unwrap();
        // identical subspaces: G = 2 Xs Xs', a projection; check 1-NN labels
        // agree on the training clouds themselves
        for c in &source {
            assert_eq!(recognize(&plain, c).unwrap(), recognize(&adapted, c).unwrap());
        }
    }
}
