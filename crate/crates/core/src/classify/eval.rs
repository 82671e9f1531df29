use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rows_of, ClassifyError, TrainedModel};
use crate::adapt::FeatureSet;
use crate::cloudkit::ClassId;

/// Recognition fractions: column = true class, row = predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<ClassId>,
    pub counts: DMatrix<f64>,
    pub fractions: DMatrix<f64>,
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[ClassId], predicted: &[ClassId], extra_classes: &[ClassId]) -> Self {
        let mut classes: Vec<ClassId> = truth.iter().chain(predicted).chain(extra_classes).copied().collect();
        classes.sort();
        classes.dedup();
        let n = classes.len();
        let idx = |c: &ClassId| classes.binary_search(c).expect("collected above");
        let mut counts = DMatrix::zeros(n, n);
        for (t, p) in truth.iter().zip(predicted) {
            counts[(idx(p), idx(t))] += 1.0;
        }
        let mut fractions = counts.clone();
        for mut col in fractions.column_iter_mut() {
            let s = col.sum();
            if s > 0.0 {
                col /= s;
            }
        }
        Self {
            classes,
            counts,
            fractions,
        }
    }

    pub fn size(&self) -> usize {
        self.classes.len()
    }

    /// Fraction of class `c` recognized correctly, if it had test examples.
    pub fn recall(&self, c: ClassId) -> Option<f64> {
        let i = self.classes.binary_search(&c).ok()?;
        if self.counts.column(i).sum() > 0.0 {
            Some(self.fractions[(i, i)])
        } else {
            None
        }
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.counts.sum();
        if total == 0.0 {
            0.0
        } else {
            self.counts.diagonal().sum() / total
        }
    }

    /// CSV with a header row of true classes and one row per predicted class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predicted\\true");
        for c in &self.classes {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (r, c) in self.classes.iter().enumerate() {
            out.push_str(&c.to_string());
            for k in 0..self.size() {
                out.push_str(&format!(",{:.6}", self.fractions[(r, k)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Accuracy and confusion matrix of `model` on a labeled test set.
pub fn evaluate(model: &TrainedModel, test: &FeatureSet) -> Result<(f64, ConfusionMatrix), ClassifyError> {
    let truth = test.labels().ok_or(ClassifyError::MissingLabels)?;
    if test.is_empty() {
        return Err(ClassifyError::EmptyTestSet);
    }
    let predicted = rows_of(test.vectors())
        .iter()
        .map(|x| model.predict(x))
        .collect::<Result<Vec<_>, _>>()?;
    let cm = ConfusionMatrix::from_pairs(truth, &predicted, &model.classifier.classes());
    Ok((cm.accuracy(), cm))
}

/// Stratified fold index per example: each class is shuffled with the
/// seeded generator and dealt round-robin, continuing where the previous
/// class stopped so fold sizes stay balanced.
pub fn stratified_folds(labels: &[ClassId], k: usize, seed: u64) -> Result<Vec<usize>, ClassifyError> {
    if k < 2 || k > labels.len() {
        return Err(ClassifyError::TooFewExamples(format!(
            "{k}-fold split of {} examples",
            labels.len()
        )));
    }
    let mut classes = labels.to_vec();
    classes.sort();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub folds: Vec<usize>,
    /// Confusion matrix over all held-out predictions.
    pub confusion: ConfusionMatrix,
}

fn subset(data: &FeatureSet, idx: &[usize]) -> Result<FeatureSet, ClassifyError> {
    let v = data.vectors();
    let m = DMatrix::from_fn(idx.len(), v.ncols(), |r, c| v[(idx[r], c)]);
    let labels = data.labels().ok_or(ClassifyError::MissingLabels)?;
    FeatureSet::new(m, data.domain)
        .and_then(|s| s.with_labels(idx.iter().map(|&i| labels[i]).collect()))
        .map_err(|e| ClassifyError::Invalid(e.to_string()))
}

/// Stratified k-fold cross-validation; `trainer` builds a model from each
/// training split.
pub fn kfold_cv<F>(data: &FeatureSet, k: usize, seed: u64, mut trainer: F) -> Result<CvReport, ClassifyError>
where
    F: FnMut(&FeatureSet) -> Result<TrainedModel, ClassifyError>,
{
    let labels = data.labels().ok_or(ClassifyError::MissingLabels)?;
    let folds = stratified_folds(labels, k, seed)?;
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for f in 0..k {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
        let model = trainer(&subset(data, &train)?)?;
        let held = subset(data, &test)?;
        let mut correct = 0usize;
        for (x, t) in rows_of(held.vectors()).iter().zip(held.labels().expect("set above")) {
            let p = model.predict(x)?;
            correct += usize::from(p == *t);
            truth.push(*t);
            predicted.push(p);
        }
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        mean_accuracy,
        fold_accuracies,
        folds,
        confusion: ConfusionMatrix::from_pairs(&truth, &predicted, &[]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::Domain;
    use crate::classify::{Classifier, KnnModel, MetricSpec};

    fn labeled(rows: &[Vec<f64>], labels: &[usize]) -> FeatureSet {
        FeatureSet::from_rows(rows, Domain::Source)
            .unwrap()
            .with_labels(labels.iter().map(|&l| ClassId(l)).collect())
            .unwrap()
    }

    fn one_nn(train: &FeatureSet) -> Result<TrainedModel, ClassifyError> {
        Ok(TrainedModel::new(Classifier::Knn(KnnModel::train(train, 1, MetricSpec::Euclidean)?)))
    }

    #[test]
    fn perfect_classifier_gives_identity() {
        let rows: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 * 10.0]).collect();
        let labels: Vec<usize> = (0..15).collect();
        let data = labeled(&rows, &labels);
        let model = one_nn(&data).unwrap();
        let (acc, cm) = evaluate(&model, &data).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(cm.size(), 15);
        assert_eq!(cm.fractions, DMatrix::identity(15, 15));
    }

    #[test]
    fn column_fraction_arithmetic() {
        // five examples of class 4, three recognized
        let truth = vec![ClassId(4); 5];
        let predicted = [4, 4, 4, 1, 2].map(ClassId).to_vec();
        let cm = ConfusionMatrix::from_pairs(&truth, &predicted, &[]);
        assert_eq!(cm.recall(ClassId(4)), Some(0.6));
        assert_eq!(cm.recall(ClassId(1)), None);
        for col in cm.fractions.column_iter() {
            let s = col.sum();
            assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_is_count_weighted_recall() {
        let truth = [0, 0, 0, 1, 1, 2, 2, 2, 2].map(ClassId).to_vec();
        let predicted = [0, 1, 0, 1, 0, 2, 2, 0, 2].map(ClassId).to_vec();
        let cm = ConfusionMatrix::from_pairs(&truth, &predicted, &[]);
        let weighted: f64 = cm
            .classes
            .iter()
            .map(|c| cm.recall(*c).unwrap() * truth.iter().filter(|t| *t == c).count() as f64)
            .sum::<f64>()
            / truth.len() as f64;
        assert!((weighted - cm.accuracy()).abs() < 1e-12);
        assert!((cm.accuracy() - 6.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn empty_test_set_rejected() {
        let data = labeled(&[vec![0.0], vec![1.0]], &[0, 1]);
        let model = one_nn(&data).unwrap();
        let empty = FeatureSet::new(DMatrix::zeros(0, 1), Domain::Target);
        assert!(empty.is_err());
        assert!(matches!(
            evaluate(&model, &FeatureSet::new(DMatrix::zeros(1, 1), Domain::Target).unwrap()),
            Err(ClassifyError::MissingLabels)
        ));
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<ClassId> = (0..53).map(|i| ClassId(i % 4)).collect();
        let a = stratified_folds(&labels, 10, 3).unwrap();
        assert_eq!(a, stratified_folds(&labels, 10, 3).unwrap());
        assert_ne!(a, stratified_folds(&labels, 10, 4).unwrap());
        for c in 0..4 {
            let mut per_fold = [0usize; 10];
            for (i, l) in labels.iter().enumerate() {
                if l.0 == c {
                    per_fold[a[i]] += 1;
                }
            }
            assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
        assert!(stratified_folds(&labels, 1, 0).is_err());
        assert!(stratified_folds(&labels, 54, 0).is_err());
    }

    #[test]
    fn leave_one_out_on_duplicates() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![(i / 2) as f64 * 5.0]).collect();
        let labels: Vec<usize> = (0..8).map(|i| i / 2).collect();
        let data = labeled(&rows, &labels);
        let r = kfold_cv(&data, 8, 1, one_nn).unwrap();
        assert_eq!(r.mean_accuracy, 1.0);
    }

    #[test]
    fn xor_two_fold_is_always_wrong() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let data = labeled(&rows, &[0, 0, 1, 1]);
        for seed in 0..5 {
            let r = kfold_cv(&data, 2, seed, one_nn).unwrap();
            assert_eq!(r.mean_accuracy, 0.0);
            let again = kfold_cv(&data, 2, seed, one_nn).unwrap();
            assert_eq!(r.folds, again.folds);
        }
    }
}
