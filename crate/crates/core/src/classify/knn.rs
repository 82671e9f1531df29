use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClassifyError, MetricSpec};
use crate::adapt::FeatureSet;
use crate::cloudkit::ClassId;

/// Stored training vectors for k-nearest-neighbor voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    vectors: DMatrix<f64>,
    labels: Vec<ClassId>,
    k: usize,
    metric: MetricSpec,
    /// `x_i' G x_i` per stored row (GFK metric only).
    self_terms: Vec<f64>,
}

impl KnnModel {
    pub fn train(data: &FeatureSet, k: usize, metric: MetricSpec) -> Result<Self, ClassifyError> {
        let labels = data.labels().ok_or(ClassifyError::MissingLabels)?.to_vec();
        Self::from_parts(data.vectors().clone(), labels, k, metric)
    }

    pub fn from_parts(
        vectors: DMatrix<f64>,
        labels: Vec<ClassId>,
        k: usize,
        metric: MetricSpec,
    ) -> Result<Self, ClassifyError> {
        if k == 0 {
            return Err(ClassifyError::Invalid("k must be >= 1".into()));
        }
        if vectors.nrows() == 0 {
            return Err(ClassifyError::TooFewExamples("kNN needs at least one stored vector".into()));
        }
        if labels.len() != vectors.nrows() {
            return Err(ClassifyError::DimensionMismatch {
                expected: vectors.nrows(),
                got: labels.len(),
            });
        }
        let self_terms = match &metric {
            MetricSpec::Euclidean => Vec::new(),
            MetricSpec::Gfk { g } => {
                if g.nrows() != vectors.ncols() || g.ncols() != vectors.ncols() {
                    return Err(ClassifyError::DimensionMismatch {
                        expected: vectors.ncols(),
                        got: g.nrows(),
                    });
                }
                let xg = &vectors * g;
                (0..vectors.nrows()).map(|i| xg.row(i).dot(&vectors.row(i))).collect()
            }
        };
        Ok(Self {
            vectors,
            labels,
            k,
            metric,
            self_terms,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn classes(&self) -> Vec<ClassId> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    /// Distance from `q` to every stored vector.
    pub fn distances(&self, q: &DVector<f64>) -> Result<Vec<f64>, ClassifyError> {
        if q.len() != self.vectors.ncols() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.vectors.ncols(),
                got: q.len(),
            });
        }
        Ok(match &self.metric {
            MetricSpec::Euclidean => self
                .vectors
                .row_iter()
                .map(|r| r.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect(),
            MetricSpec::Gfk { g } => {
                let gq = g * q;
                let qq = q.dot(&gq);
                let cross = &self.vectors * gq;
                self.self_terms
                    .iter()
                    .zip(cross.iter())
                    .map(|(s, c)| (s - 2.0 * c + qq).max(0.0).sqrt())
                    .collect()
            }
        })
    }

    /// Majority vote among the k nearest stored vectors. Distance ties go to
    /// the lower stored index; vote ties to the smaller summed distance,
    /// then the lower class.
    pub fn classify(&self, q: &DVector<f64>) -> Result<ClassId, ClassifyError> {
        let dist = self.distances(q)?;
        let mut order: Vec<usize> = (0..dist.len()).collect();
        let k = self.k.min(order.len());
        let by = |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, by);
            order.truncate(k);
        }
        let mut tally: BTreeMap<ClassId, (usize, f64)> = BTreeMap::new();
        for &i in &order {
            let e = tally.entry(self.labels[i]).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += dist[i];
        }
        let best = tally
            .iter()
            .min_by(|(ca, (na, sa)), (cb, (nb, sb))| nb.cmp(na).then(sa.total_cmp(sb)).then(ca.cmp(cb)))
            .map(|(c, _)| *c)
            .expect("k >= 1");
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, dim: usize, classes: usize, seed: u64) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        let labels = (0..n).map(|_| ClassId(rng.random_range(0..classes))).collect();
        FeatureSet::new(m, Domain::Source).unwrap().with_labels(labels).unwrap()
    }

    // brute-force oracle: full sort by (distance, index), then the vote rules
    fn oracle(set: &FeatureSet, g: Option<&DMatrix<f64>>, k: usize, q: &DVector<f64>) -> ClassId {
        let labels = set.labels().unwrap();
        let mut d: Vec<(f64, usize)> = set
            .vectors()
            .row_iter()
            .enumerate()
            .map(|(i, r)| {
                let diff = r.transpose() - q;
                let sq = match g {
                    Some(g) => diff.dot(&(g * &diff)),
                    None => diff.norm_squared(),
                };
                (sq.max(0.0).sqrt(), i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(usize, f64, ClassId)> = None;
        let mut classes: Vec<ClassId> = labels.to_vec();
        classes.sort();
        classes.dedup();
        for c in classes {
            let hits: Vec<f64> = d[..k].iter().filter(|(_, i)| labels[*i] == c).map(|(x, _)| *x).collect();
            if hits.is_empty() {
                continue;
            }
            let cand = (hits.len(), hits.iter().sum::<f64>(), c);
            best = match best {
                None => Some(cand),
                Some(b) if cand.0 > b.0 || (cand.0 == b.0 && cand.1 < b.1) => Some(cand),
                keep => keep,
            };
        }
        best.unwrap().2
    }

    #[test]
    fn stored_vector_returns_its_label() {
        let set = random_set(30, 4, 3, 1);
        let m = KnnModel::train(&set, 1, MetricSpec::Euclidean).unwrap();
        for (i, r) in set.vectors().row_iter().enumerate() {
            assert_eq!(m.classify(&r.transpose()).unwrap(), set.labels().unwrap()[i]);
        }
    }

    #[test]
    fn k_equal_n_is_global_majority() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let labels = [0, 1, 1, 0, 1, 2, 2].map(ClassId).to_vec();
        let set = FeatureSet::from_rows(&rows, Domain::Source).unwrap().with_labels(labels).unwrap();
        let m = KnnModel::train(&set, 7, MetricSpec::Euclidean).unwrap();
        assert_eq!(m.classify(&DVector::from_row_slice(&[100.0])).unwrap(), ClassId(1));
    }

    #[test]
    fn vote_tie_prefers_smaller_distance_sum_then_lower_class() {
        let rows = vec![vec![0.0], vec![4.0], vec![1.0], vec![2.0]];
        let labels = [0, 0, 1, 1].map(ClassId).to_vec();
        let set = FeatureSet::from_rows(&rows, Domain::Source).unwrap().with_labels(labels).unwrap();
        let m = KnnModel::train(&set, 4, MetricSpec::Euclidean).unwrap();
        // two votes each; class 1 sums 0.5 + 0.5, class 0 sums 1.5 + 2.5
        assert_eq!(m.classify(&DVector::from_row_slice(&[1.5])).unwrap(), ClassId(1));
        let m = KnnModel::train(&set, 2, MetricSpec::Euclidean).unwrap();
        // nearest two of q = 3 are 4 (class 0) and 2 (class 1), both at 1: lower class
        assert_eq!(m.classify(&DVector::from_row_slice(&[3.0])).unwrap(), ClassId(0));
    }

    #[test]
    fn matches_full_sort_oracle() {
        let set = random_set(80, 5, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let g = &a * a.transpose();
        for k in [1, 3, 5] {
            let eu = KnnModel::train(&set, k, MetricSpec::Euclidean).unwrap();
            let gk = KnnModel::train(&set, k, MetricSpec::Gfk { g: g.clone() }).unwrap();
            for _ in 0..500 {
                let q = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
                assert_eq!(eu.classify(&q).unwrap(), oracle(&set, None, k, &q));
                assert_eq!(gk.classify(&q).unwrap(), oracle(&set, Some(&g), k, &q));
            }
        }
    }

    #[test]
    fn scaling_the_metric_keeps_labels() {
        let set = random_set(40, 3, 3, 4);
        let g = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 0.5]));
        let a = KnnModel::train(&set, 3, MetricSpec::Gfk { g: g.clone() }).unwrap();
        let b = KnnModel::train(&set, 3, MetricSpec::Gfk { g: g * 9.0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            assert_eq!(a.classify(&q).unwrap(), b.classify(&q).unwrap());
        }
    }

    #[test]
    fn dimension_checked() {
        let set = random_set(5, 3, 2, 6);
        let m = KnnModel::train(&set, 1, MetricSpec::Euclidean).unwrap();
        assert_eq!(
            m.classify(&DVector::zeros(2)),
            Err(ClassifyError::DimensionMismatch { expected: 3, got: 2 })
        );
        assert!(KnnModel::train(&set, 0, MetricSpec::Euclidean).is_err());
    }
}
