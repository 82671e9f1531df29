//! Soft-margin SVM trained by SMO with second-order working-set selection,
//! one binary machine per class pair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClassifyError, KernelSpec};
use crate::adapt::FeatureSet;
use crate::cloudkit::ClassId;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

/// Decision function `sum coef_s k(sv_s, x) - rho` separating `positive`
/// (lower class, f >= 0) from `negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: ClassId,
    pub negative: ClassId,
    /// Indices into the model's support-vector table.
    pub support: Vec<usize>,
    /// `alpha_s * y_s` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    classes: Vec<ClassId>,
    support_vectors: DMatrix<f64>,
    machines: Vec<BinaryMachine>,
    kernel: KernelSpec,
    params: SvmParams,
}

/// `1 / (D * var)` with `var` the variance over all entries of the data, or
/// `1 / tr(G Cov)` under a GFK metric; both make the expected squared
/// distance between two samples equal to 2 / gamma.
pub fn default_gamma(data: &DMatrix<f64>, g: Option<&DMatrix<f64>>) -> f64 {
    let n = data.nrows();
    let nf = n.max(1) as f64;
    let mean: DVector<f64> = data.row_mean().transpose();
    let spread = match g {
        None => {
            let all_mean = data.mean();
            // D times the variance over all entries
            data.iter().map(|v| (v - all_mean).powi(2)).sum::<f64>() / nf
        }
        Some(g) => {
            let mut centered = data.clone();
            for mut row in centered.row_iter_mut() {
                row -= mean.transpose();
            }
            // tr(G Cov) = sum_i c_i' G c_i / n
            let cg = &centered * g;
            cg.component_mul(&centered).sum() / nf
        }
    };
    if spread > 0.0 && spread.is_finite() {
        1.0 / spread
    } else {
        1.0
    }
}

/// Gram matrix between the rows of `a` and the rows of `b`.
pub(crate) fn gram(kernel: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    match kernel {
        KernelSpec::Linear => a * b.transpose(),
        KernelSpec::GfkLinear { g } => a * g * b.transpose(),
        KernelSpec::Rbf { gamma } => {
            let cross = a * b.transpose();
            let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
            let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
            DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
                (-gamma * (na[i] + nb[j] - 2.0 * cross[(i, j)]).max(0.0)).exp()
            })
        }
        KernelSpec::GfkRbf { gamma, g } => {
            let ag = a * g;
            let bg = b * g;
            let cross = &ag * b.transpose();
            let na: Vec<f64> = (0..a.nrows()).map(|i| ag.row(i).dot(&a.row(i))).collect();
            let nb: Vec<f64> = (0..b.nrows()).map(|i| bg.row(i).dot(&b.row(i))).collect();
            DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
                (-gamma * (na[i] + nb[j] - 2.0 * cross[(i, j)]).max(0.0)).exp()
            })
        }
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
}

/// Dual `min 1/2 a'Qa - e'a`, `0 <= a <= C`, `y'a = 0`, `Q_ij = y_i y_j K_ij`.
fn smo(k: &DMatrix<f64>, y: &[f64], params: &SvmParams) -> Solution {
    let n = y.len();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let qd: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
    let up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };

    for _ in 0..params.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let i = i_sel;
            for t in 0..n {
                if !low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = qd[i] + qd[t] - 2.0 * k[(i, t)];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < params.tol {
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho from free variables, else the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    Solution { alpha, rho }
}

impl SvmModel {
    pub fn train(data: &FeatureSet, kernel: KernelSpec, params: &SvmParams) -> Result<Self, ClassifyError> {
        let labels = data.labels().ok_or(ClassifyError::MissingLabels)?;
        Self::train_raw(data.vectors(), labels, kernel, params)
    }

    pub fn train_raw(
        x: &DMatrix<f64>,
        labels: &[ClassId],
        kernel: KernelSpec,
        params: &SvmParams,
    ) -> Result<Self, ClassifyError> {
        if labels.len() != x.nrows() {
            return Err(ClassifyError::DimensionMismatch {
                expected: x.nrows(),
                got: labels.len(),
            });
        }
        if !(params.c > 0.0 && params.c.is_finite()) || !(params.tol > 0.0) {
            return Err(ClassifyError::Invalid(format!(
                "need C > 0 and tol > 0, got C = {}, tol = {}",
                params.c, params.tol
            )));
        }
        kernel.validate(x.ncols())?;
        let mut classes = labels.to_vec();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(ClassifyError::SingleClass);
        }
        let full = gram(&kernel, x, x);

        let mut used = vec![usize::MAX; x.nrows()];
        let mut sv_rows: Vec<usize> = Vec::new();
        let mut machines = Vec::new();
        for (a, &pos) in classes.iter().enumerate() {
            for &neg in &classes[a + 1..] {
                let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == pos || labels[i] == neg).collect();
                let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == pos { 1.0 } else { -1.0 }).collect();
                let k = DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])]);
                let sol = smo(&k, &y, params);
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for (local, &global) in idx.iter().enumerate() {
                    if sol.alpha[local] > 0.0 {
                        if used[global] == usize::MAX {
                            used[global] = sv_rows.len();
                            sv_rows.push(global);
                        }
                        support.push(used[global]);
                        coef.push(sol.alpha[local] * y[local]);
                    }
                }
                machines.push(BinaryMachine {
                    positive: pos,
                    negative: neg,
                    support,
                    coef,
                    rho: sol.rho,
                });
            }
        }
        let support_vectors = DMatrix::from_fn(sv_rows.len(), x.ncols(), |r, c| x[(sv_rows[r], c)]);
        Ok(Self {
            classes,
            support_vectors,
            machines,
            kernel,
            params: *params,
        })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn params(&self) -> &SvmParams {
        &self.params
    }

    pub fn machines(&self) -> &[BinaryMachine] {
        &self.machines
    }

    pub fn support_vectors(&self) -> &DMatrix<f64> {
        &self.support_vectors
    }

    /// Decision value of every binary machine for `x`.
    pub fn decision_values(&self, x: &DVector<f64>) -> Result<Vec<f64>, ClassifyError> {
        if x.len() != self.support_vectors.ncols() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.support_vectors.ncols(),
                got: x.len(),
            });
        }
        let kx = gram(&self.kernel, &self.support_vectors, &DMatrix::from_column_slice(1, x.len(), x.as_slice()));
        Ok(self
            .machines
            .iter()
            .map(|m| m.support.iter().zip(&m.coef).map(|(&s, c)| c * kx[(s, 0)]).sum::<f64>() - m.rho)
            .collect())
    }

    /// One-vs-one vote; ties go to the lowest class.
    pub fn predict(&self, x: &DVector<f64>) -> Result<ClassId, ClassifyError> {
        let f = self.decision_values(x)?;
        let mut votes = vec![0usize; self.classes.len()];
        let pos = |c: ClassId| self.classes.binary_search(&c).expect("known class");
        for (m, v) in self.machines.iter().zip(f) {
            if v >= 0.0 {
                votes[pos(m.positive)] += 1;
            } else {
                votes[pos(m.negative)] += 1;
            }
        }
        let best = votes
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("at least two classes");
        Ok(self.classes[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(rows: &[[f64; 2]], labels: &[usize]) -> FeatureSet {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        FeatureSet::from_rows(&rows, Domain::Source)
            .unwrap()
            .with_labels(labels.iter().map(|&l| ClassId(l)).collect())
            .unwrap()
    }

    fn separable(seed: u64) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let cls = i % 2;
            let off = if cls == 0 { -1.5 } else { 1.5 };
            rows.push([off + rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0)]);
            labels.push(cls);
        }
        set(&rows, &labels)
    }

    fn overlapping(seed: u64) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let cls = i % 2;
            let off = if cls == 0 { -0.5 } else { 0.5 };
            rows.push([off + rng.random_range(-1.0..1.0), off + rng.random_range(-1.0..1.0)]);
            labels.push(cls);
        }
        set(&rows, &labels)
    }

    #[test]
    fn two_point_midpoint() {
        let data = set(&[[0.0, 0.0], [2.0, 1.0]], &[0, 1]);
        let m = SvmModel::train(&data, KernelSpec::Linear, &SvmParams::default()).unwrap();
        assert_eq!(m.predict(&DVector::from_row_slice(&[0.0, 0.0])).unwrap(), ClassId(0));
        assert_eq!(m.predict(&DVector::from_row_slice(&[2.0, 1.0])).unwrap(), ClassId(1));
        let mid = m.decision_values(&DVector::from_row_slice(&[1.0, 0.5])).unwrap()[0];
        assert!(mid.abs() < 1e-6);
    }

    #[test]
    fn separable_set_is_fit_exactly() {
        let data = separable(1);
        let params = SvmParams::default();
        let m = SvmModel::train(&data, KernelSpec::Linear, &params).unwrap();
        for (r, l) in data.vectors().row_iter().zip(data.labels().unwrap()) {
            assert_eq!(m.predict(&r.transpose()).unwrap(), *l);
        }
        for mach in m.machines() {
            for c in &mach.coef {
                assert!(c.abs() <= params.c + 1e-9 && c.abs() > 0.0);
            }
        }
        // a support vector classifies as its own label
        let sv = m.support_vectors().row(0).transpose();
        let row = data.vectors().row_iter().position(|r| r.transpose() == sv).unwrap();
        assert_eq!(m.predict(&sv).unwrap(), data.labels().unwrap()[row]);
    }

    // Projected-gradient solution of the same dual. Projection onto the box
    // intersected with y'a = 0 by bisection on the multiplier.
    fn qp_oracle(k: &DMatrix<f64>, y: &[f64], c: f64) -> (Vec<f64>, f64) {
        let n = y.len();
        let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
        let lmax = q.clone().symmetric_eigenvalues().max();
        let step = 1.0 / lmax;
        let project = |z: &DVector<f64>| {
            let at = |mu: f64| DVector::from_fn(n, |i, _| (z[i] - mu * y[i]).clamp(0.0, c));
            let (mut lo, mut hi) = (-1e3, 1e3);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s: f64 = at(mid).iter().zip(y).map(|(a, y)| a * y).sum();
                if s > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            at(0.5 * (lo + hi))
        };
        let mut a = DVector::zeros(n);
        for _ in 0..200_000 {
            let g = &q * &a - DVector::from_element(n, 1.0);
            a = project(&(&a - g * step));
        }
        // bias averaged over free support vectors
        let mut b = 0.0;
        let mut cnt = 0;
        for i in 0..n {
            if a[i] > 1e-6 && a[i] < c - 1e-6 {
                let s: f64 = (0..n).map(|j| a[j] * y[j] * k[(i, j)]).sum();
                b += y[i] - s;
                cnt += 1;
            }
        }
        assert!(cnt > 0, "oracle found no free support vector");
        (a.iter().cloned().collect(), b / cnt as f64)
    }

    #[test]
    fn decision_values_match_qp_oracle() {
        let data = overlapping(2);
        let c = 1.0;
        let kernel = KernelSpec::Rbf { gamma: 0.7 };
        let params = SvmParams {
            c,
            tol: 1e-7,
            ..Default::default()
        };
        let m = SvmModel::train(&data, kernel.clone(), &params).unwrap();
        let x = data.vectors();
        let k = gram(&kernel, x, x);
        let y: Vec<f64> = data.labels().unwrap().iter().map(|l| if l.0 == 0 { 1.0 } else { -1.0 }).collect();
        let (a, b) = qp_oracle(&k, &y, c);
        for i in 0..x.nrows() {
            let want: f64 = (0..x.nrows()).map(|j| a[j] * y[j] * k[(i, j)]).sum::<f64>() + b;
            let got = m.decision_values(&x.row(i).transpose()).unwrap()[0];
            assert!((want - got).abs() < 1e-4, "point {i}: {want} vs {got}");
        }
    }

    #[test]
    fn training_order_does_not_change_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 45;
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let c = (i % 3) as f64;
                [c + rng.random_range(-0.6..0.6), c * c * 0.5 + rng.random_range(-0.6..0.6)]
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let a = set(&rows, &labels);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.swap(3, 17);
        let b = set(&perm.iter().map(|&i| rows[i]).collect::<Vec<_>>(), &perm.iter().map(|&i| labels[i]).collect::<Vec<_>>());
        let params = SvmParams {
            tol: 1e-6,
            ..Default::default()
        };
        let ma = SvmModel::train(&a, KernelSpec::Rbf { gamma: 1.0 }, &params).unwrap();
        let mb = SvmModel::train(&b, KernelSpec::Rbf { gamma: 1.0 }, &params).unwrap();
        for _ in 0..100 {
            let q = DVector::from_row_slice(&[rng.random_range(-1.0..3.0), rng.random_range(-1.0..3.0)]);
            assert_eq!(ma.predict(&q).unwrap(), mb.predict(&q).unwrap());
        }
    }

    #[test]
    fn gfk_linear_with_identity_matches_linear() {
        let data = overlapping(4);
        let p = SvmParams::default();
        let lin = SvmModel::train(&data, KernelSpec::Linear, &p).unwrap();
        let gfk = SvmModel::train(&data, KernelSpec::GfkLinear { g: DMatrix::identity(2, 2) }, &p).unwrap();
        let rbf = SvmModel::train(&data, KernelSpec::Rbf { gamma: 0.3 }, &p).unwrap();
        let gfk_rbf = SvmModel::train(&data, KernelSpec::GfkRbf { gamma: 0.3, g: DMatrix::identity(2, 2) }, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q = DVector::from_row_slice(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            assert_eq!(lin.predict(&q).unwrap(), gfk.predict(&q).unwrap());
            assert_eq!(rbf.predict(&q).unwrap(), gfk_rbf.predict(&q).unwrap());
        }
    }

    #[test]
    fn duplicating_a_non_support_point_keeps_signs() {
        let data = separable(6);
        let p = SvmParams {
            tol: 1e-6,
            ..Default::default()
        };
        let m = SvmModel::train(&data, KernelSpec::Linear, &p).unwrap();
        let sv = m.support_vectors();
        let rows: Vec<[f64; 2]> = data.vectors().row_iter().map(|r| [r[0], r[1]]).collect();
        let extra = (0..rows.len())
            .find(|&i| !sv.row_iter().any(|s| s[0] == rows[i][0] && s[1] == rows[i][1]))
            .unwrap();
        let mut rows2 = rows.clone();
        rows2.push(rows[extra]);
        let mut labels: Vec<usize> = data.labels().unwrap().iter().map(|l| l.0).collect();
        labels.push(labels[extra]);
        let m2 = SvmModel::train(&set(&rows2, &labels), KernelSpec::Linear, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q = DVector::from_row_slice(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
            let a = m.decision_values(&q).unwrap()[0];
            let b = m2.decision_values(&q).unwrap()[0];
            if a.abs() > 1e-3 {
                assert_eq!(a > 0.0, b > 0.0);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let data = set(&[[0.0, 0.0], [1.0, 1.0]], &[2, 2]);
        assert_eq!(
            SvmModel::train(&data, KernelSpec::Linear, &SvmParams::default()),
            Err(ClassifyError::SingleClass)
        );
    }

    #[test]
    fn gamma_heuristic_matches_definition() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        // entries 0..5: variance 35/12; D = 2
        let g = default_gamma(&x, None);
        assert!((g - 1.0 / (2.0 * 35.0 / 12.0)).abs() < 1e-12);
        // identity G: tr(Cov) = sum of per-column variances = 2 * 8/3
        let gg = default_gamma(&x, Some(&DMatrix::identity(2, 2)));
        assert!((gg - 1.0 / (16.0 / 3.0)).abs() < 1e-12);
    }
}
