use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::jacobi::jacobi_svd;
use super::{AdaptError, FeatureSet};

/// Mean and leading principal directions of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaFit {
    pub mean: DVector<f64>,
    /// D x d, orthonormal columns, variance-descending.
    pub basis: DMatrix<f64>,
    /// All covariance eigenvalues (biased, divided by N), descending.
    pub variances: Vec<f64>,
}

impl PcaFit {
    /// Coordinates of each row of `data` in the basis.
    pub fn project(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * &self.basis
    }

    pub fn project_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (x - &self.mean)
    }
}

fn canonical_column_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        let mut best = 0.0f64;
        for v in col.iter() {
            if v.abs() > best.abs() {
                best = *v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Singular values and right singular vectors (as columns). The fast SVD
/// is checked against its own residuals and replaced by the Jacobi SVD
/// when it has not converged to working accuracy.
fn right_singular(c: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = c.clone().svd(false, true);
    let v = svd.v_t.expect("requested").transpose();
    let sigma: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let k = v.ncols();
    let ortho = (v.transpose() * &v - DMatrix::identity(k, k)).amax();
    let residual = (0..k)
        .map(|i| ((c * v.column(i)).norm() - sigma[i]).abs())
        .fold(0.0, f64::max);
    if ortho <= 1e-10 && residual <= 1e-10 * smax.max(f64::MIN_POSITIVE) {
        return (sigma, v);
    }
    log::debug!("falling back to Jacobi SVD (orthogonality {ortho:.1e}, residual {residual:.1e})");
    jacobi_right_singular(c)
}

fn jacobi_right_singular(c: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    if c.nrows() >= c.ncols() {
        let svd = jacobi_svd(c);
        (svd.s.iter().cloned().collect(), svd.v)
    } else {
        let svd = jacobi_svd(&c.transpose());
        (svd.s.iter().cloned().collect(), svd.u)
    }
}

/// PCA of the rows of `data` via the SVD of the centered matrix.
pub fn pca_fit(data: &DMatrix<f64>, d: usize) -> Result<PcaFit, AdaptError> {
    let (n, dim) = data.shape();
    if d == 0 || d > dim {
        return Err(AdaptError::Invalid(format!("subspace dimension {d} not in 1..={dim}")));
    }
    let mean: DVector<f64> = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let (sigma, v) = right_singular(&centered);
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let sigma_max = order.first().map_or(0.0, |&i| sigma[i]);
    let tol = n.max(dim) as f64 * f64::EPSILON * sigma_max;
    let rank = order.iter().filter(|&&i| sigma[i] > tol).count();
    if d > rank {
        return Err(AdaptError::RankDeficient { requested: d, rank });
    }
    let mut basis = DMatrix::zeros(dim, d);
    for (k, &i) in order.iter().take(d).enumerate() {
        basis.set_column(k, &v.column(i));
    }
    canonical_column_signs(&mut basis);
    let mut variances: Vec<f64> = order.iter().map(|&i| sigma[i].powi(2) / n as f64).collect();
    variances.resize(dim, 0.0);
    Ok(PcaFit { mean, basis, variances })
}

/// Top-`d` principal directions of a feature set.
pub fn pca_basis(set: &FeatureSet, d: usize) -> Result<DMatrix<f64>, AdaptError> {
    pca_fit(set.vectors(), d).map(|f| f.basis)
}

/// Both domains projected onto one PCA basis fitted on their union.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransfer {
    pub fit: PcaFit,
    pub source: DMatrix<f64>,
    pub target: DMatrix<f64>,
}

pub fn pca_transfer(source: &FeatureSet, target: &FeatureSet, d: usize) -> Result<PcaTransfer, AdaptError> {
    if source.dim() != target.dim() {
        return Err(AdaptError::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    let union = DMatrix::from_fn(source.len() + target.len(), source.dim(), |i, j| {
        if i < source.len() {
            source.vectors()[(i, j)]
        } else {
            target.vectors()[(i - source.len(), j)]
        }
    });
    let fit = pca_fit(&union, d)?;
    Ok(PcaTransfer {
        source: fit.project(source.vectors()),
        target: fit.project(target.vectors()),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::Domain;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // anisotropic so eigenvalues are well separated
        DMatrix::from_fn(n, dim, |_, j| rng.random_range(-1.0..1.0) * (1.0 + j as f64))
    }

    #[test]
    fn line_data_gives_line_direction() {
        let dir = DVector::from_vec(vec![1.0, -2.0, 0.5]).normalize();
        let data = DMatrix::from_fn(10, 3, |i, j| (i as f64 - 3.0) * 0.7 * dir[j] + 1.0);
        let b = pca_fit(&data, 1).unwrap().basis;
        assert!((b.column(0).dot(&dir).abs() - 1.0).abs() < 1e-9);
        assert!(matches!(pca_fit(&data, 2), Err(AdaptError::RankDeficient { requested: 2, rank: 1 })));
    }

    #[test]
    fn orthonormal_and_sign_fixed() {
        let fit = pca_fit(&random_data(40, 8, 1), 5).unwrap();
        let gram = fit.basis.transpose() * &fit.basis;
        assert!((gram - DMatrix::identity(5, 5)).norm() < 1e-9);
        for col in fit.basis.column_iter() {
            let big = col.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn reconstruction_error_is_trailing_eigen_sum() {
        let data = random_data(60, 7, 2);
        let fit = pca_fit(&data, 3).unwrap();
        // oracle: eigendecomposition of the covariance matrix
        let n = data.nrows() as f64;
        let mean = data.row_mean();
        let mut c = data.clone();
        for mut r in c.row_iter_mut() {
            r -= &mean;
        }
        let cov = c.transpose() * &c / n;
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().cloned().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let trailing: f64 = eig[3..].iter().sum();
        let recon = fit.project(&data) * fit.basis.transpose();
        let err = (c - recon).norm_squared() / n;
        assert!((err - trailing).abs() < 1e-8);
    }

    #[test]
    fn transfer_of_identical_sets_is_identical() {
        let data = random_data(30, 6, 3);
        let s = FeatureSet::new(data.clone(), Domain::Source).unwrap();
        let t = FeatureSet::new(data, Domain::Target).unwrap();
        let tr = pca_transfer(&s, &t, 4).unwrap();
        assert_eq!(tr.source.ncols(), 4);
        assert_eq!(tr.source, tr.target);
    }

    #[test]
    fn transfer_reconstruction_on_union() {
        let s = FeatureSet::new(random_data(25, 6, 4), Domain::Source).unwrap();
        let t = FeatureSet::new(random_data(15, 6, 5) * 0.5, Domain::Target).unwrap();
        let tr = pca_transfer(&s, &t, 2).unwrap();
        let union = DMatrix::from_fn(40, 6, |i, j| {
            if i < 25 {
                s.vectors()[(i, j)]
            } else {
                t.vectors()[(i - 25, j)]
            }
        });
        let mean = union.row_mean();
        let mut c = union.clone();
        for mut r in c.row_iter_mut() {
            r -= &mean;
        }
        let cov = c.transpose() * &c / 40.0;
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().cloned().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let projected = DMatrix::from_fn(40, 2, |i, j| if i < 25 { tr.source[(i, j)] } else { tr.target[(i - 25, j)] });
        let err = (c - projected * tr.fit.basis.transpose()).norm_squared() / 40.0;
        assert!((err - eig[2..].iter().sum::<f64>()).abs() < 1e-8);
    }

    #[test]
    fn jacobi_path_agrees_with_fast_path() {
        for (n, dim) in [(30, 8), (6, 12)] {
            let mut c = random_data(n, dim, 11);
            let mean: DVector<f64> = c.row_mean().transpose();
            for mut row in c.row_iter_mut() {
                row -= mean.transpose();
            }
            let (s1, v1) = right_singular(&c);
            let (s2, v2) = jacobi_right_singular(&c);
            let top = |s: &[f64], v: &DMatrix<f64>| {
                let i = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
                (s[i], v.column(i).into_owned())
            };
            let ((a, va), (b, vb)) = (top(&s1, &v1), top(&s2, &v2));
            assert!((a - b).abs() < 1e-12 * a);
            assert!((va.dot(&vb).abs() - 1.0).abs() < 1e-10);
        }
    }
}
