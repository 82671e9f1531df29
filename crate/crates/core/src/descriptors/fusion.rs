use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};

use super::{Descriptor, DescriptorError, DescriptorKind, CONCAT_LEN, ESF_LEN};

/// Plain concatenation `[SHOT; ESF]`.
pub fn concat_descriptor(d_shot: &Descriptor, d_esf: &Descriptor) -> Result<Descriptor, DescriptorError> {
    d_shot.expect_kind(DescriptorKind::Shot)?;
    d_esf.expect_kind(DescriptorKind::Esf)?;
    let mut values = Vec::with_capacity(CONCAT_LEN);
    values.extend_from_slice(d_shot.values());
    values.extend_from_slice(d_esf.values());
    Descriptor::new(DescriptorKind::Concat, values)
}

/// Intermediate products of the SVD fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFusion {
    /// `[ESF, zero-padded SHOT]`, 640 x 2.
    pub d_hat: DMatrix<f64>,
    /// `d_hat` with each column shifted to zero mean.
    pub centered: DMatrix<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub u1: DVector<f64>,
    pub v1: Vector2<f64>,
}

/// Thin SVD of the stacked, column-centered descriptors. The two-column
/// shape lets us take the right singular vectors from the 2x2 Gram matrix.
pub fn svd_fusion(d_shot: &Descriptor, d_esf: &Descriptor) -> Result<SvdFusion, DescriptorError> {
    d_shot.expect_kind(DescriptorKind::Shot)?;
    d_esf.expect_kind(DescriptorKind::Esf)?;
    let mut d_hat = DMatrix::zeros(ESF_LEN, 2);
    for (i, v) in d_esf.values().iter().enumerate() {
        d_hat[(i, 0)] = *v;
    }
    for (i, v) in d_shot.values().iter().enumerate() {
        d_hat[(i, 1)] = *v;
    }
    let mut centered = d_hat.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let gram: Matrix2<f64> = {
        let g = centered.transpose() * &centered;
        Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)])
    };
    let eig = SymmetricEigen::new(gram);
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let sigma1 = eig.eigenvalues[hi].max(0.0).sqrt();
    let sigma2 = eig.eigenvalues[lo].max(0.0).sqrt();
    let mut v1: Vector2<f64> = eig.eigenvectors.column(hi).into_owned();
    let mut u1 = if sigma1 > 0.0 {
        &centered * DVector::from_column_slice(v1.as_slice()) / sigma1
    } else {
        DVector::zeros(ESF_LEN)
    };
    let anchor = u1.dot(&centered.column(0));
    let flip = if anchor != 0.0 {
        anchor < 0.0
    } else {
        u1.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
    };
    if flip {
        u1 = -u1;
        v1 = -v1;
    }
    Ok(SvdFusion {
        d_hat,
        centered,
        sigma1,
        sigma2,
        u1,
        v1,
    })
}

/// CLUE descriptor `sigma1 * u1` of the stacked ESF and SHOT columns.
pub fn compute_clue(d_shot: &Descriptor, d_esf: &Descriptor) -> Result<Descriptor, DescriptorError> {
    let f = svd_fusion(d_shot, d_esf)?;
    let values: Vec<f64> = f.u1.iter().map(|u| u * f.sigma1).collect();
    Descriptor::new(DescriptorKind::Clue, values)
}
