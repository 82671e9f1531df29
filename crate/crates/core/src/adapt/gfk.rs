use nalgebra::{DMatrix, DVector};

use super::jacobi::jacobi_svd;
use super::{pca_basis, AdaptError, FeatureSet};

/// Source/target bases plus the orthonormal complement of the source.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePair {
    pub xs: DMatrix<f64>,
    pub xt: DMatrix<f64>,
    /// D x (D - d).
    pub rs: DMatrix<f64>,
    pub d: usize,
}

/// Principal angles (ascending) with the factors of
/// `Xs' Xt = U1 cos(theta) V'` and `Rs' Xt = -U2 sin(theta) V'`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles {
    pub theta: DVector<f64>,
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfkModel {
    pub subspaces: SubspacePair,
    pub angles: PrincipalAngles,
    /// D x D symmetric positive semidefinite kernel matrix.
    pub g: DMatrix<f64>,
}

impl GfkModel {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn similarity(&self, xi: &DVector<f64>, xj: &DVector<f64>) -> Result<f64, AdaptError> {
        gfk_similarity(&self.g, xi, xj)
    }

    pub fn distance(&self, xi: &DVector<f64>, xj: &DVector<f64>) -> Result<f64, AdaptError> {
        gfk_distance(&self.g, xi, xj)
    }
}

/// Orthonormal basis of the complement of the column span of `x`
/// (orthonormal, D x d), read off the Householder QR of `x`.
pub fn orthonormal_complement(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (dim, d) = x.shape();
    let mut a = x.clone();
    let mut reflectors: Vec<Option<DVector<f64>>> = Vec::with_capacity(d);
    for k in 0..d.min(dim) {
        let col = a.view((k, k), (dim - k, 1)).column(0).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if col[0] >= 0.0 { -norm } else { norm };
        let mut v = col;
        v[0] -= alpha;
        let vn = v.norm();
        if vn == 0.0 {
            reflectors.push(None);
            continue;
        }
        v /= vn;
        let mut block = a.view_mut((k, k), (dim - k, d - k));
        let w = block.tr_mul(&v);
        block -= &v * w.transpose() * 2.0;
        reflectors.push(Some(v));
    }
    let mut q = DMatrix::zeros(dim, dim - d);
    for j in 0..dim - d {
        q[(d + j, j)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        if let Some(v) = v {
            let mut block = q.view_mut((k, 0), (dim - k, dim - d));
            let w = block.tr_mul(v);
            block -= v * w.transpose() * 2.0;
        }
    }
    q
}

fn check_basis(x: &DMatrix<f64>, dim: usize, d: usize) -> Result<(), AdaptError> {
    if x.nrows() != dim {
        return Err(AdaptError::DimensionMismatch {
            expected: dim,
            got: x.nrows(),
        });
    }
    if x.ncols() != d {
        return Err(AdaptError::DimensionMismatch {
            expected: d,
            got: x.ncols(),
        });
    }
    Ok(())
}

/// Principal angles between span(xs) and span(xt); `rs` completes `xs`.
///
/// Cosines alone cannot separate angles clustered near zero, so angles
/// below pi/4 take their directions from the SVD of `Rs' Xt` (the sines)
/// and the rest from the SVD of `Xs' Xt`; each angle is then
/// `atan2(|Rs' Xt v|, |Xs' Xt v|)`.
pub fn principal_angles(
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    rs: &DMatrix<f64>,
) -> Result<PrincipalAngles, AdaptError> {
    let (dim, d) = xs.shape();
    check_basis(xt, dim, d)?;
    check_basis(rs, dim, dim - d)?;
    let rows = dim - d;
    let a = xs.transpose() * xt;
    let b = rs.transpose() * xt;

    // sine SVD, zero-padded to at least d rows so every right vector exists
    let mut b_pad = DMatrix::zeros(rows.max(d), d);
    b_pad.view_mut((0, 0), (rows, d)).copy_from(&b);
    let sin_svd = jacobi_svd(&b_pad);
    let mut small: Vec<usize> = (0..d).filter(|&i| sin_svd.s[i] * sin_svd.s[i] < 0.5).collect();
    small.sort_by(|&x, &y| sin_svd.s[x].total_cmp(&sin_svd.s[y]).then(x.cmp(&y)));

    let cos_svd = jacobi_svd(&a);
    let mut large: Vec<usize> = (0..d).collect();
    large.sort_by(|&x, &y| cos_svd.s[y].total_cmp(&cos_svd.s[x]).then(x.cmp(&y)));
    let large = &large[small.len()..];

    let mut u1 = DMatrix::zeros(d, d);
    let mut u2 = DMatrix::zeros(rows, d);
    let mut v = DMatrix::zeros(d, d);
    let mut theta = DVector::zeros(d);
    let mut pending = Vec::new();
    for (k, &i) in small.iter().enumerate() {
        let vk = sin_svd.v.column(i).into_owned();
        let av = &a * &vk;
        let c = av.norm();
        let s = (&b * &vk).norm();
        theta[k] = s.atan2(c);
        u1.set_column(k, &(av / c));
        // Rs' Xt v = -U2 sin(theta)
        let col: DVector<f64> = -sin_svd.u.view((0, i), (rows, 1)).column(0);
        if col.norm() > 0.5 {
            u2.set_column(k, &(&col / col.norm()));
        } else {
            pending.push(k);
        }
        v.set_column(k, &vk);
    }
    for (k, &i) in large.iter().enumerate() {
        let k = k + small.len();
        let vk = cos_svd.v.column(i).into_owned();
        let bv = &b * &vk;
        let s = bv.norm();
        let c = (&a * &vk).norm();
        theta[k] = s.atan2(c);
        u1.set_column(k, &cos_svd.u.column(i));
        u2.set_column(k, &(-bv / s));
        v.set_column(k, &vk);
    }

    // Columns of U2 that the padded rows absorbed belong to zero angles and
    // carry no weight in G; complete them to an orthonormal set where the
    // dimension allows.
    let mut candidate = 0;
    for j in pending {
        while candidate < rows {
            let mut e = DVector::zeros(rows);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in 0..d {
                    if k != j {
                        let proj = u2.column(k).dot(&e);
                        e -= u2.column(k) * proj;
                    }
                }
            }
            let n = e.norm();
            if n > 0.5 {
                u2.set_column(j, &(e / n));
                break;
            }
        }
    }
    Ok(PrincipalAngles { theta, u1, u2, v })
}

/// Diagonal weights of the closed-form kernel, with series expansions
/// near zero where the closed forms are 0/0.
fn lambdas(theta: f64) -> (f64, f64, f64) {
    if theta < 1e-4 {
        let x = 2.0 * theta;
        let x2 = x * x;
        let sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        (1.0 + sinc, -theta + theta.powi(3) / 3.0, 1.0 - sinc)
    } else {
        let x = 2.0 * theta;
        (1.0 + x.sin() / x, (x.cos() - 1.0) / x, 1.0 - x.sin() / x)
    }
}

/// Point `Phi(t)` on the geodesic from span(Xs) at t = 0 to span(Xt) at t = 1.
pub fn geodesic_point(model: &GfkModel, t: f64) -> Result<DMatrix<f64>, AdaptError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(AdaptError::Invalid(format!("t = {t} outside [0, 1]")));
    }
    let a = &model.angles;
    let cos = DMatrix::from_diagonal(&a.theta.map(|th| (t * th).cos()));
    let sin = DMatrix::from_diagonal(&a.theta.map(|th| (t * th).sin()));
    let p = &model.subspaces.xs * &a.u1;
    let q = &model.subspaces.rs * &a.u2;
    Ok(p * cos - q * sin)
}

/// Kernel matrix from two orthonormal D x d bases.
pub fn gfk_fit_bases(xs: DMatrix<f64>, xt: DMatrix<f64>) -> Result<GfkModel, AdaptError> {
    let (dim, d) = xs.shape();
    if d == 0 || d >= dim {
        return Err(AdaptError::Invalid(format!("subspace dimension {d} not in 1..{dim}")));
    }
    check_basis(&xt, dim, d)?;
    let rs = orthonormal_complement(&xs);
    let angles = principal_angles(&xs, &xt, &rs)?;
    let p = &xs * &angles.u1;
    let q = &rs * &angles.u2;
    let mut l1 = DVector::zeros(d);
    let mut l2 = DVector::zeros(d);
    let mut l3 = DVector::zeros(d);
    for (j, &th) in angles.theta.iter().enumerate() {
        let (a, b, c) = lambdas(th);
        l1[j] = a;
        l2[j] = b;
        l3[j] = c;
    }
    let scale_cols = |m: &DMatrix<f64>, w: &DVector<f64>| {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= w[j];
        }
        out
    };
    // [P Q] [[L1 L2] [L2 L3]] [P Q]'
    let left = scale_cols(&p, &l1) + scale_cols(&q, &l2);
    let right = scale_cols(&p, &l2) + scale_cols(&q, &l3);
    let g = &left * p.transpose() + &right * q.transpose();
    let g = (&g + g.transpose()) * 0.5;
    Ok(GfkModel {
        subspaces: SubspacePair { xs, xt, rs, d },
        angles,
        g,
    })
}

/// Fit source and target PCA subspaces of dimension `d` and build G.
/// Target labels, if any, are never read.
pub fn gfk_fit(source: &FeatureSet, target: &FeatureSet, d: usize) -> Result<GfkModel, AdaptError> {
    if source.dim() != target.dim() {
        return Err(AdaptError::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    if d >= source.dim() {
        return Err(AdaptError::Invalid(format!(
            "subspace dimension {d} must be below the feature dimension {}",
            source.dim()
        )));
    }
    let xs = pca_basis(source, d)?;
    let xt = pca_basis(target, d)?;
    gfk_fit_bases(xs, xt)
}

fn check_dim(g: &DMatrix<f64>, x: &DVector<f64>) -> Result<(), AdaptError> {
    if x.len() != g.nrows() {
        return Err(AdaptError::DimensionMismatch {
            expected: g.nrows(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `xi' G xj`.
pub fn gfk_similarity(g: &DMatrix<f64>, xi: &DVector<f64>, xj: &DVector<f64>) -> Result<f64, AdaptError> {
    check_dim(g, xi)?;
    check_dim(g, xj)?;
    Ok(xi.dot(&(g * xj)))
}

/// `sqrt(max(0, (xi - xj)' G (xi - xj)))`.
pub fn gfk_distance(g: &DMatrix<f64>, xi: &DVector<f64>, xj: &DVector<f64>) -> Result<f64, AdaptError> {
    check_dim(g, xi)?;
    check_dim(g, xj)?;
    let diff = xi - xj;
    Ok(diff.dot(&(g * &diff)).max(0.0).sqrt())
}
