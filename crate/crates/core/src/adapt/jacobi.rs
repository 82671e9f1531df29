//! One-sided (Hestenes) Jacobi SVD. Slower than bidiagonalization but
//! accurate to working precision on clustered singular values, which the
//! principal-angle computation depends on.

use nalgebra::{DMatrix, DVector};

pub(crate) struct JacobiSvd {
    /// m x n with orthonormal columns.
    pub u: DMatrix<f64>,
    /// Unsorted; `a v_j = s_j u_j`.
    pub s: DVector<f64>,
    /// n x n orthogonal.
    pub v: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 80;

/// Thin SVD of an m x n matrix with m >= n.
pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> JacobiSvd {
    let (m, n) = a.shape();
    assert!(m >= n, "jacobi_svd needs rows >= cols");
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let s = DVector::from_iterator(n, w.column_iter().map(|c| c.norm()));
    let smax = s.max();
    let mut u = DMatrix::zeros(m, n);
    let mut empty = Vec::new();
    for j in 0..n {
        if s[j] > smax * 1e-300 && s[j] > 0.0 {
            u.set_column(j, &(w.column(j) / s[j]));
        } else {
            empty.push(j);
        }
    }
    // zero singular values: complete U with orthonormal directions
    let mut candidate = 0;
    for j in empty {
        while candidate < m {
            let mut e = DVector::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in 0..n {
                    if k != j {
                        let proj = u.column(k).dot(&e);
                        e -= u.column(k) * proj;
                    }
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                u.set_column(j, &(e / norm));
                break;
            }
        }
    }
    JacobiSvd { u, s, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check(a: &DMatrix<f64>, tol: f64) {
        let svd = jacobi_svd(a);
        let n = a.ncols();
        let recon = &svd.u * DMatrix::from_diagonal(&svd.s) * svd.v.transpose();
        assert!((recon - a).amax() <= tol * a.amax().max(1.0));
        assert!((svd.u.transpose() * &svd.u - DMatrix::identity(n, n)).amax() < 1e-12);
        assert!((svd.v.transpose() * &svd.v - DMatrix::identity(n, n)).amax() < 1e-12);
        assert!(svd.s.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn diagonal_and_zero() {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, 0.0, 1.0]));
        let svd = jacobi_svd(&a);
        let mut s: Vec<f64> = svd.s.iter().cloned().collect();
        s.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(s, vec![0.0, 1.0, 3.0]);
        check(&a, 1e-15);
        check(&DMatrix::zeros(4, 3), 1e-15);
    }

    #[test]
    fn clustered_near_one() {
        // orthonormal columns perturbed by tiny rotations: singular values
        // within 1e-10 of one another
        let q = DMatrix::from_fn(9, 8, |r, c| ((r * 7 + c * 3) % 11) as f64 - 5.0).qr().q();
        let mut a = q.rows(0, 8).into_owned();
        a[(0, 0)] += 1e-10;
        check(&a, 1e-14);
        let s = jacobi_svd(&a).s;
        assert!(s.iter().all(|v| *v <= 1.0 + 1e-9));
    }

    proptest! {
        #[test]
        fn reconstructs_random(vals in prop::collection::vec(-1.0f64..1.0, 30), rank_cut in 0usize..5) {
            let mut a = DMatrix::from_row_slice(6, 5, &vals);
            for c in 0..rank_cut.min(4) {
                let col = a.column(4).into_owned();
                a.set_column(c, &col);
            }
            check(&a, 1e-13);
        }
    }
}
