use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{centroid, CloudError, Point};

/// Plane approximating a local surface patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPlane {
    pub centroid: Point,
    pub normal: Vector3<f64>,
    pub tangent_u: Vector3<f64>,
    pub tangent_v: Vector3<f64>,
}

impl LocalPlane {
    /// (u, v, height) coordinates of `p` in the plane frame.
    pub fn to_local(&self, p: &Point) -> Vector3<f64> {
        let d = p - self.centroid;
        Vector3::new(d.dot(&self.tangent_u), d.dot(&self.tangent_v), d.dot(&self.normal))
    }

    pub fn to_world(&self, u: f64, v: f64, h: f64) -> Point {
        self.centroid + self.tangent_u * u + self.tangent_v * v + self.normal * h
    }
}

/// Flip `v` so its largest-magnitude component is positive; ties prefer z,
/// then y.
pub(crate) fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    const TIE: f64 = 1e-12;
    let a = v.abs();
    let max = a.max();
    let axis = if (a.z - max).abs() <= TIE {
        2
    } else if (a.y - max).abs() <= TIE {
        1
    } else {
        0
    };
    if v[axis] < 0.0 {
        -v
    } else {
        v
    }
}

pub(crate) fn scatter_matrix(points: &[Point], center: &Point) -> Matrix3<f64> {
    points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - center;
        acc + d * d.transpose()
    })
}

/// Eigenpairs of a symmetric 3x3 matrix, sorted by ascending eigenvalue.
pub(crate) fn sorted_eigen(m: Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (vals, vecs)
}

/// Total-least-squares plane through `points` via PCA of their scatter.
pub fn fit_local_plane(points: &[Point]) -> Result<LocalPlane, CloudError> {
    if points.len() < 3 {
        return Err(CloudError::DegenerateNeighborhood(format!(
            "{} points, need at least 3",
            points.len()
        )));
    }
    let c = centroid(points).expect("non-empty");
    let scatter = scatter_matrix(points, &c);
    let (vals, vecs) = sorted_eigen(scatter);
    let largest = vals[2].max(0.0);
    if largest <= f64::MIN_POSITIVE || vals[1] <= 1e-12 * largest {
        return Err(CloudError::DegenerateNeighborhood(
            "points are collinear or coincident".into(),
        ));
    }
    let normal = canonical_sign(vecs[0]);
    let tangent_u = canonical_sign(vecs[2]);
    // re-orthogonalise against the normal before completing the frame
    let tangent_u = (tangent_u - normal * normal.dot(&tangent_u)).normalize();
    let tangent_v = normal.cross(&tangent_u);
    Ok(LocalPlane {
        centroid: c,
        normal,
        tangent_u,
        tangent_v,
    })
}
