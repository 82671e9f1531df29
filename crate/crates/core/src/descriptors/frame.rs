use nalgebra::{Matrix3, Vector3};

use crate::cloudkit::{plane_eigen, Point};

/// Orthonormal frame anchored at a support center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFrame {
    pub center: Point,
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
    /// Distance from the center to the farthest point.
    pub radius: f64,
    /// Set when the weighted scatter had no distinguishable axes and the
    /// world axes were used instead.
    pub degenerate: bool,
}

impl ReferenceFrame {
    /// Coordinates of `p` in this frame.
    pub fn local(&self, p: &Point) -> Vector3<f64> {
        let d = p - self.center;
        Vector3::new(d.dot(&self.x), d.dot(&self.y), d.dot(&self.z))
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.x.transpose(), self.y.transpose(), self.z.transpose()])
    }
}

/// Flip `axis` so most point offsets project positively. An even split
/// falls back to the sign of the summed cubed projections: about the
/// centroid the plain sum vanishes, the third moment generically does not.
fn disambiguate(axis: Vector3<f64>, offsets: &[Vector3<f64>]) -> Vector3<f64> {
    let mut pos = 0usize;
    let mut neg = 0usize;
    let mut sum = 0.0;
    for d in offsets {
        let s = d.dot(&axis);
        sum += s * s * s;
        if s > 0.0 {
            pos += 1;
        } else if s < 0.0 {
            neg += 1;
        }
    }
    let flip = match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Equal => sum < 0.0,
    };
    if flip {
        -axis
    } else {
        axis
    }
}

/// Distance-weighted covariance frame around `center` (weights
/// `radius - |p - c|`). x = largest-variance axis, z = smallest,
/// y = z cross x, each sign fixed by majority vote of point offsets.
pub fn reference_frame(points: &[Point], center: &Point) -> ReferenceFrame {
    let offsets: Vec<Vector3<f64>> = points.iter().map(|p| p - center).collect();
    let radius = offsets.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let mut scatter = Matrix3::zeros();
    let mut total = 0.0;
    for d in &offsets {
        let w = radius - d.norm();
        scatter += d * d.transpose() * w;
        total += w;
    }
    let world = |degenerate| ReferenceFrame {
        center: *center,
        x: Vector3::x(),
        y: Vector3::y(),
        z: Vector3::z(),
        radius,
        degenerate,
    };
    if total <= 0.0 {
        return world(true);
    }
    scatter /= total;
    let (vals, vecs) = plane_eigen(scatter);
    let spread = vals[2] - vals[0];
    if !(spread > 1e-12 * vals[2].abs().max(f64::MIN_POSITIVE)) {
        return world(true);
    }
    let x = disambiguate(vecs[2], &offsets);
    let z = disambiguate(vecs[0], &offsets);
    let y = z.cross(&x);
    ReferenceFrame {
        center: *center,
        x,
        y,
        z,
        radius,
        degenerate: false,
    }
}
