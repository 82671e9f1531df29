use nalgebra::Vector3;

use super::DescriptorError;
use crate::cloudkit::{k_nearest, PointCloud};

/// One unit normal per cloud point.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField(pub Vec<Vector3<f64>>);

impl NormalField {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// PCA normals over each point and its `k` nearest neighbors, oriented
/// toward the cloud's sensor origin (or +z without one).
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalField, DescriptorError> {
    if k < 3 {
        return Err(DescriptorError::Invalid(format!("k must be >= 3, got {k}")));
    }
    if cloud.len() < k + 1 {
        return Err(DescriptorError::TooFewPoints {
            have: cloud.len(),
            need: k + 1,
        });
    }
    let pts = &cloud.points;
    let normals = (0..pts.len())
        .map(|i| {
            let mut hood = k_nearest(pts, i, k);
            hood.push(i);
            let members: Vec<_> = hood.iter().map(|&j| pts[j]).collect();
            let c = crate::cloudkit::centroid(&members).expect("non-empty");
            let scatter = crate::cloudkit::plane_scatter(&members, &c);
            let (_, vecs) = crate::cloudkit::plane_eigen(scatter);
            let n = vecs[0];
            let facing = match cloud.sensor_origin {
                Some(o) => n.dot(&(o - pts[i])),
                None => n.z,
            };
            if facing < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    Ok(NormalField(normals))
}
