//! Global SHOT signature: one histogram set anchored at the cloud centroid
//! with the whole cloud as support.

use std::f64::consts::PI;

use super::{reference_frame, Descriptor, DescriptorError, DescriptorKind, NormalField, ReferenceFrame, SHOT_LEN};
use crate::cloudkit::{centroid, PointCloud};

pub const SHOT_DIVISIONS: usize = 32;
pub const SHOT_BINS: usize = 11;
const AZIMUTH: usize = 8;

fn division(local: &nalgebra::Vector3<f64>, radius: f64) -> usize {
    let az = local.y.atan2(local.x); // [-pi, pi]
    let az_bin = (((az + PI) / (2.0 * PI) * AZIMUTH as f64).floor() as usize).min(AZIMUTH - 1);
    let el = usize::from(local.z >= 0.0);
    let rad = usize::from(local.norm() >= 0.5 * radius);
    (az_bin * 2 + el) * 2 + rad
}

fn cos_bin(c: f64) -> usize {
    let b = ((c.clamp(-1.0, 1.0) + 1.0) * 0.5 * SHOT_BINS as f64).floor();
    (b as usize).min(SHOT_BINS - 1)
}

/// SHOT descriptor plus the reference frame it was computed in.
pub fn shot_with_frame(
    cloud: &PointCloud,
    normals: &NormalField,
) -> Result<(Descriptor, ReferenceFrame), DescriptorError> {
    if cloud.len() < 3 {
        return Err(DescriptorError::TooFewPoints {
            have: cloud.len(),
            need: 3,
        });
    }
    if normals.len() != cloud.len() {
        return Err(DescriptorError::NormalCount {
            normals: normals.len(),
            points: cloud.len(),
        });
    }
    let c = centroid(&cloud.points).expect("non-empty");
    let frame = reference_frame(&cloud.points, &c);
    if frame.degenerate {
        log::warn!("SHOT reference frame is degenerate; using world axes");
    }
    let mut values = vec![0.0; SHOT_LEN];
    for (p, n) in cloud.points.iter().zip(&normals.0) {
        let local = frame.local(p);
        let div = division(&local, frame.radius);
        values[div * SHOT_BINS + cos_bin(n.dot(&frame.z))] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok((Descriptor::new(DescriptorKind::Shot, values)?, frame))
}

/// Unit-norm SHOT descriptor of the whole cloud, anchored at its centroid.
pub fn compute_shot(cloud: &PointCloud, normals: &NormalField) -> Result<Descriptor, DescriptorError> {
    shot_with_frame(cloud, normals).map(|(d, _)| d)
}
