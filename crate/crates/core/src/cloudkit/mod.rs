//! Point-cloud types and the equalization pipeline (MLS resampling followed
//! by voxel-grid downsampling) that brings visual and tactile clouds to a
//! common density.

mod mls;
mod neighbors;
mod plane;
mod voxel;

pub use mls::{mean_nearest_spacing, mls_resample};
pub use neighbors::{k_nearest, radius_neighbors, RadiusIndex};
pub use plane::{fit_local_plane, LocalPlane};
pub(crate) use plane::{scatter_matrix as plane_scatter, sorted_eigen as plane_eigen};
pub use voxel::{voxel_filter, voxel_filter_anchored};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// A 3D position in meters.
pub type Point = Point3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate neighborhood: {0}")]
    DegenerateNeighborhood(String),
    #[error("invalid equalization parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
}

/// Sensing modality a cloud was acquired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Tactile,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Visual => f.write_str("visual"),
            Modality::Tactile => f.write_str("tactile"),
        }
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "visual" => Ok(Modality::Visual),
            "tactile" => Ok(Modality::Tactile),
            other => Err(format!("unknown modality '{other}'")),
        }
    }
}

/// Object-class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A labeled, modality-tagged set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub modality: Modality,
    pub label: Option<ClassId>,
    /// Viewpoint used to orient normals.
    pub sensor_origin: Option<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, modality: Modality) -> Self {
        Self {
            points,
            modality,
            label: None,
            sensor_origin: None,
        }
    }

    pub fn with_label(mut self, label: ClassId) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_sensor_origin(mut self, origin: Point) -> Self {
        self.sensor_origin = Some(origin);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy of the metadata with a different point set.
    pub fn with_points(&self, points: Vec<Point>) -> Self {
        Self {
            points,
            modality: self.modality,
            label: self.label,
            sensor_origin: self.sensor_origin,
        }
    }

    pub fn centroid(&self) -> Option<Point> {
        centroid(&self.points)
    }

    pub fn check_finite(&self) -> Result<(), CloudError> {
        match self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            Some(i) => Err(CloudError::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Rigidly move every point (and the sensor origin).
    pub fn transformed(&self, iso: &nalgebra::Isometry3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| iso * p).collect(),
            modality: self.modality,
            label: self.label,
            sensor_origin: self.sensor_origin.map(|o| iso * o),
        }
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + offset).collect(),
            modality: self.modality,
            label: self.label,
            sensor_origin: self.sensor_origin.map(|o| o + offset),
        }
    }
}

pub(crate) fn centroid(points: &[Point]) -> Option<Point> {
    if points.is_empty() {
        return None;
    }
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point::from(sum / points.len() as f64))
}

/// Parameters of the equalization pipeline. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EqualizationParams {
    pub upsample_step: f64,
    pub search_radius: f64,
    pub poly_degree: usize,
    pub voxel_edge: f64,
}

impl Default for EqualizationParams {
    fn default() -> Self {
        Self {
            upsample_step: 0.0003,
            search_radius: 0.06,
            poly_degree: 2,
            voxel_edge: 0.005,
        }
    }
}

impl EqualizationParams {
    pub fn validate(&self) -> Result<(), CloudError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.upsample_step) {
            return Err(CloudError::InvalidParams(format!(
                "upsample_step must be > 0, got {}",
                self.upsample_step
            )));
        }
        if !positive(self.search_radius) {
            return Err(CloudError::InvalidParams(format!(
                "search_radius must be > 0, got {}",
                self.search_radius
            )));
        }
        if !positive(self.voxel_edge) {
            return Err(CloudError::InvalidParams(format!(
                "voxel_edge must be > 0, got {}",
                self.voxel_edge
            )));
        }
        if !(1..=3).contains(&self.poly_degree) {
            return Err(CloudError::InvalidParams(format!(
                "poly_degree must be 1, 2 or 3, got {}",
                self.poly_degree
            )));
        }
        Ok(())
    }
}

/// MLS resampling followed by voxel filtering, anchored at the world origin.
pub fn equalize(cloud: &PointCloud, params: &EqualizationParams) -> Result<PointCloud, CloudError> {
    params.validate()?;
    let resampled = mls_resample(cloud, params)?;
    voxel_filter(&resampled, params.voxel_edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_cloud(n_side: usize, spacing: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                pts.push(Point::new(i as f64 * spacing, j as f64 * spacing, 0.02));
            }
        }
        PointCloud::new(pts, Modality::Tactile).with_label(ClassId(3))
    }

    #[test]
    fn default_params_match_published_values() {
        let p = EqualizationParams::default();
        assert_eq!(p.upsample_step, 0.0003);
        assert_eq!(p.search_radius, 0.06);
        assert_eq!(p.poly_degree, 2);
        assert_eq!(p.voxel_edge, 0.005);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = EqualizationParams::default();
        p.poly_degree = 4;
        assert!(p.validate().is_err());
        let mut p = EqualizationParams::default();
        p.voxel_edge = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn equalize_planar_cloud_stays_on_plane() {
        let cloud = plane_cloud(10, 0.004);
        let params = EqualizationParams {
            upsample_step: 0.001,
            ..Default::default()
        };
        let out = equalize(&cloud, &params).unwrap();
        assert!(!out.is_empty());
        assert_eq!(out.modality, Modality::Tactile);
        assert_eq!(out.label, Some(ClassId(3)));
        for p in &out.points {
            assert!((p.z - 0.02).abs() < 1e-9);
        }
        // at most one point per 5 mm voxel
        let mut keys: Vec<_> = out
            .points
            .iter()
            .map(|p| {
                (
                    (p.x / 0.005).floor() as i64,
                    (p.y / 0.005).floor() as i64,
                    (p.z / 0.005).floor() as i64,
                )
            })
            .collect();
        let n = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), n);
    }

    #[test]
    fn equalize_empty_is_error() {
        let cloud = PointCloud::new(vec![], Modality::Visual);
        assert_eq!(
            equalize(&cloud, &EqualizationParams::default()),
            Err(CloudError::EmptyCloud)
        );
    }

    #[test]
    fn modality_round_trips_through_text() {
        for m in [Modality::Visual, Modality::Tactile] {
            assert_eq!(m.to_string().parse::<Modality>().unwrap(), m);
        }
        assert!("sonar".parse::<Modality>().is_err());
    }
}
