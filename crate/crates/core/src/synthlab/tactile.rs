//! Grid-press tactile exploration with a square array of force modules.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ObjectModel, SynthError};
use crate::cloudkit::{Modality, Point, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub modules_per_side: usize,
    /// Edge of the whole array, meters.
    pub array_edge: f64,
    /// Minimum module force for a contact point, newtons.
    pub force_threshold: f64,
    /// Linear spring constant of a module, N/m.
    pub contact_stiffness: f64,
    /// How far the array travels past first contact, meters.
    pub press_depth: f64,
    pub noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            modules_per_side: 6,
            array_edge: 0.05,
            force_threshold: 0.8,
            contact_stiffness: 400.0,
            press_depth: 0.003,
            noise_sigma: 0.0005,
        }
    }
}

impl SensorSpec {
    pub fn module_pitch(&self) -> f64 {
        self.array_edge / self.modules_per_side as f64
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.modules_per_side == 0 {
            return Err(SynthError::Invalid("modules_per_side must be >= 1".into()));
        }
        for (name, v) in [
            ("array_edge", self.array_edge),
            ("force_threshold", self.force_threshold),
            ("contact_stiffness", self.contact_stiffness),
            ("press_depth", self.press_depth),
        ] {
            if !positive(v) {
                return Err(SynthError::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::Invalid(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// Module centers of the array placed at vertex (vx, vy).
    fn modules(&self, vx: f64, vy: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = self.modules_per_side;
        let pitch = self.module_pitch();
        let half = (m as f64 - 1.0) / 2.0;
        (0..m).flat_map(move |b| {
            (0..m).map(move |a| (vx + (a as f64 - half) * pitch, vy + (b as f64 - half) * pitch))
        })
    }
}

/// Press locations, visited in row-major order (y rows, x within a row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationGrid {
    pub vertices: Vec<(f64, f64)>,
    pub pitch: f64,
}

/// Default spacing between presses: half the array edge.
pub const DEFAULT_GRID_PITCH: f64 = 0.025;

impl ExplorationGrid {
    /// Vertices from the bounding-box minimum up to and including the first
    /// vertex past the maximum, in both axes.
    pub fn covering(object: &ObjectModel, pitch: f64) -> Result<Self, SynthError> {
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(SynthError::Invalid(format!("grid pitch must be > 0, got {pitch}")));
        }
        let b = object.bounds();
        let nx = ((b[2] - b[0]) / pitch).ceil() as usize;
        let ny = ((b[3] - b[1]) / pitch).ceil() as usize;
        let vertices = (0..=ny)
            .flat_map(|j| (0..=nx).map(move |i| (b[0] + i as f64 * pitch, b[1] + j as f64 * pitch)))
            .collect();
        Ok(Self { vertices, pitch })
    }
}

/// Module positions quantized to 1 nm so that coincident modules from
/// different presses collapse to one key.
fn key(x: f64, y: f64) -> (i64, i64) {
    ((x * 1e9).round() as i64, (y * 1e9).round() as i64)
}

/// Press the array on every grid vertex and collect thresholded contacts.
///
/// The array descends until its first module touches the highest point
/// under it (`h_contact`), then travels `press_depth` further; module i
/// feels `k * max(0, depth - (h_contact - h_i))`.
pub fn sample_tactile(
    object: &ObjectModel,
    sensor: &SensorSpec,
    grid: &ExplorationGrid,
    seed: u64,
) -> Result<PointCloud, SynthError> {
    sensor.validate()?;
    let mut contacts: BTreeMap<(i64, i64), Point> = BTreeMap::new();
    for &(vx, vy) in &grid.vertices {
        let heights: Vec<(f64, f64, f64)> = sensor.modules(vx, vy).map(|(x, y)| (x, y, object.height_at(x, y))).collect();
        let h_contact = heights.iter().map(|m| m.2).fold(0.0, f64::max);
        if h_contact <= 0.0 {
            continue;
        }
        for &(x, y, h) in &heights {
            let force = sensor.contact_stiffness * (sensor.press_depth - (h_contact - h)).max(0.0);
            if force >= sensor.force_threshold && h > 0.0 {
                contacts.entry(key(x, y)).or_insert(Point::new(x, y, h));
            }
        }
    }
    if contacts.is_empty() {
        return Err(SynthError::EmptyContact);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sensor.noise_sigma).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let points = contacts
        .into_values()
        .map(|p| {
            if sensor.noise_sigma > 0.0 {
                Point::new(
                    p.x + noise.sample(&mut rng),
                    p.y + noise.sample(&mut rng),
                    p.z + noise.sample(&mut rng),
                )
            } else {
                p
            }
        })
        .collect();
    Ok(PointCloud::new(points, Modality::Tactile).with_label(object.class_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloudkit::ClassId;
    use crate::synthlab::{make_object, sample_visual, Pose, Primitive, Profile, Shape, VisualSpec, CATALOG_SIZE};

    fn plate(len: f64, h: f64) -> ObjectModel {
        ObjectModel {
            class_id: ClassId(1),
            primitives: vec![Primitive {
                shape: Shape::Rect {
                    cx: 0.0,
                    cy: 0.0,
                    len,
                    wid: len,
                    angle: 0.0,
                },
                height: h,
                profile: Profile::Flat,
            }],
            pose: Pose::default(),
        }
    }

    #[test]
    fn default_threshold() {
        assert_eq!(SensorSpec::default().force_threshold, 0.8);
        assert!((SensorSpec::default().module_pitch() - 0.05 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_press_on_plate_gives_36_points() {
        // every module sees the same height, so each feels k * depth = 2 N
        let sensor = SensorSpec {
            contact_stiffness: 400.0,
            press_depth: 0.005,
            noise_sigma: 0.0002,
            ..SensorSpec::default()
        };
        assert!((sensor.contact_stiffness * sensor.press_depth - 2.0).abs() < 1e-12);
        let grid = ExplorationGrid {
            vertices: vec![(0.0, 0.0)],
            pitch: 0.025,
        };
        let cloud = sample_tactile(&plate(0.1, 0.01), &sensor, &grid, 3).unwrap();
        assert_eq!(cloud.len(), 36);
        let pitch = sensor.module_pitch();
        for p in &cloud.points {
            assert!((p.z - 0.01).abs() <= 4.0 * sensor.noise_sigma);
            // near a module center
            let gx = (p.x / pitch - 0.5).round() + 0.5;
            let gy = (p.y / pitch - 0.5).round() + 0.5;
            assert!((p.x - gx * pitch).abs() <= 4.0 * sensor.noise_sigma);
            assert!((p.y - gy * pitch).abs() <= 4.0 * sensor.noise_sigma);
        }
    }

    #[test]
    fn overlapping_presses_deduplicate() {
        let sensor = SensorSpec {
            noise_sigma: 0.0,
            ..SensorSpec::default()
        };
        let obj = plate(0.2, 0.01);
        let grid = ExplorationGrid {
            vertices: vec![(0.0, 0.0), (0.025, 0.0)],
            pitch: 0.025,
        };
        // second press shifts by three module pitches: 18 new modules
        let cloud = sample_tactile(&obj, &sensor, &grid, 0).unwrap();
        assert_eq!(cloud.len(), 54);
    }

    #[test]
    fn absent_object_is_empty_contact() {
        let grid = ExplorationGrid {
            vertices: vec![(1.0, 1.0), (1.025, 1.0)],
            pitch: 0.025,
        };
        assert_eq!(
            sample_tactile(&plate(0.05, 0.01), &SensorSpec::default(), &grid, 0),
            Err(SynthError::EmptyContact)
        );
    }

    #[test]
    fn only_near_top_modules_fire() {
        // a step: low half at 5 mm, high half at 20 mm; within one press
        // only the high half reaches the threshold
        let obj = ObjectModel {
            class_id: ClassId(0),
            primitives: vec![
                Primitive {
                    shape: Shape::Rect {
                        cx: 0.0,
                        cy: 0.0,
                        len: 0.1,
                        wid: 0.1,
                        angle: 0.0,
                    },
                    height: 0.005,
                    profile: Profile::Flat,
                },
                Primitive {
                    shape: Shape::Rect {
                        cx: 0.025,
                        cy: 0.0,
                        len: 0.05,
                        wid: 0.1,
                        angle: 0.0,
                    },
                    height: 0.02,
                    profile: Profile::Flat,
                },
            ],
            pose: Pose::default(),
        };
        let sensor = SensorSpec {
            noise_sigma: 0.0,
            ..SensorSpec::default()
        };
        let grid = ExplorationGrid {
            vertices: vec![(0.0, 0.0)],
            pitch: 0.025,
        };
        let cloud = sample_tactile(&obj, &sensor, &grid, 0).unwrap();
        assert_eq!(cloud.len(), 18);
        assert!(cloud.points.iter().all(|p| p.z == 0.02 && p.x > 0.0));
    }

    #[test]
    fn contacts_lie_on_top_surface_and_respect_threshold() {
        let sensor = SensorSpec::default();
        for c in 0..CATALOG_SIZE {
            let obj = make_object(ClassId(c), 7).unwrap();
            let grid = ExplorationGrid::covering(&obj, DEFAULT_GRID_PITCH).unwrap();
            let clean = sample_tactile(
                &obj,
                &SensorSpec {
                    noise_sigma: 0.0,
                    ..sensor
                },
                &grid,
                1,
            )
            .unwrap();
            for p in &clean.points {
                assert_eq!(p.z, obj.height_at(p.x, p.y));
                assert!(p.z > 0.0);
            }
            let noisy = sample_tactile(&obj, &sensor, &grid, 1).unwrap();
            assert_eq!(noisy.len(), clean.len());
            for (a, b) in noisy.points.iter().zip(&clean.points) {
                assert!((a - b).norm() <= 4.0 * sensor.noise_sigma * 3f64.sqrt());
            }
            assert_eq!(noisy, sample_tactile(&obj, &sensor, &grid, 1).unwrap());
        }
    }

    #[test]
    fn grid_is_row_major_and_covers_bounds() {
        let obj = make_object(ClassId(3), 2).unwrap();
        let grid = ExplorationGrid::covering(&obj, 0.025).unwrap();
        let b = obj.bounds();
        for w in grid.vertices.windows(2) {
            assert!(w[0].1 < w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
        let last = grid.vertices.last().unwrap();
        assert!(last.0 >= b[2] && last.1 >= b[3]);
        assert_eq!(grid.vertices[0], (b[0], b[1]));
        assert!(ExplorationGrid::covering(&obj, 0.0).is_err());
    }

    #[test]
    fn visual_clouds_much_denser_than_tactile() {
        for c in 0..CATALOG_SIZE {
            let obj = make_object(ClassId(c), 21).unwrap();
            let v = sample_visual(&obj, &VisualSpec::default(), 1).unwrap();
            let grid = ExplorationGrid::covering(&obj, DEFAULT_GRID_PITCH).unwrap();
            let t = sample_tactile(&obj, &SensorSpec::default(), &grid, 1).unwrap();
            assert!(v.len() as f64 >= 5.0 * t.len() as f64, "class {c}: {} vs {}", v.len(), t.len());
        }
    }
}
