//! Synthetic quasi-planar objects, camera-like visual sampling and a
//! simulated grid-press tactile exploration with a 6x6 force-module array.

mod catalog;
mod planefit;
mod shapes;
mod tactile;
mod visual;

pub use catalog::{catalog, class_name, CATALOG_SIZE};
pub use planefit::plane_removal;
pub use shapes::{Primitive, Profile, Shape};
pub use tactile::{sample_tactile, ExplorationGrid, SensorSpec, DEFAULT_GRID_PITCH};
pub use visual::{sample_visual, VisualSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloudkit::ClassId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("unknown class {0}")]
    UnknownClass(usize),
    #[error("no module ever touched the object")]
    EmptyContact,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Planar placement on the table: rotation about +z, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub yaw: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Pose {
    fn to_object(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (x - self.tx, y - self.ty);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn to_world(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        (c * x - s * y + self.tx, s * x + c * y + self.ty)
    }
}

/// A rigid height-field object resting on the table plane z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub class_id: ClassId,
    pub primitives: Vec<Primitive>,
    pub pose: Pose,
}

impl ObjectModel {
    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    /// Height above the table at world position (x, y); 0 off the object.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.pose.to_object(x, y);
        self.primitives
            .iter()
            .filter_map(|p| p.height_at(u, v))
            .fold(0.0, f64::max)
    }

    pub fn max_height(&self) -> f64 {
        self.primitives.iter().map(|p| p.height).fold(0.0, f64::max)
    }

    /// World-frame bounding box `[xmin, ymin, xmax, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &self.primitives {
            let l = p.shape.bounds();
            for (x, y) in [(l[0], l[1]), (l[2], l[1]), (l[2], l[3]), (l[0], l[3])] {
                let (wx, wy) = self.pose.to_world(x, y);
                b[0] = b[0].min(wx);
                b[1] = b[1].min(wy);
                b[2] = b[2].max(wx);
                b[3] = b[3].max(wy);
            }
        }
        b
    }

    /// Silhouette area by midpoint integration on a grid of the given cell size.
    pub fn area(&self, cell: f64) -> f64 {
        let b = self.bounds();
        let nx = ((b[2] - b[0]) / cell).ceil() as usize;
        let ny = ((b[3] - b[1]) / cell).ceil() as usize;
        let mut inside = 0usize;
        for j in 0..ny {
            for i in 0..nx {
                let x = b[0] + (i as f64 + 0.5) * cell;
                let y = b[1] + (j as f64 + 0.5) * cell;
                inside += usize::from(self.height_at(x, y) > 0.0);
            }
        }
        inside as f64 * cell * cell
    }
}

/// A jittered instance of catalog class `class_id` in a random planar pose.
///
/// The whole shape is scaled by one factor in [0.98, 1.02] and each
/// primitive gets an aspect factor in [0.977, 1.023] (long side times it,
/// short side divided by it), so every dimension stays within 5% of nominal.
/// Heights vary independently by up to 5%.
pub fn make_object(class_id: ClassId, seed: u64) -> Result<ObjectModel, SynthError> {
    let nominal = catalog()
        .into_iter()
        .nth(class_id.0)
        .ok_or(SynthError::UnknownClass(class_id.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((class_id.0 as u64) << 48));
    let s = rng.random_range(0.98..=1.02);
    let primitives = nominal
        .into_iter()
        .map(|p| {
            let aspect = rng.random_range(0.977..=1.023);
            Primitive {
                shape: p.shape.scaled(s, aspect),
                height: p.height * rng.random_range(0.95..=1.05),
                profile: p.profile,
            }
        })
        .collect();
    let pose = Pose {
        yaw: rng.random_range(0.0..std::f64::consts::TAU),
        tx: rng.random_range(-0.02..=0.02),
        ty: rng.random_range(-0.02..=0.02),
    };
    Ok(ObjectModel {
        class_id,
        primitives,
        pose,
    })
}
