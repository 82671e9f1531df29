//! Camera-like sampling of an object's top and side surfaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ObjectModel, SynthError};
use crate::cloudkit::{Modality, Point, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualSpec {
    /// Surface samples per square meter.
    pub density: f64,
    pub noise_sigma: f64,
    /// Fixed world position of the camera; occlusion is tested toward it.
    pub camera: [f64; 3],
}

impl Default for VisualSpec {
    fn default() -> Self {
        Self {
            density: 1.0e5,
            noise_sigma: 0.001,
            camera: [0.25, 0.0, 0.45],
        }
    }
}

impl VisualSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(SynthError::Invalid(format!("density must be > 0, got {}", self.density)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::Invalid(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if self.camera[2] <= 0.0 {
            return Err(SynthError::Invalid("camera must be above the table".into()));
        }
        Ok(())
    }
}

/// March from `p` toward the camera; hidden if the height field rises above
/// the ray before the ray clears the object's tallest point.
fn visible(object: &ObjectModel, p: &Point, cam: &Point, top: f64) -> bool {
    let dir = cam - p;
    let horiz = (dir.x * dir.x + dir.y * dir.y).sqrt();
    if dir.z <= 0.0 {
        return false;
    }
    let step = 0.0005;
    let t_max = ((top - p.z) / dir.z).max(0.0);
    let n = if horiz > 0.0 { (t_max * horiz / step).ceil() as usize } else { 0 };
    if n == 0 {
        return true;
    }
    // a few short steps first so points just below a rim see the rim
    let first = t_max / n as f64;
    let near = [1e-3, 1e-2, 1e-1].map(|f| f * first);
    for t in near.into_iter().chain((1..=n).map(|i| t_max * i as f64 / n as f64)) {
        let q = p + dir * t;
        if object.height_at(q.x, q.y) > q.z + 1e-9 {
            return false;
        }
    }
    true
}

/// Locate a height discontinuity between `a` and `b` by bisection on the
/// half-way height; returns its position and the heights just either side,
/// or `None` when the change is a smooth slope.
fn step_edge(object: &ObjectModel, a: (f64, f64), b: (f64, f64), min_jump: f64) -> Option<((f64, f64), f64, f64)> {
    let at = |t: f64| (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
    let h = |t: f64| {
        let (x, y) = at(t);
        object.height_at(x, y)
    };
    let (ha, hb) = (h(0.0), h(1.0));
    let half = 0.5 * (hb - ha).abs();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if (h(mid) - ha).abs() < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (h_lo, h_hi) = (h(lo), h(hi));
    if (h_hi - h_lo).abs() <= min_jump {
        return None;
    }
    Some((at(0.5 * (lo + hi)), h_lo.min(h_hi), h_lo.max(h_hi)))
}

/// Sample the visible top and side surfaces of `object` on a jittered grid.
///
/// Top samples fall one per grid cell where the object is present. Side
/// walls are found where neighboring cells differ in height by more than
/// half a cell and are filled with a vertical column at the same spacing.
pub fn sample_visual(object: &ObjectModel, spec: &VisualSpec, seed: u64) -> Result<PointCloud, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = 1.0 / spec.density.sqrt();
    let b = object.bounds();
    let (x0, y0) = (b[0] - cell, b[1] - cell);
    let nx = ((b[2] - x0) / cell).ceil() as usize + 1;
    let ny = ((b[3] - y0) / cell).ceil() as usize + 1;
    let cam = Point::new(spec.camera[0], spec.camera[1], spec.camera[2]);
    let top = object.max_height();

    let mut raw = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let x = x0 + (i as f64 + rng.random::<f64>()) * cell;
            let y = y0 + (j as f64 + rng.random::<f64>()) * cell;
            let h = object.height_at(x, y);
            if h > 0.0 {
                raw.push(Point::new(x, y, h));
            }
            for (dx, dy) in [(cell, 0.0), (0.0, cell)] {
                let hn = object.height_at(x + dx, y + dy);
                if (hn - h).abs() <= 0.5 * cell {
                    continue;
                }
                let Some(((bx, by), lo, hi)) = step_edge(object, (x, y), (x + dx, y + dy), 0.5 * cell) else {
                    continue;
                };
                let mut z = lo + rng.random::<f64>() * cell;
                while z < hi {
                    raw.push(Point::new(bx, by, z));
                    z += cell;
                }
            }
        }
    }

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let points = raw
        .into_iter()
        .filter(|p| visible(object, p, &cam, top))
        .map(|p| {
            if spec.noise_sigma > 0.0 {
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
    Ok(PointCloud::new(points, Modality::Visual)
        .with_label(object.class_id)
        .with_sensor_origin(cam))
}
