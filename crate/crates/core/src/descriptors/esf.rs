//! Ensemble of Shape Functions.
//!
//! Random point triplets are drawn and three shape functions are collected:
//! pairwise distances (D2), triangle angles (A3) and square roots of
//! triangle areas (D3). Each value is classified by tracing the connecting
//! line(s) through a 64^3 occupancy grid of the cloud: fully occupied lines
//! are "in", fully empty ones "out", anything else "mixed". The grid lives
//! in the cloud's own reference frame so the descriptor does not depend on
//! the cloud's pose.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{reference_frame, Descriptor, DescriptorError, DescriptorKind, ESF_LEN};
use crate::cloudkit::{centroid, PointCloud};

pub const ESF_BINS: usize = 64;
pub const ESF_HISTOGRAMS: usize = 10;
const GRID: usize = 64;

// first slot of each histogram group; in/out/mixed follow in that order
const D2_IN: usize = 0;
const D2_RATIO: usize = 3;
const A3_IN: usize = 4;
const D3_IN: usize = 7;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum LineClass {
    In = 0,
    Out = 1,
    Mixed = 2,
}

struct Occupancy {
    cells: Vec<bool>,
}

impl Occupancy {
    fn occupied(&self, v: [i64; 3]) -> bool {
        self.cells[(v[0] as usize * GRID + v[1] as usize) * GRID + v[2] as usize]
    }

    /// Classify the voxel line strictly between `a` and `b` (3D Bresenham)
    /// and return the occupied fraction.
    fn trace(&self, a: [i64; 3], b: [i64; 3]) -> (LineClass, f64) {
        let mut total = 0usize;
        let mut hit = 0usize;
        bresenham(a, b, |v| {
            if v != a && v != b {
                total += 1;
                if self.occupied(v) {
                    hit += 1;
                }
            }
        });
        if total == 0 {
            return (LineClass::In, 1.0);
        }
        let ratio = hit as f64 / total as f64;
        let class = if hit == total {
            LineClass::In
        } else if hit == 0 {
            LineClass::Out
        } else {
            LineClass::Mixed
        };
        (class, ratio)
    }
}

fn bresenham(a: [i64; 3], b: [i64; 3], mut visit: impl FnMut([i64; 3])) {
    let d = [(b[0] - a[0]).abs(), (b[1] - a[1]).abs(), (b[2] - a[2]).abs()];
    let s = [
        (b[0] - a[0]).signum(),
        (b[1] - a[1]).signum(),
        (b[2] - a[2]).signum(),
    ];
    let major = if d[0] >= d[1] && d[0] >= d[2] {
        0
    } else if d[1] >= d[2] {
        1
    } else {
        2
    };
    let (m1, m2) = match major {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut p = a;
    let mut e1 = 2 * d[m1] - d[major];
    let mut e2 = 2 * d[m2] - d[major];
    visit(p);
    for _ in 0..d[major] {
        if e1 > 0 {
            p[m1] += s[m1];
            e1 -= 2 * d[major];
        }
        if e2 > 0 {
            p[m2] += s[m2];
            e2 -= 2 * d[major];
        }
        e1 += 2 * d[m1];
        e2 += 2 * d[m2];
        p[major] += s[major];
        visit(p);
    }
}

fn bin(value: f64) -> usize {
    let b = (value * ESF_BINS as f64).floor();
    if b.is_nan() || b < 0.0 {
        0
    } else {
        (b as usize).min(ESF_BINS - 1)
    }
}

/// ESF descriptor from `n_samples` seeded random triplets.
///
/// Histogram order: D2-in, D2-out, D2-mixed, D2-ratio, A3-in, A3-out,
/// A3-mixed, D3-in, D3-out, D3-mixed. Each histogram sums to one; a
/// histogram that received no samples is uniform.
pub fn compute_esf(cloud: &PointCloud, n_samples: usize, seed: u64) -> Result<Descriptor, DescriptorError> {
    let n = cloud.len();
    if n < 3 {
        return Err(DescriptorError::TooFewPoints { have: n, need: 3 });
    }
    if n_samples == 0 {
        return Err(DescriptorError::Invalid("n_samples must be positive".into()));
    }
    let c = centroid(&cloud.points).expect("non-empty");
    let frame = reference_frame(&cloud.points, &c);
    let local: Vec<[f64; 3]> = cloud
        .points
        .iter()
        .map(|p| {
            let l = frame.local(p);
            [l.x, l.y, l.z]
        })
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &local {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let diag = (extent[0].powi(2) + extent[1].powi(2) + extent[2].powi(2)).sqrt();
    let edge = extent.iter().cloned().fold(0.0, f64::max);
    let cell_scale = if edge > 0.0 { GRID as f64 / edge } else { 0.0 };

    let voxels: Vec<[i64; 3]> = local
        .iter()
        .map(|p| {
            let mut v = [0i64; 3];
            for a in 0..3 {
                v[a] = (((p[a] - lo[a]) * cell_scale).floor() as i64).clamp(0, GRID as i64 - 1);
            }
            v
        })
        .collect();
    let mut grid = Occupancy {
        cells: vec![false; GRID * GRID * GRID],
    };
    for v in &voxels {
        grid.cells[(v[0] as usize * GRID + v[1] as usize) * GRID + v[2] as usize] = true;
    }

    let dist = |i: usize, j: usize| -> f64 {
        let (a, b) = (&local[i], &local[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    // largest triangle inside the enclosing sphere of the bounding box
    let max_area = 3.0 * 3f64.sqrt() / 16.0 * diag * diag;

    let mut hist = vec![[0.0f64; ESF_BINS]; ESF_HISTOGRAMS];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        while j == i {
            j = rng.random_range(0..n);
        }
        let mut k = rng.random_range(0..n);
        while k == i || k == j {
            k = rng.random_range(0..n);
        }
        let tri = [i, j, k];
        // sides: opposite vertex 0 is (j,k), opposite 1 is (i,k), opposite 2 is (i,j)
        let sides = [(j, k), (i, k), (i, j)];
        let mut classes = [LineClass::In; 3];
        for (s, &(a, b)) in sides.iter().enumerate() {
            let (class, ratio) = grid.trace(voxels[a], voxels[b]);
            let len = dist(a, b);
            classes[s] = class;
            let d2 = if diag > 0.0 { len / diag } else { 0.0 };
            hist[D2_IN + class as usize][bin(d2)] += 1.0;
            hist[D2_RATIO][bin(ratio)] += 1.0;
        }
        for v in 0..3 {
            let (p, q, r) = (tri[v], tri[(v + 1) % 3], tri[(v + 2) % 3]);
            let u = sub(&local[q], &local[p]);
            let w = sub(&local[r], &local[p]);
            let nu = norm(&u);
            let nw = norm(&w);
            if nu == 0.0 || nw == 0.0 {
                continue;
            }
            let cos = (dot(&u, &w) / (nu * nw)).clamp(-1.0, 1.0);
            let angle = cos.acos() / std::f64::consts::PI;
            hist[A3_IN + classes[v] as usize][bin(angle)] += 1.0;
        }
        let u = sub(&local[j], &local[i]);
        let w = sub(&local[k], &local[i]);
        let area = 0.5 * norm(&cross(&u, &w));
        let d3 = if max_area > 0.0 { (area / max_area).sqrt() } else { 0.0 };
        let class = if classes.iter().all(|&c| c == LineClass::In) {
            LineClass::In
        } else if classes.iter().all(|&c| c == LineClass::Out) {
            LineClass::Out
        } else {
            LineClass::Mixed
        };
        hist[D3_IN + class as usize][bin(d3)] += 1.0;
    }

    let mut values = Vec::with_capacity(ESF_LEN);
    for h in &hist {
        let total: f64 = h.iter().sum();
        if total > 0.0 {
            values.extend(h.iter().map(|c| c / total));
        } else {
            values.extend(std::iter::repeat_n(1.0 / ESF_BINS as f64, ESF_BINS));
        }
    }
    Descriptor::new(DescriptorKind::Esf, values)
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
