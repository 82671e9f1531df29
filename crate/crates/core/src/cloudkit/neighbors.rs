use std::collections::HashMap;

use super::{Point, PointCloud};

/// Indices of all points within `radius` of `center`, ascending.
pub fn radius_neighbors(cloud: &PointCloud, center: &Point, radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| (*p - center).norm_squared() <= r2)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the `k` points nearest to `points[query]`, excluding the query
/// itself. Distance ties resolve to the lower index.
pub fn k_nearest(points: &[Point], query: usize, k: usize) -> Vec<usize> {
    let q = points[query];
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query)
        .map(|(i, p)| ((p - q).norm_squared(), i))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(_, i)| i).collect()
}

/// Uniform hash grid for repeated fixed-radius queries over one cloud.
pub struct RadiusIndex<'a> {
    points: &'a [Point],
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> RadiusIndex<'a> {
    pub fn new(points: &'a [Point], radius: f64) -> Self {
        let cell = if radius > 0.0 { radius } else { 1.0 };
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    fn key(p: &Point, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Same contract as [`radius_neighbors`]; `radius` must not exceed the
    /// radius the index was built with.
    pub fn query(&self, center: &Point, radius: f64) -> Vec<usize> {
        debug_assert!(radius <= self.cell || self.cell == 1.0);
        let r2 = radius * radius;
        let (cx, cy, cz) = Self::key(center, self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(
                            bucket
                                .iter()
                                .copied()
                                .filter(|&i| (self.points[i] - center).norm_squared() <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloudkit::Modality;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                Point::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                )
            })
            .collect();
        PointCloud::new(pts, Modality::Visual)
    }

    #[test]
    fn zero_radius_hits_only_the_coincident_point() {
        let cloud = random_cloud(50, 1);
        let c = cloud.points[17];
        assert_eq!(radius_neighbors(&cloud, &c, 0.0), vec![17]);
    }

    #[test]
    fn large_radius_returns_everything() {
        let cloud = random_cloud(50, 2);
        let all: Vec<usize> = (0..50).collect();
        assert_eq!(radius_neighbors(&cloud, &Point::origin(), 10.0), all);
    }

    #[test]
    fn matches_exhaustive_scan() {
        let cloud = random_cloud(200, 3);
        let index = RadiusIndex::new(&cloud.points, 0.03);
        for q in 0..200 {
            let c = cloud.points[q];
            // independent oracle: explicit distance list
            let oracle: Vec<usize> = (0..200)
                .filter(|&i| {
                    let d = cloud.points[i] - c;
                    (d.x * d.x + d.y * d.y + d.z * d.z).sqrt() <= 0.03
                })
                .collect();
            assert_eq!(radius_neighbors(&cloud, &c, 0.03), oracle);
            assert_eq!(index.query(&c, 0.03), oracle);
        }
    }

    #[test]
    fn k_nearest_is_sorted_and_excludes_query() {
        let cloud = random_cloud(40, 4);
        let nn = k_nearest(&cloud.points, 5, 6);
        assert_eq!(nn.len(), 6);
        assert!(!nn.contains(&5));
        let d: Vec<f64> = nn
            .iter()
            .map(|&i| (cloud.points[i] - cloud.points[5]).norm())
            .collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        let max_in = d[5];
        for i in 0..40 {
            if i != 5 && !nn.contains(&i) {
                assert!((cloud.points[i] - cloud.points[5]).norm() >= max_in);
            }
        }
    }
}
