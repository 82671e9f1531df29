//! Dominant-plane removal by random plane hypotheses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthError;
use crate::cloudkit::{Point, PointCloud};

const HYPOTHESES: usize = 500;

/// Drop every point within `epsilon` of the plane supported by the most
/// points among seeded three-point hypotheses (earliest hypothesis wins ties).
pub fn plane_removal(cloud: &PointCloud, epsilon: f64, seed: u64) -> Result<PointCloud, SynthError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(SynthError::Invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inlier = |n: &nalgebra::Vector3<f64>, o: &Point, p: &Point| n.dot(&(p - o)).abs() <= epsilon;
    let mut best: Option<(usize, nalgebra::Vector3<f64>, Point)> = None;
    for _ in 0..HYPOTHESES {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        let k = rng.random_range(0..pts.len());
        if i == j || j == k || i == k {
            continue;
        }
        let n = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        let norm = n.norm();
        if norm <= 1e-12 {
            continue;
        }
        let n = n / norm;
        let count = pts.iter().filter(|p| inlier(&n, &pts[i], p)).count();
        if best.as_ref().is_none_or(|b| count > b.0) {
            best = Some((count, n, pts[i]));
        }
    }
    let Some((_, n, o)) = best else {
        return Ok(cloud.clone());
    };
    Ok(cloud.with_points(pts.iter().filter(|p| !inlier(&n, &o, p)).copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloudkit::Modality;

    fn table(n: usize) -> Vec<Point> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                v.push(Point::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        v
    }

    #[test]
    fn plane_only_becomes_empty() {
        let c = PointCloud::new(table(20), Modality::Visual);
        assert!(plane_removal(&c, 0.002, 1).unwrap().is_empty());
    }

    #[test]
    fn elevated_points_survive() {
        let mut pts = table(20);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let elevated: Vec<Point> = (0..50)
            .map(|_| Point::new(rng.random_range(0.0..0.19), rng.random_range(0.0..0.19), 0.02))
            .collect();
        pts.extend(&elevated);
        let out = plane_removal(&PointCloud::new(pts, Modality::Visual), 0.002, 3).unwrap();
        assert_eq!(out.points, elevated);
    }

    #[test]
    fn zero_epsilon_removes_only_exact_plane_points() {
        let mut pts = table(15);
        pts.push(Point::new(0.05, 0.05, 1e-9));
        pts.push(Point::new(0.02, 0.07, -1e-9));
        let out = plane_removal(&PointCloud::new(pts, Modality::Visual), 0.0, 4).unwrap();
        assert_eq!(out.len(), 2);
        assert!(plane_removal(&out, -1.0, 0).is_err());
    }

    #[test]
    fn seeded_and_deterministic() {
        let mut pts = table(10);
        pts.push(Point::new(0.0, 0.0, 0.05));
        let c = PointCloud::new(pts, Modality::Tactile);
        assert_eq!(plane_removal(&c, 0.001, 9).unwrap(), plane_removal(&c, 0.001, 9).unwrap());
    }
}
