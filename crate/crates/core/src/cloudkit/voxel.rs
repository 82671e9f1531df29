use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::{CloudError, Point, PointCloud};

/// Replace the points of each occupied `edge`-sized voxel by their centroid.
/// Voxels are anchored at the world origin and emitted in lexicographic
/// voxel-index order.
pub fn voxel_filter(cloud: &PointCloud, edge: f64) -> Result<PointCloud, CloudError> {
    voxel_filter_anchored(cloud, edge, &Point::origin())
}

/// [`voxel_filter`] with the voxel lattice anchored at `anchor`.
pub fn voxel_filter_anchored(
    cloud: &PointCloud,
    edge: f64,
    anchor: &Point,
) -> Result<PointCloud, CloudError> {
    if !(edge.is_finite() && edge > 0.0) {
        return Err(CloudError::InvalidParams(format!("voxel edge must be > 0, got {edge}")));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vector3<f64>, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let d = p - anchor;
        let key = (
            (d.x / edge).floor() as i64,
            (d.y / edge).floor() as i64,
            (d.z / edge).floor() as i64,
        );
        let cell = cells.entry(key).or_insert((Vector3::zeros(), 0));
        cell.0 += p.coords;
        cell.1 += 1;
    }
    let points = cells
        .into_values()
        .map(|(sum, n)| Point::from(sum / n as f64))
        .collect();
    Ok(cloud.with_points(points))
}
