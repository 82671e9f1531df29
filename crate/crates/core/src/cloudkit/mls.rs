use nalgebra::{DMatrix, DVector};

use super::{fit_local_plane, CloudError, EqualizationParams, LocalPlane, Point, PointCloud, RadiusIndex};

/// Mean distance from each point to its nearest other point (0 for fewer
/// than two points).
pub fn mean_nearest_spacing(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let best = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| (q - p).norm_squared())
            .fold(f64::INFINITY, f64::min);
        total += best.sqrt();
    }
    total / points.len() as f64
}

/// Bivariate polynomial of total degree `degree` in scaled plane coordinates.
struct HeightPolynomial {
    degree: usize,
    scale: f64,
    coeffs: DVector<f64>,
}

fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

fn monomials(degree: usize, s: f64, t: f64, out: &mut [f64]) {
    let mut k = 0;
    for total in 0..=degree {
        for b in 0..=total {
            let a = total - b;
            out[k] = s.powi(a as i32) * t.powi(b as i32);
            k += 1;
        }
    }
}

impl HeightPolynomial {
    /// Least-squares fit; steps down in degree when the system is
    /// under-determined or rank deficient.
    fn fit(local: &[(f64, f64, f64)], max_degree: usize, scale: f64) -> Option<Self> {
        for degree in (1..=max_degree).rev() {
            let m = monomial_count(degree);
            if local.len() < m {
                continue;
            }
            let mut a = DMatrix::zeros(local.len(), m);
            let mut b = DVector::zeros(local.len());
            let mut row = vec![0.0; m];
            for (r, &(u, v, h)) in local.iter().enumerate() {
                monomials(degree, u / scale, v / scale, &mut row);
                for (c, val) in row.iter().enumerate() {
                    a[(r, c)] = *val;
                }
                b[r] = h;
            }
            let qr = a.qr();
            let rmat = qr.r();
            let diag: Vec<f64> = (0..m).map(|i| rmat[(i, i)].abs()).collect();
            let dmax = diag.iter().cloned().fold(0.0, f64::max);
            if dmax == 0.0 || diag.iter().any(|&d| d <= 1e-9 * dmax) {
                continue;
            }
            let qtb = qr.q().transpose() * b;
            if let Some(coeffs) = rmat.solve_upper_triangular(&qtb) {
                if coeffs.iter().all(|c| c.is_finite()) {
                    return Some(Self {
                        degree,
                        scale,
                        coeffs,
                    });
                }
            }
        }
        None
    }

    fn eval(&self, u: f64, v: f64, buf: &mut [f64]) -> f64 {
        let m = monomial_count(self.degree);
        monomials(self.degree, u / self.scale, v / self.scale, &mut buf[..m]);
        buf[..m]
            .iter()
            .zip(self.coeffs.iter())
            .map(|(a, c)| a * c)
            .sum()
    }
}

/// Moving-least-squares resampling.
///
/// Every query point fits a local plane and a height polynomial to its
/// `search_radius` neighborhood, then emits the nodes of an
/// `upsample_step` grid (anchored at the projected neighborhood's bounding
/// box) that fall in its own projected cell: nodes whose nearest projected
/// neighbor is the query point and lie within `mean spacing + 2 * step` of
/// it. Neighborhoods with fewer than three points, or that are degenerate,
/// pass the query point through unchanged.
pub fn mls_resample(cloud: &PointCloud, params: &EqualizationParams) -> Result<PointCloud, CloudError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    cloud.check_finite()?;
    let points = &cloud.points;
    let step = params.upsample_step;
    let radius = params.search_radius;
    let reach = mean_nearest_spacing(points) + 2.0 * step;
    let index = RadiusIndex::new(points, radius);

    let mut out = Vec::new();
    let mut buf = [0.0; 10];
    for (qi, query) in points.iter().enumerate() {
        let hood = index.query(query, radius);
        let hood_points: Vec<Point> = hood.iter().map(|&i| points[i]).collect();
        let plane = match fit_local_plane(&hood_points) {
            Ok(p) => p,
            Err(_) => {
                out.push(*query);
                continue;
            }
        };
        let local: Vec<(f64, f64, f64)> = hood_points
            .iter()
            .map(|p| {
                let l = plane.to_local(p);
                (l.x, l.y, l.z)
            })
            .collect();
        let poly = match HeightPolynomial::fit(&local, params.poly_degree, radius) {
            Some(p) => p,
            None => {
                out.push(*query);
                continue;
            }
        };
        emit_cell(qi, &hood, &local, &plane, &poly, step, reach, &mut buf, &mut out);
    }
    Ok(cloud.with_points(out))
}

#[allow(clippy::too_many_arguments)]
fn emit_cell(
    query: usize,
    hood: &[usize],
    local: &[(f64, f64, f64)],
    plane: &LocalPlane,
    poly: &HeightPolynomial,
    step: f64,
    reach: f64,
    buf: &mut [f64],
    out: &mut Vec<Point>,
) {
    let self_pos = hood.binary_search(&query).expect("query is its own neighbor");
    let (u0, v0, _) = local[self_pos];
    let (mut umin, mut vmin, mut umax, mut vmax) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(u, v, _) in local {
        umin = umin.min(u);
        vmin = vmin.min(v);
        umax = umax.max(u);
        vmax = vmax.max(v);
    }
    // neighbors that could own a node inside our reach
    let competitors: Vec<(f64, f64, usize)> = hood
        .iter()
        .zip(local)
        .filter(|(&j, &(u, v, _))| {
            j != query && (u - u0).powi(2) + (v - v0).powi(2) <= 4.0 * reach * reach
        })
        .map(|(&j, &(u, v, _))| (u, v, j))
        .collect();

    let nu = ((umax - umin) / step).floor() as i64;
    let nv = ((vmax - vmin) / step).floor() as i64;
    let a_lo = (((u0 - reach - umin) / step).ceil() as i64).max(0);
    let a_hi = (((u0 + reach - umin) / step).floor() as i64).min(nu);
    let b_lo = (((v0 - reach - vmin) / step).ceil() as i64).max(0);
    let b_hi = (((v0 + reach - vmin) / step).floor() as i64).min(nv);
    let reach2 = reach * reach;
    for a in a_lo..=a_hi {
        let u = umin + a as f64 * step;
        for b in b_lo..=b_hi {
            let v = vmin + b as f64 * step;
            let d_self = (u - u0).powi(2) + (v - v0).powi(2);
            if d_self > reach2 {
                continue;
            }
            let owned = competitors.iter().all(|&(cu, cv, j)| {
                let d = (u - cu).powi(2) + (v - cv).powi(2);
                d > d_self || (d == d_self && query < j)
            });
            if !owned {
                continue;
            }
            let h = poly.eval(u, v, buf);
            let p = plane.to_world(u, v, h);
            if p.x.is_finite() && p.y.is_finite() && p.z.is_finite() {
                out.push(p);
            }
        }
    }
}
