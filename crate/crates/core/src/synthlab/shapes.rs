//! Planar primitives with height profiles, expressed in an object frame.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Rectangle of size `len` x `wid` rotated by `angle` (radians).
    Rect { cx: f64, cy: f64, len: f64, wid: f64, angle: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
    Annulus { cx: f64, cy: f64, r_in: f64, r_out: f64 },
    /// All points within `r` of the segment a-b.
    Capsule { ax: f64, ay: f64, bx: f64, by: f64, r: f64 },
    Ellipse { cx: f64, cy: f64, a: f64, b: f64, angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Flat,
    /// Rounded top falling to a fifth of the peak height at the rim.
    Dome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub height: f64,
    pub profile: Profile,
}

fn rotate(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

impl Shape {
    /// Normalized distance from the shape's spine, 0 at the center line and
    /// 1 on the rim; `None` outside.
    pub fn rim_distance(&self, x: f64, y: f64) -> Option<f64> {
        let rho = match *self {
            Shape::Rect { cx, cy, len, wid, angle } => {
                let (u, v) = rotate(x - cx, y - cy, -angle);
                if u.abs() > len / 2.0 {
                    return None;
                }
                v.abs() / (wid / 2.0)
            }
            Shape::Disc { cx, cy, r } => ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r,
            Shape::Annulus { cx, cy, r_in, r_out } => {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                if d < r_in {
                    return None;
                }
                let mid = 0.5 * (r_in + r_out);
                (d - mid).abs() / (0.5 * (r_out - r_in))
            }
            Shape::Capsule { ax, ay, bx, by, r } => {
                let (dx, dy) = (bx - ax, by - ay);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (px, py) = (ax + t * dx, ay + t * dy);
                ((x - px).powi(2) + (y - py).powi(2)).sqrt() / r
            }
            Shape::Ellipse { cx, cy, a, b, angle } => {
                let (u, v) = rotate(x - cx, y - cy, -angle);
                ((u / a).powi(2) + (v / b).powi(2)).sqrt()
            }
        };
        (rho <= 1.0).then_some(rho)
    }

    /// Axis-aligned bounds in the object frame.
    pub fn bounds(&self) -> [f64; 4] {
        match *self {
            Shape::Rect { cx, cy, len, wid, angle } => {
                let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                    let (u, v) = rotate(sx * len / 2.0, sy * wid / 2.0, angle);
                    b[0] = b[0].min(cx + u);
                    b[1] = b[1].min(cy + v);
                    b[2] = b[2].max(cx + u);
                    b[3] = b[3].max(cy + v);
                }
                b
            }
            Shape::Disc { cx, cy, r } | Shape::Annulus { cx, cy, r_out: r, .. } => [cx - r, cy - r, cx + r, cy + r],
            Shape::Capsule { ax, ay, bx, by, r } => [ax.min(bx) - r, ay.min(by) - r, ax.max(bx) + r, ay.max(by) + r],
            Shape::Ellipse { cx, cy, a, b, .. } => {
                let r = a.max(b);
                [cx - r, cy - r, cx + r, cy + r]
            }
        }
    }

    /// Copy scaled about the object origin; `aspect` stretches the long
    /// dimension and shrinks the short one by the same factor (round shapes
    /// ignore it).
    pub fn scaled(&self, s: f64, aspect: f64) -> Shape {
        match *self {
            Shape::Rect { cx, cy, len, wid, angle } => Shape::Rect {
                cx: cx * s,
                cy: cy * s,
                len: len * s * aspect,
                wid: wid * s / aspect,
                angle,
            },
            Shape::Disc { cx, cy, r } => Shape::Disc {
                cx: cx * s,
                cy: cy * s,
                r: r * s,
            },
            Shape::Annulus { cx, cy, r_in, r_out } => Shape::Annulus {
                cx: cx * s,
                cy: cy * s,
                r_in: r_in * s,
                r_out: r_out * s,
            },
            Shape::Capsule { ax, ay, bx, by, r } => {
                let (mx, my) = (0.5 * (ax + bx), 0.5 * (ay + by));
                let (hx, hy) = (0.5 * (bx - ax) * aspect, 0.5 * (by - ay) * aspect);
                Shape::Capsule {
                    ax: (mx - hx) * s,
                    ay: (my - hy) * s,
                    bx: (mx + hx) * s,
                    by: (my + hy) * s,
                    r: r * s / aspect,
                }
            }
            Shape::Ellipse { cx, cy, a, b, angle } => Shape::Ellipse {
                cx: cx * s,
                cy: cy * s,
                a: a * s * aspect,
                b: b * s / aspect,
                angle,
            },
        }
    }
}

impl Primitive {
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        let rho = self.shape.rim_distance(x, y)?;
        Some(match self.profile {
            Profile::Flat => self.height,
            Profile::Dome => self.height * (0.2 + 0.8 * (1.0 - rho * rho).max(0.0).sqrt()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment() {
        let r = Shape::Rect {
            cx: 0.0,
            cy: 0.0,
            len: 0.1,
            wid: 0.02,
            angle: std::f64::consts::FRAC_PI_2,
        };
        assert!(r.rim_distance(0.0, 0.04).is_some());
        assert!(r.rim_distance(0.04, 0.0).is_none());
        let a = Shape::Annulus {
            cx: 0.0,
            cy: 0.0,
            r_in: 0.01,
            r_out: 0.02,
        };
        assert!(a.rim_distance(0.0, 0.0).is_none());
        assert_eq!(a.rim_distance(0.015, 0.0), Some(0.0));
        let c = Shape::Capsule {
            ax: 0.0,
            ay: 0.0,
            bx: 0.1,
            by: 0.0,
            r: 0.01,
        };
        assert!(c.rim_distance(0.105, 0.0).is_some());
        assert!(c.rim_distance(0.05, 0.011).is_none());
    }

    #[test]
    fn dome_profile_peaks_at_center() {
        let p = Primitive {
            shape: Shape::Disc { cx: 0.0, cy: 0.0, r: 0.05 },
            height: 0.03,
            profile: Profile::Dome,
        };
        assert_eq!(p.height_at(0.0, 0.0), Some(0.03));
        let rim = p.height_at(0.05, 0.0).unwrap();
        assert!((rim - 0.006).abs() < 1e-12);
    }

    #[test]
    fn bounds_contain_shape() {
        let shapes = [
            Shape::Rect { cx: 0.01, cy: -0.02, len: 0.08, wid: 0.02, angle: 0.7 },
            Shape::Capsule { ax: -0.03, ay: 0.0, bx: 0.04, by: 0.02, r: 0.008 },
            Shape::Ellipse { cx: 0.0, cy: 0.01, a: 0.05, b: 0.02, angle: 1.2 },
        ];
        for s in shapes {
            let b = s.bounds();
            for i in 0..200 {
                for j in 0..200 {
                    let x = -0.1 + i as f64 * 0.001;
                    let y = -0.1 + j as f64 * 0.001;
                    if s.rim_distance(x, y).is_some() {
                        assert!(x >= b[0] - 1e-12 && x <= b[2] + 1e-12 && y >= b[1] - 1e-12 && y <= b[3] + 1e-12);
                    }
                }
            }
        }
    }
}
