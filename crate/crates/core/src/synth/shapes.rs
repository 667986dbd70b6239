use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Pose};

const T_EPS: f64 = 1e-9;

/// Analytic scene primitives. Local frames are mapped to world by `pose`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// The local `z = 0` plane, optionally bounded to `|x| <= hx, |y| <= hy`.
    Plane {
        #[serde(default)]
        pose: Pose,
        #[serde(default)]
        half_size: Option<[f64; 2]>,
    },
    /// Axis-aligned box in its local frame, centred at the origin.
    Box {
        #[serde(default)]
        pose: Pose,
        half_extents: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Two rectangular faces meeting at a ridge along local `y` through the
    /// origin, each falling back to local `z = height` at `x = ±half_width`.
    Wedge {
        #[serde(default)]
        pose: Pose,
        half_length: f64,
        half_width: f64,
        height: f64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub t: f64,
    /// Surface coordinates in meters, continuous across shared edges.
    pub uv: [f64; 2],
    pub normal: Vector3<f64>,
}

/// Bounded planar patch `origin + a·e1 + b·e2` with `a, b` in the ranges.
#[derive(Clone, Copy, Debug)]
struct Quad {
    origin: Point3,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    r1: [f64; 2],
    r2: [f64; 2],
    uv_offset: [f64; 2],
}

impl Quad {
    fn intersect(&self, o: &Point3, d: &Vector3<f64>) -> Option<Hit> {
        let n = self.e1.cross(&self.e2);
        let denom = n.dot(d);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = n.dot(&(self.origin - o)) / denom;
        if t <= T_EPS {
            return None;
        }
        let rel = o + d * t - self.origin;
        let (a, b) = (self.e1.dot(&rel), self.e2.dot(&rel));
        let inside = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        (inside(a, self.r1) && inside(b, self.r2)).then(|| Hit {
            t,
            uv: [a + self.uv_offset[0], b + self.uv_offset[1]],
            normal: n.normalize(),
        })
    }
}

fn nearest(hits: impl Iterator<Item = Option<Hit>>) -> Option<Hit> {
    hits.flatten().min_by(|a, b| a.t.total_cmp(&b.t))
}

impl Shape {
    /// A point that must lie in front of the camera for the shape to count
    /// as placed in view.
    pub fn anchor(&self) -> Point3 {
        match self {
            Shape::Plane { pose, .. } | Shape::Box { pose, .. } | Shape::Wedge { pose, .. } => *pose.translation(),
            Shape::Sphere { center, .. } => Point3::from(*center),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        match self {
            Shape::Plane { half_size, .. } => {
                if let Some([a, b]) = half_size {
                    pos(*a, "half_size")?;
                    pos(*b, "half_size")?;
                }
                Ok(())
            }
            Shape::Box { half_extents, .. } => half_extents.iter().try_for_each(|v| pos(*v, "half_extents")),
            Shape::Sphere { radius, .. } => pos(*radius, "radius"),
            Shape::Wedge {
                half_length,
                half_width,
                height,
                ..
            } => {
                pos(*half_length, "half_length")?;
                pos(*half_width, "half_width")?;
                pos(*height, "height")
            }
        }
    }

    /// Nearest intersection of the world-space ray `o + t·d`, `t > 0`.
    pub fn intersect(&self, o: &Point3, d: &Vector3<f64>) -> Option<Hit> {
        match self {
            Shape::Plane { pose, half_size } => {
                let inf = f64::INFINITY;
                let [hx, hy] = half_size.unwrap_or([inf, inf]);
                let q = Quad {
                    origin: *pose.translation(),
                    e1: pose.apply_vector(&Vector3::x()),
                    e2: pose.apply_vector(&Vector3::y()),
                    r1: [-hx, hx],
                    r2: [-hy, hy],
                    uv_offset: [0.0, 0.0],
                };
                q.intersect(o, d)
            }
            Shape::Box { pose, half_extents } => {
                let h = half_extents;
                let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
                let faces = (0..3).flat_map(|i| {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    [-1.0, 1.0].map(move |s| (i, j, k, s))
                });
                nearest(faces.map(|(i, j, k, s)| {
                    let q = Quad {
                        origin: pose.apply(&(axes[i] * (s * h[i]))),
                        e1: pose.apply_vector(&axes[j]),
                        e2: pose.apply_vector(&axes[k]),
                        r1: [-h[j], h[j]],
                        r2: [-h[k], h[k]],
                        // Keep opposite faces from sharing texture.
                        uv_offset: [(i as f64 + 1.0) * s * 10.0, 0.0],
                    };
                    q.intersect(o, d)
                }))
            }
            Shape::Sphere { center, radius } => {
                let c = Point3::from(*center);
                let oc = o - c;
                let a = d.dot(d);
                let b = oc.dot(d);
                let cc = oc.dot(&oc) - radius * radius;
                let disc = b * b - a * cc;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-b - sq) / a, (-b + sq) / a].into_iter().find(|t| *t > T_EPS)?;
                let q = (o + d * t - c) / *radius;
                let lon = q.x.atan2(-q.z);
                let lat = q.y.clamp(-1.0, 1.0).asin();
                Some(Hit {
                    t,
                    uv: [radius * lon, radius * lat],
                    normal: q,
                })
            }
            Shape::Wedge {
                pose,
                half_length,
                half_width,
                height,
            } => {
                let run = (half_width * half_width + height * height).sqrt();
                let out1 = Vector3::new(*half_width, 0.0, *height) / run;
                let in2 = Vector3::new(*half_width, 0.0, -*height) / run;
                let ridge = *pose.translation();
                let y = pose.apply_vector(&Vector3::y());
                let r2 = [-*half_length, *half_length];
                let f1 = Quad {
                    origin: ridge,
                    e1: pose.apply_vector(&out1),
                    e2: y,
                    r1: [0.0, run],
                    r2,
                    uv_offset: [0.0, 0.0],
                };
                let f2 = Quad {
                    origin: ridge,
                    e1: pose.apply_vector(&in2),
                    e2: y,
                    r1: [-run, 0.0],
                    r2,
                    uv_offset: [0.0, 0.0],
                };
                nearest([f1.intersect(o, d), f2.intersect(o, d)].into_iter())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_hit() {
        let p = Shape::Plane {
            pose: Pose::translation_only(Vector3::new(0.0, 0.0, 2.0)),
            half_size: None,
        };
        let h = p.intersect(&Point3::zeros(), &Vector3::new(0.1, 0.2, 1.0)).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert!((h.uv[0] - 0.2).abs() < 1e-12 && (h.uv[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn bounded_plane_miss() {
        let p = Shape::Plane {
            pose: Pose::translation_only(Vector3::new(0.0, 0.0, 2.0)),
            half_size: Some([0.1, 0.1]),
        };
        assert!(p.intersect(&Point3::zeros(), &Vector3::new(0.1, 0.0, 1.0)).is_none());
    }

    #[test]
    fn box_front_face() {
        let b = Shape::Box {
            pose: Pose::translation_only(Vector3::new(0.0, 0.0, 1.0)),
            half_extents: [0.2, 0.2, 0.3],
        };
        let h = b.intersect(&Point3::zeros(), &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((h.t - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sphere_front() {
        let s = Shape::Sphere {
            center: [0.0, 0.0, 2.0],
            radius: 0.5,
        };
        let h = s.intersect(&Point3::zeros(), &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((h.t - 1.5).abs() < 1e-12);
        assert!(s.intersect(&Point3::zeros(), &Vector3::new(1.0, 0.0, 1.0)).is_none());
    }

    #[test]
    fn wedge_ridge_is_nearest() {
        let w = Shape::Wedge {
            pose: Pose::translation_only(Vector3::new(0.0, 0.0, 1.0)),
            half_length: 0.3,
            half_width: 0.2,
            height: 0.1,
        };
        let o = Point3::zeros();
        let mid = w.intersect(&o, &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((mid.t - 1.0).abs() < 1e-12);
        // Half way out along face 1: z = 1.05 at x = 0.1.
        let side = w.intersect(&o, &Vector3::new(0.1 / 1.05, 0.0, 1.0)).unwrap();
        assert!((side.t - 1.05).abs() < 1e-12);
        let other = w.intersect(&o, &Vector3::new(-0.1 / 1.05, 0.0, 1.0)).unwrap();
        assert!((other.t - 1.05).abs() < 1e-12);
        assert!((side.uv[0] + other.uv[0]).abs() < 1e-12, "uv mirrored across the ridge");
    }
}
