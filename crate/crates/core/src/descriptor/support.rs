use nalgebra::Vector3;

use super::{estimate_scale, DescriptorParams, ScaleRange};
use crate::detector::Keypoint;
use crate::error::{Error, Result};
use crate::frame::RgbdFrame;
use crate::geometry::{project, Point3};

/// Depth-filtered neighbourhood of one keypoint.
#[derive(Clone, Debug)]
pub struct SupportPatch {
    pub keypoint: Keypoint,
    pub scale: f64,
    /// Pixel radius from the scale law.
    pub radius_initial: f64,
    /// Pixel radius of the projected ellipsoid.
    pub radius_refined: f64,
    /// Ellipsoid semi-axes along camera x, y, z (meters).
    pub semi_axes: Vector3<f64>,
    /// Refined patch pixels, index-aligned with `points_3d`.
    pub pixels_2d: Vec<(usize, usize)>,
    pub points_3d: Vec<Point3>,
}

/// Pixels within `radius` of the keypoint whose 3-D point lies strictly
/// within `t_bg` of the keypoint's position.
fn gather(frame: &RgbdFrame, kp: &Keypoint, radius: f64, t_bg: f64) -> (Vec<(usize, usize)>, Vec<Point3>) {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let (cu, cv) = (kp.u.round() as isize, kp.v.round() as isize);
    let mut pixels = Vec::new();
    let mut points = Vec::new();
    for y in (cv - r).max(0)..=(cv + r).min(h - 1) {
        for x in (cu - r).max(0)..=(cu + r).min(w - 1) {
            let (du, dv) = (x as f64 - kp.u, y as f64 - kp.v);
            if du * du + dv * dv > r2 {
                continue;
            }
            let Some(p) = frame.point_at(x as usize, y as usize) else {
                continue;
            };
            if (p - kp.position).norm() < t_bg {
                pixels.push((x as usize, y as usize));
                points.push(p);
            }
        }
    }
    (pixels, points)
}

/// Semi-axes of the keypoint-centred, axis-aligned ellipsoid: twice the RMS
/// offset from the keypoint along each camera axis.
fn ellipsoid_axes(points: &[Point3], center: &Point3) -> Vector3<f64> {
    let n = points.len() as f64;
    let ms = points
        .iter()
        .map(|p| (p - center).component_mul(&(p - center)))
        .sum::<Vector3<f64>>()
        / n;
    ms.map(|v| 2.0 * v.sqrt())
}

/// Largest pixel displacement of the ellipsoid's axis endpoints from the
/// keypoint.
fn projected_radius(frame: &RgbdFrame, kp: &Keypoint, axes: &Vector3<f64>) -> f64 {
    let k = frame.intrinsics();
    let mut r: f64 = 0.0;
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut p = kp.position;
            p[axis] += sign * axes[axis];
            if let Some((u, v)) = project(&p, k) {
                r = r.max(((u - kp.u).powi(2) + (v - kp.v).powi(2)).sqrt());
            }
        }
    }
    r
}

pub fn select_support(
    frame: &RgbdFrame,
    kp: &Keypoint,
    range: ScaleRange,
    params: &DescriptorParams,
) -> Result<SupportPatch> {
    if !(kp.depth > 0.0) {
        return Err(Error::InvalidDepth(kp.depth));
    }
    let scale = estimate_scale(kp.depth);
    let radius_initial = params.radius.radius(scale, range.max, range.min);
    let (_, inliers) = gather(frame, kp, radius_initial, params.t_bg);
    if inliers.len() < params.min_inliers {
        return Err(Error::TooFewPoints {
            found: inliers.len(),
            needed: params.min_inliers,
        });
    }
    let semi_axes = ellipsoid_axes(&inliers, &kp.position);
    let radius_refined = projected_radius(frame, kp, &semi_axes);
    let (pixels_2d, points_3d) = gather(frame, kp, radius_refined, params.t_bg);
    if points_3d.len() < params.min_inliers {
        return Err(Error::TooFewPoints {
            found: points_3d.len(),
            needed: params.min_inliers,
        });
    }
    Ok(SupportPatch {
        keypoint: *kp,
        scale,
        radius_initial,
        radius_refined,
        semi_axes,
        pixels_2d,
        points_3d,
    })
}
