use nalgebra::Vector3;

use super::SupportPatch;
use crate::error::{Error, Result};
use crate::geometry::{project_direction, CameraIntrinsics, Point3};
use crate::pca::{covariance, Principal};

const MIN_PCA_POINTS: usize = 10;
const SIGN_EPS: f64 = 1e-12;

/// 3-D dominant direction of a support cloud.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Direction3 {
    /// One spread dominates: the leading principal axis.
    Axis(Vector3<f64>),
    /// Two comparable leading spreads: the normal of their plane.
    PlaneNormal(Vector3<f64>),
    /// No clear ordering among the three spreads.
    Rejected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Orientation {
    /// Image-plane angle against the `u` axis, radians.
    Angle(f64),
    Rejected,
}

/// Fixes the sign of a direction: positive `z`, then positive `x`, then
/// positive `y` for directions lying in the coordinate planes.
pub fn orient_sign(v: Vector3<f64>) -> Vector3<f64> {
    for c in [v.z, v.x, v.y] {
        if c > SIGN_EPS {
            return v;
        }
        if c < -SIGN_EPS {
            return -v;
        }
    }
    v
}

/// PCA branch selection with eigenvalues `e1 >= e2 >= e3`:
/// `e2 > γe1 ∧ e3 <= γe1` gives `v1 × v2`, `e2 > γe1 ∧ e3 > γe1` rejects,
/// anything else gives `v1`.
pub fn dominant_direction(points: &[Point3], gamma: f64) -> Result<Direction3> {
    if points.len() < MIN_PCA_POINTS {
        return Err(Error::TooFewPoints {
            found: points.len(),
            needed: MIN_PCA_POINTS,
        });
    }
    let cov = covariance(points).expect("non-empty");
    let pc = Principal::from_covariance(&cov);
    let [e1, e2, e3] = pc.values;
    let close2 = e2 > gamma * e1;
    let close3 = e3 > gamma * e1;
    Ok(match (close2, close3) {
        (true, false) => {
            let c = pc.vectors[0].cross(&pc.vectors[1]);
            Direction3::PlaneNormal(orient_sign(c / c.norm()))
        }
        (true, true) => Direction3::Rejected,
        _ => Direction3::Axis(orient_sign(pc.vectors[0])),
    })
}

pub fn dominant_orientation(patch: &SupportPatch, gamma: f64, k: &CameraIntrinsics) -> Result<Orientation> {
    let d = match dominant_direction(&patch.points_3d, gamma)? {
        Direction3::Axis(d) | Direction3::PlaneNormal(d) => d,
        Direction3::Rejected => return Ok(Orientation::Rejected),
    };
    let d2 = project_direction(&d, k)?;
    Ok(Orientation::Angle(d2.y.atan2(d2.x)))
}
