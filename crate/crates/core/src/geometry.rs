//! Pinhole camera model and rigid-body transforms.
//!
//! Camera coordinates follow the usual vision convention: `x` to the right,
//! `y` down, `z` along the optical axis. Pixel `(u, v)` has `u` growing with
//! `x` and `v` growing with `y`.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metric 3-D point in camera coordinates.
pub type Point3 = Vector3<f64>;

/// Tolerance on the image-plane component of a direction before it is
/// considered parallel to the optical axis.
const DIRECTION_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = Error;

    fn try_from(r: RawIntrinsics) -> Result<Self> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl Default for CameraIntrinsics {
    /// A 640x480 structured-light sensor.
    fn default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidParam(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::InvalidParam(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Same optics, with the principal point at the image centre.
    pub fn centered(f: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Back-projection without validation, for inner loops over valid pixels.
    #[inline]
    pub(crate) fn unproject(&self, u: f64, v: f64, d: f64) -> Point3 {
        Point3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }

    /// Direction of the ray through pixel `(u, v)`, scaled so that `z = 1`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Lifts pixel `(u, v)` at metric depth `d` to a camera-frame point.
pub fn backproject(u: f64, v: f64, d: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidDepth(d));
    }
    if !k.contains(u, v) {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    Ok(k.unproject(u, v, d))
}

/// Perspective projection of a camera-frame point. `None` behind the camera.
pub fn project(p: &Point3, k: &CameraIntrinsics) -> Option<(f64, f64)> {
    (p.z > 0.0).then(|| (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Unit image-plane direction of a 3-D direction, ignoring translation.
pub fn project_direction(dir: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Vector2<f64>> {
    let n = dir.norm();
    if !(n > 0.0) || dir.xy().norm() <= DIRECTION_EPS * n {
        return Err(Error::DegenerateDirection);
    }
    let img = Vector2::new(k.fx * dir.x, k.fy * dir.y);
    Ok(img / img.norm())
}

/// Rigid transform `p -> R p + t`.
///
/// As a ground-truth pose between two frames it maps frame-b coordinates
/// into frame-a coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    const ORTHO_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is a proper rotation within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidParam("pose has non-finite entries".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if ortho > Self::ORTHO_TOL || (det - 1.0).abs() > Self::ORTHO_TOL {
            return Err(Error::InvalidParam(format!(
                "rotation is not orthonormal (|RtR-I|={ortho:e}, det={det})"
            )));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: rotation.into_inner(),
            translation,
        }
    }

    pub fn translation_only(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_rotation(Rotation3::from_axis_angle(&Vector3::x_axis(), angle), Vector3::zeros())
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_rotation(Rotation3::from_axis_angle(&Vector3::y_axis(), angle), Vector3::zeros())
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(Rotation3::from_axis_angle(&Vector3::z_axis(), angle), Vector3::zeros())
    }

    pub fn with_translation(mut self, t: Vector3<f64>) -> Self {
        self.translation = t;
        self
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }
}

/// `R p + t`.
#[inline]
pub fn transform(p: &Point3, pose: &Pose) -> Point3 {
    pose.apply(p)
}

/// JSON form of a pose: row-major 3x3 `rotation` and 3-vector `translation`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoseFile {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&Pose> for PoseFile {
    fn from(p: &Pose) -> Self {
        let r = p.rotation();
        PoseFile {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl TryFrom<PoseFile> for Pose {
    type Error = Error;

    fn try_from(f: PoseFile) -> Result<Self> {
        let r = f.rotation;
        Pose::new(
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::from(f.translation),
        )
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PoseFile::deserialize(d)?;
        Pose::try_from(raw).map_err(serde::de::Error::custom)
    }
}
