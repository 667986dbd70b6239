//! Analytic RGB-D scene renderer.
//!
//! Depth comes from exact ray/primitive intersection of the pixel-centre
//! ray, so every rendered depth satisfies its surface equation to rounding
//! error. Intensity is the mean texture value over a regular grid of
//! sub-pixel rays.

mod illumination;
pub mod presets;
mod shapes;
mod texture;

pub use illumination::{relight, relight_continuous, IlluminationMap};
pub use shapes::{Hit, Shape};
pub use texture::Texture;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::RgbdFrame;
use crate::geometry::{CameraIntrinsics, Pose};
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    /// Overrides the scene texture for this object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<Texture>,
}

impl From<Shape> for SceneObject {
    fn from(shape: Shape) -> Self {
        Self { shape, texture: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<SceneObject>,
    #[serde(default)]
    pub texture: Texture,
    /// Camera-to-world transform.
    #[serde(default)]
    pub camera_pose: Pose,
    #[serde(default)]
    pub intrinsics: CameraIntrinsics,
    /// Standard deviation of additive Gaussian depth noise, meters.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sub-pixel rays per axis for intensity.
    #[serde(default = "default_supersample")]
    pub supersample: u32,
    /// Intensity where a ray hits nothing.
    #[serde(default)]
    pub background: f64,
}

fn default_supersample() -> u32 {
    3
}

impl SceneSpec {
    pub fn new(intrinsics: CameraIntrinsics) -> Self {
        Self {
            primitives: Vec::new(),
            texture: Texture::default(),
            camera_pose: Pose::identity(),
            intrinsics,
            noise: 0.0,
            seed: 0,
            supersample: default_supersample(),
            background: 0.0,
        }
    }

    pub fn with(mut self, shape: Shape) -> Self {
        self.primitives.push(shape.into());
        self
    }

    pub fn with_textured(mut self, shape: Shape, texture: Texture) -> Self {
        self.primitives.push(SceneObject {
            shape,
            texture: Some(texture),
        });
        self
    }

    pub fn with_texture(mut self, texture: Texture) -> Self {
        self.texture = texture;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        let world_to_cam = self.camera_pose.inverse();
        for (i, obj) in self.primitives.iter().enumerate() {
            obj.shape.validate().or_else(|m| bad(format!("primitive {i}: {m}")))?;
            if world_to_cam.apply(&obj.shape.anchor()).z <= 0.0 {
                return bad(format!("primitive {i} is behind the camera"));
            }
            if let Some(t) = &obj.texture {
                t.validate().or_else(|m| bad(format!("primitive {i}: {m}")))?;
            }
        }
        self.texture.validate().or_else(bad)?;
        if !(self.noise >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if self.supersample == 0 {
            return bad("supersample must be >= 1".into());
        }
        if !(0.0..=255.0).contains(&self.background) {
            return bad("background intensity outside [0, 255]".into());
        }
        Ok(())
    }
}

/// Renders the scene from `spec.camera_pose`.
pub fn render(spec: &SceneSpec) -> Result<RgbdFrame> {
    render_from(spec, &spec.camera_pose)
}

fn render_from(spec: &SceneSpec, camera_pose: &Pose) -> Result<RgbdFrame> {
    spec.validate()?;
    let k = spec.intrinsics;
    let (w, h) = (k.width, k.height);
    let samplers: Vec<_> = spec
        .primitives
        .iter()
        .map(|o| o.texture.as_ref().unwrap_or(&spec.texture).sampler())
        .collect();
    let origin = *camera_pose.translation();
    let cast = |u: f64, v: f64| {
        let dir = camera_pose.apply_vector(&k.ray(u, v));
        spec.primitives
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.shape.intersect(&origin, &dir).map(|hit| (i, hit)))
            .min_by(|a, b| a.1.t.total_cmp(&b.1.t))
    };
    let ss = spec.supersample as usize;
    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("validated"));

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (y as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut gray = Vec::with_capacity(w);
            let mut depth = Vec::with_capacity(w);
            for x in 0..w {
                // The ray direction has unit z in camera coordinates, so the
                // hit parameter is the depth.
                let d = match cast(x as f64, y as f64) {
                    Some((_, hit)) => {
                        let n = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
                        (hit.t + n).max(0.0)
                    }
                    None => 0.0,
                };
                let mut acc = 0.0;
                for sy in 0..ss {
                    for sx in 0..ss {
                        let su = x as f64 + (sx as f64 + 0.5) / ss as f64 - 0.5;
                        let sv = y as f64 + (sy as f64 + 0.5) / ss as f64 - 0.5;
                        acc += match cast(su, sv) {
                            Some((i, hit)) => samplers[i].sample(hit.uv),
                            None => spec.background,
                        };
                    }
                }
                gray.push((acc / (ss * ss) as f64).clamp(0.0, 255.0));
                depth.push(d);
            }
            (gray, depth)
        })
        .collect();
    let (gray, depth): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let gray = Grid::from_vec(w, h, gray.concat()).expect("sized above");
    let depth = Grid::from_vec(w, h, depth.concat()).expect("sized above");
    if !depth.as_slice().iter().any(|d| *d > 0.0) {
        return Err(Error::EmptyScene);
    }
    RgbdFrame::new(gray, depth, k)
}

/// Renders the scene from `camera_pose` and from `camera_pose ∘ relative`.
/// The returned pose maps frame-b coordinates into frame-a coordinates.
pub fn render_pair(spec: &SceneSpec, relative: &Pose) -> Result<(RgbdFrame, RgbdFrame, Pose)> {
    let a = render_from(spec, &spec.camera_pose)?;
    let b = render_from(spec, &spec.camera_pose.compose(relative))?;
    Ok((a, b, *relative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::backproject;
    use nalgebra::Vector3;

    fn small_k() -> CameraIntrinsics {
        CameraIntrinsics::centered(100.0, 80, 60).unwrap()
    }

    fn plane_at(z: f64) -> Shape {
        Shape::Plane {
            pose: Pose::translation_only(Vector3::new(0.0, 0.0, z)),
            half_size: None,
        }
    }

    #[test]
    fn constant_plane() {
        let spec = SceneSpec::new(small_k())
            .with(plane_at(1.0))
            .with_texture(Texture::Constant { value: 77.0 });
        let f = render(&spec).unwrap();
        assert!(f.depth().as_slice().iter().all(|d| (*d - 1.0).abs() < 1e-12));
        assert!(f.gray().as_slice().iter().all(|g| (*g - 77.0).abs() < 1e-12));
    }

    #[test]
    fn empty_scene() {
        let spec = SceneSpec::new(small_k()).with(Shape::Sphere {
            center: [5.0, 0.0, 1.0],
            radius: 0.1,
        });
        assert!(matches!(render(&spec), Err(Error::EmptyScene)));
    }

    #[test]
    fn behind_camera_rejected() {
        let spec = SceneSpec::new(small_k()).with(plane_at(-1.0));
        assert!(matches!(render(&spec), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn sphere_depth_is_minimal_at_centre() {
        let k = CameraIntrinsics::new(100.0, 100.0, 40.0, 30.0, 81, 61).unwrap();
        let spec = SceneSpec::new(k).with(Shape::Sphere {
            center: [0.0, 0.0, 2.0],
            radius: 0.5,
        });
        let f = render(&spec).unwrap();
        let centre = f.depth_at(40, 30).unwrap();
        assert!((centre - 1.5).abs() < 1e-12);
        for d in f.depth().as_slice().iter().filter(|d| **d > 0.0) {
            assert!(*d >= centre);
        }
    }

    #[test]
    fn noise_is_seeded() {
        let mut spec = SceneSpec::new(small_k()).with(plane_at(1.0));
        spec.noise = 0.01;
        let a = render(&spec).unwrap();
        let b = render(&spec).unwrap();
        assert_eq!(a, b);
        spec.seed = 1;
        let c = render(&spec).unwrap();
        assert_ne!(a.depth(), c.depth());
        let mean = c.depth().as_slice().iter().sum::<f64>() / (80.0 * 60.0);
        assert!((mean - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identity_pair_is_identical() {
        let spec = SceneSpec::new(small_k()).with(plane_at(1.0));
        let (a, b, pose) = render_pair(&spec, &Pose::identity()).unwrap();
        assert_eq!(a, b);
        assert_eq!(pose, Pose::identity());
    }

    #[test]
    fn backward_translation_adds_depth() {
        let spec = SceneSpec::new(small_k()).with(plane_at(1.0));
        let rel = Pose::translation_only(Vector3::new(0.0, 0.0, -0.8));
        let (a, b, pose) = render_pair(&spec, &rel).unwrap();
        assert!((b.depth_at(10, 10).unwrap() - 1.8).abs() < 1e-12);
        let pb = backproject(10.0, 10.0, b.depth_at(10, 10).unwrap(), b.intrinsics()).unwrap();
        let pa = pose.apply(&pb);
        assert!((pa.z - 1.0).abs() < 1e-12);
        assert!(a.depth_at(0, 0).is_some());
    }
}
