//! Ready-made scenes used by the test suites and the CLI examples.

use nalgebra::{Rotation3, Vector3};

use super::{SceneSpec, Shape, Texture};
use crate::geometry::{CameraIntrinsics, Pose};

/// Checkerboard with fractal noise mixed in, so that intensities are
/// locally distinct while cell corners stay strong.
pub fn mottled_checker(seed: u32) -> Texture {
    Texture::Blend {
        layers: vec![
            (
                0.6,
                Texture::Checkerboard {
                    cell: 0.04,
                    dark: 30.0,
                    light: 225.0,
                },
            ),
            (
                0.4,
                Texture::Perlin {
                    seed,
                    scale: 0.03,
                    mean: 128.0,
                    amplitude: 120.0,
                    octaves: 3,
                },
            ),
        ],
    }
}

fn posed(rx: f64, ry: f64, rz: f64, t: [f64; 3]) -> Pose {
    Pose::from_rotation(
        Rotation3::from_euler_angles(rx.to_radians(), ry.to_radians(), rz.to_radians()),
        Vector3::from(t),
    )
}

/// A vertical-ridge wedge about 1 m away in front of a slanted backdrop.
pub fn wedge(intrinsics: CameraIntrinsics) -> SceneSpec {
    SceneSpec::new(intrinsics)
        .with_texture(mottled_checker(11))
        .with(Shape::Plane {
            pose: posed(0.0, 40.0, 0.0, [0.0, 0.0, 1.6]),
            half_size: None,
        })
        .with(Shape::Wedge {
            pose: posed(0.0, 0.0, 0.0, [0.0, 0.0, 1.0]),
            half_length: 0.3,
            half_width: 0.25,
            height: 0.2,
        })
}

/// Several slanted objects in front of a slanted backdrop, at 1.1–1.6 m.
pub fn cluttered(intrinsics: CameraIntrinsics) -> SceneSpec {
    SceneSpec::new(intrinsics)
        .with_texture(mottled_checker(3))
        .with(Shape::Plane {
            pose: posed(0.0, 40.0, 0.0, [0.0, 0.0, 1.6]),
            half_size: None,
        })
        .with(Shape::Wedge {
            pose: posed(0.0, 0.0, 0.0, [0.05, 0.0, 1.1]),
            half_length: 0.25,
            half_width: 0.2,
            height: 0.16,
        })
        .with(Shape::Box {
            pose: posed(25.0, 35.0, 10.0, [-0.35, -0.1, 1.25]),
            half_extents: [0.12, 0.1, 0.1],
        })
        .with(Shape::Sphere {
            center: [0.4, 0.15, 1.3],
            radius: 0.15,
        })
}

/// A textured box whose front face sits 0.7 m from the camera, optionally
/// in front of a plain fronto-parallel backdrop at 2 m.
pub fn box_on_backdrop(intrinsics: CameraIntrinsics, backdrop: bool) -> SceneSpec {
    let mut spec = SceneSpec::new(intrinsics)
        .with_texture(mottled_checker(5))
        .with(Shape::Box {
            pose: posed(0.0, 0.0, 0.0, [0.0, 0.0, 0.8]),
            half_extents: [0.12, 0.09, 0.1],
        });
    if backdrop {
        spec = spec.with_textured(
            Shape::Plane {
                pose: posed(0.0, 0.0, 0.0, [0.0, 0.0, 2.0]),
                half_size: None,
            },
            Texture::Constant { value: 90.0 },
        );
    }
    spec
}
