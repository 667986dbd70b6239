//! Detection and description of keypoints in RGB-D frames using both
//! intensity and local surface shape.
//!
//! A frame is turned into surface normals, quantized angle labels and a
//! dot-product image against the frame's dominant normal. Keypoints come
//! from a Harris response blended over intensity and dot-product
//! gradients. Each keypoint is described by a histogram over angular
//! sectors, intensity ranks and normal agreement, taken on an ellipsoidal
//! 3-D support region and aligned to its dominant 3-D direction.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod error;

pub mod config;
pub mod descriptor;
pub mod detector;
pub mod frame;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod matching;
pub mod pca;
pub mod pipeline;
pub mod surface;
pub mod synth;

pub use config::PipelineConfig;
pub use descriptor::{describe_frame, DescribedFrame, Descriptor, DescriptorParams};
pub use detector::{detect, DetectorParams, Keypoint};
pub use error::{Error, Result};
pub use frame::RgbdFrame;
pub use geometry::{backproject, project, transform, CameraIntrinsics, Point3, Pose};
pub use grid::Grid;
pub use matching::{nndr_match, pr_curve, EvalConfig, Match, PrCurve};
pub use pipeline::{extract_features, run_pipeline, Features, Report};
pub use surface::{compute_channels, estimate_normals, NormalParams, SurfaceChannels};
pub use synth::{relight, render, render_pair, IlluminationMap, SceneSpec, Shape, Texture};
