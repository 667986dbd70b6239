//! End-to-end detection, description and evaluation of a frame pair.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::descriptor::{describe_frame, DescribedFrame, Descriptor};
use crate::detector::{detect, Keypoint};
use crate::error::Result;
use crate::frame::RgbdFrame;
use crate::geometry::{Point3, Pose};
use crate::grid::Grid;
use crate::matching::{inlier_percentage, label_correct, nndr_match, pr_curve, Match, PrCurve};
use crate::surface::{
    dot_product_image, estimate_normals_with, label_angles, main_normal, AngleLabels, DotProductImage, MainNormal,
    NormalImage,
};

/// Everything computed for one frame.
#[derive(Clone, Debug)]
pub struct Features {
    pub normals: NormalImage,
    pub labels: AngleLabels,
    /// `None` when no pixel carried a normal.
    pub main: Option<MainNormal>,
    pub dot_product: DotProductImage,
    pub keypoints: Vec<Keypoint>,
    pub described: DescribedFrame,
    /// Stages that failed but did not stop the frame.
    pub errors: Vec<String>,
}

impl Features {
    pub fn descriptors(&self) -> &[Descriptor] {
        &self.described.descriptors
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.described.descriptors.iter().map(|d| d.keypoint.position).collect()
    }
}

/// Surface channels, detection and description. A frame without any
/// normal still gets intensity-only detection; its descriptors are then
/// all rejected.
pub fn extract_features(frame: &RgbdFrame, config: &PipelineConfig) -> Result<Features> {
    config.validate()?;
    let mut errors = Vec::new();
    let normals = estimate_normals_with(frame, &config.normals())?;
    let labels = label_angles(&normals, config.n_s)?;
    let (main, dot_product) = match main_normal(&labels) {
        Ok(m) => {
            let dp = dot_product_image(&normals, &m);
            (Some(m), dp)
        }
        Err(e) => {
            warn!("main normal unavailable: {e}");
            errors.push(format!("main normal: {e}"));
            (
                None,
                DotProductImage::new(Grid::filled(frame.width(), frame.height(), None)),
            )
        }
    };
    let keypoints = detect(frame, &dot_product, &config.detector)?;
    let described = describe_frame(frame, &normals, &keypoints, &config.descriptor)?;
    info!(
        "{} keypoints, {} described, {} rejected",
        keypoints.len(),
        described.descriptors.len(),
        described.rejected.len()
    );
    Ok(Features {
        normals,
        labels,
        main,
        dot_product,
        keypoints,
        described,
        errors,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub keypoints: usize,
    pub descriptors: usize,
    pub rejected: usize,
}

impl From<&Features> for FrameSummary {
    fn from(f: &Features) -> Self {
        Self {
            keypoints: f.keypoints.len(),
            descriptors: f.described.descriptors.len(),
            rejected: f.described.rejected.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub frame_a: FrameSummary,
    pub frame_b: FrameSummary,
    /// Matches accepted at `eval.ratio_max`.
    pub matched: usize,
    pub correct: usize,
    pub inlier_percentage: f64,
    pub pr_curve: PrCurve,
    pub matches: Vec<Match>,
    pub errors: Vec<String>,
}

/// Matches the two frames and scores the matches against `pose`, which
/// maps frame-b coordinates into frame a.
pub fn evaluate(a: &Features, b: &Features, pose: &Pose, config: &PipelineConfig) -> Result<Report> {
    let (pa, pb) = (a.positions(), b.positions());
    let (da, db) = (a.descriptors(), b.descriptors());
    let mut matches = nndr_match(da, db, config.eval.ratio_max)?;
    label_correct(&mut matches, &pa, &pb, pose, config.eval.d_min);
    let curve = pr_curve(da, db, &pa, &pb, pose, &config.eval)?;
    let correct = matches.iter().filter(|m| m.correct == Some(true)).count();
    let errors = a
        .errors
        .iter()
        .map(|e| format!("frame a: {e}"))
        .chain(b.errors.iter().map(|e| format!("frame b: {e}")))
        .collect();
    Ok(Report {
        frame_a: a.into(),
        frame_b: b.into(),
        matched: matches.len(),
        correct,
        inlier_percentage: inlier_percentage(&matches),
        pr_curve: curve,
        matches,
        errors,
    })
}

pub fn run_pipeline(config: &PipelineConfig, a: &RgbdFrame, b: &RgbdFrame, pose: &Pose) -> Result<Report> {
    let fa = extract_features(a, config)?;
    let fb = extract_features(b, config)?;
    evaluate(&fa, &fb, pose, config)
}
