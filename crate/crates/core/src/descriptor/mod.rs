//! The ordinal appearance + shape descriptor.
//!
//! Per keypoint: a depth-derived scale fixes an initial pixel radius, the
//! support is cut to points within `t_bg` meters of the keypoint and
//! re-sized by an ellipsoid fit, a PCA direction of the 3-D support gives
//! the orientation, and finally every support pixel votes into a
//! (spatial sector × intensity rank group × normal-similarity group) cell.

mod encode;
mod orientation;
mod support;

pub use encode::{build_descriptor, normal_labels, rank_labels, spatial_label, Descriptor};
pub use orientation::{dominant_direction, dominant_orientation, orient_sign, Direction3, Orientation};
pub use support::{select_support, SupportPatch};

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::Keypoint;
use crate::error::{Error, Result};
use crate::frame::RgbdFrame;
use crate::surface::NormalImage;

/// Empirical constants of the initial support radius
/// `R = (offset + slope·min(ratio_cap, max(floor, s_max)/max(floor, s_min)))·s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiusModel {
    pub offset: f64,
    pub slope: f64,
    pub ratio_cap: f64,
    pub scale_floor: f64,
    /// Lower clamp on the result, in pixels.
    pub min_radius: f64,
}

impl Default for RadiusModel {
    fn default() -> Self {
        Self {
            offset: -5.0,
            slope: 25.0,
            ratio_cap: 3.0,
            scale_floor: 0.2,
            min_radius: 5.0,
        }
    }
}

impl RadiusModel {
    pub fn radius(&self, s: f64, s_max: f64, s_min: f64) -> f64 {
        let ratio = s_max.max(self.scale_floor) / s_min.max(self.scale_floor);
        let r = (self.offset + self.slope * ratio.min(self.ratio_cap)) * s;
        r.max(self.min_radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorParams {
    pub n_pie: usize,
    pub n_bin: usize,
    pub n_vec: usize,
    /// Normal-similarity cutoff: `ρ >= rho_bar` goes to its own group.
    pub rho_bar: f64,
    /// Eigenvalue closeness ratio for the orientation branches.
    pub gamma: f64,
    /// Background-elimination distance, meters.
    pub t_bg: f64,
    /// Minimum support points for PCA and histogramming.
    pub min_inliers: usize,
    pub radius: RadiusModel,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            n_pie: 8,
            n_bin: 8,
            n_vec: 2,
            rho_bar: 0.9,
            gamma: 0.8,
            t_bg: 0.1,
            min_inliers: 10,
            radius: RadiusModel::default(),
        }
    }
}

impl DescriptorParams {
    pub fn dim(&self) -> usize {
        self.n_pie * self.n_bin * (self.n_vec + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.n_pie < 2 || self.n_bin < 2 || self.n_vec < 1 {
            return bad("need n_pie >= 2, n_bin >= 2, n_vec >= 1");
        }
        if !(self.rho_bar > 0.0 && self.rho_bar < 1.0) {
            return bad("rho_bar must be in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if !(self.t_bg > 0.0) {
            return bad("t_bg must be > 0");
        }
        Ok(())
    }
}

/// Depth-to-scale law: 1 up to 2 m, linear down to 0.2 at 8 m, 0.2 beyond.
#[inline]
pub fn estimate_scale(d: f64) -> f64 {
    ((3.8 - 0.4 * d.max(2.0)) / 3.0).max(0.2)
}

/// Initial support radius in pixels with the default constants.
#[inline]
pub fn initial_radius(s: f64, s_max: f64, s_min: f64) -> f64 {
    RadiusModel::default().radius(s, s_max, s_min)
}

/// Extremes of the per-pixel scale over a frame's valid depths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleRange {
    pub min: f64,
    pub max: f64,
}

impl ScaleRange {
    pub fn of_frame(frame: &RgbdFrame) -> Option<Self> {
        let mut it = frame
            .depth()
            .as_slice()
            .iter()
            .filter(|d| **d > 0.0)
            .map(|d| estimate_scale(*d));
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), s| (lo.min(s), hi.max(s)));
        Some(Self { min, max })
    }
}

/// Why a keypoint produced no descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooFewPoints {
        found: usize,
    },
    /// All three principal spreads are comparable.
    Isotropic,
    DegenerateDirection,
    /// No support pixel (or the keypoint itself) carries a normal.
    EmptyDescriptor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub u: f64,
    pub v: f64,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default)]
pub struct DescribedFrame {
    pub descriptors: Vec<Descriptor>,
    pub rejected: Vec<Rejection>,
}

/// Builds one descriptor, or the reason it could not be built.
pub fn describe_keypoint(
    frame: &RgbdFrame,
    nimg: &NormalImage,
    kp: &Keypoint,
    range: ScaleRange,
    params: &DescriptorParams,
) -> std::result::Result<Descriptor, RejectReason> {
    let patch = match select_support(frame, kp, range, params) {
        Ok(p) => p,
        Err(Error::TooFewPoints { found, .. }) => return Err(RejectReason::TooFewPoints { found }),
        Err(_) => return Err(RejectReason::TooFewPoints { found: 0 }),
    };
    let theta = match dominant_orientation(&patch, params.gamma, frame.intrinsics()) {
        Ok(Orientation::Angle(t)) => t,
        Ok(Orientation::Rejected) => return Err(RejectReason::Isotropic),
        Err(Error::TooFewPoints { found, .. }) => return Err(RejectReason::TooFewPoints { found }),
        Err(_) => return Err(RejectReason::DegenerateDirection),
    };
    let d = build_descriptor(frame, nimg, &patch, theta, params);
    if d.is_empty() {
        return Err(RejectReason::EmptyDescriptor);
    }
    Ok(d)
}

/// Describes every keypoint; failures are collected rather than raised.
pub fn describe_frame(
    frame: &RgbdFrame,
    nimg: &NormalImage,
    keypoints: &[Keypoint],
    params: &DescriptorParams,
) -> Result<DescribedFrame> {
    params.validate()?;
    if nimg.dims() != (frame.width(), frame.height()) {
        return Err(Error::DimensionMismatch(format!(
            "normal image {:?} vs frame {}x{}",
            nimg.dims(),
            frame.width(),
            frame.height()
        )));
    }
    let Some(range) = ScaleRange::of_frame(frame) else {
        return Ok(DescribedFrame::default());
    };
    let results: Vec<_> = keypoints
        .par_iter()
        .map(|kp| describe_keypoint(frame, nimg, kp, range, params))
        .collect();
    let mut out = DescribedFrame::default();
    for (index, (kp, r)) in keypoints.iter().zip(results).enumerate() {
        match r {
            Ok(d) => out.descriptors.push(d),
            Err(reason) => {
                debug!("keypoint {index} at ({}, {}) rejected: {reason:?}", kp.u, kp.v);
                out.rejected.push(Rejection {
                    index,
                    u: kp.u,
                    v: kp.v,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_law_values() {
        assert_eq!(estimate_scale(2.0), 1.0);
        assert_eq!(estimate_scale(0.5), 1.0);
        assert!((estimate_scale(8.0) - 0.2).abs() < 1e-15);
        assert!((estimate_scale(5.0) - 0.6).abs() < 1e-12);
        assert_eq!(estimate_scale(20.0), 0.2);
    }

    #[test]
    fn radius_values() {
        assert!((initial_radius(1.0, 1.0, 1.0) - 20.0).abs() < 1e-12);
        assert!((initial_radius(0.2, 1.0, 0.2) - 14.0).abs() < 1e-12);
        assert!((initial_radius(0.2, 0.9, 0.2) - 14.0).abs() < 1e-12);
        assert_eq!(initial_radius(0.0, 1.0, 1.0), 5.0);
    }

    #[test]
    fn default_dimension() {
        assert_eq!(DescriptorParams::default().dim(), 192);
    }

    #[test]
    fn validation() {
        assert!(DescriptorParams::default().validate().is_ok());
        let p = DescriptorParams {
            rho_bar: 1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = DescriptorParams {
            n_vec: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
