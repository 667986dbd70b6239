//! Nearest-neighbour-distance-ratio matching and ground-truth evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f64,
    pub ratio: f64,
    pub correct: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Correctness radius for the reprojection test, meters.
    pub d_min: f64,
    /// NNDR thresholds of the precision/recall sweep, strictly increasing.
    pub ratio_sweep: Vec<f64>,
    /// Threshold used for the single-operating-point match set.
    pub ratio_max: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            d_min: 0.05,
            ratio_sweep: (1..=20).map(|i| i as f64 * 0.05).collect(),
            ratio_max: 0.8,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0) {
            return Err(Error::InvalidParam("d_min must be > 0".into()));
        }
        let in_range = self.ratio_sweep.iter().all(|r| *r > 0.0 && *r <= 1.0);
        let increasing = self.ratio_sweep.windows(2).all(|w| w[0] < w[1]);
        if !in_range || !increasing {
            return Err(Error::InvalidParam(
                "ratio_sweep must be strictly increasing within (0, 1]".into(),
            ));
        }
        if !(self.ratio_max > 0.0 && self.ratio_max <= 1.0) {
            return Err(Error::InvalidParam("ratio_max must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest and second-nearest neighbour of every `a` in `b`, unfiltered.
///
/// With a single candidate the ratio is 0; with two equidistant candidates
/// at distance 0 it is 1. Equal distances resolve to the lower index.
pub fn nearest_neighbors<D: AsRef<[f64]> + Sync>(desc_a: &[D], desc_b: &[D]) -> Result<Vec<Match>> {
    let dim = desc_a.first().or(desc_b.first()).map(|d| d.as_ref().len()).unwrap_or(0);
    if let Some(bad) = desc_a.iter().chain(desc_b).find(|d| d.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "descriptor of length {} among length {dim}",
            bad.as_ref().len()
        )));
    }
    if desc_b.is_empty() {
        return Ok(Vec::new());
    }
    Ok(desc_a
        .par_iter()
        .enumerate()
        .map(|(ia, a)| {
            let (mut best, mut d1, mut d2) = (0usize, f64::INFINITY, f64::INFINITY);
            for (ib, b) in desc_b.iter().enumerate() {
                let d = descriptor_distance(a.as_ref(), b.as_ref());
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    best = ib;
                } else if d < d2 {
                    d2 = d;
                }
            }
            let ratio = if desc_b.len() == 1 {
                0.0
            } else if d2 > 0.0 {
                d1 / d2
            } else {
                1.0
            };
            Match {
                index_a: ia,
                index_b: best,
                distance: d1,
                ratio,
                correct: None,
            }
        })
        .collect())
}

/// One-directional NNDR matches `a -> b` with `ratio <= ratio_max`.
pub fn nndr_match<D: AsRef<[f64]> + Sync>(desc_a: &[D], desc_b: &[D], ratio_max: f64) -> Result<Vec<Match>> {
    Ok(nearest_neighbors(desc_a, desc_b)?
        .into_iter()
        .filter(|m| m.ratio <= ratio_max)
        .collect())
}

/// Reprojection error of a point pair under a pose mapping b into a.
#[inline]
pub fn reprojection_error(p_a: &Point3, p_b: &Point3, pose: &Pose) -> f64 {
    (p_a - pose.apply(p_b)).norm()
}

pub fn label_correct(matches: &mut [Match], points_a: &[Point3], points_b: &[Point3], pose: &Pose, d_min: f64) {
    for m in matches {
        m.correct = Some(reprojection_error(&points_a[m.index_a], &points_b[m.index_b], pose) <= d_min);
    }
}

/// Fraction of labelled-correct matches; 0 for an empty set.
pub fn inlier_percentage(matches: &[Match]) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    matches.iter().filter(|m| m.correct == Some(true)).count() as f64 / matches.len() as f64
}

/// Number of `a` points with at least one `b` point within `d_min` under
/// the pose: the recall denominator.
pub fn ground_truth_count(points_a: &[Point3], points_b: &[Point3], pose: &Pose, d_min: f64) -> usize {
    let moved: Vec<Point3> = points_b.iter().map(|p| pose.apply(p)).collect();
    points_a
        .iter()
        .filter(|pa| moved.iter().any(|pb| (*pa - pb).norm() <= d_min))
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub ratio: f64,
    pub precision: f64,
    pub recall: f64,
    pub matches: usize,
    pub correct: usize,
    /// No match passed this threshold; precision is reported as 1.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub ground_truth: usize,
    pub points: Vec<PrPoint>,
}

pub fn pr_curve<D: AsRef<[f64]> + Sync>(
    desc_a: &[D],
    desc_b: &[D],
    points_a: &[Point3],
    points_b: &[Point3],
    pose: &Pose,
    config: &EvalConfig,
) -> Result<PrCurve> {
    config.validate()?;
    if desc_a.len() != points_a.len() || desc_b.len() != points_b.len() {
        return Err(Error::DimensionMismatch("descriptor and point counts differ".into()));
    }
    let mut all = nearest_neighbors(desc_a, desc_b)?;
    label_correct(&mut all, points_a, points_b, pose, config.d_min);
    let ground_truth = ground_truth_count(points_a, points_b, pose, config.d_min);
    let points = config
        .ratio_sweep
        .iter()
        .map(|&ratio| {
            let sel = all.iter().filter(|m| m.ratio <= ratio);
            let (matches, correct) = sel.fold((0, 0), |(n, c), m| (n + 1, c + (m.correct == Some(true)) as usize));
            PrPoint {
                ratio,
                precision: if matches == 0 {
                    1.0
                } else {
                    correct as f64 / matches as f64
                },
                recall: if ground_truth == 0 {
                    0.0
                } else {
                    correct as f64 / ground_truth as f64
                },
                matches,
                correct,
                degenerate: matches == 0,
            }
        })
        .collect();
    Ok(PrCurve { ground_truth, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn identical_single_descriptor() {
        let a = vec![vec![0.5, 0.5]];
        let m = nndr_match(&a, &a, 0.8).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].distance, 0.0);
        assert_eq!(m[0].ratio, 0.0);
    }

    #[test]
    fn ratio_is_nearest_over_second() {
        let a = vec![vec![0.0, 0.0]];
        let b = vec![vec![0.5, 0.0], vec![0.1, 0.0], vec![0.0, 0.7]];
        let m = nndr_match(&a, &b, 0.8).unwrap();
        assert_eq!(m[0].index_b, 1);
        assert!((m[0].ratio - 0.2).abs() < 1e-12);
        assert!(nndr_match(&a, &b, 0.1).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let a = vec![vec![0.0, 0.0]];
        let b = vec![vec![0.0, 0.0, 1.0]];
        assert!(matches!(nndr_match(&a, &b, 0.8), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn correctness_threshold() {
        let p = vec![Point3::new(0.0, 0.0, 1.0)];
        let q = vec![Point3::new(0.06, 0.0, 1.0)];
        let mut m = vec![Match {
            index_a: 0,
            index_b: 0,
            distance: 0.0,
            ratio: 0.0,
            correct: None,
        }];
        label_correct(&mut m, &p, &p, &Pose::identity(), 0.05);
        assert_eq!(m[0].correct, Some(true));
        label_correct(&mut m, &p, &q, &Pose::identity(), 0.05);
        assert_eq!(m[0].correct, Some(false));
    }

    #[test]
    fn rotated_pair_within_radius() {
        let pose = Pose::rot_z(std::f64::consts::FRAC_PI_2).with_translation(Vector3::new(0.1, -0.2, 0.3));
        let pa = Point3::new(0.2, 0.1, 1.2);
        let pb = pose.inverse().apply(&(pa + Vector3::new(0.03, 0.0, 0.0)));
        assert!((reprojection_error(&pa, &pb, &pose) - 0.03).abs() < 1e-12);
        let mut m = vec![Match {
            index_a: 0,
            index_b: 0,
            distance: 0.0,
            ratio: 0.0,
            correct: None,
        }];
        label_correct(&mut m, &[pa], &[pb], &pose, 0.05);
        assert_eq!(m[0].correct, Some(true));
    }

    #[test]
    fn inliers() {
        let mk = |c| Match {
            index_a: 0,
            index_b: 0,
            distance: 0.0,
            ratio: 0.0,
            correct: Some(c),
        };
        let m: Vec<Match> = (0..10).map(|i| mk(i < 7)).collect();
        assert!((inlier_percentage(&m) - 0.7).abs() < 1e-12);
        assert_eq!(inlier_percentage(&[]), 0.0);
        assert_eq!(inlier_percentage(&[mk(true), mk(true)]), 1.0);
    }

    #[test]
    fn degenerate_pr_point() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let b = vec![vec![0.0, 0.9], vec![0.9, 0.0]];
        let pts = vec![Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 1.0)];
        let cfg = EvalConfig {
            ratio_sweep: vec![0.01, 1.0],
            ..Default::default()
        };
        let c = pr_curve(&a, &b, &pts, &pts, &Pose::identity(), &cfg).unwrap();
        assert!(c.points[0].degenerate);
        assert_eq!(c.points[0].precision, 1.0);
        assert_eq!(c.points[1].precision, 1.0);
        assert_eq!(c.points[1].recall, 1.0);
    }

    #[test]
    fn sweep_validation() {
        let cfg = EvalConfig {
            ratio_sweep: vec![0.5, 0.5],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(EvalConfig::default().validate().is_ok());
    }
}
