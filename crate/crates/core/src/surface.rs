//! Depth-derived surface channels: per-pixel normals, their quantized axis
//! angles, the frame's dominant ("main") normal, and the dot-product image
//! used as the detector's shape channel.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::RgbdFrame;
use crate::geometry::Point3;
use crate::grid::Grid;
use crate::pca::{Moments, Principal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalParams {
    /// Odd side length of the square fitting window, in pixels.
    pub window: usize,
    /// Neighbours farther than this (meters) from the centre point are
    /// ignored, so fits never straddle a depth discontinuity.
    pub max_neighbor_distance: f64,
    /// Minimum fraction of the window that must contribute.
    pub min_valid_fraction: f64,
}

impl Default for NormalParams {
    fn default() -> Self {
        Self {
            window: 11,
            max_neighbor_distance: 0.1,
            min_valid_fraction: 0.3,
        }
    }
}

impl NormalParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "normal window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.max_neighbor_distance > 0.0) {
            return Err(Error::InvalidParam("max_neighbor_distance must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return Err(Error::InvalidParam("min_valid_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-pixel unit normals facing the camera (`n.z <= 0`); `None` where no
/// normal could be fitted.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalImage {
    normals: Grid<Option<Vector3<f64>>>,
}

impl NormalImage {
    pub fn new(normals: Grid<Option<Vector3<f64>>>) -> Self {
        Self { normals }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        *self.normals.get(x, y)
    }

    pub fn grid(&self) -> &Grid<Option<Vector3<f64>>> {
        &self.normals
    }

    pub fn dims(&self) -> (usize, usize) {
        self.normals.dims()
    }

    pub fn valid_count(&self) -> usize {
        self.normals.as_slice().iter().flatten().count()
    }
}

/// Fits a normal at every pixel with the given window and default gating.
pub fn estimate_normals(frame: &RgbdFrame, window: usize) -> Result<NormalImage> {
    estimate_normals_with(
        frame,
        &NormalParams {
            window,
            ..NormalParams::default()
        },
    )
}

/// Local plane fit: the normal is the least-variance principal axis of the
/// back-projected points in the window around each pixel.
pub fn estimate_normals_with(frame: &RgbdFrame, params: &NormalParams) -> Result<NormalImage> {
    params.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let points = Grid::from_fn(w, h, |x, y| frame.point_at(x, y));
    let half = (params.window / 2) as isize;
    let min_count = ((params.min_valid_fraction * (params.window * params.window) as f64).ceil() as usize).max(3);
    let max_d2 = params.max_neighbor_distance * params.max_neighbor_distance;

    let mut out = vec![None; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            let Some(center) = *points.get(x, y) else {
                continue;
            };
            let mut m = Moments::default();
            for dy in -half..=half {
                for dx in -half..=half {
                    if let Some(Some(p)) = points.try_get(x as isize + dx, y as isize + dy) {
                        let d: Point3 = p - center;
                        if d.norm_squared() < max_d2 {
                            m.push(&d);
                        }
                    }
                }
            }
            if m.count() < min_count {
                continue;
            }
            let Some(cov) = m.covariance() else { continue };
            let pc = Principal::from_covariance(&cov);
            // Collinear or single-point support has no defined plane.
            if !(pc.values[1] > 1e-12 * pc.values[0].max(f64::MIN_POSITIVE)) {
                continue;
            }
            let mut n = pc.smallest();
            if n.z > 0.0 {
                n = -n;
            }
            *slot = Some(n);
        }
    });
    Ok(NormalImage {
        normals: Grid::from_vec(w, h, out).expect("sized above"),
    })
}

/// Maps an angle in radians from `[0, π]` to a sector label in `1..=n_s`.
///
/// Sectors are right-open, `[(k-1)·π/n_s, k·π/n_s)`; exactly `π` is
/// clamped into sector `n_s`.
#[inline]
pub fn sector_label(angle: f64, n_s: u8) -> u8 {
    let k = (angle * n_s as f64 / PI).floor();
    (k.clamp(0.0, (n_s - 1) as f64) as u8) + 1
}

/// Angles (radians) between `n` and the camera x, y, z axes.
#[inline]
pub fn axis_angles(n: &Vector3<f64>) -> [f64; 3] {
    [n.x, n.y, n.z].map(|c| c.clamp(-1.0, 1.0).acos())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngleLabels {
    labels: Grid<Option<[u8; 3]>>,
    n_s: u8,
}

impl AngleLabels {
    pub fn n_s(&self) -> u8 {
        self.n_s
    }

    pub fn grid(&self) -> &Grid<Option<[u8; 3]>> {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[u8; 3]> {
        *self.labels.get(x, y)
    }
}

pub fn label_angles(nimg: &NormalImage, n_s: u8) -> Result<AngleLabels> {
    if n_s < 2 {
        return Err(Error::InvalidParam(format!("n_s must be >= 2, got {n_s}")));
    }
    let labels = nimg
        .normals
        .map(|n| n.map(|n| axis_angles(&n).map(|a| sector_label(a, n_s))));
    Ok(AngleLabels { labels, n_s })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MainNormal {
    pub label_triple: [u8; 3],
    pub vector: Vector3<f64>,
}

impl MainNormal {
    /// Direction whose axis angles are the midpoints of the labelled sectors.
    pub fn from_labels(label_triple: [u8; 3], n_s: u8) -> Result<Self> {
        let width = PI / n_s as f64;
        let c = label_triple.map(|l| ((l as f64 - 0.5) * width).cos());
        let v = Vector3::new(c[0], c[1], c[2]);
        let norm = v.norm();
        if !(norm > 1e-12) {
            return Err(Error::InvalidParam(format!(
                "label triple {label_triple:?} has no direction for n_s={n_s}"
            )));
        }
        Ok(Self {
            label_triple,
            vector: v / norm,
        })
    }
}

/// Per-channel most frequent label; ties go to the lower label.
pub fn main_normal(labels: &AngleLabels) -> Result<MainNormal> {
    let n_s = labels.n_s as usize;
    let mut hist = vec![[0usize; 3]; n_s];
    let mut any = false;
    for l in labels.labels.as_slice().iter().flatten() {
        any = true;
        for (ch, &lab) in l.iter().enumerate() {
            hist[lab as usize - 1][ch] += 1;
        }
    }
    if !any {
        return Err(Error::EmptyFrame);
    }
    let mut triple = [0u8; 3];
    for (ch, slot) in triple.iter_mut().enumerate() {
        let mut best = 0;
        for k in 1..n_s {
            if hist[k][ch] > hist[best][ch] {
                best = k;
            }
        }
        *slot = best as u8 + 1;
    }
    MainNormal::from_labels(triple, labels.n_s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DotProductImage {
    values: Grid<Option<u8>>,
}

impl DotProductImage {
    pub fn new(values: Grid<Option<u8>>) -> Self {
        Self { values }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<u8> {
        *self.values.get(x, y)
    }

    pub fn grid(&self) -> &Grid<Option<u8>> {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }
}

#[inline]
pub fn dot_product_value(n: &Vector3<f64>, main: &Vector3<f64>) -> u8 {
    (255.0 * n.dot(main).abs().min(1.0)).round() as u8
}

pub fn dot_product_image(nimg: &NormalImage, main: &MainNormal) -> DotProductImage {
    DotProductImage {
        values: nimg.normals.map(|n| n.map(|n| dot_product_value(&n, &main.vector))),
    }
}

/// All surface channels for one frame.
#[derive(Clone, Debug)]
pub struct SurfaceChannels {
    pub normals: NormalImage,
    pub labels: AngleLabels,
    pub main: MainNormal,
    pub dot_product: DotProductImage,
}

pub fn compute_channels(frame: &RgbdFrame, params: &NormalParams, n_s: u8) -> Result<SurfaceChannels> {
    let normals = estimate_normals_with(frame, params)?;
    let labels = label_angles(&normals, n_s)?;
    let main = main_normal(&labels)?;
    let dot_product = dot_product_image(&normals, &main);
    Ok(SurfaceChannels {
        normals,
        labels,
        main,
        dot_product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;

    fn frame_from_depth(w: usize, h: usize, depth: impl Fn(f64, f64, &CameraIntrinsics) -> f64) -> RgbdFrame {
        let k = CameraIntrinsics::centered(100.0, w, h).unwrap();
        let d = Grid::from_fn(w, h, |x, y| depth(x as f64, y as f64, &k));
        RgbdFrame::new(Grid::filled(w, h, 128.0), d, k).unwrap()
    }

    #[test]
    fn fronto_parallel_plane() {
        let f = frame_from_depth(40, 30, |_, _, _| 1.0);
        let n = estimate_normals(&f, 11).unwrap();
        // Image corners see 36 of 121 window pixels, under the 30% floor.
        assert_eq!(n.valid_count(), 40 * 30 - 4);
        assert!(n.get(0, 0).is_none() && n.get(1, 0).is_some());
        for v in n.grid().as_slice().iter().flatten() {
            assert!((v - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9, "{v}");
        }
    }

    #[test]
    fn slanted_plane_matches_analytic_normal() {
        // Plane x + z = 2: ray (a, b, 1)·t hits at t = 2 / (1 + a).
        let f = frame_from_depth(60, 40, |u, _, k| 2.0 / (1.0 + (u - k.cx) / k.fx));
        let n = estimate_normals(&f, 11).unwrap();
        let expect = Vector3::new(-1.0, 0.0, -1.0).normalize();
        for v in n.grid().as_slice().iter().flatten() {
            assert!((v - expect).norm() < 1e-3, "{v}");
        }
    }

    #[test]
    fn invalid_depth_gives_invalid_normals() {
        let f = frame_from_depth(20, 20, |_, _, _| 0.0);
        let n = estimate_normals(&f, 11).unwrap();
        assert_eq!(n.valid_count(), 0);
    }

    #[test]
    fn sparse_support_is_invalid() {
        // A single valid column: below 30 % of an 11x11 window.
        let f = frame_from_depth(20, 20, |u, _, _| if u == 10.0 { 1.0 } else { 0.0 });
        let n = estimate_normals(&f, 11).unwrap();
        assert_eq!(n.valid_count(), 0);
    }

    #[test]
    fn window_must_be_odd() {
        let f = frame_from_depth(10, 10, |_, _, _| 1.0);
        assert!(estimate_normals(&f, 4).is_err());
        assert!(estimate_normals(&f, 1).is_err());
    }

    #[test]
    fn worked_label_example() {
        let s = 3f64.sqrt() / 3.0;
        let a = axis_angles(&Vector3::new(s, s, s));
        for x in a {
            assert!((x.to_degrees() - 54.7356).abs() < 1e-3);
        }
        assert_eq!(a.map(|x| sector_label(x, 4)), [2, 2, 2]);
    }

    #[test]
    fn boundary_labels() {
        let a = axis_angles(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(a.map(|x| sector_label(x, 4)), [1, 3, 3]);
        let a = axis_angles(&Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(sector_label(a[2], 4), 4);
    }

    fn labels_of(v: Vec<[u8; 3]>, w: usize, n_s: u8) -> AngleLabels {
        let h = v.len() / w;
        AngleLabels {
            labels: Grid::from_vec(w, h, v.into_iter().map(Some).collect()).unwrap(),
            n_s,
        }
    }

    #[test]
    fn main_normal_votes_per_channel() {
        let m = main_normal(&labels_of(vec![[2, 2, 2]; 12], 4, 4)).unwrap();
        assert_eq!(m.label_triple, [2, 2, 2]);
        let c = 67.5f64.to_radians().cos();
        assert!((c - 0.3827).abs() < 1e-4);
        let s = 1.0 / 3f64.sqrt();
        assert!((m.vector - Vector3::new(s, s, s)).norm() < 1e-12);

        let mut v = vec![[1, 3, 3]; 6];
        v.extend(vec![[2, 2, 2]; 4]);
        let m = main_normal(&labels_of(v, 5, 4)).unwrap();
        assert_eq!(m.label_triple, [1, 3, 3]);
        assert!((m.vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn main_normal_of_empty_frame() {
        let l = AngleLabels {
            labels: Grid::filled(3, 3, None),
            n_s: 4,
        };
        assert!(matches!(main_normal(&l), Err(Error::EmptyFrame)));
    }

    #[test]
    fn dot_product_values() {
        let main = Vector3::new(0.0, 0.0, -1.0);
        assert_eq!(dot_product_value(&main, &main), 255);
        assert_eq!(dot_product_value(&Vector3::new(1.0, 0.0, 0.0), &main), 0);
        let sixty = Vector3::new(60f64.to_radians().sin(), 0.0, -(60f64.to_radians().cos()));
        assert_eq!(dot_product_value(&sixty, &main), 128);
        assert_eq!(dot_product_value(&-sixty, &main), 128);
    }

    #[test]
    fn planar_scene_has_constant_dp() {
        let f = frame_from_depth(60, 40, |u, v, k| {
            let a = (u - k.cx) / k.fx;
            let b = (v - k.cy) / k.fy;
            1.5 / (1.0 + 0.3 * a + 0.2 * b)
        });
        let ch = compute_channels(&f, &NormalParams::default(), 4).unwrap();
        let vals: Vec<u8> = ch.dot_product.grid().as_slice().iter().flatten().copied().collect();
        let (lo, hi) = (vals.iter().min().unwrap(), vals.iter().max().unwrap());
        assert!(hi - lo <= 1, "{lo}..{hi}");
    }
}
