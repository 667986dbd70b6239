//! Keypoint detection on the blended appearance + shape corner response.
//!
//! The autocorrelation energy of a shift is a weighted sum of the intensity
//! SSD and the dot-product-image SSD. Its quadratic approximation is the
//! same convex combination of the two channels' structure tensors, so the
//! response is the Harris functional of `τ·M_I + (1-τ)·M_P`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::RgbdFrame;
use crate::geometry::Point3;
use crate::grid::Grid;
use crate::surface::DotProductImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    /// Weight of the intensity channel; `1 - tau` goes to the shape channel.
    pub tau: f64,
    /// Standard deviation of the Gaussian window, in pixels.
    pub window_sigma: f64,
    pub harris_k: f64,
    pub nms_radius: usize,
    pub max_keypoints: usize,
    /// Fraction of the frame's maximum response below which pixels are ignored.
    pub response_floor: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            tau: 0.8,
            window_sigma: 2.0,
            harris_k: 0.04,
            nms_radius: 4,
            max_keypoints: 1000,
            response_floor: 0.01,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidParam(format!("tau must be in [0, 1], got {}", self.tau)));
        }
        if !(self.window_sigma > 0.0) {
            return Err(Error::InvalidParam("window_sigma must be > 0".into()));
        }
        if self.nms_radius < 1 {
            return Err(Error::InvalidParam("nms_radius must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.response_floor) {
            return Err(Error::InvalidParam("response_floor must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub response: f64,
    pub depth: f64,
    #[serde(skip)]
    pub position: Point3,
}

impl Keypoint {
    #[inline]
    pub fn pixel(&self) -> (usize, usize) {
        (self.u as usize, self.v as usize)
    }
}

/// Gaussian-weighted gradient outer products `(xx, xy, yy)` of one channel.
#[derive(Clone, Debug)]
pub struct StructureTensor {
    pub xx: Grid<f64>,
    pub xy: Grid<f64>,
    pub yy: Grid<f64>,
}

impl StructureTensor {
    fn from_gradients(gx: &Grid<f64>, gy: &Grid<f64>, sigma: f64) -> Self {
        let (w, h) = gx.dims();
        let prod = |f: &dyn Fn(f64, f64) -> f64| {
            let data = gx
                .as_slice()
                .iter()
                .zip(gy.as_slice())
                .map(|(&a, &b)| f(a, b))
                .collect();
            gaussian_blur(&Grid::from_vec(w, h, data).expect("same dims"), sigma)
        };
        Self {
            xx: prod(&|a, _| a * a),
            xy: prod(&|a, b| a * b),
            yy: prod(&|_, b| b * b),
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.xx.as_slice()[i], self.xy.as_slice()[i], self.yy.as_slice()[i]]
    }
}

/// Per-channel structure tensors for the intensity and dot-product images.
#[derive(Clone, Debug)]
pub struct BlendTensors {
    pub intensity: StructureTensor,
    pub shape: StructureTensor,
}

impl BlendTensors {
    pub fn compute(frame: &RgbdFrame, dp: &DotProductImage, sigma: f64) -> Result<Self> {
        if dp.dims() != (frame.width(), frame.height()) {
            return Err(Error::DimensionMismatch(format!(
                "dot-product image {:?} vs frame {}x{}",
                dp.dims(),
                frame.width(),
                frame.height()
            )));
        }
        let (gx, gy) = sobel(frame.gray());
        let intensity = StructureTensor::from_gradients(&gx, &gy, sigma);
        let (px, py) = sobel_masked(dp.grid());
        let shape = StructureTensor::from_gradients(&px, &py, sigma);
        Ok(Self { intensity, shape })
    }

    /// Harris response of the blended tensor at every pixel.
    pub fn response(&self, tau: f64, k: f64) -> Grid<f64> {
        let (w, h) = self.intensity.xx.dims();
        let data = (0..w * h)
            .into_par_iter()
            .map(|i| blended_harris(self.intensity.at(i), self.shape.at(i), tau, k))
            .collect();
        Grid::from_vec(w, h, data).expect("same dims")
    }
}

/// `det(M) - k·trace(M)²` for `M = τ·a + (1-τ)·b`, tensors given as `(xx, xy, yy)`.
#[inline]
pub fn blended_harris(a: [f64; 3], b: [f64; 3], tau: f64, k: f64) -> f64 {
    let m = [0, 1, 2].map(|j| tau * a[j] + (1.0 - tau) * b[j]);
    let det = m[0] * m[2] - m[1] * m[1];
    let tr = m[0] + m[2];
    det - k * tr * tr
}

pub fn blended_response(frame: &RgbdFrame, dp: &DotProductImage, params: &DetectorParams) -> Result<Grid<f64>> {
    params.validate()?;
    let t = BlendTensors::compute(frame, dp, params.window_sigma)?;
    Ok(t.response(params.tau, params.harris_k))
}

pub fn detect(frame: &RgbdFrame, dp: &DotProductImage, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    let response = blended_response(frame, dp, params)?;
    Ok(select_keypoints(frame, &response, params))
}

/// Relative threshold, local-maximum test, greedy radius suppression and
/// top-K on a response map. Keypoints without valid depth are dropped.
pub fn select_keypoints(frame: &RgbdFrame, response: &Grid<f64>, params: &DetectorParams) -> Vec<Keypoint> {
    let (w, h) = response.dims();
    let r = response.as_slice();
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || params.max_keypoints == 0 {
        return Vec::new();
    }
    let floor = params.response_floor * max;
    let rad = params.nms_radius as isize;
    let rad2 = rad * rad;

    // Lower linear index wins ties, so plateaus yield exactly one maximum.
    let beats = |i: usize, j: usize| r[i] > r[j] || (r[i] == r[j] && i < j);
    let is_local_max = |x: usize, y: usize| {
        let i = y * w + x;
        for dy in -rad..=rad {
            for dx in -rad..=rad {
                if (dx == 0 && dy == 0) || dx * dx + dy * dy > rad2 {
                    continue;
                }
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                if beats(ny as usize * w + nx as usize, i) {
                    return false;
                }
            }
        }
        true
    };

    let mut candidates: Vec<usize> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).filter_map(move |x| {
                let i = y * w + x;
                (r[i] > floor && r[i] > 0.0 && frame.depth_at(x, y).is_some() && is_local_max(x, y)).then_some(i)
            })
        })
        .collect();
    candidates.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));

    let mut suppressed = vec![false; w * h];
    let mut out = Vec::new();
    for i in candidates {
        if suppressed[i] {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let depth = frame.depth_at(x, y).expect("filtered above");
        out.push(Keypoint {
            u: x as f64,
            v: y as f64,
            response: r[i],
            depth,
            position: frame.point_at(x, y).expect("filtered above"),
        });
        if out.len() == params.max_keypoints {
            break;
        }
        for dy in -rad..=rad {
            for dx in -rad..=rad {
                if dx * dx + dy * dy > rad2 {
                    continue;
                }
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                    suppressed[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    out
}

const SOBEL_SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];
const SOBEL_DIFF: [f64; 3] = [-1.0, 0.0, 1.0];

/// 3x3 Sobel gradients with replicated borders.
pub fn sobel(img: &Grid<f64>) -> (Grid<f64>, Grid<f64>) {
    let (w, h) = img.dims();
    let at = |x: isize, y: isize| *img.get(x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize);
    let gx = Grid::from_fn(w, h, |x, y| {
        let mut s = 0.0;
        for j in 0..3 {
            for i in 0..3 {
                s += SOBEL_SMOOTH[j] * SOBEL_DIFF[i] * at(x as isize + i as isize - 1, y as isize + j as isize - 1);
            }
        }
        s
    });
    let gy = Grid::from_fn(w, h, |x, y| {
        let mut s = 0.0;
        for j in 0..3 {
            for i in 0..3 {
                s += SOBEL_DIFF[j] * SOBEL_SMOOTH[i] * at(x as isize + i as isize - 1, y as isize + j as isize - 1);
            }
        }
        s
    });
    (gx, gy)
}

/// Sobel on a partially valid image: any invalid pixel in the 3x3 stencil
/// zeroes the gradient there.
fn sobel_masked(img: &Grid<Option<u8>>) -> (Grid<f64>, Grid<f64>) {
    let (w, h) = img.dims();
    let mut gx = Grid::filled(w, h, 0.0);
    let mut gy = Grid::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut patch = [[0.0; 3]; 3];
            let mut ok = true;
            'stencil: for (j, row) in patch.iter_mut().enumerate() {
                for (i, cell) in row.iter_mut().enumerate() {
                    let sx = (x as isize + i as isize - 1).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + j as isize - 1).clamp(0, h as isize - 1) as usize;
                    match img.get(sx, sy) {
                        Some(v) => *cell = *v as f64,
                        None => {
                            ok = false;
                            break 'stencil;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    sx += SOBEL_SMOOTH[j] * SOBEL_DIFF[i] * patch[j][i];
                    sy += SOBEL_DIFF[j] * SOBEL_SMOOTH[i] * patch[j][i];
                }
            }
            *gx.get_mut(x, y) = sx;
            *gy.get_mut(x, y) = sy;
        }
    }
    (gx, gy)
}

/// Normalized Gaussian taps truncated at `3σ`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur; taps falling outside the image are dropped and
/// the remaining weights renormalized.
pub fn gaussian_blur(img: &Grid<f64>, sigma: f64) -> Grid<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = img.dims();
    let pass = |src: &Grid<f64>, horizontal: bool| {
        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (t, kv) in k.iter().enumerate() {
                    let off = t as isize - r;
                    let (sx, sy) = if horizontal {
                        (x as isize + off, y as isize)
                    } else {
                        (x as isize, y as isize + off)
                    };
                    if let Some(v) = src.try_get(sx, sy) {
                        acc += kv * v;
                        wsum += kv;
                    }
                }
                *o = acc / wsum;
            }
        });
        Grid::from_vec(w, h, out).expect("sized above")
    };
    let tmp = pass(img, true);
    pass(&tmp, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;

    fn frame(gray: Grid<f64>) -> RgbdFrame {
        let (w, h) = gray.dims();
        let k = CameraIntrinsics::centered(100.0, w, h).unwrap();
        RgbdFrame::new(gray, Grid::filled(w, h, 1.0), k).unwrap()
    }

    fn flat_dp(w: usize, h: usize) -> DotProductImage {
        DotProductImage::new(Grid::filled(w, h, Some(200)))
    }

    #[test]
    fn constant_images_have_zero_response() {
        let f = frame(Grid::filled(32, 24, 90.0));
        let r = blended_response(&f, &flat_dp(32, 24), &DetectorParams::default()).unwrap();
        assert!(r.as_slice().iter().all(|v| *v == 0.0));
        assert!(detect(&f, &flat_dp(32, 24), &DetectorParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let f = frame(Grid::filled(32, 24, 90.0));
        assert!(matches!(
            blended_response(&f, &flat_dp(24, 32), &DetectorParams::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn single_corner_is_found() {
        // One dark quadrant: an L-corner at (20, 15).
        let g = Grid::from_fn(40, 30, |x, y| if x >= 20 && y >= 15 { 30.0 } else { 220.0 });
        let f = frame(g);
        let params = DetectorParams {
            response_floor: 0.1,
            ..DetectorParams::default()
        };
        let kps = detect(&f, &flat_dp(40, 30), &params).unwrap();
        assert!(!kps.is_empty());
        let best = kps[0];
        assert!((best.u - 19.5).abs() <= 2.0 && (best.v - 14.5).abs() <= 2.0, "{best:?}");
    }

    #[test]
    fn kernel_is_normalized_and_truncated() {
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_dp_contributes_nothing() {
        let mut g = Grid::filled(20, 20, Some(100u8));
        *g.get_mut(10, 10) = None;
        *g.get_mut(5, 5) = Some(250);
        let (gx, gy) = sobel_masked(&g);
        for (x, y) in [(9, 9), (10, 10), (11, 11), (9, 11)] {
            assert_eq!(*gx.get(x, y), 0.0);
            assert_eq!(*gy.get(x, y), 0.0);
        }
        assert!(*gx.get(4, 5) != 0.0);
    }

    #[test]
    fn param_validation() {
        let bad = DetectorParams {
            tau: 1.5,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorParams {
            nms_radius: 0,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
