use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Point3};
use crate::grid::Grid;

/// Registered grayscale + metric depth pair.
///
/// Intensities live in `[0, 255]` but are stored as `f64` so synthetic
/// renders can carry sub-quantum detail. A depth of `0` marks an invalid
/// pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbdFrame {
    gray: Grid<f64>,
    depth: Grid<f64>,
    intrinsics: CameraIntrinsics,
}

impl RgbdFrame {
    /// Non-finite depths are normalized to `0` (invalid); negative depths
    /// and out-of-range intensities are rejected.
    pub fn new(gray: Grid<f64>, mut depth: Grid<f64>, intrinsics: CameraIntrinsics) -> Result<Self> {
        let dims = (intrinsics.width, intrinsics.height);
        if gray.dims() != dims || depth.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "gray {:?}, depth {:?}, intrinsics {:?}",
                gray.dims(),
                depth.dims(),
                dims
            )));
        }
        for d in depth.as_mut_slice() {
            if !d.is_finite() {
                *d = 0.0;
            } else if *d < 0.0 {
                return Err(Error::InvalidParam(format!("negative depth {d}")));
            }
        }
        if let Some(g) = gray.as_slice().iter().find(|g| !(0.0..=255.0).contains(*g)) {
            return Err(Error::InvalidParam(format!("intensity {g} outside [0, 255]")));
        }
        Ok(Self {
            gray,
            depth,
            intrinsics,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    #[inline]
    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    #[inline]
    pub fn gray(&self) -> &Grid<f64> {
        &self.gray
    }

    #[inline]
    pub fn depth(&self) -> &Grid<f64> {
        &self.depth
    }

    #[inline]
    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        let d = *self.depth.get(x, y);
        (d > 0.0).then_some(d)
    }

    #[inline]
    pub fn point_at(&self, x: usize, y: usize) -> Option<Point3> {
        self.depth_at(x, y)
            .map(|d| self.intrinsics.unproject(x as f64, y as f64, d))
    }

    /// Replaces the intensity channel, keeping depth and intrinsics.
    pub fn with_gray(&self, gray: Grid<f64>) -> Result<Self> {
        Self::new(gray, self.depth.clone(), self.intrinsics)
    }

    pub fn valid_depth_count(&self) -> usize {
        self.depth.as_slice().iter().filter(|d| **d > 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_dimensions() {
        let k = CameraIntrinsics::centered(10.0, 4, 3).unwrap();
        let gray = Grid::filled(4, 3, 0.0);
        let depth = Grid::filled(3, 4, 1.0);
        assert!(matches!(
            RgbdFrame::new(gray, depth, k),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nan_depth_becomes_invalid() {
        let k = CameraIntrinsics::centered(10.0, 2, 1).unwrap();
        let depth = Grid::from_vec(2, 1, vec![f64::NAN, 1.0]).unwrap();
        let f = RgbdFrame::new(Grid::filled(2, 1, 0.0), depth, k).unwrap();
        assert_eq!(f.depth_at(0, 0), None);
        assert_eq!(f.depth_at(1, 0), Some(1.0));
        assert_eq!(f.valid_depth_count(), 1);
    }

    #[test]
    fn rejects_negative_depth() {
        let k = CameraIntrinsics::centered(10.0, 1, 1).unwrap();
        let r = RgbdFrame::new(Grid::filled(1, 1, 0.0), Grid::filled(1, 1, -0.5), k);
        assert!(r.is_err());
    }
}
