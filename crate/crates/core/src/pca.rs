use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::geometry::Point3;

/// Eigen-decomposition of a 3x3 scatter matrix, sorted by descending
/// eigenvalue. Eigenvectors are unit length.
#[derive(Clone, Copy, Debug)]
pub struct Principal {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

impl Principal {
    pub fn from_covariance(cov: &Matrix3<f64>) -> Self {
        let eig = SymmetricEigen::new(*cov);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = idx.map(|i| eig.eigenvalues[i]);
        let vectors = idx.map(|i| eig.eigenvectors.column(i).normalize());
        Self { values, vectors }
    }

    pub fn largest(&self) -> Vector3<f64> {
        self.vectors[0]
    }

    pub fn smallest(&self) -> Vector3<f64> {
        self.vectors[2]
    }
}

/// Running first and second moments of a point set.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: usize,
    sum: Vector3<f64>,
    outer: Matrix3<f64>,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, p: &Point3) {
        self.n += 1;
        self.sum += p;
        self.outer += p * p.transpose();
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Option<Point3> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }

    /// Population covariance about the mean.
    pub fn covariance(&self) -> Option<Matrix3<f64>> {
        let mean = self.mean()?;
        let mut cov = self.outer / self.n as f64 - mean * mean.transpose();
        // Symmetrize away rounding.
        cov = (cov + cov.transpose()) * 0.5;
        Some(cov)
    }
}

/// Population covariance computed in two passes (numerically stabler than
/// [`Moments`] for far-from-origin clouds).
pub fn covariance(points: &[Point3]) -> Option<Matrix3<f64>> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Point3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    Some(cov / n)
}
