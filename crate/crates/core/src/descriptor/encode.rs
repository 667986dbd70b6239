use std::f64::consts::TAU;

use super::{DescriptorParams, SupportPatch};
use crate::detector::Keypoint;
use crate::frame::RgbdFrame;
use crate::surface::NormalImage;

#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    pub keypoint: Keypoint,
    /// Orientation used for the spatial sectors, radians.
    pub theta: f64,
    /// L1-normalized histogram, or all zeros when `is_empty()`.
    pub bins: Vec<f64>,
    /// Number of pixels that voted.
    pub votes: usize,
}

impl Descriptor {
    pub fn is_empty(&self) -> bool {
        self.votes == 0
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }
}

impl AsRef<[f64]> for Descriptor {
    fn as_ref(&self) -> &[f64] {
        &self.bins
    }
}

/// Sector `0..n_pie` of offset `(du, dv)` measured from orientation `theta`.
#[inline]
pub fn spatial_label(du: f64, dv: f64, theta: f64, n_pie: usize) -> usize {
    let a = (dv.atan2(du) - theta).rem_euclid(TAU);
    ((a * n_pie as f64 / TAU) as usize).min(n_pie - 1)
}

/// Equal-cardinality rank groups: ascending rank `r` of `n` values maps to
/// `floor(r·groups/n)`. Ties keep input order.
pub fn rank_labels(values: &[f64], groups: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * groups / n;
    }
    labels
}

/// `ρ >= rho_bar` gets label `n_vec`; the rest are rank-grouped into
/// `0..n_vec`.
pub fn normal_labels(rhos: &[f64], rho_bar: f64, n_vec: usize) -> Vec<usize> {
    let mut labels = vec![n_vec; rhos.len()];
    let low: Vec<usize> = (0..rhos.len()).filter(|&i| rhos[i] < rho_bar).collect();
    let low_vals: Vec<f64> = low.iter().map(|&i| rhos[i]).collect();
    for (&i, l) in low.iter().zip(rank_labels(&low_vals, n_vec)) {
        labels[i] = l;
    }
    labels
}

/// Histograms the refined patch. Pixels without a normal, and the keypoint
/// pixel itself, do not vote. Intensity ranks are taken over the voting
/// pixels only.
pub fn build_descriptor(
    frame: &RgbdFrame,
    nimg: &NormalImage,
    patch: &SupportPatch,
    theta: f64,
    params: &DescriptorParams,
) -> Descriptor {
    let kp = patch.keypoint;
    let mut bins = vec![0.0; params.dim()];
    let (ku, kv) = kp.pixel();
    let empty = |bins| Descriptor {
        keypoint: kp,
        theta,
        bins,
        votes: 0,
    };
    let Some(nk) = nimg.get(ku, kv) else {
        return empty(bins);
    };

    let mut sectors = Vec::with_capacity(patch.pixels_2d.len());
    let mut intensities = Vec::with_capacity(patch.pixels_2d.len());
    let mut rhos = Vec::with_capacity(patch.pixels_2d.len());
    for &(x, y) in &patch.pixels_2d {
        if (x, y) == (ku, kv) {
            continue;
        }
        let Some(n) = nimg.get(x, y) else { continue };
        sectors.push(spatial_label(x as f64 - kp.u, y as f64 - kp.v, theta, params.n_pie));
        intensities.push(*frame.gray().get(x, y));
        rhos.push(nk.dot(&n).abs());
    }
    let votes = sectors.len();
    if votes == 0 {
        return empty(bins);
    }
    let ilab = rank_labels(&intensities, params.n_bin);
    let nlab = normal_labels(&rhos, params.rho_bar, params.n_vec);
    let nv = params.n_vec + 1;
    for i in 0..votes {
        bins[(sectors[i] * params.n_bin + ilab[i]) * nv + nlab[i]] += 1.0;
    }
    let total = votes as f64;
    bins.iter_mut().for_each(|b| *b /= total);
    Descriptor {
        keypoint: kp,
        theta,
        bins,
        votes,
    }
}
