//! File formats: 8-bit intensity and 16-bit millimeter depth PNGs, JSON
//! intrinsics/poses/keypoints, the binary descriptor file, CSV outputs and
//! an SVG precision/recall plot.
//!
//! Descriptor file layout (little endian):
//!
//! ```text
//! "RISD" | u32 count | u32 dim | count × { f32 u, f32 v, f32 depth, f32 theta, dim × f32 }
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::descriptor::Descriptor;
use crate::detector::Keypoint;
use crate::error::{Error, Result};
use crate::frame::RgbdFrame;
use crate::geometry::{backproject, CameraIntrinsics, Point3};
use crate::grid::Grid;
use crate::matching::{Match, PrCurve};
use crate::surface::{AngleLabels, DotProductImage};

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"RISD";

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let s = serde_json::to_string_pretty(value)?;
    fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

/// ITU-R BT.601 luma, rounded.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    Ok(image::open(path)?)
}

/// 8-bit grayscale or RGB(A) image as intensities.
pub fn load_gray(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f64).collect(),
        DynamicImage::ImageRgb8(c) => c.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2]) as f64).collect(),
        DynamicImage::ImageRgba8(c) => c.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2]) as f64).collect(),
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.into(),
                reason: format!("expected 8-bit gray or RGB, got {:?}", other.color()),
            })
        }
    };
    Ok(Grid::from_vec(w, h, data).expect("decoder output is w*h"))
}

/// 16-bit single-channel millimeter depth as meters; 0 stays invalid.
pub fn load_depth(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma16(d) => {
            let data = d.into_raw().into_iter().map(|mm| mm as f64 / 1000.0).collect();
            Ok(Grid::from_vec(w, h, data).expect("decoder output is w*h"))
        }
        other => Err(Error::UnsupportedBitDepth {
            path: path.into(),
            reason: format!("expected 16-bit single-channel depth, got {:?}", other.color()),
        }),
    }
}

pub fn load_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    read_json(path)
}

pub fn load_frame(
    color_path: impl AsRef<Path>,
    depth_path: impl AsRef<Path>,
    intrinsics_path: impl AsRef<Path>,
) -> Result<RgbdFrame> {
    let k = load_intrinsics(intrinsics_path)?;
    load_frame_with(color_path, depth_path, k)
}

pub fn load_frame_with(
    color_path: impl AsRef<Path>,
    depth_path: impl AsRef<Path>,
    intrinsics: CameraIntrinsics,
) -> Result<RgbdFrame> {
    let gray = load_gray(color_path)?;
    let depth = load_depth(depth_path)?;
    RgbdFrame::new(gray, depth, intrinsics)
}

fn save_luma8(path: &Path, w: usize, h: usize, data: Vec<u8>) -> Result<()> {
    let img: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(w as u32, h as u32, data).expect("buffer sized to image");
    Ok(img.save(path)?)
}

/// Rounds intensities to 8 bits.
pub fn save_gray(path: impl AsRef<Path>, gray: &Grid<f64>) -> Result<()> {
    let data = gray
        .as_slice()
        .iter()
        .map(|g| g.round().clamp(0.0, 255.0) as u8)
        .collect();
    save_luma8(path.as_ref(), gray.width(), gray.height(), data)
}

/// Writes metric depth as 16-bit millimeters (saturating at 65.535 m).
pub fn save_depth(path: impl AsRef<Path>, depth: &Grid<f64>) -> Result<()> {
    let data: Vec<u16> = depth
        .as_slice()
        .iter()
        .map(|d| (d * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, data).expect("buffer sized to image");
    Ok(img.save(path.as_ref())?)
}

pub fn save_frame(frame: &RgbdFrame, color_path: impl AsRef<Path>, depth_path: impl AsRef<Path>) -> Result<()> {
    save_gray(color_path, frame.gray())?;
    save_depth(depth_path, frame.depth())
}

/// Invalid pixels are written as 0.
pub fn save_dot_product(path: impl AsRef<Path>, dp: &DotProductImage) -> Result<()> {
    let (w, h) = dp.dims();
    let data = dp.grid().as_slice().iter().map(|v| v.unwrap_or(0)).collect();
    save_luma8(path.as_ref(), w, h, data)
}

/// One image per angle channel, label `l` scaled to `255·l/n_s`.
pub fn save_angle_labels(dir: impl AsRef<Path>, labels: &AngleLabels) -> Result<()> {
    let dir = dir.as_ref();
    let (w, h) = labels.grid().dims();
    let scale = 255.0 / labels.n_s() as f64;
    for (ch, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
        let data = labels
            .grid()
            .as_slice()
            .iter()
            .map(|l| l.map_or(0, |l| (l[ch] as f64 * scale).round() as u8))
            .collect();
        save_luma8(&dir.join(format!("labels_{name}.png")), w, h, data)?;
    }
    Ok(())
}

/// Re-attaches 3-D positions to keypoints read from JSON.
pub fn load_keypoints(path: impl AsRef<Path>, k: &CameraIntrinsics) -> Result<Vec<Keypoint>> {
    let raw: Vec<Keypoint> = read_json(path)?;
    raw.into_iter()
        .map(|mut kp| {
            kp.position = backproject(kp.u, kp.v, kp.depth, k)?;
            Ok(kp)
        })
        .collect()
}

/// One record of a descriptor file.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorRecord {
    pub u: f32,
    pub v: f32,
    pub depth: f32,
    pub theta: f32,
    pub bins: Vec<f32>,
}

impl DescriptorRecord {
    pub fn position(&self, k: &CameraIntrinsics) -> Point3 {
        k.unproject(self.u as f64, self.v as f64, self.depth as f64)
    }
}

impl From<&Descriptor> for DescriptorRecord {
    fn from(d: &Descriptor) -> Self {
        Self {
            u: d.keypoint.u as f32,
            v: d.keypoint.v as f32,
            depth: d.keypoint.depth as f32,
            theta: d.theta as f32,
            bins: d.bins.iter().map(|b| *b as f32).collect(),
        }
    }
}

pub fn write_descriptors<W: Write>(mut w: W, descriptors: &[Descriptor], dim: usize) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + descriptors.len() * (16 + 4 * dim));
    buf.extend_from_slice(DESCRIPTOR_MAGIC);
    buf.extend_from_slice(&(descriptors.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for d in descriptors {
        if d.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "descriptor of length {} in a dim-{dim} file",
                d.dim()
            )));
        }
        let r = DescriptorRecord::from(d);
        for x in [r.u, r.v, r.depth, r.theta].iter().chain(&r.bins) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(|e| Error::io("<descriptor stream>", e))
}

pub fn read_descriptors<R: Read>(mut r: R) -> Result<Vec<DescriptorRecord>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)
        .map_err(|e| Error::io("<descriptor stream>", e))?;
    if buf.len() < 12 || &buf[..4] != DESCRIPTOR_MAGIC {
        return Err(Error::Format("missing RISD header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().expect("4 bytes"));
    let (count, dim) = (word(4) as usize, word(8) as usize);
    let rec = 4 * (4 + dim);
    if buf.len() != 12 + count * rec {
        return Err(Error::Format(format!(
            "descriptor file holds {} bytes, header implies {}",
            buf.len(),
            12 + count * rec
        )));
    }
    let f = |i: usize| f32::from_le_bytes(buf[i..i + 4].try_into().expect("4 bytes"));
    Ok((0..count)
        .map(|n| {
            let o = 12 + n * rec;
            DescriptorRecord {
                u: f(o),
                v: f(o + 4),
                depth: f(o + 8),
                theta: f(o + 12),
                bins: (0..dim).map(|j| f(o + 16 + 4 * j)).collect(),
            }
        })
        .collect())
}

pub fn save_descriptors(path: impl AsRef<Path>, descriptors: &[Descriptor], dim: usize) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_descriptors(BufWriter::new(file), descriptors, dim)
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<Vec<DescriptorRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_descriptors(file)
}

pub fn matches_csv(matches: &[Match]) -> String {
    let mut s = String::from("index_a,index_b,distance,ratio,correct\n");
    for m in matches {
        let correct = m.correct.map_or(String::new(), |c| c.to_string());
        let _ = writeln!(s, "{},{},{},{},{}", m.index_a, m.index_b, m.distance, m.ratio, correct);
    }
    s
}

pub fn pr_csv(curve: &PrCurve) -> String {
    let mut s = String::from("ratio,precision,recall\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", p.ratio, p.precision, p.recall);
    }
    s
}

/// Precision (y) against recall (x) on the unit square.
pub fn pr_svg(curve: &PrCurve, title: &str) -> String {
    const W: f64 = 400.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let x = |r: f64| M + r * (W - 2.0 * M);
    let y = |p: f64| H - M - p * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#,
            x(v),
            H - M + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#,
            M - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">recall</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">precision</text>"#,
        H / 2.0,
        H / 2.0
    );
    let title = title.replace('&', "&amp;").replace('<', "&lt;");
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle">{title}</text>"#, W / 2.0);
    let pts: Vec<String> = curve
        .points
        .iter()
        .filter(|p| !p.degenerate)
        .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
        .collect();
    if !pts.is_empty() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn luma_weights() {
        assert_eq!(luma(100, 150, 200), 141);
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
    }

    #[test]
    fn depth_and_color_loading() {
        let dir = tempfile::tempdir().unwrap();
        let depth: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(2, 1, vec![1500u16, 0]).unwrap();
        depth.save(dir.path().join("d.png")).unwrap();
        let mut rgb = RgbImage::new(2, 1);
        rgb.put_pixel(0, 0, Rgb([100, 150, 200]));
        rgb.save(dir.path().join("c.png")).unwrap();
        let k = CameraIntrinsics::new(10.0, 10.0, 0.5, 0.0, 2, 1).unwrap();
        let f = load_frame_with(dir.path().join("c.png"), dir.path().join("d.png"), k).unwrap();
        assert_eq!(f.depth_at(0, 0), Some(1.5));
        assert_eq!(f.depth_at(1, 0), None);
        assert_eq!(*f.gray().get(0, 0), 141.0);

        let k3 = CameraIntrinsics::new(10.0, 10.0, 0.5, 0.0, 3, 1).unwrap();
        let r = load_frame_with(dir.path().join("c.png"), dir.path().join("d.png"), k3);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn eight_bit_depth_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d8.png");
        let img: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(1, 1, vec![7u8]).unwrap();
        img.save(&p).unwrap();
        assert!(matches!(load_depth(&p), Err(Error::UnsupportedBitDepth { .. })));
        assert!(matches!(
            load_depth(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn descriptor_file_layout() {
        let kp = Keypoint {
            u: 3.0,
            v: 4.0,
            response: 1.0,
            depth: 1.25,
            position: Point3::zeros(),
        };
        let d = Descriptor {
            keypoint: kp,
            theta: 0.5,
            bins: vec![0.25, 0.75],
            votes: 4,
        };
        let mut buf = Vec::new();
        write_descriptors(&mut buf, &[d], 2).unwrap();
        assert_eq!(&buf[..4], b"RISD");
        assert_eq!(buf.len(), 12 + 4 * 6);
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(f32::from_le_bytes(buf[12..16].try_into().unwrap()), 3.0);
        let back = read_descriptors(&buf[..]).unwrap();
        assert_eq!(back[0].bins, vec![0.25, 0.75]);
        assert_eq!(back[0].depth, 1.25);
        assert!(read_descriptors(&buf[..buf.len() - 1]).is_err());
        assert!(read_descriptors(&b"NOPE00000000"[..]).is_err());
    }

    #[test]
    fn csv_headers() {
        let m = Match {
            index_a: 1,
            index_b: 2,
            distance: 0.5,
            ratio: 0.25,
            correct: Some(true),
        };
        assert_eq!(
            matches_csv(&[m]),
            "index_a,index_b,distance,ratio,correct\n1,2,0.5,0.25,true\n"
        );
    }
}
