use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::RgbdFrame;

/// Strictly increasing tone curve on normalized intensity `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IlluminationMap {
    Square,
    SquareRoot,
    Cube,
    CubeRoot,
    Gamma(f64),
}

impl IlluminationMap {
    /// The four fixed curves used in illumination-invariance experiments.
    pub const STANDARD: [IlluminationMap; 4] = [
        IlluminationMap::Square,
        IlluminationMap::SquareRoot,
        IlluminationMap::Cube,
        IlluminationMap::CubeRoot,
    ];

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            IlluminationMap::Square => x * x,
            IlluminationMap::SquareRoot => x.sqrt(),
            IlluminationMap::Cube => x * x * x,
            IlluminationMap::CubeRoot => x.cbrt(),
            IlluminationMap::Gamma(g) => x.powf(*g),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IlluminationMap::Gamma(g) if !(*g > 0.0 && g.is_finite()) => {
                Err(Error::InvalidParam(format!("gamma must be positive, got {g}")))
            }
            _ => Ok(()),
        }
    }
}

/// 8-bit relighting: `i -> round(255·map(i/255))`.
pub fn relight(frame: &RgbdFrame, map: IlluminationMap) -> Result<RgbdFrame> {
    map.validate()?;
    frame.with_gray(frame.gray().map(|&i| (255.0 * map.apply(i / 255.0)).round()))
}

/// Relighting without re-quantization, `i -> 255·map(i/255)`.
pub fn relight_continuous(frame: &RgbdFrame, map: IlluminationMap) -> Result<RgbdFrame> {
    map.validate()?;
    frame.with_gray(frame.gray().map(|&i| (255.0 * map.apply(i / 255.0)).clamp(0.0, 255.0)))
}
