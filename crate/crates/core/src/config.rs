use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorParams;
use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::matching::EvalConfig;
use crate::surface::NormalParams;

/// Every tunable of the pipeline, with the published defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub detector: DetectorParams,
    pub descriptor: DescriptorParams,
    pub eval: EvalConfig,
    /// Side of the normal-fitting window, pixels (odd).
    pub normal_window: usize,
    /// Neighbours farther than this from the window centre are not fitted.
    pub normal_max_distance: f64,
    pub normal_min_valid_fraction: f64,
    /// Angle sectors for the main-normal vote.
    pub n_s: u8,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let normals = NormalParams::default();
        Self {
            detector: DetectorParams::default(),
            descriptor: DescriptorParams::default(),
            eval: EvalConfig::default(),
            normal_window: normals.window,
            normal_max_distance: normals.max_neighbor_distance,
            normal_min_valid_fraction: normals.min_valid_fraction,
            n_s: 4,
        }
    }
}

impl PipelineConfig {
    pub fn normals(&self) -> NormalParams {
        NormalParams {
            window: self.normal_window,
            max_neighbor_distance: self.normal_max_distance,
            min_valid_fraction: self.normal_min_valid_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.descriptor.validate()?;
        self.eval.validate()?;
        self.normals().validate()?;
        if self.n_s < 2 {
            return Err(Error::InvalidParam("n_s must be >= 2".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.detector.tau, 0.8);
        assert_eq!(c.descriptor.gamma, 0.8);
        assert_eq!(c.descriptor.rho_bar, 0.9);
        assert_eq!(c.descriptor.t_bg, 0.1);
        assert_eq!(c.eval.d_min, 0.05);
        assert_eq!(c.n_s, 4);
        assert_eq!(c.normal_window, 11);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = PipelineConfig::from_json(r#"{"detector": {"tau": 0.5}, "n_s": 6}"#).unwrap();
        assert_eq!(c.detector.tau, 0.5);
        assert_eq!(c.detector.harris_k, 0.04);
        assert_eq!(c.n_s, 6);
        assert_eq!(c.descriptor, DescriptorParams::default());
    }

    #[test]
    fn invalid_json_values_rejected() {
        assert!(PipelineConfig::from_json(r#"{"detector": {"tau": 2}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"normal_window": 4}"#).is_err());
    }
}
