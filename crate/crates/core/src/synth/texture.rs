use noise::{NoiseFn, Perlin};
use serde::{Deserialize, Serialize};

/// Intensity pattern over surface coordinates (meters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    Constant {
        value: f64,
    },
    Checkerboard {
        /// Cell edge length on the surface, meters.
        cell: f64,
        #[serde(default = "default_dark")]
        dark: f64,
        #[serde(default = "default_light")]
        light: f64,
    },
    /// Fractal gradient noise.
    Perlin {
        seed: u32,
        /// Feature size of the first octave, meters.
        #[serde(default = "default_perlin_scale")]
        scale: f64,
        #[serde(default = "default_mid")]
        mean: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_octaves")]
        octaves: u32,
    },
    /// Weighted sum of layers.
    Blend {
        layers: Vec<(f64, Texture)>,
    },
}

fn default_dark() -> f64 {
    40.0
}
fn default_light() -> f64 {
    215.0
}
fn default_perlin_scale() -> f64 {
    0.05
}
fn default_mid() -> f64 {
    128.0
}
fn default_amplitude() -> f64 {
    100.0
}
fn default_octaves() -> u32 {
    3
}

impl Default for Texture {
    fn default() -> Self {
        Texture::Checkerboard {
            cell: 0.05,
            dark: default_dark(),
            light: default_light(),
        }
    }
}

impl Texture {
    pub fn validate(&self) -> Result<(), String> {
        let in_range = |v: f64| (0.0..=255.0).contains(&v);
        match self {
            Texture::Constant { value } if !in_range(*value) => Err(format!("constant {value} outside [0, 255]")),
            Texture::Checkerboard { cell, dark, light } => {
                if !(*cell > 0.0) {
                    Err("checkerboard cell must be > 0".into())
                } else if !in_range(*dark) || !in_range(*light) {
                    Err("checkerboard intensities outside [0, 255]".into())
                } else {
                    Ok(())
                }
            }
            Texture::Perlin { scale, octaves, .. } if !(*scale > 0.0) || *octaves == 0 => {
                Err("perlin needs scale > 0 and at least one octave".into())
            }
            Texture::Blend { layers } => layers.iter().try_for_each(|(_, t)| t.validate()),
            _ => Ok(()),
        }
    }

    /// Compiles noise generators once per render.
    pub(crate) fn sampler(&self) -> Sampler {
        match self {
            Texture::Constant { value } => Sampler::Constant(*value),
            Texture::Checkerboard { cell, dark, light } => Sampler::Checker {
                cell: *cell,
                dark: *dark,
                light: *light,
            },
            Texture::Perlin {
                seed,
                scale,
                mean,
                amplitude,
                octaves,
            } => Sampler::Perlin {
                octaves: (0..*octaves).map(|o| Perlin::new(seed.wrapping_add(o))).collect(),
                scale: *scale,
                mean: *mean,
                amplitude: *amplitude,
            },
            Texture::Blend { layers } => Sampler::Blend(layers.iter().map(|(w, t)| (*w, t.sampler())).collect()),
        }
    }
}

pub(crate) enum Sampler {
    Constant(f64),
    Checker {
        cell: f64,
        dark: f64,
        light: f64,
    },
    Perlin {
        octaves: Vec<Perlin>,
        scale: f64,
        mean: f64,
        amplitude: f64,
    },
    Blend(Vec<(f64, Sampler)>),
}

impl Sampler {
    /// Unclamped intensity at surface coordinates `uv`.
    pub fn sample(&self, uv: [f64; 2]) -> f64 {
        match self {
            Sampler::Constant(v) => *v,
            Sampler::Checker { cell, dark, light } => {
                let parity = ((uv[0] / cell).floor() + (uv[1] / cell).floor()).rem_euclid(2.0);
                if parity < 0.5 {
                    *light
                } else {
                    *dark
                }
            }
            Sampler::Perlin {
                octaves,
                scale,
                mean,
                amplitude,
            } => {
                let (mut acc, mut amp, mut freq, mut norm) = (0.0, 1.0, 1.0 / scale, 0.0);
                for p in octaves {
                    acc += amp * p.get([uv[0] * freq, uv[1] * freq]);
                    norm += amp;
                    amp *= 0.5;
                    freq *= 2.0;
                }
                mean + amplitude * acc / norm
            }
            Sampler::Blend(layers) => layers.iter().map(|(w, s)| w * s.sample(uv)).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker_alternates() {
        let s = Texture::default().sampler();
        assert_eq!(s.sample([0.01, 0.01]), 215.0);
        assert_eq!(s.sample([0.06, 0.01]), 40.0);
        assert_eq!(s.sample([-0.01, 0.01]), 40.0);
        assert_eq!(s.sample([-0.01, -0.01]), 215.0);
    }

    #[test]
    fn perlin_is_deterministic_and_bounded() {
        let t = Texture::Perlin {
            seed: 7,
            scale: 0.05,
            mean: 128.0,
            amplitude: 100.0,
            octaves: 3,
        };
        let a = t.sampler();
        let b = t.sampler();
        for i in 0..200 {
            let uv = [i as f64 * 0.013, i as f64 * -0.007];
            assert_eq!(a.sample(uv), b.sample(uv));
            assert!((0.0..=255.0).contains(&a.sample(uv)));
        }
    }

    #[test]
    fn json_shape() {
        let t: Texture = serde_json::from_str(r#"{"checkerboard": {"cell": 0.04}}"#).unwrap();
        assert_eq!(
            t,
            Texture::Checkerboard {
                cell: 0.04,
                dark: 40.0,
                light: 215.0
            }
        );
        let b: Texture = serde_json::from_str(
            r#"{"blend": {"layers": [[0.5, {"constant": {"value": 10}}], [0.5, {"perlin": {"seed": 1}}]]}}"#,
        )
        .unwrap();
        assert!(b.validate().is_ok());
    }
}
