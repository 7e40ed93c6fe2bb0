//! Experiment configuration: a JSON document driving mask generation,
//! simulation, calibration, and reconstruction, with two built-in presets
//! mirroring the visible and short-wave-infrared prototype geometries.

use crate::error::{Error, Result};
use crate::optics::{required_pattern_len, BuildOptions, OpticsConfig};
use crate::seq::{
    default_primitive_taps, gen_m_sequence, gen_pinhole_seq, gen_random_binary,
    gen_uniform_random_seq, outer_mask, tile_pattern, MaskPattern, SignSequence,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Mls,
    Random,
    Uniform,
    Pinhole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub kind: MaskKind,
    /// LFSR degree; also sets the base pattern length 2^degree - 1 for the
    /// random, uniform, and pinhole kinds.
    #[serde(default)]
    pub degree: Option<u32>,
    /// Primitive polynomial bitmask; defaults to the built-in table.
    #[serde(default)]
    pub taps: Option<u64>,
    /// Base-pattern tilings; when absent the smallest count covering the
    /// field of view is used.
    #[serde(default)]
    pub repeats: Option<usize>,
    /// Open fraction for random masks and the pinhole width fraction.
    #[serde(default)]
    pub open_fraction: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_frames() -> usize {
    1
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            frames: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconMethod {
    Ls,
    Tikhonov,
    Tv,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconSettings {
    pub method: ReconMethod,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub huber_eps: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
}

impl Default for ReconSettings {
    fn default() -> Self {
        Self {
            method: ReconMethod::Tikhonov,
            tau: None,
            lambda: None,
            huber_eps: None,
            max_iters: None,
            rel_tol: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub optics: OpticsConfig,
    pub mask: MaskConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub recon: ReconSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Visible-light geometry: 0.5 mm spacing, 30 um features, 6.45 um
    /// pixels, a doubled length-255 M-sequence, 512 x 512 reconstruction.
    Visible,
    /// Short-wave infrared geometry: 5 mm spacing, 100 um features and
    /// pixels, 64 x 64 reconstruction.
    Swir,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Visible => Self {
                optics: OpticsConfig {
                    d_um: 500.0,
                    delta_um: 30.0,
                    pixel_um: 6.45,
                    cra_deg: 45.0,
                    lambda_um: 0.55,
                    n_scene: 512,
                    m_sensor: 512,
                },
                mask: MaskConfig {
                    kind: MaskKind::Mls,
                    degree: Some(8),
                    taps: None,
                    repeats: Some(2),
                    open_fraction: None,
                    seed: 0,
                },
                noise: NoiseConfig::default(),
                recon: ReconSettings::default(),
            },
            Preset::Swir => Self {
                optics: OpticsConfig {
                    d_um: 5000.0,
                    delta_um: 100.0,
                    pixel_um: 100.0,
                    cra_deg: 45.0,
                    lambda_um: 1.55,
                    n_scene: 64,
                    m_sensor: 64,
                },
                mask: MaskConfig {
                    kind: MaskKind::Mls,
                    degree: Some(8),
                    taps: None,
                    repeats: Some(1),
                    open_fraction: None,
                    seed: 0,
                },
                noise: NoiseConfig::default(),
                recon: ReconSettings::default(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.optics.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A mask realized as 1-D factor patterns plus export artifacts.
#[derive(Debug, Clone)]
pub struct MaskRealization {
    /// Transfer-builder input for the scene row axis (becomes Phi_L).
    pub row_pattern: Vec<f64>,
    /// Transfer-builder input for the scene column axis (becomes Phi_R).
    pub col_pattern: Vec<f64>,
    /// True when the physical mask is the binary one obtained by zeroing the
    /// -1 entries of the signed outer product; captures then need the flat
    /// term of [`crate::sim::capture_binary_mask`] and mean correction.
    pub binary_prototype: bool,
    /// The 2-D mask for export (signed for binary kinds, optical otherwise).
    pub mask_2d: MaskPattern,
    pub open_fraction: f64,
    pub base_len: usize,
    pub repeats: usize,
}

impl MaskConfig {
    fn base_len(&self) -> usize {
        (1usize << self.degree.unwrap_or(8)) - 1
    }

    fn resolve_repeats(&self, optics: &OpticsConfig, base_len: usize) -> Result<usize> {
        if let Some(r) = self.repeats {
            if r == 0 {
                return Err(Error::Validation("repeats must be positive".into()));
            }
            return Ok(r);
        }
        let required = required_pattern_len(optics, &BuildOptions::default())?;
        Ok(required.div_ceil(base_len).max(1))
    }

    /// Build the 1-D factor patterns (and 2-D export mask) for this
    /// configuration.
    pub fn realize(&self, optics: &OpticsConfig) -> Result<MaskRealization> {
        let degree = self.degree.unwrap_or(8);
        let base_len = self.base_len();
        let repeats = self.resolve_repeats(optics, base_len)?;
        match self.kind {
            MaskKind::Mls => {
                let taps = match self.taps {
                    Some(t) => t,
                    None => default_primitive_taps(degree).ok_or_else(|| {
                        Error::Validation(format!("no default taps for degree {degree}"))
                    })?,
                };
                let seq = gen_m_sequence(degree, taps, (1u64 << degree) - 1)?;
                self.signed_realization(seq, repeats, optics)
            }
            MaskKind::Random => {
                let seq =
                    gen_random_binary(base_len, self.open_fraction.unwrap_or(0.5), self.seed)?;
                self.signed_realization(seq, repeats, optics)
            }
            MaskKind::Uniform => {
                let base = gen_uniform_random_seq(base_len, self.seed);
                let pattern = tile_pattern(&base, repeats);
                let n = pattern.len();
                let mask = MaskPattern::new(
                    ndarray::Array2::from_shape_fn((n, n), |(i, j)| pattern[i] * pattern[j]),
                    crate::seq::MaskForm::Optical,
                )
                .with_feature_size(optics.delta_um);
                Ok(MaskRealization {
                    row_pattern: pattern.clone(),
                    col_pattern: pattern,
                    binary_prototype: false,
                    open_fraction: mask.open_fraction(),
                    mask_2d: mask,
                    base_len,
                    repeats,
                })
            }
            MaskKind::Pinhole => {
                // A single pinhole spanning a fraction of the full pattern.
                let total = base_len * repeats;
                let width = ((self.open_fraction.unwrap_or(0.0) * total as f64).round() as usize)
                    .max(1);
                let pattern = gen_pinhole_seq(total, width)?;
                let mask = crate::seq::gen_pinhole(total, width)?
                    .with_feature_size(optics.delta_um);
                Ok(MaskRealization {
                    row_pattern: pattern.clone(),
                    col_pattern: pattern,
                    binary_prototype: false,
                    open_fraction: mask.open_fraction(),
                    mask_2d: mask,
                    base_len,
                    repeats,
                })
            }
        }
    }

    fn signed_realization(
        &self,
        seq: SignSequence,
        repeats: usize,
        optics: &OpticsConfig,
    ) -> Result<MaskRealization> {
        let tiled = seq.tiled(repeats);
        let pattern = tiled.as_signed();
        let mask = outer_mask(&seq, &seq, repeats).with_feature_size(optics.delta_um);
        // open fraction of the physical 0/1 mask (-1 entries zeroed)
        let open = crate::seq::to_optical(&mask)?.open_fraction();
        Ok(MaskRealization {
            row_pattern: pattern.clone(),
            col_pattern: pattern,
            binary_prototype: true,
            mask_2d: mask,
            open_fraction: open,
            base_len: seq.len(),
            repeats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visible_preset_realizes_prototype_mask() {
        let cfg = ExperimentConfig::preset(Preset::Visible);
        let real = cfg.mask.realize(&cfg.optics).unwrap();
        assert_eq!(real.row_pattern.len(), 510);
        assert_eq!(real.mask_2d.shape(), (510, 510));
        assert!(real.binary_prototype);
        assert!((real.open_fraction - 0.5).abs() < 0.01);
        assert_eq!(real.mask_2d.feature_size_um(), Some(30.0));
    }

    #[test]
    fn swir_preset_parameters() {
        let cfg = ExperimentConfig::preset(Preset::Swir);
        assert_eq!(cfg.optics.delta_um, 100.0);
        assert_eq!(cfg.optics.n_scene, 64);
        let real = cfg.mask.realize(&cfg.optics).unwrap();
        assert_eq!(real.row_pattern.len(), 255);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{
            "optics": {"d_um": 500, "delta_um": 30, "pixel_um": 30, "cra_deg": 45,
                       "lambda_um": 0.55, "n_scene": 8, "m_sensor": 8, "bogus": 1},
            "mask": {"kind": "mls"}
        }"#;
        assert!(matches!(
            ExperimentConfig::from_json(text),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::preset(Preset::Swir);
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.optics, cfg.optics);
        assert_eq!(back.mask.kind, MaskKind::Mls);
    }

    #[test]
    fn auto_repeats_cover_field_of_view() {
        let mut cfg = ExperimentConfig::preset(Preset::Swir);
        cfg.mask.repeats = None;
        let real = cfg.mask.realize(&cfg.optics).unwrap();
        // must build without OutOfFieldOfView
        let sys = crate::optics::build_separable_system(
            &real.row_pattern,
            &real.col_pattern,
            &cfg.optics,
        );
        assert!(sys.is_ok());
        assert!(real.repeats >= 1);
    }

    #[test]
    fn pinhole_width_from_open_fraction() {
        let optics = OpticsConfig::new(500.0, 30.0, 30.0, 45.0, 0.55, 8, 8).unwrap();
        let mask = MaskConfig {
            kind: MaskKind::Pinhole,
            degree: Some(6),
            taps: None,
            repeats: Some(2),
            open_fraction: Some(0.1),
            seed: 0,
        };
        let real = mask.realize(&optics).unwrap();
        let open_count = real.row_pattern.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(open_count, (0.1f64 * 126.0).round() as usize);
        assert!(!real.binary_prototype);
    }
}
