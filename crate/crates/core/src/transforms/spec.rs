use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Poisson,
    SaltPepper,
    Speckle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothKind {
    Maximum,
    Median,
    Uniform,
    Gaussian,
    Minimum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipAxis {
    /// No-op; exists so a suite of identity parameters can be written.
    None,
    Horizontal,
    Vertical,
    Both,
}

/// One transformation family plus its parameters.
///
/// Noise `strength` is the standard deviation for gaussian and speckle, the
/// corrupted fraction for salt-pepper and the photon count λ for poisson.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum TransformSpec {
    AdditiveNoise { noise: NoiseKind, strength: f64 },
    Smoothing { filter: SmoothKind, window: usize },
    BitDepth { bits: u32 },
    FeatureFilter { keep_ratio: f64 },
    Translation { offset: [i64; 2] },
    Flip { axis: FlipAxis },
    Rotation { degrees: f64 },
    Shear { a: f64 },
    Scale { s: f64 },
}

/// The nine families in feature-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Noise,
    Smoothing,
    BitDepth,
    FeatureFilter,
    Translation,
    Flip,
    Rotation,
    Shear,
    Scale,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Noise,
        Family::Smoothing,
        Family::BitDepth,
        Family::FeatureFilter,
        Family::Translation,
        Family::Flip,
        Family::Rotation,
        Family::Shear,
        Family::Scale,
    ];

    /// Column name used in scores and attribution tables.
    pub fn column(self) -> &'static str {
        match self {
            Family::Noise => "noise",
            Family::Smoothing => "smoothing",
            Family::BitDepth => "bitdepth",
            Family::FeatureFilter => "featurefilter",
            Family::Translation => "translation",
            Family::Flip => "flip",
            Family::Rotation => "rotation",
            Family::Shear => "shear",
            Family::Scale => "scale",
        }
    }
}

pub const SUITE_LEN: usize = 9;

/// Bits 8 reproduces any byte-valued image and serves as the no-op depth.
pub const MAX_BITS: u32 = 8;

impl TransformSpec {
    /// Short parameter description for reports, e.g. `maximum 3x3` or `-10deg`.
    pub fn parameter_label(&self) -> String {
        match self {
            TransformSpec::AdditiveNoise { noise, strength } => format!("{} {strength}", kebab(noise)),
            TransformSpec::Smoothing { filter, window } => format!("{} {window}x{window}", kebab(filter)),
            TransformSpec::BitDepth { bits } => format!("{bits}-bit"),
            TransformSpec::FeatureFilter { keep_ratio } => format!("{keep_ratio}"),
            TransformSpec::Translation { offset } => format!("[{},{}]", offset[0], offset[1]),
            TransformSpec::Flip { axis } => kebab(axis),
            TransformSpec::Rotation { degrees } => format!("{degrees}deg"),
            TransformSpec::Shear { a } => format!("{a}"),
            TransformSpec::Scale { s } => format!("{s}"),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            TransformSpec::AdditiveNoise { .. } => Family::Noise,
            TransformSpec::Smoothing { .. } => Family::Smoothing,
            TransformSpec::BitDepth { .. } => Family::BitDepth,
            TransformSpec::FeatureFilter { .. } => Family::FeatureFilter,
            TransformSpec::Translation { .. } => Family::Translation,
            TransformSpec::Flip { .. } => Family::Flip,
            TransformSpec::Rotation { .. } => Family::Rotation,
            TransformSpec::Shear { .. } => Family::Shear,
            TransformSpec::Scale { .. } => Family::Scale,
        }
    }

    pub fn uses_seed(&self) -> bool {
        matches!(self, TransformSpec::AdditiveNoise { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TransformSpec::AdditiveNoise { noise, strength } => {
                if !(strength >= 0.0 && strength.is_finite()) {
                    return Err(Error::invalid(format!("noise strength must be finite and >= 0, got {strength}")));
                }
                if noise == NoiseKind::SaltPepper && strength > 1.0 {
                    return Err(Error::invalid("salt-pepper fraction must lie in [0,1]"));
                }
            }
            TransformSpec::Smoothing { window, .. } => {
                if window % 2 == 0 {
                    return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
                }
            }
            TransformSpec::BitDepth { bits } => {
                if !(1..=MAX_BITS).contains(&bits) {
                    return Err(Error::invalid(format!("bit depth must be in 1..={MAX_BITS}, got {bits}")));
                }
            }
            TransformSpec::FeatureFilter { keep_ratio } => {
                if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
                    return Err(Error::invalid(format!("keep ratio must be in (0,1], got {keep_ratio}")));
                }
            }
            TransformSpec::Translation { .. } | TransformSpec::Flip { .. } => {}
            TransformSpec::Rotation { degrees } => finite("rotation angle", degrees)?,
            TransformSpec::Shear { a } => finite("shear", a)?,
            TransformSpec::Scale { s } => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::invalid(format!("scale must be finite and > 0, got {s}")));
                }
            }
        }
        Ok(())
    }
}

/// Serialized (kebab-case) name of a unit enum variant.
fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be finite")))
    }
}

/// Default AdvJudge suite: one spec per family in feature-vector order.
pub fn canonical_suite() -> Vec<TransformSpec> {
    vec![
        TransformSpec::AdditiveNoise {
            noise: NoiseKind::Gaussian,
            strength: 0.05,
        },
        TransformSpec::Smoothing {
            filter: SmoothKind::Maximum,
            window: 3,
        },
        TransformSpec::BitDepth { bits: 6 },
        TransformSpec::FeatureFilter { keep_ratio: 0.9 },
        TransformSpec::Translation { offset: [1, 1] },
        TransformSpec::Flip {
            axis: FlipAxis::Horizontal,
        },
        TransformSpec::Rotation { degrees: -10.0 },
        TransformSpec::Shear { a: 0.3 },
        TransformSpec::Scale { s: 1.1 },
    ]
}

/// Suite of no-op parameters; every transform returns its input (for the
/// bit-depth slot, any image whose pixels are multiples of 1/255).
pub fn noop_suite() -> Vec<TransformSpec> {
    vec![
        TransformSpec::AdditiveNoise {
            noise: NoiseKind::Gaussian,
            strength: 0.0,
        },
        TransformSpec::Smoothing {
            filter: SmoothKind::Maximum,
            window: 1,
        },
        TransformSpec::BitDepth { bits: MAX_BITS },
        TransformSpec::FeatureFilter { keep_ratio: 1.0 },
        TransformSpec::Translation { offset: [0, 0] },
        TransformSpec::Flip { axis: FlipAxis::None },
        TransformSpec::Rotation { degrees: 0.0 },
        TransformSpec::Shear { a: 0.0 },
        TransformSpec::Scale { s: 1.0 },
    ]
}

/// Every family/parameter combination evaluated as a stand-alone threshold
/// detector: the four noise kinds, five 3x3 filters, bit depths 4-6,
/// keep ratios 0.6-0.9, diagonal shifts 1-9, three flips, rotations of
/// ±10/20/30 degrees, shears 0.1-0.5 and scales 0.8-1.2.
pub fn sweep_specs() -> Vec<TransformSpec> {
    let mut out = vec![
        TransformSpec::AdditiveNoise { noise: NoiseKind::Gaussian, strength: 0.05 },
        TransformSpec::AdditiveNoise { noise: NoiseKind::Poisson, strength: 255.0 },
        TransformSpec::AdditiveNoise { noise: NoiseKind::SaltPepper, strength: 0.05 },
        TransformSpec::AdditiveNoise { noise: NoiseKind::Speckle, strength: 0.1 },
    ];
    for filter in [SmoothKind::Gaussian, SmoothKind::Maximum, SmoothKind::Median, SmoothKind::Uniform, SmoothKind::Minimum] {
        out.push(TransformSpec::Smoothing { filter, window: 3 });
    }
    out.extend((4..=6).map(|bits| TransformSpec::BitDepth { bits }));
    out.extend([0.6, 0.7, 0.8, 0.9].map(|keep_ratio| TransformSpec::FeatureFilter { keep_ratio }));
    out.extend([1, 3, 5, 7, 9].map(|d| TransformSpec::Translation { offset: [d, d] }));
    out.extend([FlipAxis::Vertical, FlipAxis::Horizontal, FlipAxis::Both].map(|axis| TransformSpec::Flip { axis }));
    out.extend([-30.0, -20.0, -10.0, 10.0, 20.0, 30.0].map(|degrees| TransformSpec::Rotation { degrees }));
    out.extend([0.1, 0.2, 0.3, 0.4, 0.5].map(|a| TransformSpec::Shear { a }));
    out.extend([0.8, 0.9, 1.1, 1.2].map(|s| TransformSpec::Scale { s }));
    out
}

/// Checks a suite has nine valid specs, one per family, in canonical order.
pub fn validate_suite(suite: &[TransformSpec]) -> Result<()> {
    if suite.len() != SUITE_LEN {
        return Err(Error::invalid(format!("suite must hold {SUITE_LEN} specs, got {}", suite.len())));
    }
    for (i, (spec, fam)) in suite.iter().zip(Family::ALL).enumerate() {
        if spec.family() != fam {
            return Err(Error::invalid(format!(
                "suite slot {i} must be {}, got {}",
                fam.column(),
                spec.family().column()
            )));
        }
        spec.validate()?;
    }
    Ok(())
}

pub fn suite_to_json(suite: &[TransformSpec]) -> Result<String> {
    Ok(serde_json::to_string_pretty(suite)?)
}

pub fn suite_from_json(text: &str) -> Result<Vec<TransformSpec>> {
    let suite: Vec<TransformSpec> = serde_json::from_str(text)?;
    validate_suite(&suite)?;
    Ok(suite)
}

pub fn load_suite(path: &Path) -> Result<Vec<TransformSpec>> {
    suite_from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_suite(suite: &[TransformSpec], path: &Path) -> Result<()> {
    fs::write(path, suite_to_json(suite)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_every_family() {
        let sweep = sweep_specs();
        assert_eq!(sweep.len(), 39);
        for spec in &sweep {
            spec.validate().unwrap();
        }
        for (fam, spec) in Family::ALL.iter().zip(canonical_suite()) {
            assert!(sweep.iter().any(|s| s.family() == *fam));
            assert!(sweep.contains(&spec), "{spec:?}");
        }
        assert_eq!(sweep[5].parameter_label(), "maximum 3x3");
        assert_eq!(TransformSpec::Rotation { degrees: -10.0 }.parameter_label(), "-10deg");
        assert_eq!(TransformSpec::Flip { axis: FlipAxis::Both }.parameter_label(), "both");
    }

    #[test]
    fn json_shape() {
        let spec = TransformSpec::Shear { a: 0.3 };
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "shear", "params": {"a": 0.3}}));
        let noise: TransformSpec =
            serde_json::from_str(r#"{"kind":"additive-noise","params":{"noise":"salt-pepper","strength":0.05}}"#).unwrap();
        assert_eq!(noise.family(), Family::Noise);
    }

    #[test]
    fn canonical_suite_round_trips() {
        let suite = canonical_suite();
        validate_suite(&suite).unwrap();
        assert_eq!(suite_from_json(&suite_to_json(&suite).unwrap()).unwrap(), suite);
        validate_suite(&noop_suite()).unwrap();
    }

    #[test]
    fn rejects_bad_params_and_order() {
        assert!(TransformSpec::BitDepth { bits: 9 }.validate().is_err());
        assert!(TransformSpec::BitDepth { bits: 0 }.validate().is_err());
        assert!(TransformSpec::FeatureFilter { keep_ratio: 0.0 }.validate().is_err());
        assert!(TransformSpec::Smoothing {
            filter: SmoothKind::Median,
            window: 4
        }
        .validate()
        .is_err());
        assert!(TransformSpec::Scale { s: -1.0 }.validate().is_err());
        let mut suite = canonical_suite();
        suite.swap(0, 1);
        assert!(validate_suite(&suite).is_err());
        assert!(validate_suite(&suite[..8]).is_err());
    }
}
