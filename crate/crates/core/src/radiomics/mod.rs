//! Radiomic feature extraction.
//!
//! Twelve filter channels (original, eight Haar sub-bands, three LBP maps)
//! each contribute the first-order statistics plus the size-zone features of
//! a 32-level discretization, named `<filter>_<class>_<Name>`. The schema is
//! fixed: every ROI yields the same 192 keys in the same order. Shape
//! features are deliberately absent.

pub mod boxgrid;
pub mod discretize;
pub mod firstorder;
pub mod glszm;
pub mod lbp;
pub mod wavelet;

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::{normalize, NormalizationKind};
use crate::roi::RoiVoxels;

pub use discretize::{discretize, DiscretizedRoi, DEFAULT_BINS};
pub use firstorder::{firstorder, FIRSTORDER_NAMES};
pub use glszm::{glszm, glszm_features, ZoneMatrix, GLSZM_NAMES};
pub use lbp::{lbp3d, LBP_MAP_NAMES};
pub use wavelet::{haar3, roi_box_padded, wavelet_bank, WAVELET_BAND_NAMES};

/// Filter channel names in schema order.
pub const FILTER_NAMES: [&str; 12] = [
    "original",
    "wavelet-LLL",
    "wavelet-LLH",
    "wavelet-LHL",
    "wavelet-LHH",
    "wavelet-HLL",
    "wavelet-HLH",
    "wavelet-HHL",
    "wavelet-HHH",
    "lbp-3D-m1",
    "lbp-3D-m2",
    "lbp-3D-k",
];

/// A feature name of the form `<filter>_<class>_<Name>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub String);

impl FeatureId {
    pub fn new(filter: &str, class: &str, name: &str) -> Self {
        FeatureId(format!("{filter}_{class}_{name}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for FeatureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FeatureId {
    fn from(s: &str) -> Self {
        FeatureId(s.to_string())
    }
}

/// The fixed extraction schema: 12 filters x (10 first-order + 6 GLSZM).
pub fn feature_schema() -> &'static [FeatureId] {
    static SCHEMA: OnceLock<Vec<FeatureId>> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let mut out = Vec::with_capacity(FILTER_NAMES.len() * 16);
        for filter in FILTER_NAMES {
            for name in FIRSTORDER_NAMES {
                out.push(FeatureId::new(filter, "firstorder", name));
            }
            for name in GLSZM_NAMES {
                out.push(FeatureId::new(filter, "glszm", name));
            }
        }
        out
    })
}

fn schema_index() -> &'static HashMap<FeatureId, usize> {
    static INDEX: OnceLock<HashMap<FeatureId, usize>> = OnceLock::new();
    INDEX.get_or_init(|| {
        feature_schema()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect()
    })
}

/// One ROI's features in schema order, with per-feature degenerate flags
/// (degenerate computations substitute 0).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    degenerate: Vec<bool>,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn degenerate_flags(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn get(&self, id: &FeatureId) -> Option<f64> {
        schema_index().get(id).map(|&i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Extract the full feature vector of an ROI sample under a normalization.
pub fn extract_all(x: &RoiVoxels, norm: NormalizationKind) -> Result<FeatureVector> {
    if x.is_empty() {
        return Err(Error::EmptyInput("extract_all input".into()));
    }
    let normalized = normalize(x, norm)?;
    let base = &normalized.voxels;

    let mut channels: Vec<RoiVoxels> = Vec::with_capacity(12);
    channels.push(base.clone());
    for band in wavelet_bank(base)? {
        channels.push(band);
    }
    for map in lbp3d(base, 1.0) {
        channels.push(map);
    }

    let mut values = Vec::with_capacity(FILTER_NAMES.len() * 16);
    let mut degenerate = Vec::with_capacity(FILTER_NAMES.len() * 16);
    for channel in &channels {
        for (v, d) in firstorder(&channel.values) {
            push_sanitized(&mut values, &mut degenerate, v, d);
        }
        let zones = glszm(&discretize(channel, DEFAULT_BINS)?);
        for (v, d) in glszm_features(&zones) {
            push_sanitized(&mut values, &mut degenerate, v, d);
        }
    }
    debug_assert_eq!(values.len(), feature_schema().len());
    Ok(FeatureVector { values, degenerate })
}

fn push_sanitized(values: &mut Vec<f64>, degenerate: &mut Vec<bool>, v: f64, d: bool) {
    if v.is_finite() {
        values.push(v);
        degenerate.push(d);
    } else {
        values.push(0.0);
        degenerate.push(true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sphere_sample(radius_vox: usize, seed: u64) -> RoiVoxels {
        let mut rng = crate::seeding::rng_for(seed, &[100]);
        let c = radius_vox as i64;
        let mut values = Vec::new();
        let mut coords = Vec::new();
        let n = 2 * radius_vox + 1;
        for z in 0..n as i64 {
            for y in 0..n as i64 {
                for x in 0..n as i64 {
                    if (x - c).pow(2) + (y - c).pow(2) + (z - c).pow(2) <= (c * c) as i64 {
                        values.push(rng.gen_range(0.0..100.0));
                        coords.push([x as usize, y as usize, z as usize]);
                    }
                }
            }
        }
        RoiVoxels::new(values, coords, [1.0; 3]).unwrap()
    }

    #[test]
    fn schema_has_192_features_and_no_shape_class() {
        let schema = feature_schema();
        assert_eq!(schema.len(), 192);
        assert!(schema.iter().all(|id| !id.as_str().contains("shape")));
        // The curated feature names resolve against the schema.
        for name in [
            "lbp-3D-k_firstorder_Maximum",
            "original_firstorder_Energy",
            "lbp-3D-k_firstorder_Kurtosis",
            "wavelet-LHL_glszm_SmallAreaHighGrayLevelEmphasis",
            "wavelet-LLH_glszm_SmallAreaHighGrayLevelEmphasis",
            "original_firstorder_Kurtosis",
            "original_firstorder_Skewness",
        ] {
            assert!(schema.contains(&FeatureId::from(name)), "{name} missing");
        }
    }

    #[test]
    fn key_set_identical_across_rois() {
        let a = extract_all(&sphere_sample(4, 1), NormalizationKind::MinMax).unwrap();
        let b = extract_all(&sphere_sample(5, 2), NormalizationKind::Gamma(1.5)).unwrap();
        assert_eq!(a.len(), 192);
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn original_energy_matches_definition() {
        let x = sphere_sample(4, 3);
        let fv = extract_all(&x, NormalizationKind::MinMax).unwrap();
        let normalized = normalize(&x, NormalizationKind::MinMax).unwrap();
        let expect: f64 = normalized.voxels.values.iter().map(|v| v * v).sum();
        let got = fv.get(&FeatureId::from("original_firstorder_Energy")).unwrap();
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn identical_samples_in_translated_geometry_match() {
        let x = sphere_sample(4, 4);
        let shifted_coords: Vec<[usize; 3]> =
            x.coords.iter().map(|c| [c[0] + 7, c[1] + 3, c[2] + 11]).collect();
        let y = RoiVoxels::new(x.values.clone(), shifted_coords, x.source_spacing).unwrap();
        let a = extract_all(&x, NormalizationKind::ZScore).unwrap();
        let b = extract_all(&y, NormalizationKind::ZScore).unwrap();
        assert_eq!(a, b);

        // Independent first-order reimplementation on the same sample.
        let normalized = normalize(&x, NormalizationKind::ZScore).unwrap();
        let vals = &normalized.voxels.values;
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        assert!(
            (a.get(&FeatureId::from("original_firstorder_Mean")).unwrap() - mean).abs() < 1e-12
        );
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.get(&FeatureId::from("original_firstorder_Maximum")).unwrap(), max);
    }

    #[test]
    fn all_features_finite_on_degenerate_input() {
        let coords: Vec<[usize; 3]> = (0..4usize)
            .flat_map(|z| (0..4usize).flat_map(move |y| (0..4usize).map(move |x| [x, y, z])))
            .collect();
        let x = RoiVoxels::new(vec![5.0; 64], coords, [1.0; 3]).unwrap();
        let fv = extract_all(&x, NormalizationKind::MinMax).unwrap();
        assert!(fv.values().iter().all(|v| v.is_finite()));
        // Constant input: kurtosis/skewness flagged degenerate.
        let idx = feature_schema()
            .iter()
            .position(|id| id.as_str() == "original_firstorder_Kurtosis")
            .unwrap();
        assert!(fv.degenerate_flags()[idx]);
    }

    #[test]
    fn glszm_mass_conservation_across_channels() {
        let x = sphere_sample(4, 5);
        let normalized = normalize(&x, NormalizationKind::MinMax).unwrap();
        let base = &normalized.voxels;
        let mut channels = vec![base.clone()];
        channels.extend(wavelet_bank(base).unwrap());
        channels.extend(lbp3d(base, 1.0));
        for channel in &channels {
            let zones = glszm(&discretize(channel, DEFAULT_BINS).unwrap());
            let mass: usize = zones.entries().map(|(_, j, c)| j * c).sum();
            assert_eq!(mass, x.len());
        }
    }
}
