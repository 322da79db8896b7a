//! The six intensity normalizations applied to ROI voxel samples before
//! feature extraction.
//!
//! All methods operate on the ROI sample alone (never on the whole volume)
//! and are monotone non-decreasing in the input value. Degenerate constant
//! inputs yield flagged all-zero outputs instead of errors so a sweep never
//! aborts mid-experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::RoiVoxels;

const HISTEQ_BINS: usize = 256;

/// Normalization method for ROI intensities.
///
/// Serializes as its config-file token ("none", "histeq", "minmax",
/// "zscore", "gamma0.5", "gamma1.5").
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalizationKind {
    None,
    HistEq,
    MinMax,
    ZScore,
    Gamma(f64),
}

impl Serialize for NormalizationKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for NormalizationKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        NormalizationKind::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The sweep enumerates exactly these six settings.
pub const SWEEP_NORMALIZATIONS: [NormalizationKind; 6] = [
    NormalizationKind::None,
    NormalizationKind::HistEq,
    NormalizationKind::MinMax,
    NormalizationKind::ZScore,
    NormalizationKind::Gamma(0.5),
    NormalizationKind::Gamma(1.5),
];

impl NormalizationKind {
    /// Config-file token for this kind.
    pub fn name(&self) -> String {
        match self {
            NormalizationKind::None => "none".into(),
            NormalizationKind::HistEq => "histeq".into(),
            NormalizationKind::MinMax => "minmax".into(),
            NormalizationKind::ZScore => "zscore".into(),
            NormalizationKind::Gamma(g) => format!("gamma{g}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(NormalizationKind::None),
            "histeq" => Ok(NormalizationKind::HistEq),
            "minmax" => Ok(NormalizationKind::MinMax),
            "zscore" => Ok(NormalizationKind::ZScore),
            "gamma0.5" => Ok(NormalizationKind::Gamma(0.5)),
            "gamma1.5" => Ok(NormalizationKind::Gamma(1.5)),
            other => Err(Error::InvalidParameter(format!("unknown normalization '{other}'"))),
        }
    }
}

impl std::fmt::Display for NormalizationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

/// A normalized ROI sample plus the degenerate-input flag.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub voxels: RoiVoxels,
    pub degenerate: bool,
}

/// Apply a normalization to an ROI sample.
pub fn normalize(x: &RoiVoxels, kind: NormalizationKind) -> Result<Normalized> {
    if x.is_empty() {
        return Err(Error::EmptyInput("normalize input".into()));
    }
    if let NormalizationKind::Gamma(g) = kind {
        if !(g > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")));
        }
    }
    let values = &x.values;
    let (min, max) = min_max(values);
    let (out, degenerate) = match kind {
        NormalizationKind::None => (values.clone(), false),
        NormalizationKind::MinMax => scale_min_max(values, min, max),
        NormalizationKind::Gamma(g) => {
            let (scaled, degenerate) = scale_min_max(values, min, max);
            if degenerate {
                (scaled, true)
            } else {
                (scaled.iter().map(|&t| t.powf(g)).collect(), false)
            }
        }
        NormalizationKind::ZScore => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if var == 0.0 {
                (vec![0.0; values.len()], true)
            } else {
                let sd = var.sqrt();
                (values.iter().map(|v| (v - mean) / sd).collect(), false)
            }
        }
        NormalizationKind::HistEq => hist_eq(values, min, max),
    };
    Ok(Normalized {
        voxels: RoiVoxels::new(out, x.coords.clone(), x.source_spacing)?,
        degenerate,
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn scale_min_max(values: &[f64], min: f64, max: f64) -> (Vec<f64>, bool) {
    if max == min {
        return (vec![0.0; values.len()], true);
    }
    let span = max - min;
    (values.iter().map(|v| (v - min) / span).collect(), false)
}

/// Empirical-CDF equalization over 256 equal-width bins spanning [min, max].
fn hist_eq(values: &[f64], min: f64, max: f64) -> (Vec<f64>, bool) {
    if max == min {
        return (vec![0.0; values.len()], true);
    }
    let span = max - min;
    let bin_of = |v: f64| -> usize {
        (((v - min) / span * HISTEQ_BINS as f64) as usize).min(HISTEQ_BINS - 1)
    };
    let mut hist = [0usize; HISTEQ_BINS];
    for &v in values {
        hist[bin_of(v)] += 1;
    }
    let mut cdf = [0.0f64; HISTEQ_BINS];
    let mut acc = 0usize;
    let n = values.len() as f64;
    for (b, &h) in hist.iter().enumerate() {
        acc += h;
        cdf[b] = acc as f64 / n;
    }
    (values.iter().map(|&v| cdf[bin_of(v)]).collect(), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(values: Vec<f64>) -> RoiVoxels {
        let coords = (0..values.len()).map(|i| [i, 0, 0]).collect();
        RoiVoxels::new(values, coords, [1.0; 3]).unwrap()
    }

    #[test]
    fn gamma_half_on_quarter() {
        // Min-max scaling maps {0, 0.25 -> scaled 0.25, 1} then 0.25^0.5 = 0.5.
        let out = normalize(&sample(vec![0.0, 0.25, 1.0]), NormalizationKind::Gamma(0.5)).unwrap();
        assert!(!out.degenerate);
        assert!((out.voxels.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zscore_two_points() {
        let out = normalize(&sample(vec![0.0, 2.0]), NormalizationKind::ZScore).unwrap();
        assert_eq!(out.voxels.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn histeq_uniform_sample_stays_within_one_bin() {
        let values: Vec<f64> = (0..256).map(|k| k as f64 / 255.0).collect();
        let x = sample(values.clone());
        let out = normalize(&x, NormalizationKind::HistEq).unwrap();
        assert!(!out.degenerate);
        // Independent empirical-CDF oracle on the exact sample.
        for (v, o) in values.iter().zip(&out.voxels.values) {
            let cdf = values.iter().filter(|&&u| u <= *v).count() as f64 / 256.0;
            assert!((o - cdf).abs() <= 1.0 / 256.0 + 1e-12);
            assert!((o - v).abs() <= 1.0 / 256.0 + 1e-12, "v={v} o={o}");
        }
    }

    #[test]
    fn constant_inputs_flag_degenerate() {
        for kind in [
            NormalizationKind::MinMax,
            NormalizationKind::ZScore,
            NormalizationKind::HistEq,
            NormalizationKind::Gamma(0.5),
            NormalizationKind::Gamma(1.5),
        ] {
            let out = normalize(&sample(vec![7.0; 5]), kind).unwrap();
            assert!(out.degenerate, "{kind:?} should flag constant input");
            assert!(out.voxels.values.iter().all(|&v| v == 0.0));
        }
        let out = normalize(&sample(vec![7.0; 5]), NormalizationKind::None).unwrap();
        assert!(!out.degenerate);
        assert_eq!(out.voxels.values, vec![7.0; 5]);
    }

    #[test]
    fn gamma_one_equals_minmax_exactly() {
        let x = sample(vec![3.0, 9.5, -2.0, 4.4, 8.1]);
        let g = normalize(&x, NormalizationKind::Gamma(1.0)).unwrap();
        let m = normalize(&x, NormalizationKind::MinMax).unwrap();
        assert_eq!(g.voxels.values, m.voxels.values);
    }

    #[test]
    fn all_methods_monotone_and_bounded() {
        let mut rng = crate::seeding::rng_for(17, &[0]);
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.gen_range(2..200);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..150.0)).collect();
            let x = sample(values.clone());
            for kind in SWEEP_NORMALIZATIONS {
                let out = normalize(&x, kind).unwrap();
                let o = &out.voxels.values;
                for i in 0..n {
                    for j in 0..n {
                        if values[i] <= values[j] {
                            assert!(
                                o[i] <= o[j] + 1e-12,
                                "{kind:?} not monotone: f({}) = {} > f({}) = {}",
                                values[i],
                                o[i],
                                values[j],
                                o[j]
                            );
                        }
                    }
                }
                match kind {
                    NormalizationKind::MinMax | NormalizationKind::Gamma(_) | NormalizationKind::HistEq => {
                        assert!(o.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
                    }
                    NormalizationKind::ZScore => {
                        let nn = o.len() as f64;
                        let mean = o.iter().sum::<f64>() / nn;
                        let sd = (o.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nn).sqrt();
                        assert!(mean.abs() < 1e-9);
                        assert!((sd - 1.0).abs() < 1e-9);
                    }
                    NormalizationKind::None => {}
                }
            }
        }
    }
}
