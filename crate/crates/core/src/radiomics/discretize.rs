//! Equal-width intensity discretization, the GLSZM prerequisite.

use crate::error::{Error, Result};
use crate::roi::RoiVoxels;

/// Default gray-level bin count for size-zone matrices.
pub const DEFAULT_BINS: u32 = 32;

/// ROI voxels mapped to gray levels 1..=ng.
#[derive(Debug, Clone)]
pub struct DiscretizedRoi {
    pub levels: Vec<u32>,
    pub ng: u32,
    pub coords: Vec<[usize; 3]>,
}

/// Discretize a sample into `bins` equal-width levels over [min, max]; the
/// maximum maps to level `bins`. A constant sample maps to level 1 with
/// ng = 1.
pub fn discretize(x: &RoiVoxels, bins: u32) -> Result<DiscretizedRoi> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins must be >= 2, got {bins}")));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &x.values {
        min = min.min(v);
        max = max.max(v);
    }
    if max == min {
        return Ok(DiscretizedRoi { levels: vec![1; x.len()], ng: 1, coords: x.coords.clone() });
    }
    let span = max - min;
    let levels = x
        .values
        .iter()
        .map(|&v| {
            let b = ((v - min) / span * bins as f64) as u32;
            b.min(bins - 1) + 1
        })
        .collect();
    Ok(DiscretizedRoi { levels, ng: bins, coords: x.coords.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(values: Vec<f64>) -> RoiVoxels {
        let coords = (0..values.len()).map(|i| [i, 0, 0]).collect();
        RoiVoxels::new(values, coords, [1.0; 3]).unwrap()
    }

    #[test]
    fn two_values_two_bins() {
        let d = discretize(&sample(vec![0.0, 1.0]), 2).unwrap();
        assert_eq!(d.levels, vec![1, 2]);
        assert_eq!(d.ng, 2);
    }

    #[test]
    fn constant_maps_to_level_one() {
        let d = discretize(&sample(vec![5.0; 4]), 32).unwrap();
        assert_eq!(d.levels, vec![1; 4]);
        assert_eq!(d.ng, 1);
    }

    #[test]
    fn uniform_grid_one_value_per_level() {
        // 32 equally spaced values, 32 bins -> levels 1..=32 in order.
        let values: Vec<f64> = (0..32).map(|k| k as f64).collect();
        let d = discretize(&sample(values.clone()), 32).unwrap();
        // Independent binning oracle.
        let (min, max) = (0.0, 31.0);
        for (v, &lvl) in values.iter().zip(&d.levels) {
            let expect = (((v - min) / (max - min) * 32.0).floor() as u32).min(31) + 1;
            assert_eq!(lvl, expect);
        }
        let mut seen = d.levels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 32);
    }

    #[test]
    fn fewer_than_two_bins_rejected() {
        assert!(discretize(&sample(vec![1.0, 2.0]), 1).is_err());
    }
}
