//! Local-binary-pattern-derived volumetric maps.
//!
//! Per ROI voxel, the 26 neighborhood offsets (the Chebyshev unit sphere)
//! scaled by the sampling radius are read from the mean-filled bounding box
//! by trilinear interpolation with clamp-to-edge handling. Three maps come
//! out: m1 counts samples >= center at the base radius, m2 the same at twice
//! the radius, and k is the non-excess kurtosis of the base-radius samples
//! (0 where the neighborhood is constant).

use super::boxgrid::BoxGrid;
use crate::roi::RoiVoxels;

/// Map names in output order.
pub const LBP_MAP_NAMES: [&str; 3] = ["m1", "m2", "k"];

/// Offsets of the 26-neighborhood in deterministic x-fastest order.
fn neighbor_offsets() -> [[f64; 3]; 26] {
    let mut out = [[0.0; 3]; 26];
    let mut i = 0;
    for dz in -1i32..=1 {
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                out[i] = [dx as f64, dy as f64, dz as f64];
                i += 1;
            }
        }
    }
    out
}

/// Compute the (m1, m2, k) maps over the ROI sample. Ties count as >=.
pub fn lbp3d(x: &RoiVoxels, radius_vox: f64) -> [RoiVoxels; 3] {
    let grid = BoxGrid::from_roi(x);
    let offsets = neighbor_offsets();
    let n = x.len();
    let mut m1 = Vec::with_capacity(n);
    let mut m2 = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut samples = [0.0f64; 26];
    for (c, &center) in x.coords.iter().zip(&x.values) {
        let rel = [
            (c[0] - grid.min[0]) as f64,
            (c[1] - grid.min[1]) as f64,
            (c[2] - grid.min[2]) as f64,
        ];
        for (radius, out) in [(radius_vox, &mut m1), (2.0 * radius_vox, &mut m2)] {
            let mut count = 0usize;
            for (s, off) in samples.iter_mut().zip(&offsets) {
                let v = grid.sample_clamped([
                    rel[0] + off[0] * radius,
                    rel[1] + off[1] * radius,
                    rel[2] + off[2] * radius,
                ]);
                *s = v;
                if v >= center {
                    count += 1;
                }
            }
            out.push(count as f64);
            if radius == radius_vox {
                k.push(sample_kurtosis(&samples));
            }
        }
    }
    let mk = |values: Vec<f64>| {
        RoiVoxels::new(values, x.coords.clone(), x.source_spacing).expect("same geometry as input")
    };
    [mk(m1), mk(m2), mk(k)]
}

/// Non-excess kurtosis m4/m2^2 of a fixed 26-sample neighborhood; 0 when
/// the neighborhood is constant.
fn sample_kurtosis(samples: &[f64; 26]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &s in samples {
        let d2 = (s - mean) * (s - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_box_roi(dims: [usize; 3], values: Vec<f64>) -> RoiVoxels {
        let mut coords = Vec::new();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    coords.push([x, y, z]);
                }
            }
        }
        RoiVoxels::new(values, coords, [1.0; 3]).unwrap()
    }

    #[test]
    fn constant_volume_saturates_counts() {
        let x = full_box_roi([5, 5, 5], vec![9.0; 125]);
        let [m1, m2, k] = lbp3d(&x, 1.0);
        assert!(m1.values.iter().all(|&v| v == 26.0));
        assert!(m2.values.iter().all(|&v| v == 26.0));
        assert!(k.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_bright_voxel_neighborhood() {
        // 7^3 box, bright center: the center's m1 is 0 (all samples below),
        // and each axial neighbor sees exactly one sample above its value.
        let dims = [7usize, 7, 7];
        let mut values = vec![0.0; 343];
        let center = [3usize, 3, 3];
        let idx = |c: [usize; 3]| c[0] + 7 * (c[1] + 7 * c[2]);
        values[idx(center)] = 100.0;
        let x = full_box_roi(dims, values);
        let [m1, _, _] = lbp3d(&x, 1.0);

        let pos = |c: [usize; 3]| x.coords.iter().position(|&p| p == c).unwrap();
        assert_eq!(m1.values[pos(center)], 0.0);

        let offsets = neighbor_offsets();
        for neighbor in [
            [2usize, 3, 3],
            [4, 3, 3],
            [3, 2, 3],
            [3, 4, 3],
            [3, 3, 2],
            [3, 3, 4],
        ] {
            // Direct 26-sample oracle at the neighbor.
            let grid = BoxGrid::from_roi(&x);
            let rel = [neighbor[0] as f64, neighbor[1] as f64, neighbor[2] as f64];
            let center_value = 0.0;
            let mut above = 0;
            for off in &offsets {
                let v = grid.sample_clamped([rel[0] + off[0], rel[1] + off[1], rel[2] + off[2]]);
                if v > center_value {
                    above += 1;
                }
            }
            assert_eq!(above, 1, "axial neighbor {neighbor:?} sees one strictly-above sample");
            // m1 counts ties as >=, so all 26 qualify against a zero center
            // except none are below: here every background sample ties.
            assert_eq!(m1.values[pos(neighbor)], 26.0);
        }
    }

    #[test]
    fn maps_are_deterministic() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(37, &[0]);
        let values: Vec<f64> = (0..125).map(|_| rng.gen_range(0.0..10.0)).collect();
        let x = full_box_roi([5, 5, 5], values);
        let a = lbp3d(&x, 1.0);
        let b = lbp3d(&x, 1.0);
        for (ma, mb) in a.iter().zip(&b) {
            assert_eq!(ma.values, mb.values);
        }
    }

    #[test]
    fn kurtosis_oracle_on_interior_voxel() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(41, &[0]);
        let values: Vec<f64> = (0..343).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x = full_box_roi([7, 7, 7], values.clone());
        let [_, _, k] = lbp3d(&x, 1.0);
        // Interior voxel (3,3,3): samples are exactly its 26 lattice neighbors.
        let idx = |c: [usize; 3]| c[0] + 7 * (c[1] + 7 * c[2]);
        let mut neigh = Vec::new();
        for dz in -1i32..=1 {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    neigh.push(values[idx([
                        (3 + dx) as usize,
                        (3 + dy) as usize,
                        (3 + dz) as usize,
                    ])]);
                }
            }
        }
        let n = neigh.len() as f64;
        let mean = neigh.iter().sum::<f64>() / n;
        let m2 = neigh.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = neigh.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let expect = m4 / (m2 * m2);
        let pos = x.coords.iter().position(|&p| p == [3, 3, 3]).unwrap();
        assert!((k.values[pos] - expect).abs() < 1e-9);
    }
}
