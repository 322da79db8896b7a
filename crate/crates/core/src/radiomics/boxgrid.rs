//! Dense grid over an ROI bounding box, the working representation for the
//! wavelet and LBP filter banks. Voxels inside the box but outside the ROI
//! are filled with the ROI mean value.

use crate::roi::RoiVoxels;

pub(crate) struct BoxGrid {
    pub dims: [usize; 3],
    /// Bounding-box corner in source voxel indices.
    pub min: [usize; 3],
    pub data: Vec<f64>,
}

impl BoxGrid {
    pub fn from_roi(x: &RoiVoxels) -> Self {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for c in &x.coords {
            for axis in 0..3 {
                lo[axis] = lo[axis].min(c[axis]);
                hi[axis] = hi[axis].max(c[axis]);
            }
        }
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let fill = x.values.iter().sum::<f64>() / x.values.len() as f64;
        let mut data = vec![fill; dims[0] * dims[1] * dims[2]];
        for (c, &v) in x.coords.iter().zip(&x.values) {
            let idx = (c[0] - lo[0]) + dims[0] * ((c[1] - lo[1]) + dims[1] * (c[2] - lo[2]));
            data[idx] = v;
        }
        Self { dims, min: lo, data }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    /// Trilinear sample at a continuous box coordinate with clamp-to-edge
    /// boundary handling. Integral coordinates reduce to direct lookup.
    pub fn sample_clamped(&self, coord: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        let mut on_lattice = true;
        for axis in 0..3 {
            let max_idx = self.dims[axis] - 1;
            let c = coord[axis].clamp(0.0, max_idx as f64);
            let i = if max_idx == 0 { 0 } else { (c.floor() as usize).min(max_idx - 1) };
            base[axis] = i;
            frac[axis] = c - i as f64;
            if frac[axis] != 0.0 && frac[axis] != 1.0 {
                on_lattice = false;
            }
        }
        if on_lattice {
            return self.get(
                base[0] + frac[0] as usize,
                base[1] + frac[1] as usize,
                base[2] + frac[2] as usize,
            );
        }
        let [fx, fy, fz] = frac;
        let mut acc = 0.0;
        for dz in 0..2usize {
            let wz = if dz == 0 { 1.0 - fz } else { fz };
            for dy in 0..2usize {
                let wy = if dy == 0 { 1.0 - fy } else { fy };
                for dx in 0..2usize {
                    let wx = if dx == 0 { 1.0 - fx } else { fx };
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        acc += w * self.get(base[0] + dx, base[1] + dy, base[2] + dz);
                    }
                }
            }
        }
        acc
    }
}
