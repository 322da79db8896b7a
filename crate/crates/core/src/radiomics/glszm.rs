//! Gray-level size-zone matrix and its features.
//!
//! A zone is a maximal 26-connected component of equal gray level within the
//! ROI voxel set; P(i, j) counts zones with level i and size j.

use std::collections::BTreeMap;

use super::discretize::DiscretizedRoi;

/// Feature names in schema order.
pub const GLSZM_NAMES: [&str; 6] = [
    "GrayLevelNonUniformity",
    "LargeAreaEmphasis",
    "SizeZoneNonUniformity",
    "SmallAreaEmphasis",
    "SmallAreaHighGrayLevelEmphasis",
    "ZoneEntropy",
];

/// Sparse size-zone matrix: counts per (gray level, zone size).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneMatrix {
    counts: BTreeMap<(u32, usize), usize>,
    total_zones: usize,
    total_voxels: usize,
}

impl ZoneMatrix {
    pub fn zone_count(&self) -> usize {
        self.total_zones
    }

    pub fn voxel_count(&self) -> usize {
        self.total_voxels
    }

    /// Iterate (level, size, count) entries.
    pub fn entries(&self) -> impl Iterator<Item = (u32, usize, usize)> + '_ {
        self.counts.iter().map(|(&(i, j), &c)| (i, j, c))
    }
}

/// Build the size-zone matrix of a discretized ROI via 26-connected
/// flood fill over the ROI voxel set.
pub fn glszm(d: &DiscretizedRoi) -> ZoneMatrix {
    let n = d.coords.len();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for c in &d.coords {
        for axis in 0..3 {
            lo[axis] = lo[axis].min(c[axis]);
            hi[axis] = hi[axis].max(c[axis]);
        }
    }
    let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let grid_len = dims[0] * dims[1] * dims[2];
    // 0 = outside ROI, otherwise level + 1 offset is unnecessary since
    // levels start at 1.
    let mut grid = vec![0u32; grid_len];
    let box_idx = |c: &[usize; 3]| (c[0] - lo[0]) + dims[0] * ((c[1] - lo[1]) + dims[1] * (c[2] - lo[2]));
    for (c, &lvl) in d.coords.iter().zip(&d.levels) {
        grid[box_idx(c)] = lvl;
    }
    let mut visited = vec![false; grid_len];
    let mut counts: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    let mut total_zones = 0usize;
    let mut stack: Vec<[usize; 3]> = Vec::new();
    for start in &d.coords {
        let si = box_idx(start);
        if visited[si] {
            continue;
        }
        let level = grid[si];
        visited[si] = true;
        stack.push([start[0] - lo[0], start[1] - lo[1], start[2] - lo[2]]);
        let mut size = 0usize;
        while let Some([x, y, z]) = stack.pop() {
            size += 1;
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        let nz = z as i64 + dz;
                        if nx < 0
                            || ny < 0
                            || nz < 0
                            || nx >= dims[0] as i64
                            || ny >= dims[1] as i64
                            || nz >= dims[2] as i64
                        {
                            continue;
                        }
                        let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
                        let ni = nx + dims[0] * (ny + dims[1] * nz);
                        if !visited[ni] && grid[ni] == level {
                            visited[ni] = true;
                            stack.push([nx, ny, nz]);
                        }
                    }
                }
            }
        }
        *counts.entry((level, size)).or_insert(0) += 1;
        total_zones += 1;
    }
    ZoneMatrix { counts, total_zones, total_voxels: n }
}

/// Size-zone features, in schema order. All are normalized by the zone
/// count Nz; none are degenerate since Nz >= 1.
pub fn glszm_features(p: &ZoneMatrix) -> Vec<(f64, bool)> {
    let nz = p.total_zones as f64;
    let mut sae = 0.0; // sum P / j^2
    let mut lae = 0.0; // sum P * j^2
    let mut sahgle = 0.0; // sum P * i^2 / j^2
    let mut by_level: BTreeMap<u32, f64> = BTreeMap::new();
    let mut by_size: BTreeMap<usize, f64> = BTreeMap::new();
    let mut entropy = 0.0;
    for (i, j, c) in p.entries() {
        let pij = c as f64;
        let jj = (j * j) as f64;
        let ii = (i as f64) * (i as f64);
        sae += pij / jj;
        lae += pij * jj;
        sahgle += pij * ii / jj;
        *by_level.entry(i).or_insert(0.0) += pij;
        *by_size.entry(j).or_insert(0.0) += pij;
        let prob = pij / nz;
        entropy -= prob * prob.log2();
    }
    let gln = by_level.values().map(|v| v * v).sum::<f64>() / nz;
    let szn = by_size.values().map(|v| v * v).sum::<f64>() / nz;
    vec![
        (gln, false),
        (lae / nz, false),
        (szn, false),
        (sae / nz, false),
        (sahgle / nz, false),
        (entropy, false),
    ]
}
