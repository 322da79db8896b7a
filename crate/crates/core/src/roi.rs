//! Spherical ROI geometry, masking, and placement rules.
//!
//! A sphere is "fully inside" a liver mask when (a) its bounding box lies
//! within the grid's voxel-center bounds and (b) every voxel center within
//! the sphere radius is mask foreground. Containment queries run against a
//! squared Euclidean distance transform of the mask background so placement
//! and shift searches stay near O(grid).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Which placement protocol produced an ROI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoiKind {
    #[serde(rename = "biopsy")]
    BiopsyBased,
    #[serde(rename = "nonbiopsy")]
    NonBiopsy,
}

impl RoiKind {
    pub fn name(self) -> &'static str {
        match self {
            RoiKind::BiopsyBased => "biopsy",
            RoiKind::NonBiopsy => "nonbiopsy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "biopsy" => Ok(RoiKind::BiopsyBased),
            "nonbiopsy" => Ok(RoiKind::NonBiopsy),
            other => Err(Error::InvalidParameter(format!("unknown roi kind '{other}'"))),
        }
    }
}

/// Default ROI radius in mm (1.5 cm spheres).
pub const DEFAULT_ROI_RADIUS_MM: f64 = 15.0;
/// Biopsy-based ROI center sits 2.5 cm distal to the needle tip.
pub const BIOPSY_DISTAL_OFFSET_MM: f64 = 25.0;
/// Non-biopsy ROIs keep at least 3 cm from the biopsy-based center.
pub const DEFAULT_MIN_NONBIOPSY_DIST_MM: f64 = 30.0;
/// Shift search bound: at most 3 cm along any axis.
pub const DEFAULT_MAX_SHIFT_MM: f64 = 30.0;

/// A spherical region of interest in volume (mm) space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereRoi {
    pub center: [f64; 3],
    pub radius: f64,
    pub kind: RoiKind,
}

impl SphereRoi {
    pub fn new(center: [f64; 3], radius: f64, kind: RoiKind) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("roi radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("roi center must be finite".into()));
        }
        Ok(Self { center, radius, kind })
    }
}

/// Boolean grid aligned with a volume (same dims/spacing/origin).
#[derive(Debug, Clone, PartialEq)]
pub struct LiverMask {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    foreground: Vec<bool>,
}

impl LiverMask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], foreground: Vec<bool>) -> Result<Self> {
        if foreground.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidVolume("mask buffer length does not match dims".into()));
        }
        if !foreground.iter().any(|&b| b) {
            return Err(Error::InvalidVolume("mask has empty foreground".into()));
        }
        Ok(Self { dims, spacing, origin, foreground })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn foreground(&self) -> &[bool] {
        &self.foreground
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.foreground[self.index(x, y, z)]
    }

    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin[0] + x as f64 * self.spacing[0],
            self.origin[1] + y as f64 * self.spacing[1],
            self.origin[2] + z as f64 * self.spacing[2],
        ]
    }

    /// Encode as a 0/1 volume for on-disk storage.
    pub fn to_volume(&self) -> Volume {
        let voxels = self.foreground.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Volume::new(self.dims, self.spacing, self.origin, voxels).expect("mask dims are valid")
    }

    /// Decode from a volume: any value > 0.5 counts as foreground.
    pub fn from_volume(v: &Volume) -> Result<Self> {
        let foreground = v.voxels().iter().map(|&x| x > 0.5).collect();
        Self::new(v.dims(), v.spacing(), v.origin(), foreground)
    }

    /// Squared distance (mm^2) from each voxel center to the nearest
    /// background voxel center. Foreground-only spheres fit where this
    /// exceeds radius^2.
    pub fn background_edt2(&self) -> Vec<f64> {
        let mut field: Vec<f64> = self
            .foreground
            .iter()
            .map(|&fg| if fg { f64::INFINITY } else { 0.0 })
            .collect();
        let [nx, ny, nz] = self.dims;
        // x-pass
        let mut line = vec![0.0; nx.max(ny).max(nz)];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    line[x] = field[self.index(x, y, z)];
                }
                let out = dt_1d(&line[..nx], self.spacing[0]);
                for x in 0..nx {
                    field[self.index(x, y, z)] = out[x];
                }
            }
        }
        // y-pass
        for z in 0..nz {
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = field[self.index(x, y, z)];
                }
                let out = dt_1d(&line[..ny], self.spacing[1]);
                for y in 0..ny {
                    field[self.index(x, y, z)] = out[y];
                }
            }
        }
        // z-pass
        for y in 0..ny {
            for x in 0..nx {
                for z in 0..nz {
                    line[z] = field[self.index(x, y, z)];
                }
                let out = dt_1d(&line[..nz], self.spacing[2]);
                for z in 0..nz {
                    field[self.index(x, y, z)] = out[z];
                }
            }
        }
        field
    }
}

/// Felzenszwalb-Huttenlocher 1D squared distance transform with sample
/// positions `i * step`.
fn dt_1d(f: &[f64], step: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n]; // parabola apexes
    let mut z = vec![0.0f64; n + 1]; // boundaries
    let mut k = 0usize;
    let mut started = false;
    let pos = |i: usize| i as f64 * step;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            k = 0;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + pos(q).powi(2)) - (f[p] + pos(p).powi(2))) / (2.0 * pos(q) - 2.0 * pos(p));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if !started {
        return vec![f64::INFINITY; n];
    }
    let mut k2 = 0usize;
    for q in 0..n {
        while z[k2 + 1] < pos(q) {
            k2 += 1;
        }
        let p = v[k2];
        out[q] = (pos(q) - pos(p)).powi(2) + f[p];
    }
    out
}

/// Boolean grid of the sphere: a voxel is included iff its center lies
/// within `roi.radius` (Euclidean, mm) of `roi.center`.
pub fn sphere_mask(v: &Volume, roi: &SphereRoi) -> Result<Vec<bool>> {
    let dims = v.dims();
    let spacing = v.spacing();
    let origin = v.origin();
    let mut mask = vec![false; v.len()];
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for axis in 0..3 {
        let a = (roi.center[axis] - roi.radius - origin[axis]) / spacing[axis];
        let b = (roi.center[axis] + roi.radius - origin[axis]) / spacing[axis];
        if b < 0.0 || a > (dims[axis] - 1) as f64 {
            return Err(Error::RoiOutsideVolume);
        }
        lo[axis] = a.ceil().max(0.0) as usize;
        hi[axis] = (b.floor() as usize).min(dims[axis] - 1);
    }
    let r2 = roi.radius * roi.radius;
    let mut count = 0usize;
    for z in lo[2]..=hi[2] {
        let dz = origin[2] + z as f64 * spacing[2] - roi.center[2];
        for y in lo[1]..=hi[1] {
            let dy = origin[1] + y as f64 * spacing[1] - roi.center[1];
            let base = v.index(0, y, z);
            for x in lo[0]..=hi[0] {
                let dx = origin[0] + x as f64 * spacing[0] - roi.center[0];
                if dx * dx + dy * dy + dz * dz <= r2 {
                    mask[base + x] = true;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::RoiOutsideVolume);
    }
    Ok(mask)
}

/// Voxel sample of an ROI: intensities plus the voxel indices they came
/// from, in x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiVoxels {
    pub values: Vec<f64>,
    pub coords: Vec<[usize; 3]>,
    pub source_spacing: [f64; 3],
}

impl RoiVoxels {
    pub fn new(values: Vec<f64>, coords: Vec<[usize; 3]>, source_spacing: [f64; 3]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("roi voxel sample".into()));
        }
        if values.len() != coords.len() {
            return Err(Error::InvalidParameter("roi values/coords length mismatch".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("roi sample contains NaN".into()));
        }
        Ok(Self { values, coords, source_spacing })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Extract the masked voxels of `roi` from `v` in deterministic x-fastest order.
pub fn extract_roi(v: &Volume, roi: &SphereRoi) -> Result<RoiVoxels> {
    let mask = sphere_mask(v, roi)?;
    let [nx, ny, _] = v.dims();
    let mut values = Vec::new();
    let mut coords = Vec::new();
    for (idx, &inside) in mask.iter().enumerate() {
        if inside {
            let x = idx % nx;
            let y = (idx / nx) % ny;
            let z = idx / (nx * ny);
            values.push(v.voxels()[idx]);
            coords.push([x, y, z]);
        }
    }
    RoiVoxels::new(values, coords, v.spacing())
}

/// Place a biopsy-based ROI 2.5 cm distal to the needle tip.
pub fn place_biopsy_roi(needle_tip: [f64; 3], needle_dir: [f64; 3]) -> Result<SphereRoi> {
    let norm = (needle_dir[0].powi(2) + needle_dir[1].powi(2) + needle_dir[2].powi(2)).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitDirection(norm));
    }
    let center = [
        needle_tip[0] + BIOPSY_DISTAL_OFFSET_MM * needle_dir[0],
        needle_tip[1] + BIOPSY_DISTAL_OFFSET_MM * needle_dir[1],
        needle_tip[2] + BIOPSY_DISTAL_OFFSET_MM * needle_dir[2],
    ];
    SphereRoi::new(center, DEFAULT_ROI_RADIUS_MM, RoiKind::BiopsyBased)
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Exhaustive containment check: bounding box inside the grid's
/// voxel-center bounds and every voxel center within the radius foreground.
pub fn sphere_inside_mask(mask: &LiverMask, center: [f64; 3], radius: f64) -> bool {
    let dims = mask.dims;
    let spacing = mask.spacing;
    let origin = mask.origin;
    for axis in 0..3 {
        let lo_bound = origin[axis];
        let hi_bound = origin[axis] + (dims[axis] - 1) as f64 * spacing[axis];
        if center[axis] - radius < lo_bound || center[axis] + radius > hi_bound {
            return false;
        }
    }
    let r2 = radius * radius;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for axis in 0..3 {
        lo[axis] = (((center[axis] - radius - origin[axis]) / spacing[axis]).ceil().max(0.0)) as usize;
        hi[axis] = (((center[axis] + radius - origin[axis]) / spacing[axis]).floor() as usize).min(dims[axis] - 1);
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                if dist2(mask.position(x, y, z), center) <= r2 && !mask.at(x, y, z) {
                    return false;
                }
            }
        }
    }
    true
}

/// EDT-accelerated containment: exact, but prunes clear accepts/rejects via
/// the distance field before falling back to the exhaustive check.
fn sphere_inside_mask_edt(mask: &LiverMask, edt2: &[f64], center: [f64; 3], radius: f64) -> bool {
    let dims = mask.dims;
    let spacing = mask.spacing;
    let origin = mask.origin;
    for axis in 0..3 {
        let lo_bound = origin[axis];
        let hi_bound = origin[axis] + (dims[axis] - 1) as f64 * spacing[axis];
        if center[axis] - radius < lo_bound || center[axis] + radius > hi_bound {
            return false;
        }
    }
    // Nearest voxel center to the query point.
    let mut nearest = [0usize; 3];
    for axis in 0..3 {
        let i = ((center[axis] - origin[axis]) / spacing[axis]).round();
        nearest[axis] = (i.max(0.0) as usize).min(dims[axis] - 1);
    }
    let d_near = dist2(mask.position(nearest[0], nearest[1], nearest[2]), center).sqrt();
    let d_bg = edt2[mask.index(nearest[0], nearest[1], nearest[2])].sqrt();
    if d_bg - d_near > radius {
        return true;
    }
    if d_bg + d_near <= radius {
        return false;
    }
    sphere_inside_mask(mask, center, radius)
}

/// Uniformly choose a non-biopsy ROI center among voxel centers that keep
/// the whole sphere inside the mask and stay at least `min_dist` from the
/// biopsy-based center.
pub fn place_nonbiopsy_roi(
    rng: &mut ChaCha8Rng,
    mask: &LiverMask,
    biopsy_center: [f64; 3],
    min_dist: f64,
    radius: f64,
) -> Result<SphereRoi> {
    let edt2 = mask.background_edt2();
    let candidates = nonbiopsy_candidates(mask, &edt2, biopsy_center, min_dist, radius);
    if candidates.is_empty() {
        return Err(Error::NoValidNonBiopsySite);
    }
    let pick = candidates[rng.gen_range(0..candidates.len())];
    let [nx, ny, _] = mask.dims;
    let x = pick % nx;
    let y = (pick / nx) % ny;
    let z = pick / (nx * ny);
    SphereRoi::new(mask.position(x, y, z), radius, RoiKind::NonBiopsy)
}

fn nonbiopsy_candidates(
    mask: &LiverMask,
    edt2: &[f64],
    biopsy_center: [f64; 3],
    min_dist: f64,
    radius: f64,
) -> Vec<usize> {
    let dims = mask.dims;
    let spacing = mask.spacing;
    let origin = mask.origin;
    let r2 = radius * radius;
    let min2 = min_dist * min_dist;
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let idx = mask.index(x, y, z);
                if !mask.foreground[idx] || edt2[idx] <= r2 {
                    continue;
                }
                let pos = [
                    origin[0] + x as f64 * spacing[0],
                    origin[1] + y as f64 * spacing[1],
                    origin[2] + z as f64 * spacing[2],
                ];
                if dist2(pos, biopsy_center) < min2 {
                    continue;
                }
                // Bounding-box constraint (EDT covers only voxel centers).
                let mut in_bounds = true;
                for axis in 0..3 {
                    let hi_bound = origin[axis] + (dims[axis] - 1) as f64 * spacing[axis];
                    if pos[axis] - radius < origin[axis] || pos[axis] + radius > hi_bound {
                        in_bounds = false;
                        break;
                    }
                }
                if in_bounds {
                    out.push(idx);
                }
            }
        }
    }
    out
}

/// Shift an ROI onto the voxel grid so the whole sphere fits inside the
/// mask. Returns the feasible shift minimizing L-infinity displacement (mm),
/// ties broken first by total (L2) displacement so a planar protrusion is
/// resolved by a straight inward shift, then by lexicographic (dx, dy, dz)
/// in voxel steps. The input is returned unchanged when it already fits.
pub fn shift_to_fit(roi: &SphereRoi, mask: &LiverMask, max_shift: f64) -> Result<SphereRoi> {
    let edt2 = mask.background_edt2();
    if sphere_inside_mask_edt(mask, &edt2, roi.center, roi.radius) {
        return Ok(*roi);
    }
    let spacing = mask.spacing;
    let mut steps = [0i64; 3];
    for axis in 0..3 {
        steps[axis] = ((max_shift / spacing[axis]) + 1e-9).floor() as i64;
    }
    let mut shifts: Vec<[i64; 3]> = Vec::new();
    for dx in -steps[0]..=steps[0] {
        for dy in -steps[1]..=steps[1] {
            for dz in -steps[2]..=steps[2] {
                shifts.push([dx, dy, dz]);
            }
        }
    }
    let linf = |s: &[i64; 3]| {
        (s[0].abs() as f64 * spacing[0])
            .max(s[1].abs() as f64 * spacing[1])
            .max(s[2].abs() as f64 * spacing[2])
    };
    let l2sq = |s: &[i64; 3]| {
        (s[0] as f64 * spacing[0]).powi(2)
            + (s[1] as f64 * spacing[1]).powi(2)
            + (s[2] as f64 * spacing[2]).powi(2)
    };
    shifts.sort_by(|a, b| {
        linf(a)
            .total_cmp(&linf(b))
            .then(l2sq(a).total_cmp(&l2sq(b)))
            .then(a.cmp(b))
    });
    for s in &shifts {
        let center = [
            roi.center[0] + s[0] as f64 * spacing[0],
            roi.center[1] + s[1] as f64 * spacing[1],
            roi.center[2] + s[2] as f64 * spacing[2],
        ];
        if sphere_inside_mask_edt(mask, &edt2, center, roi.radius) {
            return SphereRoi::new(center, roi.radius, roi.kind);
        }
    }
    Err(Error::RoiCannotBeFitted)
}

/// One line of the ROI manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiManifestRow {
    pub patient_id: String,
    pub kind: RoiKind,
    pub center: [f64; 3],
    pub radius: f64,
}

/// Write the ROI manifest CSV: patient_id, kind, cx_mm, cy_mm, cz_mm, radius_mm.
pub fn write_roi_manifest(rows: &[RoiManifestRow], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Other(e.to_string()))?;
    w.write_record(["patient_id", "kind", "cx_mm", "cy_mm", "cz_mm", "radius_mm"])
        .map_err(|e| Error::Other(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.patient_id.clone(),
            r.kind.name().to_string(),
            format!("{:.16e}", r.center[0]),
            format!("{:.16e}", r.center[1]),
            format!("{:.16e}", r.center[2]),
            format!("{:.16e}", r.radius),
        ])
        .map_err(|e| Error::Other(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_roi_manifest(path: &std::path::Path) -> Result<Vec<RoiManifestRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Other(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Other(e.to_string()))?;
        if record.len() != 6 {
            return Err(Error::InvalidParameter("manifest rows need 6 fields".into()));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad manifest number '{s}'")))
        };
        out.push(RoiManifestRow {
            patient_id: record[0].to_string(),
            kind: RoiKind::parse(&record[1])?,
            center: [parse(&record[2])?, parse(&record[3])?, parse(&record[4])?],
            radius: parse(&record[5])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;

    fn ball_mask(dims: [usize; 3], spacing: f64, center: [f64; 3], radius: f64) -> LiverMask {
        let mut fg = vec![false; dims[0] * dims[1] * dims[2]];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p = [x as f64 * spacing, y as f64 * spacing, z as f64 * spacing];
                    if dist2(p, center) <= radius * radius {
                        fg[x + dims[0] * (y + dims[1] * z)] = true;
                    }
                }
            }
        }
        LiverMask::new(dims, [spacing; 3], [0.0; 3], fg).unwrap()
    }

    #[test]
    fn sub_spacing_sphere_hits_one_voxel() {
        let v = Volume::filled([9, 9, 9], [0.5; 3], [0.0; 3], 1.0).unwrap();
        let roi = SphereRoi::new([2.0, 2.0, 2.0], 0.2, RoiKind::BiopsyBased).unwrap();
        let mask = sphere_mask(&v, &roi).unwrap();
        assert_eq!(mask.iter().filter(|&&b| b).count(), 1);
        assert!(mask[v.index(4, 4, 4)]);
    }

    #[test]
    fn sphere_voxel_count_matches_analytic_volume() {
        let v = Volume::filled([70, 70, 70], [0.5; 3], [0.0; 3], 1.0).unwrap();
        let roi = SphereRoi::new([17.25, 17.25, 17.25], 15.0, RoiKind::BiopsyBased).unwrap();
        let mask = sphere_mask(&v, &roi).unwrap();
        let count = mask.iter().filter(|&&b| b).count() as f64;
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 15.0f64.powi(3) / 0.5f64.powi(3);
        assert!((count - analytic).abs() / analytic < 0.05, "count {count} vs analytic {analytic}");
    }

    #[test]
    fn sphere_outside_grid_errors() {
        let v = Volume::filled([10, 10, 10], [1.0; 3], [0.0; 3], 1.0).unwrap();
        let roi = SphereRoi::new([100.0, 100.0, 100.0], 5.0, RoiKind::BiopsyBased).unwrap();
        assert!(matches!(sphere_mask(&v, &roi), Err(Error::RoiOutsideVolume)));
    }

    #[test]
    fn mask_stable_under_tiny_center_perturbation() {
        let v = Volume::filled([24, 24, 24], [1.0; 3], [0.0; 3], 1.0).unwrap();
        let mut rng = rng_for(3, &[0]);
        for _ in 0..20 {
            let center = [
                rng.gen_range(8.0..16.0),
                rng.gen_range(8.0..16.0),
                rng.gen_range(8.0..16.0),
            ];
            let roi = SphereRoi::new(center, 5.3, RoiKind::NonBiopsy).unwrap();
            let base = sphere_mask(&v, &roi).unwrap();
            // Smallest gap between any voxel center's distance and the radius.
            let mut gap = f64::INFINITY;
            for z in 0..24 {
                for y in 0..24 {
                    for x in 0..24 {
                        let d = dist2(v.position(x, y, z), center).sqrt();
                        gap = gap.min((d - roi.radius).abs());
                    }
                }
            }
            let eps = (gap / 2.0).min(1e-6);
            for delta in [[eps, 0.0, 0.0], [0.0, -eps, 0.0], [0.0, 0.0, eps]] {
                let moved = SphereRoi::new(
                    [center[0] + delta[0], center[1] + delta[1], center[2] + delta[2]],
                    roi.radius,
                    roi.kind,
                )
                .unwrap();
                assert_eq!(sphere_mask(&v, &moved).unwrap(), base);
            }
        }
    }

    #[test]
    fn biopsy_placement_is_25mm_distal() {
        let roi = place_biopsy_roi([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(roi.center, [25.0, 0.0, 0.0]);
        assert_eq!(roi.kind, RoiKind::BiopsyBased);
        let roi = place_biopsy_roi([10.0, 10.0, 10.0], [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(roi.center, [10.0, 10.0, 35.0]);
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(matches!(
            place_biopsy_roi([0.0; 3], [2.0, 0.0, 0.0]),
            Err(Error::NonUnitDirection(_))
        ));
    }

    #[test]
    fn edt_matches_brute_force() {
        let mask = ball_mask([20, 18, 16], 1.0, [9.0, 8.0, 7.0], 6.5);
        let edt2 = mask.background_edt2();
        for z in 0..16 {
            for y in 0..18 {
                for x in 0..20 {
                    let mut best = f64::INFINITY;
                    for bz in 0..16 {
                        for by in 0..18 {
                            for bx in 0..20 {
                                if !mask.at(bx, by, bz) {
                                    best = best.min(dist2(
                                        mask.position(x, y, z),
                                        mask.position(bx, by, bz),
                                    ));
                                }
                            }
                        }
                    }
                    let got = edt2[mask.index(x, y, z)];
                    assert!(
                        (got - best).abs() < 1e-9,
                        "edt mismatch at ({x},{y},{z}): {got} vs {best}"
                    );
                }
            }
        }
    }

    #[test]
    fn nonbiopsy_same_seed_same_roi() {
        let mask = ball_mask([60, 60, 60], 1.0, [29.0, 29.0, 29.0], 26.0);
        let biopsy = [29.0, 29.0, 29.0];
        let a = place_nonbiopsy_roi(&mut rng_for(5, &[1]), &mask, biopsy, 10.0, 8.0).unwrap();
        let b = place_nonbiopsy_roi(&mut rng_for(5, &[1]), &mask, biopsy, 10.0, 8.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kind, RoiKind::NonBiopsy);
    }

    #[test]
    fn nonbiopsy_respects_min_distance_and_containment() {
        let mask = ball_mask([56, 56, 56], 1.0, [27.0, 27.0, 27.0], 25.0);
        let biopsy = [20.0, 27.0, 27.0];
        for seed in 0..50 {
            let mut rng = rng_for(seed, &[2]);
            let roi = place_nonbiopsy_roi(&mut rng, &mask, biopsy, 12.0, 7.0).unwrap();
            assert!(dist2(roi.center, biopsy).sqrt() >= 12.0);
            assert!(sphere_inside_mask(&mask, roi.center, roi.radius));
        }
    }

    #[test]
    fn nonbiopsy_infeasible_mask_errors() {
        // A thin shell: nothing fits a radius-5 sphere.
        let mut fg = vec![false; 30 * 30 * 30];
        for z in 0..30 {
            for y in 0..30 {
                for x in 0..30 {
                    let d = dist2([x as f64, y as f64, z as f64], [14.5, 14.5, 14.5]).sqrt();
                    if (d - 10.0).abs() < 1.5 {
                        fg[x + 30 * (y + 30 * z)] = true;
                    }
                }
            }
        }
        let mask = LiverMask::new([30, 30, 30], [1.0; 3], [0.0; 3], fg).unwrap();
        let mut rng = rng_for(1, &[3]);
        assert!(matches!(
            place_nonbiopsy_roi(&mut rng, &mask, [14.5, 14.5, 14.5], 3.0, 5.0),
            Err(Error::NoValidNonBiopsySite)
        ));
    }

    #[test]
    fn shift_noop_when_roi_fits() {
        let mask = ball_mask([48, 48, 48], 1.0, [23.0, 23.0, 23.0], 20.0);
        let roi = SphereRoi::new([23.0, 23.0, 23.0], 6.0, RoiKind::BiopsyBased).unwrap();
        let shifted = shift_to_fit(&roi, &mask, 30.0).unwrap();
        assert_eq!(shifted, roi);
    }

    #[test]
    fn shift_matches_brute_force_on_planar_protrusion() {
        // Half-space mask: foreground where x >= 12.
        let dims = [48usize, 40, 40];
        let mut fg = vec![false; dims[0] * dims[1] * dims[2]];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 12..dims[0] {
                    fg[x + dims[0] * (y + dims[1] * z)] = true;
                }
            }
        }
        let mask = LiverMask::new(dims, [1.0; 3], [0.0; 3], fg).unwrap();
        // Sphere of radius 8 centered at x = 15: extends to x = 7, protruding
        // 5 mm past the x = 12 boundary.
        let roi = SphereRoi::new([15.0, 20.0, 20.0], 8.0, RoiKind::NonBiopsy).unwrap();
        let shifted = shift_to_fit(&roi, &mask, 30.0).unwrap();
        assert!((shifted.center[0] - 20.0).abs() <= 1.0 + 1e-9, "x shift: {}", shifted.center[0]);
        assert_eq!(shifted.center[1], 20.0);
        assert_eq!(shifted.center[2], 20.0);
        assert!(sphere_inside_mask(&mask, shifted.center, shifted.radius));

        // Brute-force oracle over every grid shift within bounds.
        let mut best: Option<(f64, f64, [i64; 3])> = None;
        for dx in -30i64..=30 {
            for dy in -30i64..=30 {
                for dz in -30i64..=30 {
                    let c = [
                        roi.center[0] + dx as f64,
                        roi.center[1] + dy as f64,
                        roi.center[2] + dz as f64,
                    ];
                    if sphere_inside_mask(&mask, c, roi.radius) {
                        let linf = (dx.abs().max(dy.abs()).max(dz.abs())) as f64;
                        let l2 = (dx * dx + dy * dy + dz * dz) as f64;
                        let key = (linf, l2, [dx, dy, dz]);
                        let better = match &best {
                            None => true,
                            Some(k) => key < *k,
                        };
                        if better {
                            best = Some(key);
                        }
                    }
                }
            }
        }
        let (_, _, bs) = best.unwrap();
        assert_eq!(
            [shifted.center[0] - roi.center[0], shifted.center[1] - roi.center[1], shifted.center[2] - roi.center[2]],
            [bs[0] as f64, bs[1] as f64, bs[2] as f64]
        );
    }

    #[test]
    fn shift_beyond_bound_errors() {
        let dims = [90usize, 40, 40];
        let mut fg = vec![false; dims[0] * dims[1] * dims[2]];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 60..dims[0] {
                    fg[x + dims[0] * (y + dims[1] * z)] = true;
                }
            }
        }
        let mask = LiverMask::new(dims, [1.0; 3], [0.0; 3], fg).unwrap();
        // Center 40 mm outside any feasible position.
        let roi = SphereRoi::new([10.0, 20.0, 20.0], 8.0, RoiKind::NonBiopsy).unwrap();
        assert!(matches!(shift_to_fit(&roi, &mask, 30.0), Err(Error::RoiCannotBeFitted)));
    }

    #[test]
    fn extract_roi_constant_volume() {
        let v = Volume::filled([20, 20, 20], [1.0; 3], [0.0; 3], 42.0).unwrap();
        let roi = SphereRoi::new([9.5, 9.5, 9.5], 5.0, RoiKind::BiopsyBased).unwrap();
        let sample = extract_roi(&v, &roi).unwrap();
        assert!(sample.values.iter().all(|&x| x == 42.0));
        let count = sphere_mask(&v, &roi).unwrap().iter().filter(|&&b| b).count();
        assert_eq!(sample.len(), count);
        // x-fastest ordering: flat indices strictly increase.
        let [nx, ny, _] = v.dims();
        let flat: Vec<usize> = sample.coords.iter().map(|c| c[0] + nx * (c[1] + ny * c[2])).collect();
        assert!(flat.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn extract_roi_outside_errors() {
        let v = Volume::filled([10, 10, 10], [1.0; 3], [0.0; 3], 1.0).unwrap();
        let roi = SphereRoi::new([-50.0, 0.0, 0.0], 3.0, RoiKind::BiopsyBased).unwrap();
        assert!(extract_roi(&v, &roi).is_err());
    }
}
