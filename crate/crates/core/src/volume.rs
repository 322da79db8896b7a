//! Volumetric image data model, file I/O, isotropic resampling, and
//! contrast-phase attenuation clipping.
//!
//! Volumes are immutable after construction; every operation returns a new
//! `Volume`. Voxels are stored x-fastest (`idx = x + nx*(y + ny*z)`) and the
//! continuous position of voxel `(x, y, z)` is `origin + index * spacing`
//! per axis. On disk a volume is a MetaImage-style text header next to a raw
//! little-endian `int16` buffer; in memory values are `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 3D scalar grid of attenuation values with spacing/origin metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    voxels: Vec<f64>,
}

impl Volume {
    /// Build a volume, validating the grid invariants.
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], voxels: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidVolume("all dims must be >= 1".into()));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidVolume("spacing components must be positive".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidVolume("origin must be finite".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        if voxels.len() != n {
            return Err(Error::InvalidVolume(format!(
                "voxel buffer length {} does not match dims product {}",
                voxels.len(),
                n
            )));
        }
        if voxels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume("voxel values must be finite".into()));
        }
        Ok(Self { dims, spacing, origin, voxels })
    }

    /// Constant-valued volume, useful for tests and phantoms.
    pub fn filled(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], value: f64) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, spacing, origin, vec![value; n])
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

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Flat index of voxel `(x, y, z)`, x-fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.index(x, y, z)]
    }

    /// Physical position (mm) of a voxel center.
    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin[0] + x as f64 * self.spacing[0],
            self.origin[1] + y as f64 * self.spacing[1],
            self.origin[2] + z as f64 * self.spacing[2],
        ]
    }

    /// Trilinear sample at a continuous voxel-space coordinate, with
    /// clamp-to-edge boundary handling. Coordinates are in voxel units
    /// (position = origin + coord * spacing).
    pub fn sample_voxel_space(&self, coord: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for axis in 0..3 {
            let max_idx = self.dims[axis] - 1;
            let c = coord[axis].clamp(0.0, max_idx as f64);
            let i = if max_idx == 0 { 0 } else { (c.floor() as usize).min(max_idx - 1) };
            base[axis] = i;
            frac[axis] = c - i as f64;
        }
        let [fx, fy, fz] = frac;
        let mut acc = 0.0;
        for dz in 0..2usize {
            let wz = if dz == 0 { 1.0 - fz } else { fz };
            if wz == 0.0 {
                continue;
            }
            for dy in 0..2usize {
                let wy = if dy == 0 { 1.0 - fy } else { fy };
                if wy == 0.0 {
                    continue;
                }
                for dx in 0..2usize {
                    let wx = if dx == 0 { 1.0 - fx } else { fx };
                    if wx == 0.0 {
                        continue;
                    }
                    let x = (base[0] + dx).min(self.dims[0] - 1);
                    let y = (base[1] + dy).min(self.dims[1] - 1);
                    let z = (base[2] + dz).min(self.dims[2] - 1);
                    acc += wx * wy * wz * self.get(x, y, z);
                }
            }
        }
        acc
    }
}

/// CT acquisition phase with the attenuation window applied before any
/// normalization: NC clips to [0, 100] HU, CE to [-10, 200] HU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContrastPhase {
    #[serde(rename = "NC")]
    Nc,
    #[serde(rename = "CE")]
    Ce,
}

impl ContrastPhase {
    pub const ALL: [ContrastPhase; 2] = [ContrastPhase::Nc, ContrastPhase::Ce];

    /// Clipping interval in HU.
    pub fn clip_range(self) -> (f64, f64) {
        match self {
            ContrastPhase::Nc => (0.0, 100.0),
            ContrastPhase::Ce => (-10.0, 200.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ContrastPhase::Nc => "NC",
            ContrastPhase::Ce => "CE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NC" => Ok(ContrastPhase::Nc),
            "CE" => Ok(ContrastPhase::Ce),
            other => Err(Error::InvalidParameter(format!("unknown contrast phase '{other}'"))),
        }
    }
}

impl std::fmt::Display for ContrastPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Clamp every voxel into the phase's attenuation window.
pub fn clip_hu(v: &Volume, phase: ContrastPhase) -> Volume {
    let (lo, hi) = phase.clip_range();
    let voxels = v.voxels.iter().map(|&x| x.clamp(lo, hi)).collect();
    Volume { dims: v.dims, spacing: v.spacing, origin: v.origin, voxels }
}

/// Resample to isotropic `target_spacing` by trilinear interpolation at the
/// output voxel centers, clamping to the nearest in-grid sample at the edges.
///
/// Output dim per axis is `ceil(n * spacing / target)` so the rebuilt grid
/// covers the input's physical extent.
pub fn resample_trilinear(v: &Volume, target_spacing: f64) -> Result<Volume> {
    if !(target_spacing > 0.0) || !target_spacing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target spacing must be positive, got {target_spacing}"
        )));
    }
    let mut out_dims = [0usize; 3];
    let mut ratio = [0f64; 3];
    for axis in 0..3 {
        let extent = v.dims[axis] as f64 * v.spacing[axis];
        // Guard against 1-ulp overshoot when target divides the extent exactly.
        out_dims[axis] = ((extent / target_spacing) - 1e-9).ceil().max(1.0) as usize;
        ratio[axis] = target_spacing / v.spacing[axis];
    }
    let mut voxels = Vec::with_capacity(out_dims[0] * out_dims[1] * out_dims[2]);
    for z in 0..out_dims[2] {
        let cz = z as f64 * ratio[2];
        for y in 0..out_dims[1] {
            let cy = y as f64 * ratio[1];
            for x in 0..out_dims[0] {
                let cx = x as f64 * ratio[0];
                voxels.push(v.sample_voxel_space([cx, cy, cz]));
            }
        }
    }
    Volume::new(out_dims, [target_spacing; 3], v.origin, voxels)
}

const ELEMENT_TYPE: &str = "MET_SHORT";

/// Write a volume as a MetaImage-style header plus raw little-endian int16
/// buffer. Values are rounded to the nearest integer and clamped to the
/// int16 range; the raw file sits next to the header.
pub fn write_volume(v: &Volume, path: &Path) -> Result<()> {
    let raw_name = match path.file_stem() {
        Some(stem) => format!("{}.raw", stem.to_string_lossy()),
        None => return Err(Error::InvalidParameter("volume path has no file name".into())),
    };
    let mut header = String::new();
    let _ = writeln!(header, "NDims = 3");
    let _ = writeln!(header, "DimSize = {} {} {}", v.dims[0], v.dims[1], v.dims[2]);
    let _ = writeln!(header, "ElementSpacing = {} {} {}", v.spacing[0], v.spacing[1], v.spacing[2]);
    let _ = writeln!(header, "Offset = {} {} {}", v.origin[0], v.origin[1], v.origin[2]);
    let _ = writeln!(header, "ElementType = {ELEMENT_TYPE}");
    let _ = writeln!(header, "ElementDataFile = {raw_name}");

    let mut raw = vec![0u8; v.voxels.len() * 2];
    for (i, &value) in v.voxels.iter().enumerate() {
        let q = value.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        LittleEndian::write_i16(&mut raw[2 * i..2 * i + 2], q);
    }
    fs::write(path, header)?;
    fs::write(path.with_file_name(raw_name), raw)?;
    Ok(())
}

/// Header fields without the voxel payload.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

/// Parse just the header of a volume file.
pub fn read_volume_header(path: &Path) -> Result<VolumeHeader> {
    let text = fs::read_to_string(path)?;
    let mut dims = None;
    let mut spacing = None;
    let mut origin = None;
    for line in text.lines() {
        if let Some((key, value)) = line.split_once('=') {
            match key.trim() {
                "DimSize" => dims = Some(parse_triple::<usize>("DimSize", value.trim())?),
                "ElementSpacing" => spacing = Some(parse_triple::<f64>("ElementSpacing", value.trim())?),
                "Offset" => origin = Some(parse_triple::<f64>("Offset", value.trim())?),
                _ => {}
            }
        }
    }
    Ok(VolumeHeader {
        dims: dims.ok_or_else(|| Error::Header("missing DimSize".into()))?,
        spacing: spacing.ok_or_else(|| Error::Header("missing ElementSpacing".into()))?,
        origin: origin.ok_or_else(|| Error::Header("missing Offset".into()))?,
    })
}

/// Read a volume written by [`write_volume`] (or any conforming header).
pub fn read_volume(path: &Path) -> Result<Volume> {
    let text = fs::read_to_string(path)?;
    let mut ndims = None;
    let mut dims = None;
    let mut spacing = None;
    let mut origin = None;
    let mut element_type = None;
    let mut data_file = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Header(format!("line without '=': '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "NDims" => ndims = Some(parse_scalar::<usize>(key, value)?),
            "DimSize" => dims = Some(parse_triple::<usize>(key, value)?),
            "ElementSpacing" => spacing = Some(parse_triple::<f64>(key, value)?),
            "Offset" => origin = Some(parse_triple::<f64>(key, value)?),
            "ElementType" => element_type = Some(value.to_string()),
            "ElementDataFile" => data_file = Some(value.to_string()),
            // Unknown keys are tolerated for compatibility with other writers.
            _ => {}
        }
    }
    let ndims = ndims.ok_or_else(|| Error::Header("missing NDims".into()))?;
    if ndims != 3 {
        return Err(Error::Header(format!("NDims must be 3, got {ndims}")));
    }
    let dims = dims.ok_or_else(|| Error::Header("missing DimSize".into()))?;
    let spacing = spacing.ok_or_else(|| Error::Header("missing ElementSpacing".into()))?;
    let origin = origin.ok_or_else(|| Error::Header("missing Offset".into()))?;
    let element_type = element_type.ok_or_else(|| Error::Header("missing ElementType".into()))?;
    if element_type != ELEMENT_TYPE {
        return Err(Error::UnsupportedElementType(element_type));
    }
    let data_file = data_file.ok_or_else(|| Error::Header("missing ElementDataFile".into()))?;
    let raw_path = path.with_file_name(&data_file);
    let raw = fs::read(&raw_path)?;
    let expected = dims[0] * dims[1] * dims[2];
    if raw.len() != expected * 2 {
        return Err(Error::BufferLengthMismatch { expected, actual: raw.len() / 2 });
    }
    let voxels = raw
        .chunks_exact(2)
        .map(|c| LittleEndian::read_i16(c) as f64)
        .collect();
    Volume::new(dims, spacing, origin, voxels)
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Header(format!("garbled {key}: '{value}'")))
}

fn parse_triple<T: std::str::FromStr + Copy>(key: &str, value: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Header(format!("{key} needs 3 components, got '{value}'")));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(parse_scalar::<T>(key, p)?);
    }
    Ok([out[0], out[1], out[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn ramp_1d() -> Volume {
        // Two samples along x: 0 then 100.
        Volume::new([2, 1, 1], [1.0; 3], [0.0; 3], vec![0.0, 100.0]).unwrap()
    }

    #[test]
    fn roundtrip_constant_volume() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.mhd");
        let v = Volume::filled([2, 2, 2], [0.7, 0.8, 0.9], [1.0, -2.0, 3.5], 55.0).unwrap();
        write_volume(&v, &path).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back.voxels(), v.voxels());
        assert_eq!(back.dims(), v.dims());
        assert_eq!(back.spacing(), v.spacing());
        assert_eq!(back.origin(), v.origin());
    }

    #[test]
    fn roundtrip_random_integers() {
        use rand::Rng;
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.mhd");
        let mut rng = crate::seeding::rng_for(7, &[0]);
        let voxels: Vec<f64> = (0..3 * 4 * 5).map(|_| rng.gen_range(-1000..1000) as f64).collect();
        let v = Volume::new([3, 4, 5], [0.5, 0.5, 0.5], [0.0; 3], voxels).unwrap();
        write_volume(&v, &path).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn truncated_raw_is_length_mismatch() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.mhd");
        let v = Volume::filled([2, 2, 2], [1.0; 3], [0.0; 3], 10.0).unwrap();
        write_volume(&v, &path).unwrap();
        let raw = dir.path().join("t.raw");
        let bytes = fs::read(&raw).unwrap();
        fs::write(&raw, &bytes[..bytes.len() - 2]).unwrap();
        match read_volume(&path) {
            Err(Error::BufferLengthMismatch { expected: 8, actual: 7 }) => {}
            other => panic!("expected buffer length mismatch, got {other:?}"),
        }
    }

    #[test]
    fn garbled_header_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.mhd");
        fs::write(&path, "NDims = 3\nDimSize = 2 x 2\n").unwrap();
        assert!(matches!(read_volume(&path), Err(Error::Header(_))));
    }

    #[test]
    fn unsupported_element_type_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("u.mhd");
        fs::write(
            &path,
            "NDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\nOffset = 0 0 0\nElementType = MET_FLOAT\nElementDataFile = u.raw\n",
        )
        .unwrap();
        fs::write(dir.path().join("u.raw"), [0u8; 4]).unwrap();
        assert!(matches!(read_volume(&path), Err(Error::UnsupportedElementType(_))));
    }

    #[test]
    fn zero_dim_rejected_before_write() {
        assert!(Volume::filled([0, 2, 2], [1.0; 3], [0.0; 3], 1.0).is_err());
    }

    #[test]
    fn spacing_preserved_to_full_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.mhd");
        let spacing = [0.1234567890123456, 7.0 / 3.0, 1e-3];
        let v = Volume::filled([1, 1, 1], spacing, [0.0; 3], 0.0).unwrap();
        write_volume(&v, &path).unwrap();
        assert_eq!(read_volume(&path).unwrap().spacing(), spacing);
    }

    #[test]
    fn clip_nc_and_ce() {
        let v = Volume::new([3, 1, 1], [1.0; 3], [0.0; 3], vec![-50.0, 50.0, 150.0]).unwrap();
        let nc = clip_hu(&v, ContrastPhase::Nc);
        assert_eq!(nc.voxels(), &[0.0, 50.0, 100.0]);
        let ce = clip_hu(&Volume::new([1, 1, 1], [1.0; 3], [0.0; 3], vec![-10.0]).unwrap(), ContrastPhase::Ce);
        assert_eq!(ce.voxels(), &[-10.0]);
    }

    #[test]
    fn clip_inside_range_is_noop_and_idempotent() {
        let v = Volume::new([3, 1, 1], [1.0; 3], [0.0; 3], vec![5.0, 50.0, 95.0]).unwrap();
        let once = clip_hu(&v, ContrastPhase::Nc);
        assert_eq!(once.voxels(), v.voxels());
        let twice = clip_hu(&once, ContrastPhase::Nc);
        assert_eq!(twice.voxels(), once.voxels());
    }

    #[test]
    fn identity_resample_preserves_values() {
        let mut rng = crate::seeding::rng_for(11, &[0]);
        use rand::Rng;
        let voxels: Vec<f64> = (0..4 * 3 * 2).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let v = Volume::new([4, 3, 2], [0.7, 0.7, 0.7], [0.0; 3], voxels).unwrap();
        let r = resample_trilinear(&v, 0.7).unwrap();
        assert_eq!(r.dims(), v.dims());
        for (a, b) in r.voxels().iter().zip(v.voxels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_volume_resamples_to_constant() {
        let v = Volume::filled([3, 3, 3], [1.3, 0.9, 2.0], [0.0; 3], 55.0).unwrap();
        let r = resample_trilinear(&v, 0.5).unwrap();
        assert!(r.voxels().iter().all(|&x| (x - 55.0).abs() < 1e-12));
    }

    #[test]
    fn ramp_midpoint_interpolates_to_50() {
        let r = resample_trilinear(&ramp_1d(), 0.5).unwrap();
        // Extent 2 mm at 0.5 mm -> 4 samples at x = 0, 0.5, 1.0, 1.5 mm
        // (singleton axes cover 1 mm of extent and get 2 clamped samples).
        assert_eq!(r.dims(), [4, 2, 2]);
        assert!((r.voxels()[1] - 50.0).abs() < 1e-12, "midpoint sample: {}", r.voxels()[1]);
        assert!((r.voxels()[2] - 100.0).abs() < 1e-12);
        // Beyond the last input center the sample clamps to the edge value.
        assert!((r.voxels()[3] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn resample_respects_value_bounds() {
        let mut rng = crate::seeding::rng_for(13, &[0]);
        use rand::Rng;
        let voxels: Vec<f64> = (0..5 * 5 * 5).map(|_| rng.gen_range(-40.0..90.0)).collect();
        let lo = voxels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = voxels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = Volume::new([5, 5, 5], [1.1, 0.8, 1.4], [0.0; 3], voxels).unwrap();
        let r = resample_trilinear(&v, 0.6).unwrap();
        for &x in r.voxels() {
            assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        }
    }

    #[test]
    fn nonpositive_target_spacing_rejected() {
        assert!(resample_trilinear(&ramp_1d(), 0.0).is_err());
        assert!(resample_trilinear(&ramp_1d(), -1.0).is_err());
    }
}
