//! Synthetic CT-like phantoms with planted, parameterized texture
//! differences between classes.
//!
//! Both classes are smoothed Gaussian fields around a common base
//! attenuation. Class 1 additionally receives sparse gamma-amplitude bright
//! speckles, which raise exactly the curated screening features: maximum,
//! energy, kurtosis, skewness, and small-area high-gray-level emphasis.
//! With the speckle density at zero the classes are statistically
//! indistinguishable. Everything is seed-deterministic.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::{
    place_biopsy_roi, place_nonbiopsy_roi, shift_to_fit, write_roi_manifest, LiverMask,
    RoiManifestRow, SphereRoi, DEFAULT_MAX_SHIFT_MM, DEFAULT_MIN_NONBIOPSY_DIST_MM,
    DEFAULT_ROI_RADIUS_MM,
};
use crate::seeding::{derive_seed, rng_for};
use crate::volume::{write_volume, Volume};

/// Ellipsoid semi-axes must stay at least this large so a 15 mm ROI always
/// fits after 30 mm shifts.
pub const MIN_SEMI_AXIS_MM: f64 = 80.0;
const MASK_MARGIN_MM: f64 = 2.0;
/// CE phantoms reuse the NC texture shifted by +60 HU.
pub const CE_OFFSET_HU: f64 = 60.0;

/// Texture and geometry parameters of one phantom volume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub class_label: u8,
    pub base_hu: f64,
    /// Standard deviation of the smoothed background field, in HU.
    pub noise_sd: f64,
    /// Gaussian correlation length per class (class 0, class 1), mm.
    pub smoothing_mm: [f64; 2],
    /// Expected bright speckles per mm^3 of liver (class 1 only).
    pub speckle_density: f64,
    /// Mean speckle amplitude in HU; amplitudes are Gamma(2, mean/2).
    pub speckle_amplitude: f64,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            class_label: 0,
            base_hu: 55.0,
            noise_sd: 9.0,
            smoothing_mm: [2.0, 2.0],
            speckle_density: 0.0025,
            speckle_amplitude: 35.0,
            dims: [172, 166, 166],
            spacing: [1.0, 1.0, 1.0],
            seed: 0,
        }
    }
}

/// A generated phantom: the NC volume, its liver mask, and the biopsy
/// needle geometry.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub mask: LiverMask,
    pub needle_tip: [f64; 3],
    pub needle_dir: [f64; 3],
}

fn ellipsoid_geometry(spec: &PhantomSpec) -> Result<([f64; 3], [f64; 3])> {
    let mut center = [0.0; 3];
    let mut semi = [0.0; 3];
    for axis in 0..3 {
        let extent = spec.dims[axis] as f64 * spec.spacing[axis];
        center[axis] = (spec.dims[axis] - 1) as f64 * spec.spacing[axis] / 2.0;
        semi[axis] = extent / 2.0 - MASK_MARGIN_MM;
        if semi[axis] < MIN_SEMI_AXIS_MM {
            return Err(Error::InvalidParameter(format!(
                "dims too small to contain a 15 mm ROI after 30 mm shifts: axis {axis} allows a {:.1} mm semi-axis (need >= {MIN_SEMI_AXIS_MM})",
                semi[axis]
            )));
        }
    }
    Ok((center, semi))
}

/// Generate one phantom volume with its mask and needle geometry.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    if spec.class_label > 1 {
        return Err(Error::InvalidParameter("class_label must be 0 or 1".into()));
    }
    if spec.smoothing_mm.iter().any(|&s| !(s > 0.0)) || !(spec.noise_sd >= 0.0) {
        return Err(Error::InvalidParameter("smoothing and noise_sd must be positive".into()));
    }
    let (center, semi) = ellipsoid_geometry(spec)?;
    let [nx, ny, nz] = spec.dims;
    let n = nx * ny * nz;

    let mut rng = rng_for(spec.seed, &[0x7068]);
    let mut field: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let sigma_mm = spec.smoothing_mm[spec.class_label as usize];
    for axis in 0..3 {
        gaussian_blur_axis(&mut field, spec.dims, axis, sigma_mm / spec.spacing[axis]);
    }
    // Rescale the smoothed field to exactly the requested contrast.
    let mean = field.iter().sum::<f64>() / n as f64;
    let sd = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = if sd > 0.0 { spec.noise_sd / sd } else { 0.0 };
    for v in field.iter_mut() {
        *v = spec.base_hu + (*v - mean) * scale;
    }

    // Liver mask: axis-aligned ellipsoid.
    let mut foreground = vec![false; n];
    let mut fg_count = 0usize;
    for z in 0..nz {
        let dz = (z as f64 * spec.spacing[2] - center[2]) / semi[2];
        for y in 0..ny {
            let dy = (y as f64 * spec.spacing[1] - center[1]) / semi[1];
            for x in 0..nx {
                let dx = (x as f64 * spec.spacing[0] - center[0]) / semi[0];
                if dx * dx + dy * dy + dz * dz <= 1.0 {
                    foreground[x + nx * (y + ny * z)] = true;
                    fg_count += 1;
                }
            }
        }
    }

    // Class-1 bright speckles at random liver voxels, with half-amplitude
    // spill onto the 6 axial neighbors so spots survive resampling.
    if spec.class_label == 1 && spec.speckle_density > 0.0 {
        let voxel_mm3 = spec.spacing.iter().product::<f64>();
        let count = (spec.speckle_density * fg_count as f64 * voxel_mm3).round() as usize;
        let fg_indices: Vec<usize> = (0..n).filter(|&i| foreground[i]).collect();
        let gamma = Gamma::new(2.0, spec.speckle_amplitude / 2.0)
            .map_err(|e| Error::InvalidParameter(format!("speckle amplitude: {e}")))?;
        let mut srng = rng_for(spec.seed, &[0x7370]);
        for _ in 0..count {
            let idx = fg_indices[srng.gen_range(0..fg_indices.len())];
            let amp: f64 = gamma.sample(&mut srng);
            field[idx] += amp;
            let x = idx % nx;
            let y = (idx / nx) % ny;
            let z = idx / (nx * ny);
            let mut spill = |cond: bool, i: usize| {
                if cond {
                    field[i] += amp / 2.0;
                }
            };
            spill(x > 0, idx - 1);
            spill(x + 1 < nx, idx + 1);
            spill(y > 0, idx - nx);
            spill(y + 1 < ny, idx + nx);
            spill(z > 0, idx - nx * ny);
            spill(z + 1 < nz, idx + nx * ny);
        }
    }

    // Needle: tip on the ellipsoid surface, pointing inward to the center.
    let mut drng = rng_for(spec.seed, &[0x6e64]);
    let dir = loop {
        let v: [f64; 3] = [
            StandardNormal.sample(&mut drng),
            StandardNormal.sample(&mut drng),
            StandardNormal.sample(&mut drng),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-3 {
            break [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    };
    let t = 1.0
        / ((dir[0] / semi[0]).powi(2) + (dir[1] / semi[1]).powi(2) + (dir[2] / semi[2]).powi(2))
            .sqrt();
    let tip = [
        center[0] + t * dir[0],
        center[1] + t * dir[1],
        center[2] + t * dir[2],
    ];
    let mut inward = [-dir[0], -dir[1], -dir[2]];
    let norm = (inward[0].powi(2) + inward[1].powi(2) + inward[2].powi(2)).sqrt();
    for c in inward.iter_mut() {
        *c /= norm;
    }

    let volume = Volume::new(spec.dims, spec.spacing, [0.0; 3], field)?;
    let mask = LiverMask::new(spec.dims, spec.spacing, [0.0; 3], foreground)?;
    Ok(Phantom { volume, mask, needle_tip: tip, needle_dir: inward })
}

/// Separable Gaussian blur along one axis (truncated at 3 sigma, renormalized,
/// clamp-to-edge).
fn gaussian_blur_axis(field: &mut [f64], dims: [usize; 3], axis: usize, sigma_vox: f64) {
    if sigma_vox <= 0.0 {
        return;
    }
    let radius = (3.0 * sigma_vox).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-0.5 * (k as f64 / sigma_vox).powi(2)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= total;
    }
    let [nx, ny, nz] = dims;
    let len = dims[axis] as i64;
    let stride = match axis {
        0 => 1usize,
        1 => nx,
        _ => nx * ny,
    };
    let (outer1, outer2) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    let mut line = vec![0.0; dims[axis]];
    for b in 0..outer2 {
        for a in 0..outer1 {
            let base = match axis {
                0 => nx * (a + ny * b),
                1 => a + nx * ny * b,
                _ => a + nx * b,
            };
            for i in 0..dims[axis] {
                line[i] = field[base + i * stride];
            }
            for i in 0..len {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let j = (i + ki as i64 - radius).clamp(0, len - 1) as usize;
                    acc += k * line[j];
                }
                field[base + (i as usize) * stride] = acc;
            }
        }
    }
}

/// Parameters of a full synthetic cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_fibrotic: usize,
    pub n_healthy: usize,
    pub master_seed: u64,
    pub base: PhantomSpec,
    /// Also write CE volumes (NC texture + 60 HU).
    pub emit_ce: bool,
}

impl CohortSpec {
    pub fn new(n_fibrotic: usize, n_healthy: usize, master_seed: u64) -> Self {
        Self { n_fibrotic, n_healthy, master_seed, base: PhantomSpec::default(), emit_ce: false }
    }
}

/// Per-patient record of a generated cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub fstage: u8,
    pub label: u8,
}

/// File layout produced by [`generate_cohort`].
#[derive(Debug, Clone)]
pub struct CohortFiles {
    pub patients: Vec<PatientRecord>,
    pub manifest: Vec<RoiManifestRow>,
}

pub fn volume_path(dir: &Path, patient_id: &str, phase: &str) -> std::path::PathBuf {
    dir.join("volumes").join(format!("{patient_id}_{phase}.mhd"))
}

pub fn mask_path(dir: &Path, patient_id: &str) -> std::path::PathBuf {
    dir.join("masks").join(format!("{patient_id}_mask.mhd"))
}

/// Generate a cohort to disk: one NC volume (optionally a CE twin), a mask,
/// a biopsy-based and a non-biopsy ROI per patient, plus the manifest and
/// labels files. Volumes are written one at a time to bound memory.
pub fn generate_cohort(dir: &Path, spec: &CohortSpec) -> Result<CohortFiles> {
    if spec.n_fibrotic + spec.n_healthy < 4 {
        return Err(Error::InvalidParameter("cohort needs at least 2 patients per class".into()));
    }
    fs::create_dir_all(dir.join("volumes"))?;
    fs::create_dir_all(dir.join("masks"))?;
    let n_total = spec.n_fibrotic + spec.n_healthy;
    let mut patients = Vec::with_capacity(n_total);
    let mut manifest = Vec::with_capacity(2 * n_total);
    for i in 0..n_total {
        let label = u8::from(i < spec.n_fibrotic);
        let fstage = if label == 1 { (i % 4 + 1) as u8 } else { 0 };
        let patient_id = format!("p{i:03}");
        let mut pspec = spec.base.clone();
        pspec.class_label = label;
        pspec.seed = derive_seed(spec.master_seed, &[0x636f, i as u64]);
        let phantom = generate_phantom(&pspec)?;

        let biopsy = place_biopsy_roi(phantom.needle_tip, phantom.needle_dir)?;
        let biopsy = shift_to_fit(&biopsy, &phantom.mask, DEFAULT_MAX_SHIFT_MM)?;
        let mut nrng: ChaCha8Rng = rng_for(spec.master_seed, &[0x6e62, i as u64]);
        let nonbiopsy = place_nonbiopsy_roi(
            &mut nrng,
            &phantom.mask,
            biopsy.center,
            DEFAULT_MIN_NONBIOPSY_DIST_MM,
            DEFAULT_ROI_RADIUS_MM,
        )?;

        write_volume(&phantom.volume, &volume_path(dir, &patient_id, "nc"))?;
        if spec.emit_ce {
            let ce_voxels: Vec<f64> =
                phantom.volume.voxels().iter().map(|v| v + CE_OFFSET_HU).collect();
            let ce = Volume::new(
                phantom.volume.dims(),
                phantom.volume.spacing(),
                phantom.volume.origin(),
                ce_voxels,
            )?;
            write_volume(&ce, &volume_path(dir, &patient_id, "ce"))?;
        }
        write_volume(&phantom.mask.to_volume(), &mask_path(dir, &patient_id))?;

        manifest.push(roi_row(&patient_id, &biopsy));
        manifest.push(roi_row(&patient_id, &nonbiopsy));
        patients.push(PatientRecord { patient_id, fstage, label });
    }
    write_roi_manifest(&manifest, &dir.join("manifest.csv"))?;
    write_labels_csv(&patients, &dir.join("labels.csv"))?;
    Ok(CohortFiles { patients, manifest })
}

fn roi_row(patient_id: &str, roi: &SphereRoi) -> RoiManifestRow {
    RoiManifestRow { patient_id: patient_id.to_string(), kind: roi.kind, center: roi.center, radius: roi.radius }
}

/// labels CSV: patient_id, fstage, label.
pub fn write_labels_csv(patients: &[PatientRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Other(e.to_string()))?;
    w.write_record(["patient_id", "fstage", "label"]).map_err(|e| Error::Other(e.to_string()))?;
    for p in patients {
        w.write_record([p.patient_id.clone(), p.fstage.to_string(), p.label.to_string()])
            .map_err(|e| Error::Other(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<PatientRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Other(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Other(e.to_string()))?;
        out.push(PatientRecord {
            patient_id: record[0].to_string(),
            fstage: record[1]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad fstage '{}'", &record[1])))?,
            label: record[2]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad label '{}'", &record[2])))?,
        });
    }
    Ok(out)
}
