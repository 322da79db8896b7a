//! Baseline comparison model: three hand-crafted texture features from five
//! randomly placed cubic ROIs, fed to an L2 logistic regression (C = 1).
//!
//! Per cube the features are (a) mean intensity, (b) the standard deviation
//! over the cube of a 3x3 per-axial-slice local-variance filter response,
//! and (c) the mean |HH| coefficient of a single-level 2D Haar transform of
//! the cube's mid-axial slice; each patient's three features average over
//! its cubes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::learners::{predict_score, train, HyperParams, LogRegSolver};
use crate::metrics::{auc, ci_normal, sens_spec};
use crate::radiomics::FeatureId;
use crate::roi::LiverMask;
use crate::seeding::{derive_seed, rng_for};
use crate::tabular::{minmax_scale, smote, split, Cohort, SplitSpec};
use crate::volume::Volume;

use super::{MetricTriple, SMOTE_K};

/// Cube edge length in mm.
pub const CUBE_SIZE_MM: f64 = 15.0;
pub const CUBES_PER_PATIENT: usize = 5;
const PLACEMENT_ATTEMPTS: usize = 4000;

/// One patient's input to the baseline.
pub struct BaselinePatient {
    pub patient_id: String,
    pub label: u8,
    pub volume: Volume,
    pub mask: LiverMask,
}

/// The three Hirano-style features of one patient, averaged over its cubes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineFeatures {
    pub mean_intensity: f64,
    pub variance_filter_sd: f64,
    pub wavelet_hh_mean: f64,
    pub n_cubes: usize,
}

/// Extract the per-patient features from up to five disjoint cubes. Returns
/// fewer cubes (minimum 1) with a warning when the mask is too small.
pub fn baseline_features(volume: &Volume, mask: &LiverMask, seed: u64) -> Result<BaselineFeatures> {
    let spacing = volume.spacing();
    let half = CUBE_SIZE_MM / 2.0;
    let dims = mask.dims();
    // Candidate cube centers: voxel centers whose cube fits in the mask.
    let mut rng = rng_for(seed, &[0x6869]);
    let mut centers: Vec<[f64; 3]> = Vec::new();
    let mut attempts = 0usize;
    while centers.len() < CUBES_PER_PATIENT && attempts < PLACEMENT_ATTEMPTS {
        attempts += 1;
        let idx = [
            rng.gen_range(0..dims[0]),
            rng.gen_range(0..dims[1]),
            rng.gen_range(0..dims[2]),
        ];
        if !mask.at(idx[0], idx[1], idx[2]) {
            continue;
        }
        let center = mask.position(idx[0], idx[1], idx[2]);
        if !cube_inside_mask(mask, center, half) {
            continue;
        }
        // Disjoint from the cubes already kept.
        if centers
            .iter()
            .any(|c| (0..3).all(|a| (c[a] - center[a]).abs() < CUBE_SIZE_MM))
        {
            continue;
        }
        centers.push(center);
    }
    if centers.is_empty() {
        return Err(Error::Other("mask too small for any baseline cube".into()));
    }
    if centers.len() < CUBES_PER_PATIENT {
        log::warn!(
            "baseline: only {} of {CUBES_PER_PATIENT} disjoint cubes fit the mask",
            centers.len()
        );
    }
    let mut mean_acc = 0.0;
    let mut sd_acc = 0.0;
    let mut hh_acc = 0.0;
    for center in &centers {
        let cube = extract_cube(volume, *center, half);
        mean_acc += cube_mean(&cube);
        sd_acc += variance_filter_sd(&cube);
        hh_acc += wavelet_hh_mean(&cube);
    }
    let n = centers.len() as f64;
    let _ = spacing;
    Ok(BaselineFeatures {
        mean_intensity: mean_acc / n,
        variance_filter_sd: sd_acc / n,
        wavelet_hh_mean: hh_acc / n,
        n_cubes: centers.len(),
    })
}

fn cube_inside_mask(mask: &LiverMask, center: [f64; 3], half: f64) -> bool {
    let dims = mask.dims();
    let spacing = mask.spacing();
    let origin = mask.origin();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let lo_f = (center[a] - half - origin[a]) / spacing[a];
        let hi_f = (center[a] + half - origin[a]) / spacing[a];
        if lo_f < 0.0 || hi_f > (dims[a] - 1) as f64 {
            return false;
        }
        lo[a] = lo_f.ceil() as usize;
        hi[a] = hi_f.floor() as usize;
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                if !mask.at(x, y, z) {
                    return false;
                }
            }
        }
    }
    true
}

/// Dense cube sample: values plus per-axis voxel counts.
struct Cube {
    dims: [usize; 3],
    data: Vec<f64>,
}

fn extract_cube(volume: &Volume, center: [f64; 3], half: f64) -> Cube {
    let spacing = volume.spacing();
    let origin = volume.origin();
    let dims = volume.dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        lo[a] = (((center[a] - half - origin[a]) / spacing[a]).ceil().max(0.0)) as usize;
        hi[a] = (((center[a] + half - origin[a]) / spacing[a]).floor() as usize).min(dims[a] - 1);
    }
    let cd = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let mut data = Vec::with_capacity(cd[0] * cd[1] * cd[2]);
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                data.push(volume.get(x, y, z));
            }
        }
    }
    Cube { dims: cd, data }
}

fn cube_mean(cube: &Cube) -> f64 {
    cube.data.iter().sum::<f64>() / cube.data.len() as f64
}

/// Standard deviation over the cube of a 3x3 in-slice local variance map.
fn variance_filter_sd(cube: &Cube) -> f64 {
    let [nx, ny, nz] = cube.dims;
    let at = |x: usize, y: usize, z: usize| cube.data[x + nx * (y + ny * z)];
    let mut responses = Vec::with_capacity(cube.data.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut vals = Vec::with_capacity(9);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let sx = (x as i64 + dx).clamp(0, nx as i64 - 1) as usize;
                        let sy = (y as i64 + dy).clamp(0, ny as i64 - 1) as usize;
                        vals.push(at(sx, sy, z));
                    }
                }
                let m = vals.iter().sum::<f64>() / 9.0;
                responses.push(vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 9.0);
            }
        }
    }
    let m = responses.iter().sum::<f64>() / responses.len() as f64;
    (responses.iter().map(|v| (v - m).powi(2)).sum::<f64>() / responses.len() as f64).sqrt()
}

/// Mean |HH| of a single-level 2D Haar transform of the mid-axial slice.
fn wavelet_hh_mean(cube: &Cube) -> f64 {
    let [nx, ny, nz] = cube.dims;
    let z = nz / 2;
    // Pad to even by duplicating the edge sample.
    let px = nx + nx % 2;
    let py = ny + ny % 2;
    let mut slice = vec![0.0; px * py];
    for y in 0..py {
        for x in 0..px {
            let sx = x.min(nx - 1);
            let sy = y.min(ny - 1);
            slice[x + px * y] = cube.data[sx + nx * (sy + ny * z)];
        }
    }
    let (hx, hy) = (px / 2, py / 2);
    let mut acc = 0.0;
    for j in 0..hy {
        for i in 0..hx {
            let a = slice[2 * i + px * (2 * j)];
            let b = slice[2 * i + 1 + px * (2 * j)];
            let c = slice[2 * i + px * (2 * j + 1)];
            let d = slice[2 * i + 1 + px * (2 * j + 1)];
            // High-pass along both axes: (a - b - c + d) / 2.
            acc += ((a - b - c + d) / 2.0).abs();
        }
    }
    acc / (hx * hy) as f64
}

/// Per-patient seed for cube placement, derived from the run's master seed.
pub fn cube_seed(master_seed: u64, patient_index: usize) -> u64 {
    derive_seed(master_seed, &[0x6375, patient_index as u64])
}

/// Evaluate the baseline from already-extracted per-patient features
/// (streaming callers extract one volume at a time).
pub fn baseline_from_features(
    rows: &[(String, u8, BaselineFeatures)],
    n_repeats: usize,
    master_seed: u64,
) -> Result<MetricTriple> {
    let schema = vec![
        FeatureId::from("baseline_mean_intensity"),
        FeatureId::from("baseline_variance_filter_sd"),
        FeatureId::from("baseline_wavelet_hh_mean"),
    ];
    let cohort = Cohort::new(
        schema,
        rows.iter()
            .map(|(_, _, f)| vec![f.mean_intensity, f.variance_filter_sd, f.wavelet_hh_mean])
            .collect(),
        rows.iter().map(|(_, l, _)| *l).collect(),
        rows.iter().map(|(_, l, _)| *l).collect(),
        rows.iter().map(|(p, _, _)| p.clone()).collect(),
        vec![crate::roi::RoiKind::BiopsyBased; rows.len()],
        rows.iter().map(|(p, _, _)| format!("{p}:baseline")).collect(),
    )?;
    evaluate_feature_cohort(&cohort, n_repeats, master_seed)
}

/// Build the 3-feature cohort, split it 80/20, and evaluate the baseline
/// logistic model over repeated SMOTE seeds.
pub fn baseline_hirano(
    patients: &[BaselinePatient],
    n_repeats: usize,
    master_seed: u64,
) -> Result<MetricTriple> {
    let mut rows = Vec::with_capacity(patients.len());
    for (i, p) in patients.iter().enumerate() {
        let f = baseline_features(&p.volume, &p.mask, cube_seed(master_seed, i))?;
        rows.push((p.patient_id.clone(), p.label, f));
    }
    baseline_from_features(&rows, n_repeats, master_seed)
}

/// Shared evaluation protocol for the baseline and the confounder audit:
/// one 80/20 split, then repeated SMOTE + logistic fits on the internal
/// side evaluated on the external side.
pub(crate) fn evaluate_feature_cohort(
    cohort: &Cohort,
    n_repeats: usize,
    master_seed: u64,
) -> Result<MetricTriple> {
    let (internal, external) = split(cohort, &SplitSpec::new(0.8, derive_seed(master_seed, &[1]))?)?;
    let internal = minmax_scale(&internal);
    let external = minmax_scale(&external);
    let mut aucs = Vec::with_capacity(n_repeats);
    let mut sens_list = Vec::with_capacity(n_repeats);
    let mut spec_list = Vec::with_capacity(n_repeats);
    for repeat in 0..n_repeats {
        let seed = derive_seed(master_seed, &[2, repeat as u64]);
        let mut rng = rng_for(seed, &[0]);
        let balanced = smote(&internal, SMOTE_K, &mut rng)?;
        let params = HyperParams::LogReg { solver: LogRegSolver::Lbfgs, c: 1.0 };
        let model = train(&balanced.rows, &balanced.labels, &params, seed)?;
        let scores = predict_score(&model, &external.rows)?;
        aucs.push(auc(&scores, &external.labels)?);
        let (sens, spec) = sens_spec(&scores, &external.labels, model.threshold())?;
        sens_list.push(sens);
        spec_list.push(spec);
    }
    Ok(MetricTriple {
        auc: ci_normal(&aucs)?,
        sensitivity: ci_normal(&sens_list)?,
        specificity: ci_normal(&spec_list)?,
    })
}
