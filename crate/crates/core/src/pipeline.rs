//! Extraction pipeline: volumes + ROI manifest + labels in, feature cohort
//! CSVs out.
//!
//! Per patient and contrast phase the volume is clipped to the phase's HU
//! window, resampled to isotropic spacing, and each manifest ROI is
//! extracted. Because normalization applies to ROI voxels before feature
//! computation, every (phase, normalization) pair produces its own pair of
//! biopsy/non-biopsy cohort files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::{Configuration, PhaseCohorts, SweepData};
use crate::normalize::NormalizationKind;
use crate::phantom::{read_labels_csv, volume_path, PatientRecord};
use crate::radiomics::{extract_all, feature_schema, FeatureVector};
use crate::roi::{extract_roi, read_roi_manifest, RoiKind, RoiManifestRow, SphereRoi};
use crate::tabular::{read_cohort_csv, write_cohort_csv, Cohort};
use crate::volume::{clip_hu, read_volume, resample_trilinear, ContrastPhase};

/// The source data resamples to half-millimeter isotropic voxels.
pub const DEFAULT_RESAMPLE_SPACING: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub resample_spacing: f64,
    pub normalizations: Vec<NormalizationKind>,
    pub jobs: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            resample_spacing: DEFAULT_RESAMPLE_SPACING,
            normalizations: crate::normalize::SWEEP_NORMALIZATIONS.to_vec(),
            jobs: 0,
        }
    }
}

/// Cohort CSV file name for one (kind, phase, normalization) slice.
pub fn cohort_csv_name(kind: RoiKind, phase: ContrastPhase, norm: NormalizationKind) -> String {
    format!(
        "features_{}_{}_{}.csv",
        kind.name(),
        phase.name().to_lowercase(),
        norm.name()
    )
}

struct PatientExtraction {
    /// (kind, norm index) -> feature vector.
    features: Vec<(RoiKind, usize, FeatureVector)>,
}

/// Extract feature cohorts for every phase with volumes on disk. Returns
/// the written file paths. Work parallelizes over patients; outputs are
/// independent of the worker count.
pub fn extract_cohorts(data_dir: &Path, out_dir: &Path, opts: &ExtractOptions) -> Result<Vec<PathBuf>> {
    if opts.normalizations.is_empty() {
        return Err(Error::InvalidParameter("no normalizations requested".into()));
    }
    let patients = read_labels_csv(&data_dir.join("labels.csv"))?;
    if patients.is_empty() {
        return Err(Error::EmptyInput("labels.csv has no patients".into()));
    }
    let manifest = read_roi_manifest(&data_dir.join("manifest.csv"))?;
    let mut rois_by_patient: BTreeMap<&str, Vec<&RoiManifestRow>> = BTreeMap::new();
    for row in &manifest {
        rois_by_patient.entry(row.patient_id.as_str()).or_default().push(row);
    }
    let phases: Vec<ContrastPhase> = ContrastPhase::ALL
        .into_iter()
        .filter(|phase| {
            volume_path(data_dir, &patients[0].patient_id, &phase.name().to_lowercase()).exists()
        })
        .collect();
    if phases.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no volumes found under {}",
            data_dir.join("volumes").display()
        )));
    }

    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for phase in phases {
        let extract_patient = |p: &PatientRecord| -> Result<PatientExtraction> {
            let path = volume_path(data_dir, &p.patient_id, &phase.name().to_lowercase());
            let volume = read_volume(&path)?;
            let clipped = clip_hu(&volume, phase);
            drop(volume);
            let resampled = resample_trilinear(&clipped, opts.resample_spacing)?;
            drop(clipped);
            let rois = rois_by_patient
                .get(p.patient_id.as_str())
                .ok_or_else(|| Error::InvalidParameter(format!("no manifest rows for {}", p.patient_id)))?;
            let mut features = Vec::with_capacity(rois.len() * opts.normalizations.len());
            for roi_row in rois {
                let roi = SphereRoi::new(roi_row.center, roi_row.radius, roi_row.kind)?;
                let sample = extract_roi(&resampled, &roi)?;
                for (ni, &norm) in opts.normalizations.iter().enumerate() {
                    features.push((roi_row.kind, ni, extract_all(&sample, norm)?));
                }
            }
            Ok(PatientExtraction { features })
        };
        let extractions: Vec<Result<PatientExtraction>> = if opts.jobs == 1 {
            patients.iter().map(extract_patient).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()
                .map_err(|e| Error::Other(format!("thread pool: {e}")))?;
            pool.install(|| patients.par_iter().map(extract_patient).collect())
        };

        let schema = feature_schema().to_vec();
        for (ni, &norm) in opts.normalizations.iter().enumerate() {
            for kind in [RoiKind::BiopsyBased, RoiKind::NonBiopsy] {
                let mut rows = Vec::new();
                let mut labels = Vec::new();
                let mut fstage = Vec::new();
                let mut patient_ids = Vec::new();
                let mut roi_kinds = Vec::new();
                let mut roi_ids = Vec::new();
                for (p, extraction) in patients.iter().zip(&extractions) {
                    let extraction = extraction
                        .as_ref()
                        .map_err(|e| Error::Other(format!("patient {}: {e}", p.patient_id)))?;
                    for (k, fni, fv) in &extraction.features {
                        if *k == kind && *fni == ni {
                            rows.push(fv.values().to_vec());
                            labels.push(p.label);
                            fstage.push(p.fstage);
                            patient_ids.push(p.patient_id.clone());
                            roi_kinds.push(kind);
                            roi_ids.push(format!("{}:{}", p.patient_id, kind.name()));
                        }
                    }
                }
                let cohort = Cohort::new(schema.clone(), rows, labels, fstage, patient_ids, roi_kinds, roi_ids)?;
                let path = out_dir.join(cohort_csv_name(kind, phase, norm));
                write_cohort_csv(&cohort, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Load the cohort files needed by the given configurations.
pub fn load_sweep_data(features_dir: &Path, configs: &[Configuration]) -> Result<SweepData> {
    let mut needed: BTreeMap<(ContrastPhase, String), NormalizationKind> = BTreeMap::new();
    for c in configs {
        needed.insert((c.contrast, c.normalization.name()), c.normalization);
    }
    let mut data = SweepData::default();
    for ((phase, _), norm) in needed {
        let biopsy = read_cohort_csv(&features_dir.join(cohort_csv_name(RoiKind::BiopsyBased, phase, norm)))?;
        let nonbiopsy = read_cohort_csv(&features_dir.join(cohort_csv_name(RoiKind::NonBiopsy, phase, norm)))?;
        data.insert(phase, norm, PhaseCohorts { biopsy, nonbiopsy });
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_cohort, CohortSpec, PhantomSpec};
    use tempfile::tempdir;

    fn tiny_cohort_spec(seed: u64) -> CohortSpec {
        let mut spec = CohortSpec::new(3, 2, seed);
        spec.base = PhantomSpec {
            dims: [86, 84, 84],
            spacing: [2.0, 2.0, 2.0],
            ..PhantomSpec::default()
        };
        spec
    }

    #[test]
    fn extraction_emits_stable_cohorts() {
        let data = tempdir().unwrap();
        let out = tempdir().unwrap();
        generate_cohort(data.path(), &tiny_cohort_spec(5)).unwrap();
        let opts = ExtractOptions {
            resample_spacing: 2.0,
            normalizations: vec![NormalizationKind::None, NormalizationKind::Gamma(1.5)],
            jobs: 1,
        };
        let files = extract_cohorts(data.path(), out.path(), &opts).unwrap();
        // 1 phase x 2 norms x 2 kinds.
        assert_eq!(files.len(), 4);
        let biopsy = read_cohort_csv(
            &out.path().join(cohort_csv_name(RoiKind::BiopsyBased, ContrastPhase::Nc, NormalizationKind::None)),
        )
        .unwrap();
        assert_eq!(biopsy.n_rows(), 5);
        assert_eq!(biopsy.n_features(), 192);
        assert!(biopsy.roi_kinds.iter().all(|&k| k == RoiKind::BiopsyBased));

        // Rerunning with a different worker count writes identical bytes.
        let out2 = tempdir().unwrap();
        let opts2 = ExtractOptions { jobs: 3, ..opts };
        extract_cohorts(data.path(), out2.path(), &opts2).unwrap();
        for f in &files {
            let name = f.file_name().unwrap();
            let a = std::fs::read(f).unwrap();
            let b = std::fs::read(out2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name:?} differs across worker counts");
        }
    }

    #[test]
    fn load_sweep_data_finds_needed_slices() {
        let data = tempdir().unwrap();
        let out = tempdir().unwrap();
        generate_cohort(data.path(), &tiny_cohort_spec(6)).unwrap();
        let opts = ExtractOptions {
            resample_spacing: 2.0,
            normalizations: vec![NormalizationKind::MinMax],
            jobs: 1,
        };
        extract_cohorts(data.path(), out.path(), &opts).unwrap();
        let config = Configuration {
            contrast: ContrastPhase::Nc,
            normalization: NormalizationKind::MinMax,
            model: crate::learners::ModelKind::LogisticRegression,
            selector: crate::selectors::SelectorKind::None,
        };
        let sweep_data = load_sweep_data(out.path(), &[config]).unwrap();
        assert!(sweep_data.get(&config).is_some());
        let missing = Configuration { normalization: NormalizationKind::ZScore, ..config };
        assert!(load_sweep_data(out.path(), &[missing]).is_err());
    }
}
