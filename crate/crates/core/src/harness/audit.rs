//! Volume-confounder audit: models trained only on ROI volume surrogates.
//!
//! Radiomics features that track attenuation can smuggle in ROI-volume
//! information; the audit trains logistic models on (a) the analytic sphere
//! volume of each ROI and (b) the per-image voxel spacing triple. On an
//! isotropic fixed-radius cohort both are constant, every score ties, and
//! the AUC is exactly 0.5; any AUC meaningfully above chance flags leakage.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::radiomics::FeatureId;
use crate::roi::RoiKind;
use crate::tabular::Cohort;

use super::baseline::evaluate_feature_cohort;
use super::MetricTriple;

/// One ROI's volume surrogates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub patient_id: String,
    pub label: u8,
    /// Analytic sphere volume (4/3) pi r^3 in mm^3.
    pub mesh_volume: f64,
    /// Voxel spacing of the source image, mm.
    pub spacing: [f64; 3],
}

impl AuditRow {
    pub fn from_roi(patient_id: &str, label: u8, radius_mm: f64, spacing: [f64; 3]) -> Self {
        Self {
            patient_id: patient_id.to_string(),
            label,
            mesh_volume: 4.0 / 3.0 * std::f64::consts::PI * radius_mm.powi(3),
            spacing,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub mesh_volume: MetricTriple,
    pub pixel_spacing: MetricTriple,
}

/// Run both audit models over repeated seeds.
pub fn confounder_audit(rows: &[AuditRow], n_repeats: usize, master_seed: u64) -> Result<AuditReport> {
    let mesh = feature_cohort(
        rows,
        vec![FeatureId::from("audit_mesh_volume")],
        |r| vec![r.mesh_volume],
    )?;
    let spacing = feature_cohort(
        rows,
        vec![
            FeatureId::from("audit_spacing_x"),
            FeatureId::from("audit_spacing_y"),
            FeatureId::from("audit_spacing_z"),
        ],
        |r| r.spacing.to_vec(),
    )?;
    Ok(AuditReport {
        mesh_volume: evaluate_feature_cohort(&mesh, n_repeats, master_seed)?,
        pixel_spacing: evaluate_feature_cohort(&spacing, n_repeats, master_seed)?,
    })
}

fn feature_cohort(
    rows: &[AuditRow],
    schema: Vec<FeatureId>,
    extract: impl Fn(&AuditRow) -> Vec<f64>,
) -> Result<Cohort> {
    Cohort::new(
        schema,
        rows.iter().map(&extract).collect(),
        rows.iter().map(|r| r.label).collect(),
        rows.iter().map(|r| r.label).collect(),
        rows.iter().map(|r| r.patient_id.clone()).collect(),
        vec![RoiKind::BiopsyBased; rows.len()],
        rows.iter()
            .enumerate()
            .map(|(i, r)| format!("{}:audit{}", r.patient_id, i))
            .collect(),
    )
}
