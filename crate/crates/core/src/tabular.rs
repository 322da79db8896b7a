//! Labeled feature matrices and cohort hygiene: correlation and variance
//! filters, min-max scaling, patient-grouped stratified splits, and SMOTE
//! class balancing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radiomics::FeatureId;
use crate::roi::RoiKind;
use crate::seeding::rng_for;

/// A labeled per-ROI feature matrix with split bookkeeping.
///
/// All rows share one schema; labels are binary (0 = F0, 1 = F1-F4) and
/// `label = (fstage >= 1)`. The original METAVIR stage is carried for
/// provenance only.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub schema: Vec<FeatureId>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub fstage: Vec<u8>,
    pub patient_ids: Vec<String>,
    pub roi_kinds: Vec<RoiKind>,
    pub roi_ids: Vec<String>,
}

/// Split parameters: the fraction routed to the first part, plus the seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split fraction must be in (0,1), got {fraction}"
            )));
        }
        Ok(Self { fraction, seed })
    }
}

impl Cohort {
    pub fn new(
        schema: Vec<FeatureId>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        fstage: Vec<u8>,
        patient_ids: Vec<String>,
        roi_kinds: Vec<RoiKind>,
        roi_ids: Vec<String>,
    ) -> Result<Self> {
        let n = rows.len();
        if labels.len() != n || fstage.len() != n || patient_ids.len() != n || roi_kinds.len() != n || roi_ids.len() != n {
            return Err(Error::InvalidParameter("cohort field lengths disagree".into()));
        }
        for row in &rows {
            if row.len() != schema.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row has {} values, schema has {}",
                    row.len(),
                    schema.len()
                )));
            }
        }
        for (&l, &s) in labels.iter().zip(&fstage) {
            if l > 1 || s > 4 {
                return Err(Error::InvalidParameter("labels must be 0/1 and fstage 0..=4".into()));
            }
            if l != u8::from(s >= 1) {
                return Err(Error::InvalidParameter(format!(
                    "label {l} inconsistent with fstage {s}"
                )));
            }
        }
        Ok(Self { schema, rows, labels, fstage, patient_ids, roi_kinds, roi_ids })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Rows whose patient_id belongs to `ids`, preserving row order.
    pub fn subset_by_patients(&self, ids: &BTreeSet<String>) -> Cohort {
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| ids.contains(&self.patient_ids[i]))
            .collect();
        self.subset_rows(&keep)
    }

    pub fn subset_rows(&self, keep: &[usize]) -> Cohort {
        Cohort {
            schema: self.schema.clone(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            fstage: keep.iter().map(|&i| self.fstage[i]).collect(),
            patient_ids: keep.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            roi_kinds: keep.iter().map(|&i| self.roi_kinds[i]).collect(),
            roi_ids: keep.iter().map(|&i| self.roi_ids[i].clone()).collect(),
        }
    }

    fn retain_columns(&self, keep: &[usize]) -> Cohort {
        Cohort {
            schema: keep.iter().map(|&j| self.schema[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            fstage: self.fstage.clone(),
            patient_ids: self.patient_ids.clone(),
            roi_kinds: self.roi_kinds.clone(),
            roi_ids: self.roi_ids.clone(),
        }
    }

    /// Restrict to the named features, in the given order.
    pub fn restrict_features(&self, ids: &[FeatureId]) -> Result<Cohort> {
        let mut keep = Vec::with_capacity(ids.len());
        for id in ids {
            let j = self
                .schema
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::UnknownFeature(id.to_string()))?;
            keep.push(j);
        }
        Ok(self.retain_columns(&keep))
    }

    pub fn patient_set(&self) -> BTreeSet<String> {
        self.patient_ids.iter().cloned().collect()
    }
}

/// Stratified patient partition: shuffle each class's patients by the seed
/// and route `round(fraction * n_class)` of them to the first part.
/// `patients` lists (patient_id, label) in a deterministic order.
pub fn stratified_patient_partition(
    patients: &[(String, u8)],
    fraction: f64,
    seed: u64,
) -> BTreeSet<String> {
    let mut rng = rng_for(seed, &[0x53504c49]);
    let mut first: BTreeSet<String> = BTreeSet::new();
    for class in [0u8, 1u8] {
        let mut class_patients: Vec<&str> = patients
            .iter()
            .filter(|(_, l)| *l == class)
            .map(|(p, _)| p.as_str())
            .collect();
        shuffle(&mut class_patients, &mut rng);
        let take = (fraction * class_patients.len() as f64).round() as usize;
        for p in class_patients.into_iter().take(take) {
            first.insert(p.to_string());
        }
    }
    first
}

/// Stratified, patient-grouped split. Patients of each class are shuffled
/// by the seed and the first part receives `round(fraction * n_class)`
/// patients per class; all rows of one patient stay together.
pub fn split(c: &Cohort, spec: &SplitSpec) -> Result<(Cohort, Cohort)> {
    // Patients in first-appearance order, with their class label.
    let mut patient_label: BTreeMap<&str, u8> = BTreeMap::new();
    let mut order: Vec<(String, u8)> = Vec::new();
    for i in 0..c.n_rows() {
        let pid = c.patient_ids[i].as_str();
        match patient_label.get(pid) {
            None => {
                patient_label.insert(pid, c.labels[i]);
                order.push((pid.to_string(), c.labels[i]));
            }
            Some(&l) => {
                if l != c.labels[i] {
                    return Err(Error::InvalidParameter(format!(
                        "patient {pid} appears with both labels"
                    )));
                }
            }
        }
    }
    for class in [0u8, 1u8] {
        let rows = c.labels.iter().filter(|&&l| l == class).count();
        if rows < 2 {
            return Err(Error::ClassTooSmall(class));
        }
    }
    let first = stratified_patient_partition(&order, spec.fraction, spec.seed);
    let part_a = c.subset_by_patients(&first);
    let rest: Vec<usize> = (0..c.n_rows())
        .filter(|&i| !first.contains(&c.patient_ids[i]))
        .collect();
    let part_b = c.subset_rows(&rest);
    Ok((part_a, part_b))
}

/// Fisher-Yates with the crate's seeded generator.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Drop the later column of every pair with |Pearson r| above the
/// threshold, scanning in schema order. Constant columns never trigger a
/// drop here (their correlation is treated as 0).
pub fn drop_correlated(c: &Cohort, threshold: f64) -> Result<Cohort> {
    if c.n_rows() < 2 {
        return Err(Error::EmptyInput("correlation filter needs >= 2 rows".into()));
    }
    let n = c.n_rows() as f64;
    let p = c.n_features();
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for j in 0..p {
        let m = c.column(j).sum::<f64>() / n;
        mean[j] = m;
        sd[j] = (c.column(j).map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    }
    let mut retained = vec![true; p];
    for j in 0..p {
        if !retained[j] || sd[j] == 0.0 {
            continue;
        }
        for k in (j + 1)..p {
            if !retained[k] || sd[k] == 0.0 {
                continue;
            }
            let mut cov = 0.0;
            for row in &c.rows {
                cov += (row[j] - mean[j]) * (row[k] - mean[k]);
            }
            let r = cov / n / (sd[j] * sd[k]);
            if r.abs() > threshold {
                retained[k] = false;
            }
        }
    }
    let keep: Vec<usize> = (0..p).filter(|&j| retained[j]).collect();
    Ok(c.retain_columns(&keep))
}

/// Drop columns whose population variance (on raw, pre-scaling values) is
/// strictly below the threshold.
pub fn drop_low_variance(c: &Cohort, threshold: f64) -> Result<Cohort> {
    if c.n_rows() < 2 {
        return Err(Error::EmptyInput("variance filter needs >= 2 rows".into()));
    }
    let n = c.n_rows() as f64;
    let keep: Vec<usize> = (0..c.n_features())
        .filter(|&j| {
            let m = c.column(j).sum::<f64>() / n;
            let var = c.column(j).map(|v| (v - m).powi(2)).sum::<f64>() / n;
            var >= threshold
        })
        .collect();
    Ok(c.retain_columns(&keep))
}

/// Min-max scale every column to [0, 1] by its own min/max. Columns that
/// are constant (possible on a test side aligned to a dev schema) map to 0.
pub fn minmax_scale(c: &Cohort) -> Cohort {
    let p = c.n_features();
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for row in &c.rows {
        for j in 0..p {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let rows = c
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| if hi[j] == lo[j] { 0.0 } else { (v - lo[j]) / (hi[j] - lo[j]) })
                .collect()
        })
        .collect();
    Cohort { rows, ..c.clone() }
}

/// Restrict `test` to exactly `dev`'s retained columns, in dev's order.
pub fn align_features(dev: &Cohort, test: &Cohort) -> Result<Cohort> {
    test.restrict_features(&dev.schema)
}

/// SMOTE: oversample the minority class by convex interpolation between
/// nearest minority neighbors until the classes are equal. Original rows
/// are unchanged; synthetic rows are appended.
pub fn smote(c: &Cohort, k: usize, rng: &mut ChaCha8Rng) -> Result<Cohort> {
    let n1 = c.labels.iter().filter(|&&l| l == 1).count();
    let n0 = c.n_rows() - n1;
    if n0 == n1 {
        return Ok(c.clone());
    }
    let minority_label = if n0 < n1 { 0u8 } else { 1u8 };
    let minority: Vec<usize> = (0..c.n_rows()).filter(|&i| c.labels[i] == minority_label).collect();
    if minority.len() < 2 {
        return Err(Error::MinorityTooSmall);
    }
    let k_eff = k.min(minority.len() - 1);
    // k nearest minority neighbors per minority row (Euclidean), ties by index.
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(minority.len());
    for (a, &i) in minority.iter().enumerate() {
        let mut dists: Vec<(f64, usize)> = minority
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(_, &j)| {
                let d = c.rows[i]
                    .iter()
                    .zip(&c.rows[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>();
                (d, j)
            })
            .collect();
        dists.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        neighbors.push(dists.into_iter().take(k_eff).map(|(_, j)| j).collect());
    }
    let need = n0.abs_diff(n1);
    let mut out = c.clone();
    for t in 0..need {
        let a = rng.gen_range(0..minority.len());
        let i = minority[a];
        let j = neighbors[a][rng.gen_range(0..k_eff)];
        let u: f64 = rng.gen();
        let row: Vec<f64> = c.rows[i]
            .iter()
            .zip(&c.rows[j])
            .map(|(x, y)| x + u * (y - x))
            .collect();
        out.rows.push(row);
        out.labels.push(minority_label);
        out.fstage.push(c.fstage[i]);
        out.patient_ids.push(format!("smote-{t}"));
        out.roi_kinds.push(c.roi_kinds[i]);
        out.roi_ids.push(format!("smote-{t}"));
    }
    Ok(out)
}

/// Write a cohort CSV: roi_id, patient_id, roi_kind, fstage, label, then
/// one column per feature with 17 significant digits.
pub fn write_cohort_csv(c: &Cohort, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let mut header = vec![
        "roi_id".to_string(),
        "patient_id".to_string(),
        "roi_kind".to_string(),
        "fstage".to_string(),
        "label".to_string(),
    ];
    header.extend(c.schema.iter().map(|f| f.to_string()));
    w.write_record(&header)?;
    for i in 0..c.n_rows() {
        let mut rec = vec![
            c.roi_ids[i].clone(),
            c.patient_ids[i].clone(),
            c.roi_kinds[i].name().to_string(),
            c.fstage[i].to_string(),
            c.labels[i].to_string(),
        ];
        rec.extend(c.rows[i].iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a cohort CSV written by [`write_cohort_csv`].
pub fn read_cohort_csv(path: &Path) -> Result<Cohort> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let headers = r.headers()?.clone();
    if headers.len() < 5 {
        return Err(Error::Csv("cohort csv needs at least 5 metadata columns".into()));
    }
    for (i, expect) in ["roi_id", "patient_id", "roi_kind", "fstage", "label"].iter().enumerate() {
        if &headers[i] != *expect {
            return Err(Error::Csv(format!("column {i} must be '{expect}', got '{}'", &headers[i])));
        }
    }
    let schema: Vec<FeatureId> = headers.iter().skip(5).map(FeatureId::from).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut fstage = Vec::new();
    let mut patient_ids = Vec::new();
    let mut roi_kinds = Vec::new();
    let mut roi_ids = Vec::new();
    for record in r.records() {
        let record = record?;
        roi_ids.push(record[0].to_string());
        patient_ids.push(record[1].to_string());
        roi_kinds.push(RoiKind::parse(&record[2])?);
        fstage.push(record[3].parse::<u8>().map_err(|_| Error::Csv(format!("bad fstage '{}'", &record[3])))?);
        labels.push(record[4].parse::<u8>().map_err(|_| Error::Csv(format!("bad label '{}'", &record[4])))?);
        let row: std::result::Result<Vec<f64>, _> = record.iter().skip(5).map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Csv(format!("bad feature value: {e}")))?);
    }
    Cohort::new(schema, rows, labels, fstage, patient_ids, roi_kinds, roi_ids)
}
