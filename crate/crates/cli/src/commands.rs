//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use liverscreen::harness::baseline::{baseline_features, baseline_from_features, cube_seed};
use liverscreen::harness::audit::{confounder_audit, AuditRow};
use liverscreen::harness::{
    biopsy_feature_set, intersecting_feature_set, nonbiopsy_feature_set, rank_features, summarize,
    run_sweep, Configuration, ExperimentRecord, MetricTriple, SimpleModelReport, SweepOptions,
    SweepSummary, CONFIG_COUNT, REPORTED_CONFIG_TOTAL,
};
use liverscreen::metrics::MetricSummary;
use liverscreen::normalize::NormalizationKind;
use liverscreen::phantom::{generate_cohort, mask_path, read_labels_csv, volume_path};
use liverscreen::pipeline::{cohort_csv_name, extract_cohorts, load_sweep_data, ExtractOptions};
use liverscreen::radiomics::FeatureId;
use liverscreen::roi::{read_roi_manifest, LiverMask, RoiKind};
use liverscreen::seeding::derive_seed;
use liverscreen::tabular::stratified_patient_partition;
use liverscreen::volume::{clip_hu, read_volume, read_volume_header, ContrastPhase};

use crate::config::RunConfig;
use crate::report;

pub fn cmd_phantom(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.phantom.cohort_spec(cfg.master_seed);
    let files = generate_cohort(&cfg.data_dir, &spec)?;
    println!(
        "phantom: wrote {} patients ({} fibrotic / {} healthy) under {}",
        files.patients.len(),
        spec.n_fibrotic,
        spec.n_healthy,
        cfg.data_dir.display()
    );
    Ok(())
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<()> {
    require_exists(&cfg.data_dir.join("labels.csv"))?;
    require_exists(&cfg.data_dir.join("manifest.csv"))?;
    let opts = ExtractOptions {
        resample_spacing: cfg.resample_spacing,
        normalizations: cfg.normalization_kinds()?,
        jobs: cfg.jobs,
    };
    let files = extract_cohorts(&cfg.data_dir, &cfg.features_dir, &opts)?;
    println!("extract: wrote {} cohort files under {}", files.len(), cfg.features_dir.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitManifest {
    pub internal: Vec<String>,
    pub external: Vec<String>,
}

/// Load or derive the internal/external patient partition. The partition
/// depends only on the patient list, holdout fraction, and master seed, so
/// sweep and simple agree without coordination.
fn holdout_partition(
    cfg: &RunConfig,
    patients: &[(String, u8)],
) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let manifest_path = cfg.out_dir.join("split_manifest.json");
    if manifest_path.exists() {
        let manifest: SplitManifest =
            serde_json::from_str(&fs::read_to_string(&manifest_path)?)
                .with_context(|| format!("parsing {}", manifest_path.display()))?;
        return Ok((
            manifest.internal.into_iter().collect(),
            manifest.external.into_iter().collect(),
        ));
    }
    let all: BTreeSet<String> = patients.iter().map(|(p, _)| p.clone()).collect();
    let internal = if cfg.holdout_fraction == 0.0 {
        all.clone()
    } else {
        stratified_patient_partition(
            patients,
            1.0 - cfg.holdout_fraction,
            derive_seed(cfg.master_seed, &[0x686f6c64]),
        )
    };
    let external: BTreeSet<String> = all.difference(&internal).cloned().collect();
    fs::create_dir_all(&cfg.out_dir)?;
    let manifest = SplitManifest {
        internal: internal.iter().cloned().collect(),
        external: external.iter().cloned().collect(),
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((internal, external))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let configs = cfg.selected_configs()?;
    let data = load_sweep_data(&cfg.features_dir, &configs)?;
    let patients = data.patients();
    if patients.is_empty() {
        bail!("feature cohorts are empty");
    }
    let (internal, _) = holdout_partition(cfg, &patients)?;
    let internal_data = data.subset_by_patients(&internal);
    let opts = SweepOptions {
        n_experiments: cfg.n_experiments,
        master_seed: cfg.master_seed,
        jobs: cfg.jobs,
    };
    let outcome = run_sweep(&configs, &internal_data, &opts)?;

    fs::create_dir_all(&cfg.out_dir)?;
    write_results_jsonl(&outcome.records, &cfg.out_dir.join("results.jsonl"))?;
    write_summary_csvs(&outcome.summary, &cfg.out_dir)?;
    write_run_manifest(cfg, &configs)?;
    let n_failed = outcome
        .records
        .iter()
        .filter(|r| matches!(r, ExperimentRecord::Failed { .. }))
        .count();
    println!(
        "sweep: {} configs x {} experiments -> {} records ({} failed) under {}",
        configs.len(),
        cfg.n_experiments,
        outcome.records.len(),
        n_failed,
        cfg.out_dir.display()
    );
    Ok(())
}

fn write_results_jsonl(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

pub fn read_results_jsonl(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).with_context(|| format!("parsing record '{l}'")))
        .collect()
}

fn write_summary_csvs(summary: &SweepSummary, out_dir: &Path) -> Result<()> {
    // Per-config table.
    let mut w = csv::Writer::from_path(out_dir.join("summary_configs.csv"))?;
    w.write_record([
        "contrast", "normalization", "model", "selector", "config_index", "roi_kind",
        "mean_auc", "ci_low", "ci_high", "n_ok", "n_failed",
    ])?;
    for cs in &summary.per_config {
        for (kind, m) in [("biopsy", &cs.biopsy), ("nonbiopsy", &cs.nonbiopsy)] {
            w.write_record([
                cs.config.contrast.name().to_string(),
                cs.config.normalization.name(),
                cs.config.model.name().to_string(),
                cs.config.selector.name().to_string(),
                cs.config_index.to_string(),
                kind.to_string(),
                m.mean.to_string(),
                m.ci_low.to_string(),
                m.ci_high.to_string(),
                cs.n_ok.to_string(),
                cs.n_failed.to_string(),
            ])?;
        }
    }
    w.flush()?;

    // Per-setting marginal means (Table 2 layout).
    let mut w = csv::Writer::from_path(out_dir.join("summary_settings.csv"))?;
    w.write_record(["setting", "value", "roi_kind", "mean_auc", "ci_low", "ci_high", "n_configs"])?;
    for m in &summary.marginals {
        for (kind, s) in [("biopsy", &m.biopsy), ("nonbiopsy", &m.nonbiopsy)] {
            w.write_record([
                m.setting.clone(),
                m.value.clone(),
                kind.to_string(),
                s.mean.to_string(),
                s.ci_low.to_string(),
                s.ci_high.to_string(),
                m.n_configs.to_string(),
            ])?;
        }
    }
    w.flush()?;

    // Top-5 configurations per ROI kind (Table 3 layout).
    let mut w = csv::Writer::from_path(out_dir.join("summary_top5.csv"))?;
    w.write_record([
        "roi_kind", "rank", "normalization", "feature_selection", "model", "contrast",
        "mean_auc", "ci_low", "ci_high",
    ])?;
    for (kind, ranked) in [("biopsy", &summary.top_biopsy), ("nonbiopsy", &summary.top_nonbiopsy)] {
        for (i, cs) in ranked.iter().enumerate() {
            let m = if kind == "biopsy" { &cs.biopsy } else { &cs.nonbiopsy };
            w.write_record([
                kind.to_string(),
                (i + 1).to_string(),
                cs.config.normalization.name(),
                cs.config.selector.name().to_string(),
                cs.config.model.name().to_string(),
                cs.config.contrast.name().to_string(),
                m.mean.to_string(),
                m.ci_low.to_string(),
                m.ci_high.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_run_manifest(cfg: &RunConfig, configs: &[Configuration]) -> Result<()> {
    #[derive(Serialize)]
    struct RunManifest {
        master_seed: u64,
        n_experiments: usize,
        config_filter: Option<String>,
        n_configs_selected: usize,
        enumerated_config_count: usize,
        source_reported_config_total: usize,
        config_count_note: String,
        config_list_sha256: String,
        cohort_files: std::collections::BTreeMap<String, String>,
    }
    let list = configs.iter().map(Configuration::label).collect::<Vec<_>>().join("\n");
    let mut cohort_files = std::collections::BTreeMap::new();
    let mut needed: BTreeSet<(ContrastPhase, String)> = BTreeSet::new();
    for c in configs {
        needed.insert((c.contrast, c.normalization.name()));
    }
    for (phase, norm_name) in needed {
        let norm = NormalizationKind::parse(&norm_name)?;
        for kind in [RoiKind::BiopsyBased, RoiKind::NonBiopsy] {
            let name = cohort_csv_name(kind, phase, norm);
            let path = cfg.features_dir.join(&name);
            cohort_files.insert(name, sha256_file(&path)?);
        }
    }
    let manifest = RunManifest {
        master_seed: cfg.master_seed,
        n_experiments: cfg.n_experiments,
        config_filter: cfg.configs.clone(),
        n_configs_selected: configs.len(),
        enumerated_config_count: CONFIG_COUNT,
        source_reported_config_total: REPORTED_CONFIG_TOTAL,
        config_count_note: format!(
            "the four sweep axes multiply to {CONFIG_COUNT} configurations; the source text reports {REPORTED_CONFIG_TOTAL} without naming the extra factor"
        ),
        config_list_sha256: sha256_bytes(list.as_bytes()),
        cohort_files,
    };
    fs::write(
        cfg.out_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_bytes(&fs::read(path).with_context(|| format!("hashing {}", path.display()))?))
}

pub fn cmd_rank(cfg: &RunConfig) -> Result<()> {
    let records = read_results_jsonl(&cfg.out_dir.join("results.jsonl"))?;
    let configs: Vec<Configuration> = {
        let mut seen = BTreeSet::new();
        records
            .iter()
            .filter_map(|r| {
                let c = match r {
                    ExperimentRecord::Ok(res) => res.config,
                    ExperimentRecord::Failed { config, .. } => *config,
                };
                seen.insert(c.canonical_index()).then_some(c)
            })
            .collect()
    };
    let summary = summarize(&configs, &records)?;
    let top_indices = |ranked: &[liverscreen::harness::ConfigSummary]| -> BTreeSet<usize> {
        ranked.iter().map(|c| c.config_index).collect()
    };
    for (name, keep) in [
        ("rank_top5_biopsy.csv", Some(top_indices(&summary.top_biopsy))),
        ("rank_top5_nonbiopsy.csv", Some(top_indices(&summary.top_nonbiopsy))),
        ("rank_all.csv", None),
    ] {
        let subset: Vec<ExperimentRecord> = records
            .iter()
            .filter(|r| keep.as_ref().is_none_or(|set| set.contains(&r.config_index())))
            .cloned()
            .collect();
        let ranked = rank_features(&subset, 5);
        let mut w = csv::Writer::from_path(cfg.out_dir.join(name))?;
        w.write_record(["rank", "feature", "count"])?;
        for (i, (feature, count)) in ranked.iter().take(12).enumerate() {
            w.write_record([(i + 1).to_string(), feature.to_string(), count.to_string()])?;
        }
        w.flush()?;
    }
    println!("rank: wrote feature rankings under {}", cfg.out_dir.display());
    Ok(())
}

pub fn cmd_simple(cfg: &RunConfig) -> Result<()> {
    // The curated simple models use the best-performing settings: NC
    // contrast with Gamma-1.5 normalization.
    let norm = NormalizationKind::Gamma(1.5);
    let biopsy_path = cfg.features_dir.join(cohort_csv_name(RoiKind::BiopsyBased, ContrastPhase::Nc, norm));
    let nonbiopsy_path = cfg.features_dir.join(cohort_csv_name(RoiKind::NonBiopsy, ContrastPhase::Nc, norm));
    require_exists(&biopsy_path)?;
    require_exists(&nonbiopsy_path)?;
    let biopsy = liverscreen::tabular::read_cohort_csv(&biopsy_path)?;
    let nonbiopsy = liverscreen::tabular::read_cohort_csv(&nonbiopsy_path)?;
    let mut patients: Vec<(String, u8)> = Vec::new();
    let mut seen = BTreeSet::new();
    for i in 0..biopsy.n_rows() {
        if seen.insert(biopsy.patient_ids[i].clone()) {
            patients.push((biopsy.patient_ids[i].clone(), biopsy.labels[i]));
        }
    }
    let (internal_ids, external_ids) = holdout_partition(cfg, &patients)?;
    if external_ids.is_empty() {
        bail!("simple models need a nonempty external holdout (holdout_fraction > 0)");
    }
    let internal = biopsy.subset_by_patients(&internal_ids);
    let external_biopsy = biopsy.subset_by_patients(&external_ids);
    let external_nonbiopsy = nonbiopsy.subset_by_patients(&external_ids);

    let sets: [(&str, Vec<FeatureId>); 3] = [
        ("biopsy_feature_set", biopsy_feature_set()),
        ("nonbiopsy_feature_set", nonbiopsy_feature_set()),
        ("intersecting_feature_set", intersecting_feature_set()),
    ];
    fs::create_dir_all(&cfg.out_dir)?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join("simple_models.csv"))?;
    w.write_record(["model", "roi_kind", "metric", "mean", "ci_low", "ci_high", "n"])?;
    for (i, (name, set)) in sets.iter().enumerate() {
        let report: SimpleModelReport = liverscreen::harness::train_simple(
            set,
            &internal,
            &external_biopsy,
            &external_nonbiopsy,
            cfg.n_repeats,
            derive_seed(cfg.master_seed, &[0x73696d706c, i as u64]),
        )?;
        write_triple_rows(&mut w, name, "biopsy", &report.biopsy)?;
        write_triple_rows(&mut w, name, "nonbiopsy", &report.nonbiopsy)?;
    }
    w.flush()?;
    println!("simple: wrote {}", cfg.out_dir.join("simple_models.csv").display());
    Ok(())
}

fn write_triple_rows(
    w: &mut csv::Writer<fs::File>,
    model: &str,
    roi_kind: &str,
    triple: &MetricTriple,
) -> Result<()> {
    for (metric, m) in [
        ("auc", &triple.auc),
        ("sensitivity", &triple.sensitivity),
        ("specificity", &triple.specificity),
    ] {
        write_metric_row(w, model, roi_kind, metric, m)?;
    }
    Ok(())
}

fn write_metric_row(
    w: &mut csv::Writer<fs::File>,
    model: &str,
    roi_kind: &str,
    metric: &str,
    m: &MetricSummary,
) -> Result<()> {
    w.write_record([
        model.to_string(),
        roi_kind.to_string(),
        metric.to_string(),
        m.mean.to_string(),
        m.ci_low.to_string(),
        m.ci_high.to_string(),
        m.n.to_string(),
    ])?;
    Ok(())
}

pub fn cmd_baseline(cfg: &RunConfig) -> Result<()> {
    let labels = read_labels_csv(&cfg.data_dir.join("labels.csv"))?;
    let mut rows = Vec::with_capacity(labels.len());
    for (i, p) in labels.iter().enumerate() {
        let vol_path = volume_path(&cfg.data_dir, &p.patient_id, "nc");
        require_exists(&vol_path)?;
        let volume = clip_hu(&read_volume(&vol_path)?, ContrastPhase::Nc);
        let mask = LiverMask::from_volume(&read_volume(&mask_path(&cfg.data_dir, &p.patient_id))?)?;
        let features = baseline_features(&volume, &mask, cube_seed(cfg.master_seed, i))?;
        rows.push((p.patient_id.clone(), p.label, features));
    }
    let report = baseline_from_features(&rows, cfg.n_repeats, cfg.master_seed)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join("baseline.csv"))?;
    w.write_record(["model", "roi_kind", "metric", "mean", "ci_low", "ci_high", "n"])?;
    write_triple_rows(&mut w, "baseline", "external", &report)?;
    w.flush()?;
    println!("baseline: wrote {}", cfg.out_dir.join("baseline.csv").display());
    Ok(())
}

pub fn cmd_audit(cfg: &RunConfig) -> Result<()> {
    let labels = read_labels_csv(&cfg.data_dir.join("labels.csv"))?;
    let manifest = read_roi_manifest(&cfg.data_dir.join("manifest.csv"))?;
    let mut rows = Vec::new();
    for p in &labels {
        let header = read_volume_header(&volume_path(&cfg.data_dir, &p.patient_id, "nc"))?;
        for roi in manifest.iter().filter(|r| r.patient_id == p.patient_id) {
            rows.push(AuditRow::from_roi(&p.patient_id, p.label, roi.radius, header.spacing));
        }
    }
    if rows.is_empty() {
        bail!("no ROIs to audit");
    }
    let report = confounder_audit(&rows, cfg.n_repeats, cfg.master_seed)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join("audit.csv"))?;
    w.write_record(["model", "roi_kind", "metric", "mean", "ci_low", "ci_high", "n"])?;
    write_triple_rows(&mut w, "mesh_volume", "external", &report.mesh_volume)?;
    write_triple_rows(&mut w, "pixel_spacing", "external", &report.pixel_spacing)?;
    w.flush()?;
    println!("audit: wrote {}", cfg.out_dir.join("audit.csv").display());
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let text = report::render(&cfg.out_dir)?;
    let path = cfg.out_dir.join("tables.md");
    fs::write(&path, text)?;
    println!("report: wrote {}", path.display());
    Ok(())
}

fn require_exists(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!(ValidationError(format!("missing input: {}", path.display())));
    }
    Ok(())
}

/// Marker for input problems that should exit with code 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}
