//! Run configuration: a JSON file plus flag and environment overrides.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use liverscreen::harness::{enumerate_configs, Configuration};
use liverscreen::learners::ModelKind;
use liverscreen::normalize::NormalizationKind;
use liverscreen::phantom::{CohortSpec, PhantomSpec};
use liverscreen::selectors::SelectorKind;
use liverscreen::volume::ContrastPhase;

pub const DEFAULT_SEED: u64 = 20230101;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub n_fibrotic: usize,
    pub n_healthy: usize,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub base_hu: f64,
    pub noise_sd: f64,
    pub smoothing_mm: [f64; 2],
    pub speckle_density: f64,
    pub speckle_amplitude: f64,
    pub emit_ce: bool,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        let base = PhantomSpec::default();
        Self {
            n_fibrotic: 40,
            n_healthy: 26,
            dims: base.dims,
            spacing: base.spacing,
            base_hu: base.base_hu,
            noise_sd: base.noise_sd,
            smoothing_mm: base.smoothing_mm,
            speckle_density: base.speckle_density,
            speckle_amplitude: base.speckle_amplitude,
            emit_ce: false,
        }
    }
}

impl PhantomConfig {
    pub fn cohort_spec(&self, master_seed: u64) -> CohortSpec {
        CohortSpec {
            n_fibrotic: self.n_fibrotic,
            n_healthy: self.n_healthy,
            master_seed,
            base: PhantomSpec {
                class_label: 0,
                base_hu: self.base_hu,
                noise_sd: self.noise_sd,
                smoothing_mm: self.smoothing_mm,
                speckle_density: self.speckle_density,
                speckle_amplitude: self.speckle_amplitude,
                dims: self.dims,
                spacing: self.spacing,
                seed: 0,
            },
            emit_ce: self.emit_ce,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub features_dir: PathBuf,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub jobs: usize,
    pub n_experiments: usize,
    pub n_repeats: usize,
    /// Fraction of patients held out as the external cohort before the
    /// sweep; 0 keeps everything internal.
    pub holdout_fraction: f64,
    /// Axis filter expression, e.g. "contrast=NC,model=logreg|sgd".
    pub configs: Option<String>,
    pub resample_spacing: f64,
    /// Normalizations to extract; defaults to all six.
    pub normalizations: Option<Vec<String>>,
    pub phantom: PhantomConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("out/cohort"),
            features_dir: PathBuf::from("out/features"),
            out_dir: PathBuf::from("out/results"),
            master_seed: DEFAULT_SEED,
            jobs: 0,
            n_experiments: 100,
            n_repeats: 100,
            holdout_fraction: 0.2,
            configs: None,
            resample_spacing: liverscreen::pipeline::DEFAULT_RESAMPLE_SPACING,
            normalizations: None,
            phantom: PhantomConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn normalization_kinds(&self) -> Result<Vec<NormalizationKind>> {
        match &self.normalizations {
            None => Ok(liverscreen::normalize::SWEEP_NORMALIZATIONS.to_vec()),
            Some(names) => names
                .iter()
                .map(|n| NormalizationKind::parse(n).map_err(anyhow::Error::from))
                .collect(),
        }
    }

    /// The configurations selected by the axis filter, in canonical order.
    pub fn selected_configs(&self) -> Result<Vec<Configuration>> {
        match &self.configs {
            None => Ok(enumerate_configs()),
            Some(expr) => filter_configs(expr),
        }
    }
}

/// Parse an axis filter like "contrast=NC,model=logreg|sgd" and return the
/// matching configurations in canonical order.
pub fn filter_configs(expr: &str) -> Result<Vec<Configuration>> {
    let mut contrasts: Option<BTreeSet<ContrastPhase>> = None;
    let mut norms: Option<BTreeSet<String>> = None;
    let mut models: Option<BTreeSet<ModelKind>> = None;
    let mut selectors: Option<BTreeSet<SelectorKind>> = None;
    for clause in expr.split(',') {
        let clause = clause.trim();
        if clause.is_empty() {
            continue;
        }
        let Some((axis, values)) = clause.split_once('=') else {
            bail!("config filter clause '{clause}' is not axis=value");
        };
        let values: Vec<&str> = values.split('|').map(str::trim).collect();
        match axis.trim() {
            "contrast" => {
                let set = values
                    .iter()
                    .map(|v| ContrastPhase::parse(v).map_err(anyhow::Error::from))
                    .collect::<Result<_>>()?;
                contrasts = Some(set);
            }
            "normalization" => {
                let set = values
                    .iter()
                    .map(|v| NormalizationKind::parse(v).map(|k| k.name()).map_err(anyhow::Error::from))
                    .collect::<Result<_>>()?;
                norms = Some(set);
            }
            "model" => {
                let set = values
                    .iter()
                    .map(|v| ModelKind::parse(v).map_err(anyhow::Error::from))
                    .collect::<Result<_>>()?;
                models = Some(set);
            }
            "selector" => {
                let set = values
                    .iter()
                    .map(|v| SelectorKind::parse(v).map_err(anyhow::Error::from))
                    .collect::<Result<_>>()?;
                selectors = Some(set);
            }
            other => bail!("unknown config axis '{other}' (use contrast/normalization/model/selector)"),
        }
    }
    let selected: Vec<Configuration> = enumerate_configs()
        .into_iter()
        .filter(|c| {
            contrasts.as_ref().is_none_or(|s| s.contains(&c.contrast))
                && norms.as_ref().is_none_or(|s| s.contains(&c.normalization.name()))
                && models.as_ref().is_none_or(|s| s.contains(&c.model))
                && selectors.as_ref().is_none_or(|s| s.contains(&c.selector))
        })
        .collect();
    if selected.is_empty() {
        bail!("config filter '{expr}' matches no configurations");
    }
    Ok(selected)
}
