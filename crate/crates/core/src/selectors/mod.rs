//! Feature-selection methods: pass-through, PCA, Boruta, and LASSO.

pub mod boruta;
pub mod lasso;
pub mod pca;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radiomics::FeatureId;
use crate::seeding::derive_seed;

pub use boruta::{binomial_two_sided, boruta_indices, DEFAULT_ALPHA, DEFAULT_MAX_ITER};
pub use lasso::{fit_lasso_cv, lambda_max, lasso_coordinate_descent, top_by_abs_correlation};
pub use pca::{fit_pca, jacobi_eigen};

pub const PCA_VARIANCE_TARGET: f64 = 0.95;

/// Selection method, one sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    None,
    Pca,
    Boruta,
    Lasso,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 4] =
        [SelectorKind::None, SelectorKind::Pca, SelectorKind::Boruta, SelectorKind::Lasso];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::None => "none",
            SelectorKind::Pca => "pca",
            SelectorKind::Boruta => "boruta",
            SelectorKind::Lasso => "lasso",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(SelectorKind::None),
            "pca" => Ok(SelectorKind::Pca),
            "boruta" => Ok(SelectorKind::Boruta),
            "lasso" => Ok(SelectorKind::Lasso),
            other => Err(Error::InvalidParameter(format!("unknown selector '{other}'"))),
        }
    }
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fitted selection: either a retained feature list or a PCA projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "selection")]
pub enum Selection {
    #[serde(rename = "all")]
    All { n_input: usize },
    #[serde(rename = "retained")]
    Retained { n_input: usize, indices: Vec<usize>, ids: Vec<FeatureId> },
    #[serde(rename = "projection")]
    Projection { n_input: usize, mean: Vec<f64>, components: Vec<Vec<f64>> },
}

impl Selection {
    pub fn n_input(&self) -> usize {
        match self {
            Selection::All { n_input }
            | Selection::Retained { n_input, .. }
            | Selection::Projection { n_input, .. } => *n_input,
        }
    }

    pub fn n_output(&self) -> usize {
        match self {
            Selection::All { n_input } => *n_input,
            Selection::Retained { indices, .. } => indices.len(),
            Selection::Projection { components, .. } => components.len(),
        }
    }

    /// Feature names of the retained columns; `None` for PCA projections,
    /// whose outputs are components rather than schema features.
    pub fn retained_ids<'a>(&'a self, schema: &'a [FeatureId]) -> Option<Vec<&'a FeatureId>> {
        match self {
            Selection::All { .. } => Some(schema.iter().collect()),
            Selection::Retained { indices, .. } => {
                Some(indices.iter().map(|&j| &schema[j]).collect())
            }
            Selection::Projection { .. } => None,
        }
    }
}

/// Fit a selector on a training matrix. The schema names the columns of
/// `x`; retained selections record both positions and names.
pub fn fit_selector(
    kind: SelectorKind,
    x: &[Vec<f64>],
    y: &[u8],
    schema: &[FeatureId],
    seed: u64,
) -> Result<Selection> {
    let p = schema.len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::SchemaMismatch("selector input does not match schema".into()));
    }
    match kind {
        SelectorKind::None => Ok(Selection::All { n_input: p }),
        SelectorKind::Boruta => {
            let indices = boruta_indices(x, y, derive_seed(seed, &[1]), DEFAULT_MAX_ITER, DEFAULT_ALPHA)?;
            Ok(Selection::Retained {
                n_input: p,
                ids: indices.iter().map(|&j| schema[j].clone()).collect(),
                indices,
            })
        }
        SelectorKind::Lasso => {
            let fit = fit_lasso_cv(x, y, derive_seed(seed, &[2]))?;
            let indices = if fit.nonzero.is_empty() {
                let mut fallback = top_by_abs_correlation(x, y, 5.min(p));
                fallback.sort_unstable();
                fallback
            } else {
                fit.nonzero
            };
            Ok(Selection::Retained {
                n_input: p,
                ids: indices.iter().map(|&j| schema[j].clone()).collect(),
                indices,
            })
        }
        SelectorKind::Pca => {
            let (mean, components, _) = fit_pca(x, PCA_VARIANCE_TARGET)?;
            Ok(Selection::Projection { n_input: p, mean, components })
        }
    }
}

/// Apply a fitted selection to a matrix with the fit-time schema.
pub fn apply_selection(sel: &Selection, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = sel.n_input();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::SchemaMismatch(format!(
            "selection expects {p} input features"
        )));
    }
    Ok(match sel {
        Selection::All { .. } => x.to_vec(),
        Selection::Retained { indices, .. } => x
            .iter()
            .map(|row| indices.iter().map(|&j| row[j]).collect())
            .collect(),
        Selection::Projection { mean, components, .. } => x
            .iter()
            .map(|row| {
                let centered: Vec<f64> = row.iter().zip(mean).map(|(v, m)| v - m).collect();
                components
                    .iter()
                    .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn schema(p: usize) -> Vec<FeatureId> {
        (0..p).map(|j| FeatureId(format!("f{j}"))).collect()
    }

    #[test]
    fn none_selector_is_identity() {
        let s = schema(3);
        let x = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let sel = fit_selector(SelectorKind::None, &x, &[0, 1], &s, 0).unwrap();
        assert_eq!(apply_selection(&sel, &x).unwrap(), x);
        assert_eq!(sel.retained_ids(&s).unwrap().len(), 3);
    }

    #[test]
    fn retained_columns_stay_in_original_order() {
        let mut rng = crate::seeding::rng_for(201, &[0]);
        let n = 150;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
                row[2] = f64::from(i % 2) + rng.gen_range(-0.05..0.05);
                row[6] = f64::from(i % 2) * 0.8 + rng.gen_range(-0.05..0.05);
                row
            })
            .collect();
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let s = schema(8);
        for kind in [SelectorKind::Boruta, SelectorKind::Lasso] {
            let sel = fit_selector(kind, &x, &y, &s, 5).unwrap();
            if let Selection::Retained { indices, ids, .. } = &sel {
                assert!(indices.windows(2).all(|w| w[0] < w[1]), "{kind:?}: {indices:?}");
                assert!(!indices.is_empty());
                for (&j, id) in indices.iter().zip(ids) {
                    assert_eq!(id.as_str(), format!("f{j}"));
                }
            } else {
                panic!("{kind:?} must return a retained set");
            }
        }
    }

    #[test]
    fn pca_output_has_k_columns_and_matches_fit() {
        let mut rng = crate::seeding::rng_for(202, &[0]);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = rng.gen_range(-1.0..1.0);
                vec![a, 2.0 * a + rng.gen_range(-0.01..0.01), rng.gen_range(-0.1..0.1)]
            })
            .collect();
        let s = schema(3);
        let sel = fit_selector(SelectorKind::Pca, &x, &[0, 1], &s, 0).unwrap();
        let out = apply_selection(&sel, &x).unwrap();
        assert_eq!(out[0].len(), sel.n_output());
        assert!(sel.retained_ids(&s).is_none());
    }

    #[test]
    fn selections_are_deterministic_given_seed() {
        let mut rng = crate::seeding::rng_for(203, &[0]);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[1] > 0.5)).collect();
        let s = schema(5);
        for kind in SelectorKind::ALL {
            let a = fit_selector(kind, &x, &y, &s, 9).unwrap();
            let b = fit_selector(kind, &x, &y, &s, 9).unwrap();
            assert_eq!(a, b, "{kind:?}");
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let s = schema(2);
        let x = vec![vec![1.0, 2.0]];
        let sel = fit_selector(SelectorKind::None, &x, &[1], &s, 0).unwrap();
        assert!(apply_selection(&sel, &[vec![1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn selection_serialization_roundtrip() {
        let s = schema(4);
        let sel = Selection::Retained {
            n_input: 4,
            indices: vec![1, 3],
            ids: vec![s[1].clone(), s[3].clone()],
        };
        let json = serde_json::to_string(&sel).unwrap();
        let back: Selection = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sel);
    }
}
