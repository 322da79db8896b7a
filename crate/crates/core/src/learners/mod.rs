//! The four model families and their grid-search hyperparameter spaces.

pub mod forest;
pub mod logreg;
pub mod sgd;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{bootstrap_indices, train_rf, ForestModel, MaxDepth, MaxFeaturesRule};
pub use logreg::{train_logreg, LogRegModel, LogRegSolver};
pub use sgd::{train_sgd, SgdLoss, SgdModel};
pub use svm::{train_svm, SvmKernel, SvmModel};

/// Model family, one sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "logreg")]
    LogisticRegression,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "svm")]
    Svm,
    #[serde(rename = "sgd")]
    LinearSgd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LogisticRegression,
        ModelKind::RandomForest,
        ModelKind::Svm,
        ModelKind::LinearSgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logreg",
            ModelKind::RandomForest => "rf",
            ModelKind::Svm => "svm",
            ModelKind::LinearSgd => "sgd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "logreg" => Ok(ModelKind::LogisticRegression),
            "rf" => Ok(ModelKind::RandomForest),
            "svm" => Ok(ModelKind::Svm),
            "sgd" => Ok(ModelKind::LinearSgd),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One point of a model family's hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum HyperParams {
    #[serde(rename = "logreg")]
    LogReg { solver: LogRegSolver, c: f64 },
    #[serde(rename = "rf")]
    Forest { trees: usize, max_features: MaxFeaturesRule, max_depth: MaxDepth },
    #[serde(rename = "svm")]
    Svm { kernel: SvmKernel, c: f64 },
    #[serde(rename = "sgd")]
    Sgd { alpha: f64, loss: SgdLoss },
}

impl HyperParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            HyperParams::LogReg { .. } => ModelKind::LogisticRegression,
            HyperParams::Forest { .. } => ModelKind::RandomForest,
            HyperParams::Svm { .. } => ModelKind::Svm,
            HyperParams::Sgd { .. } => ModelKind::LinearSgd,
        }
    }
}

/// The supplementary-table grid for a model family, in canonical order
/// (first listed axis outermost). Grid-search ties resolve to the earliest
/// entry.
pub fn hyper_grid(kind: ModelKind) -> Vec<HyperParams> {
    match kind {
        ModelKind::LogisticRegression => {
            let mut out = Vec::new();
            for solver in [LogRegSolver::Lbfgs, LogRegSolver::NewtonCg, LogRegSolver::Sag, LogRegSolver::Saga] {
                for c in [0.5, 1.0, 1.5] {
                    out.push(HyperParams::LogReg { solver, c });
                }
            }
            out
        }
        ModelKind::RandomForest => {
            let mut out = Vec::new();
            for trees in [50usize, 100, 200] {
                for max_features in [MaxFeaturesRule::Auto, MaxFeaturesRule::Sqrt] {
                    for max_depth in [MaxDepth::Unlimited, MaxDepth::Bounded(5), MaxDepth::Bounded(100)] {
                        out.push(HyperParams::Forest { trees, max_features, max_depth });
                    }
                }
            }
            out
        }
        ModelKind::Svm => {
            let mut out = Vec::new();
            for kernel in [SvmKernel::Linear, SvmKernel::Poly3, SvmKernel::Rbf] {
                for c in [0.5, 1.0, 1.5] {
                    out.push(HyperParams::Svm { kernel, c });
                }
            }
            out
        }
        ModelKind::LinearSgd => {
            let mut out = Vec::new();
            for alpha in [1e-4, 1e-5] {
                for loss in [SgdLoss::Logistic, SgdLoss::ModifiedHuber] {
                    out.push(HyperParams::Sgd { alpha, loss });
                }
            }
            out
        }
    }
}

/// A fitted classifier exposing scores and per-feature importances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TrainedModel {
    LogReg(LogRegModel),
    Forest(ForestModel),
    Svm(SvmModel),
    Sgd(SgdModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::LogReg(_) => ModelKind::LogisticRegression,
            TrainedModel::Forest(_) => ModelKind::RandomForest,
            TrainedModel::Svm(_) => ModelKind::Svm,
            TrainedModel::Sgd(_) => ModelKind::LinearSgd,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::LogReg(m) => m.weights.len(),
            TrainedModel::Forest(m) => m.n_features,
            TrainedModel::Svm(m) => m.n_features,
            TrainedModel::Sgd(m) => m.weights.len(),
        }
    }

    /// Nonnegative importance per input feature.
    pub fn importance(&self) -> Vec<f64> {
        match self {
            TrainedModel::LogReg(m) => m.weights.iter().map(|w| w.abs()).collect(),
            TrainedModel::Forest(m) => m.importance.clone(),
            TrainedModel::Svm(m) => m.importance.clone(),
            TrainedModel::Sgd(m) => m.weights.iter().map(|w| w.abs()).collect(),
        }
    }

    /// Decision threshold: 0.5 on probability outputs, 0 on SVM decision
    /// values.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match self {
            TrainedModel::LogReg(m) => m.score_row(row),
            TrainedModel::Forest(m) => m.score_row(row),
            TrainedModel::Svm(m) => m.score_row(row),
            TrainedModel::Sgd(m) => m.score_row(row),
        }
    }
}

/// Fit a model at one grid point.
pub fn train(x: &[Vec<f64>], y: &[u8], params: &HyperParams, seed: u64) -> Result<TrainedModel> {
    Ok(match params {
        HyperParams::LogReg { solver, c } => TrainedModel::LogReg(train_logreg(x, y, *solver, *c, seed)?),
        HyperParams::Forest { trees, max_features, max_depth } => {
            TrainedModel::Forest(train_rf(x, y, *trees, *max_features, *max_depth, seed)?)
        }
        HyperParams::Svm { kernel, c } => TrainedModel::Svm(train_svm(x, y, *kernel, *c, seed)?),
        HyperParams::Sgd { alpha, loss } => TrainedModel::Sgd(train_sgd(x, y, *loss, *alpha, seed)?),
    })
}

/// Score rows against a fitted model; higher means more fibrosis-like.
pub fn predict_score(model: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = model.n_features();
    for row in x {
        if row.len() != p {
            return Err(Error::SchemaMismatch(format!(
                "model expects {p} features, row has {}",
                row.len()
            )));
        }
    }
    Ok(x.iter().map(|r| model.score_row(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_match_supplementary_table() {
        assert_eq!(hyper_grid(ModelKind::LogisticRegression).len(), 12);
        assert_eq!(hyper_grid(ModelKind::RandomForest).len(), 18);
        assert_eq!(hyper_grid(ModelKind::Svm).len(), 9);
        assert_eq!(hyper_grid(ModelKind::LinearSgd).len(), 4);
        // SVM grid excludes the garbled 0.001 row.
        for p in hyper_grid(ModelKind::Svm) {
            if let HyperParams::Svm { c, .. } = p {
                assert!([0.5, 1.0, 1.5].contains(&c));
            }
        }
    }

    #[test]
    fn predict_validates_schema_and_orders_separable_data() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.0]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let m = train(&x, &y, &HyperParams::LogReg { solver: LogRegSolver::Lbfgs, c: 1.0 }, 0).unwrap();
        let scores = predict_score(&m, &x).unwrap();
        let min_pos = scores[10..].iter().cloned().fold(f64::INFINITY, f64::min);
        let max_neg = scores[..10].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min_pos > max_neg);
        assert!(matches!(
            predict_score(&m, &[vec![1.0]]),
            Err(Error::SchemaMismatch(_))
        ));
        // Deterministic re-scoring.
        assert_eq!(scores, predict_score(&m, &x).unwrap());
    }

    #[test]
    fn model_serialization_roundtrip() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let m = train(&x, &y, &HyperParams::Sgd { alpha: 1e-4, loss: SgdLoss::Logistic }, 2).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: TrainedModel = serde_json::from_str(&json).unwrap();
        assert_eq!(predict_score(&m, &x).unwrap(), predict_score(&back, &x).unwrap());
    }
}
