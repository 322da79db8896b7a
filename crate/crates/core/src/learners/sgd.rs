//! Linear model trained by epoch-shuffled stochastic gradient descent with
//! inverse-scaling step size eta_t = eta0 / (1 + eta0 * alpha * t).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::logreg::sigmoid;
use crate::seeding::rng_for;

const ETA0: f64 = 0.01;
const EPOCHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdLoss {
    Logistic,
    ModifiedHuber,
}

impl SgdLoss {
    pub fn name(self) -> &'static str {
        match self {
            SgdLoss::Logistic => "logistic",
            SgdLoss::ModifiedHuber => "modified_huber",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdModel {
    pub loss: SgdLoss,
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub seed: u64,
}

impl SgdModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.intercept)
    }
}

/// Loss derivative with respect to the linear output s, for margin m = y*s
/// with y in {-1, +1}.
fn dloss_ds(loss: SgdLoss, y_signed: f64, s: f64) -> f64 {
    match loss {
        SgdLoss::Logistic => -y_signed * sigmoid(-y_signed * s),
        SgdLoss::ModifiedHuber => {
            let m = y_signed * s;
            if m >= 1.0 {
                0.0
            } else if m >= -1.0 {
                -2.0 * (1.0 - m) * y_signed
            } else {
                -4.0 * y_signed
            }
        }
    }
}

pub fn train_sgd(x: &[Vec<f64>], y: &[u8], loss: SgdLoss, alpha: f64, seed: u64) -> Result<SgdModel> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::SchemaMismatch("rows must share a nonempty schema".into()));
    }
    let signed: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0f64; p];
    let mut b = 0.0f64;
    let mut rng = rng_for(seed, &[0x736764]);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t = 0u64;
    for _ in 0..EPOCHS {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for &i in &order {
            let eta = ETA0 / (1.0 + ETA0 * alpha * t as f64);
            let s = w.iter().zip(&x[i]).map(|(wj, xj)| wj * xj).sum::<f64>() + b;
            let g = dloss_ds(loss, signed[i], s);
            for (wj, &xj) in w.iter_mut().zip(&x[i]) {
                *wj -= eta * (g * xj + alpha * *wj);
            }
            b -= eta * g;
            t += 1;
        }
    }
    Ok(SgdModel { loss, alpha, weights: w, intercept: b, seed })
}
