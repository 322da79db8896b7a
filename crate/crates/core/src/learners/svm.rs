//! Soft-margin SVM trained by an SMO-style pairwise optimizer.
//!
//! Scores are raw decision values (rank-valid for AUC, thresholded at 0).
//! Importance is |w| for the linear kernel and seed-deterministic
//! permutation importance (mean training-AUC drop over 5 shuffles) for the
//! nonlinear kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::seeding::rng_for;

pub const KKT_TOL: f64 = 1e-3;
const MAX_SWEEPS: usize = 2000;
const PERMUTATION_SHUFFLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    /// (x.z / p + 1)^3
    Poly3,
    /// exp(-||x-z||^2 / (p * var))
    Rbf,
}

impl SvmKernel {
    pub fn name(self) -> &'static str {
        match self {
            SvmKernel::Linear => "linear",
            SvmKernel::Poly3 => "poly3",
            SvmKernel::Rbf => "rbf",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: SvmKernel,
    pub c: f64,
    /// Support rows (alpha > 0) with their signed labels and multipliers.
    pub support: Vec<Vec<f64>>,
    pub support_sign: Vec<f64>,
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Kernel scale: 1/p for poly, 1/(p*var) for rbf.
    pub gamma: f64,
    pub n_features: usize,
    pub importance: Vec<f64>,
    pub seed: u64,
}

impl SvmModel {
    fn kernel_eval(&self, a: &[f64], b: &[f64]) -> f64 {
        kernel_eval(self.kernel, self.gamma, a, b)
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut s = self.bias;
        for ((sv, &sign), &al) in self.support.iter().zip(&self.support_sign).zip(&self.alpha) {
            s += al * sign * self.kernel_eval(sv, row);
        }
        s
    }
}

fn kernel_eval(kernel: SvmKernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        SvmKernel::Linear => dot(a, b),
        SvmKernel::Poly3 => {
            let d = gamma * dot(a, b) + 1.0;
            d * d * d
        }
        SvmKernel::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
            (-gamma * d2).exp()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_svm(x: &[Vec<f64>], y: &[u8], kernel: SvmKernel, c: f64, seed: u64) -> Result<SvmModel> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::SchemaMismatch("rows must share a nonempty schema".into()));
    }
    let gamma = match kernel {
        SvmKernel::Linear => 0.0,
        SvmKernel::Poly3 => 1.0 / p as f64,
        SvmKernel::Rbf => {
            let total = n * p;
            let mean = x.iter().flat_map(|r| r.iter()).sum::<f64>() / total as f64;
            let var = x
                .iter()
                .flat_map(|r| r.iter())
                .map(|&v| (v - mean) * (v - mean))
                .sum::<f64>()
                / total as f64;
            if var > 0.0 {
                1.0 / (p as f64 * var)
            } else {
                1.0 / p as f64
            }
        }
    };
    let sign: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(kernel, gamma, &x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }

    let mut alpha = vec![0.0f64; n];
    let mut bias = 0.0f64;
    // Error cache: decision(i) - sign(i).
    let mut err: Vec<f64> = (0..n).map(|i| -sign[i]).collect();
    let mut rng = rng_for(seed, &[0x73766d]);

    let mut examine_all = true;
    for _ in 0..MAX_SWEEPS {
        let mut changed = 0usize;
        for i in 0..n {
            if !examine_all && !(alpha[i] > 0.0 && alpha[i] < c) {
                continue;
            }
            let r = err[i] * sign[i];
            let violates = (r < -KKT_TOL && alpha[i] < c) || (r > KKT_TOL && alpha[i] > 0.0);
            if !violates {
                continue;
            }
            // Second-choice heuristic: maximize |E_i - E_j| over non-bound
            // multipliers, then fall back to a seeded random sweep.
            let mut j_best: Option<(f64, usize)> = None;
            for j in 0..n {
                if j == i || !(alpha[j] > 0.0 && alpha[j] < c) {
                    continue;
                }
                let gap = (err[i] - err[j]).abs();
                let better = match j_best {
                    None => true,
                    Some((g, jb)) => gap > g || (gap == g && j < jb),
                };
                if better {
                    j_best = Some((gap, j));
                }
            }
            let mut stepped = false;
            if let Some((_, j)) = j_best {
                stepped = take_step(i, j, c, &k, &sign, &mut alpha, &mut bias, &mut err, n);
            }
            if !stepped {
                let start = rng.gen_range(0..n);
                for off in 0..n {
                    let j = (start + off) % n;
                    if j == i {
                        continue;
                    }
                    if take_step(i, j, c, &k, &sign, &mut alpha, &mut bias, &mut err, n) {
                        stepped = true;
                        break;
                    }
                }
            }
            if stepped {
                changed += 1;
            }
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            // One last full pass to confirm nothing violates KKT.
            examine_all = true;
            let any_violation = (0..n).any(|i| {
                let r = err[i] * sign[i];
                (r < -KKT_TOL && alpha[i] < c) || (r > KKT_TOL && alpha[i] > 0.0)
            });
            if !any_violation {
                break;
            }
        }
    }

    // Keep only support vectors.
    let mut support = Vec::new();
    let mut support_sign = Vec::new();
    let mut sv_alpha = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support.push(x[i].clone());
            support_sign.push(sign[i]);
            sv_alpha.push(alpha[i]);
        }
    }
    let mut model = SvmModel {
        kernel,
        c,
        support,
        support_sign,
        alpha: sv_alpha,
        bias,
        gamma,
        n_features: p,
        importance: Vec::new(),
        seed,
    };
    model.importance = match kernel {
        SvmKernel::Linear => {
            let mut w = vec![0.0; p];
            for ((sv, &sg), &al) in model.support.iter().zip(&model.support_sign).zip(&model.alpha) {
                for (wj, &v) in w.iter_mut().zip(sv) {
                    *wj += al * sg * v;
                }
            }
            w.into_iter().map(f64::abs).collect()
        }
        _ => permutation_importance(&model, x, y, seed),
    };
    Ok(model)
}

/// SMO pair update. Returns whether the pair moved.
#[allow(clippy::too_many_arguments)]
fn take_step(
    i: usize,
    j: usize,
    c: f64,
    k: &[f64],
    sign: &[f64],
    alpha: &mut [f64],
    bias: &mut f64,
    err: &mut [f64],
    n: usize,
) -> bool {
    if i == j {
        return false;
    }
    let (ai_old, aj_old) = (alpha[i], alpha[j]);
    let (si, sj) = (sign[i], sign[j]);
    let (lo, hi) = if si != sj {
        ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
    } else {
        ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
    };
    if lo >= hi {
        return false;
    }
    let kii = k[i * n + i];
    let kjj = k[j * n + j];
    let kij = k[i * n + j];
    let eta = kii + kjj - 2.0 * kij;
    if eta <= 0.0 {
        return false;
    }
    let mut aj_new = aj_old + sj * (err[i] - err[j]) / eta;
    aj_new = aj_new.clamp(lo, hi);
    if (aj_new - aj_old).abs() < 1e-12 * (aj_new + aj_old + 1e-12) {
        return false;
    }
    let ai_new = ai_old + si * sj * (aj_old - aj_new);
    let b1 = *bias - err[i] - si * (ai_new - ai_old) * kii - sj * (aj_new - aj_old) * kij;
    let b2 = *bias - err[j] - si * (ai_new - ai_old) * kij - sj * (aj_new - aj_old) * kjj;
    let b_new = if ai_new > 0.0 && ai_new < c {
        b1
    } else if aj_new > 0.0 && aj_new < c {
        b2
    } else {
        0.5 * (b1 + b2)
    };
    let db = b_new - *bias;
    for t in 0..n {
        err[t] += si * (ai_new - ai_old) * k[i * n + t] + sj * (aj_new - aj_old) * k[j * n + t] + db;
    }
    alpha[i] = ai_new;
    alpha[j] = aj_new;
    *bias = b_new;
    true
}

/// Mean training-AUC drop over seeded per-feature shuffles, clamped at 0.
fn permutation_importance(model: &SvmModel, x: &[Vec<f64>], y: &[u8], seed: u64) -> Vec<f64> {
    let p = model.n_features;
    let base_scores: Vec<f64> = x.iter().map(|r| model.score_row(r)).collect();
    let base_auc = auc(&base_scores, y).unwrap_or(0.5);
    let n = x.len();
    let mut out = Vec::with_capacity(p);
    for f in 0..p {
        let mut drop_sum = 0.0;
        for s in 0..PERMUTATION_SHUFFLES {
            let mut rng = rng_for(seed, &[0x7065726d, f as u64, s as u64]);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let scores: Vec<f64> = (0..n)
                .map(|i| {
                    let mut row = x[i].clone();
                    row[f] = x[perm[i]][f];
                    model.score_row(&row)
                })
                .collect();
            drop_sum += base_auc - auc(&scores, y).unwrap_or(0.5);
        }
        out.push((drop_sum / PERMUTATION_SHUFFLES as f64).max(0.0));
    }
    out
}

/// Dual feasibility and complementary slackness diagnostics for tests.
pub fn kkt_report(model: &SvmModel, x: &[Vec<f64>], y: &[u8]) -> (bool, f64) {
    let mut in_box = true;
    let mut worst = 0.0f64;
    let mut sv = 0usize;
    for (row, &label) in x.iter().zip(y) {
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let margin = sign * model.score_row(row);
        // Identify this row's alpha by matching support rows.
        let alpha = model
            .support
            .iter()
            .zip(&model.alpha)
            .find(|(s, _)| s.as_slice() == row.as_slice())
            .map(|(_, &a)| a)
            .unwrap_or(0.0);
        if alpha > 0.0 {
            sv += 1;
        }
        if !(0.0..=model.c + 1e-12).contains(&alpha) {
            in_box = false;
        }
        if alpha <= 0.0 {
            worst = worst.max(1.0 - margin); // must have margin >= 1
        } else if alpha >= model.c {
            worst = worst.max(margin - 1.0); // must have margin <= 1
        } else {
            worst = worst.max((margin - 1.0).abs());
        }
    }
    let _ = sv;
    (in_box, worst)
}
