//! L2-regularized logistic regression with four solvers that share one
//! convex objective:
//!
//! f(w, b) = sum_i [ln(1 + e^{s_i}) - y_i s_i] + ||w||^2 / (2C),   s_i = w.x_i + b
//!
//! The intercept is unpenalized. The deterministic solvers (L-BFGS,
//! Newton-CG) stop when the gradient sup-norm drops below 1e-6 or after
//! 1000 outer iterations; SAG/SAGA run seed-shuffled epochs until the
//! objective changes by less than 1e-8 or 500 epochs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_for;

pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_OUTER: usize = 1000;
pub const EPOCH_TOL: f64 = 1e-8;
pub const MAX_EPOCHS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogRegSolver {
    /// Limited-memory quasi-Newton (L-BFGS).
    #[serde(rename = "lbfgs")]
    Lbfgs,
    #[serde(rename = "newton-cg")]
    NewtonCg,
    #[serde(rename = "sag")]
    Sag,
    #[serde(rename = "saga")]
    Saga,
}

impl LogRegSolver {
    pub fn name(self) -> &'static str {
        match self {
            LogRegSolver::Lbfgs => "lbfgs",
            LogRegSolver::NewtonCg => "newton-cg",
            LogRegSolver::Sag => "sag",
            LogRegSolver::Saga => "saga",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegModel {
    pub solver: LogRegSolver,
    pub c: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub seed: u64,
}

impl LogRegModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.intercept)
    }
}

#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^s) computed without overflow.
#[inline]
fn log1p_exp(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Regularized objective at (weights, intercept).
pub fn objective(x: &[Vec<f64>], y: &[u8], c: f64, weights: &[f64], intercept: f64) -> f64 {
    let mut f = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let s = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + intercept;
        f += log1p_exp(s) - f64::from(label) * s;
    }
    f + weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c)
}

/// Gradient of the objective; the last component is the intercept partial.
pub fn gradient(x: &[Vec<f64>], y: &[u8], c: f64, weights: &[f64], intercept: f64) -> Vec<f64> {
    let p = weights.len();
    let mut g = vec![0.0; p + 1];
    for (row, &label) in x.iter().zip(y) {
        let s = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + intercept;
        let residual = sigmoid(s) - f64::from(label);
        for (gj, &v) in g[..p].iter_mut().zip(row) {
            *gj += residual * v;
        }
        g[p] += residual;
    }
    for (gj, &w) in g[..p].iter_mut().zip(weights) {
        *gj += w / c;
    }
    g
}

fn check_two_classes(y: &[u8]) -> Result<()> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Fit with the requested solver. The seed only matters for SAG/SAGA epoch
/// shuffling; deterministic solvers ignore it.
pub fn train_logreg(
    x: &[Vec<f64>],
    y: &[u8],
    solver: LogRegSolver,
    c: f64,
    seed: u64,
) -> Result<LogRegModel> {
    check_two_classes(y)?;
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) || p == 0 {
        return Err(Error::SchemaMismatch("rows must share a nonempty schema".into()));
    }
    let theta = match solver {
        LogRegSolver::Lbfgs => lbfgs(x, y, c, p),
        LogRegSolver::NewtonCg => newton_cg(x, y, c, p),
        LogRegSolver::Sag => sag_like(x, y, c, p, seed, false),
        LogRegSolver::Saga => sag_like(x, y, c, p, seed, true),
    };
    Ok(LogRegModel {
        solver,
        c,
        weights: theta[..p].to_vec(),
        intercept: theta[p],
        seed,
    })
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Backtracking Armijo line search along `dir` from `theta`.
fn armijo_step(
    x: &[Vec<f64>],
    y: &[u8],
    c: f64,
    theta: &[f64],
    dir: &[f64],
    f0: f64,
    g0_dot_d: f64,
) -> (Vec<f64>, f64) {
    let p = theta.len() - 1;
    let mut step = 1.0;
    for _ in 0..60 {
        let cand: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + step * d).collect();
        let f = objective(x, y, c, &cand[..p], cand[p]);
        if f <= f0 + 1e-4 * step * g0_dot_d {
            return (cand, f);
        }
        step *= 0.5;
    }
    (theta.to_vec(), f0)
}

fn lbfgs(x: &[Vec<f64>], y: &[u8], c: f64, p: usize) -> Vec<f64> {
    const MEMORY: usize = 10;
    let dim = p + 1;
    let mut theta = vec![0.0; dim];
    let mut f = objective(x, y, c, &theta[..p], theta[p]);
    let mut g = gradient(x, y, c, &theta[..p], theta[p]);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    for _ in 0..MAX_OUTER {
        if sup_norm(&g) < GRAD_TOL {
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let a = rho * dot(&s_hist[i], &q);
            alphas[i] = a;
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= a * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            for qj in q.iter_mut() {
                *qj *= gamma;
            }
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - beta) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut gd = dot(&g, &dir);
        if gd >= 0.0 {
            // History no longer useful; fall back to steepest descent.
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
            gd = dot(&g, &dir);
        }
        let (theta_new, f_new) = armijo_step(x, y, c, &theta, &dir, f, gd);
        if theta_new == theta {
            break; // line search stalled at the optimum
        }
        let g_new = gradient(x, y, c, &theta_new[..p], theta_new[p]);
        let s_vec: Vec<f64> = theta_new.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y_vec: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&y_vec, &s_vec) > 1e-12 {
            s_hist.push(s_vec);
            y_hist.push(y_vec);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        theta = theta_new;
        f = f_new;
        g = g_new;
    }
    theta
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hessian-vector product: H v = X~^T D X~ v + [v_w / C; 0].
fn hessian_vec(x: &[Vec<f64>], c: f64, sigmas: &[f64], v: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p + 1];
    for (row, &sig) in x.iter().zip(sigmas) {
        let d = sig * (1.0 - sig);
        let xv = row.iter().zip(&v[..p]).map(|(a, b)| a * b).sum::<f64>() + v[p];
        let dv = d * xv;
        for (oj, &rj) in out[..p].iter_mut().zip(row) {
            *oj += dv * rj;
        }
        out[p] += dv;
    }
    for (oj, &vj) in out[..p].iter_mut().zip(&v[..p]) {
        *oj += vj / c;
    }
    out
}

fn newton_cg(x: &[Vec<f64>], y: &[u8], c: f64, p: usize) -> Vec<f64> {
    let dim = p + 1;
    let mut theta = vec![0.0; dim];
    let mut f = objective(x, y, c, &theta[..p], theta[p]);
    for _ in 0..MAX_OUTER {
        let g = gradient(x, y, c, &theta[..p], theta[p]);
        let gnorm = sup_norm(&g);
        if gnorm < GRAD_TOL {
            break;
        }
        let sigmas: Vec<f64> = x
            .iter()
            .map(|row| sigmoid(dot(row, &theta[..p]) + theta[p]))
            .collect();
        // Inexact CG solve of H d = -g.
        let g2 = dot(&g, &g).sqrt();
        let cg_tol = g2 * g2.sqrt().min(0.5);
        let mut d = vec![0.0; dim];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut pdir = r.clone();
        let mut rs_old = dot(&r, &r);
        for _ in 0..(2 * dim) {
            if rs_old.sqrt() <= cg_tol {
                break;
            }
            let hp = hessian_vec(x, c, &sigmas, &pdir, p);
            let curv = dot(&pdir, &hp);
            if curv <= 0.0 {
                break;
            }
            let alpha = rs_old / curv;
            for i in 0..dim {
                d[i] += alpha * pdir[i];
                r[i] -= alpha * hp[i];
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs_old;
            for i in 0..dim {
                pdir[i] = r[i] + beta * pdir[i];
            }
            rs_old = rs_new;
        }
        let mut gd = dot(&g, &d);
        if gd >= 0.0 || d.iter().all(|&v| v == 0.0) {
            d = g.iter().map(|v| -v).collect();
            gd = dot(&g, &d);
        }
        let (theta_new, f_new) = armijo_step(x, y, c, &theta, &d, f, gd);
        if theta_new == theta {
            break;
        }
        theta = theta_new;
        f = f_new;
    }
    theta
}

/// SAG/SAGA on the mean-form objective F = (1/n) sum l_i + (lambda/2)||w||^2
/// with lambda = 1/(nC); the optimum coincides with the sum form.
fn sag_like(x: &[Vec<f64>], y: &[u8], c: f64, p: usize, seed: u64, saga: bool) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    let lambda = 1.0 / (nf * c);
    let dim = p + 1;
    let mut theta = vec![0.0; dim];
    // Lipschitz constant of one sample's loss gradient.
    let l_max = x
        .iter()
        .map(|row| 0.25 * (dot(row, row) + 1.0))
        .fold(0.0f64, f64::max)
        + lambda;
    // SAG's refreshed-average update needs the conservative step; SAGA's
    // unbiased correction tolerates a larger one.
    let eta = if saga { 1.0 / (3.0 * l_max) } else { 0.25 / l_max };

    // Gradient memory: residual scalar per sample (grad_i = res_i * x~_i).
    let mut residual = vec![0.0f64; n];
    let mut avg = vec![0.0f64; dim];
    for (i, (row, &label)) in x.iter().zip(y).enumerate() {
        let res = sigmoid(dot(row, &theta[..p]) + theta[p]) - f64::from(label);
        residual[i] = res;
        for j in 0..p {
            avg[j] += res * row[j];
        }
        avg[p] += res;
    }
    for a in avg.iter_mut() {
        *a /= nf;
    }

    let mut rng = rng_for(seed, &[0x5a67]);
    let mut order: Vec<usize> = (0..n).collect();
    // Stopping is on the sum-form objective, the one the solvers share.
    let mut f_prev = objective(x, y, c, &theta[..p], theta[p]);
    for _ in 0..MAX_EPOCHS {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for &i in &order {
            let row = &x[i];
            let res_new = sigmoid(dot(row, &theta[..p]) + theta[p]) - f64::from(y[i]);
            let res_old = residual[i];
            residual[i] = res_new;
            let delta = res_new - res_old;
            if saga {
                // theta -= eta * (g_new - g_old + avg_old + reg)
                for j in 0..p {
                    let upd = delta * row[j] + avg[j] + lambda * theta[j];
                    theta[j] -= eta * upd;
                    avg[j] += delta * row[j] / nf;
                }
                theta[p] -= eta * (delta + avg[p]);
                avg[p] += delta / nf;
            } else {
                // SAG uses the refreshed average.
                for j in 0..p {
                    avg[j] += delta * row[j] / nf;
                    theta[j] -= eta * (avg[j] + lambda * theta[j]);
                }
                avg[p] += delta / nf;
                theta[p] -= eta * avg[p];
            }
        }
        let f = objective(x, y, c, &theta[..p], theta[p]);
        if (f_prev - f).abs() < EPOCH_TOL {
            break;
        }
        f_prev = f;
    }
    theta
}
