//! LASSO feature selection: squared-error lasso on {0,1} labels solved by
//! cyclic coordinate descent, with the penalty chosen by 5-fold CV over a
//! 20-point log grid from lambda_max down to lambda_max/1000.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::rng_for;

pub const CD_TOL: f64 = 1e-7;
pub const CD_MAX_SWEEPS: usize = 10_000;
const GRID_POINTS: usize = 20;
const CV_FOLDS: usize = 5;

/// Soft-thresholding operator.
#[inline]
fn soft(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on (1/2n)||y - b - Xw||^2 + lambda ||w||_1
/// with an unpenalized intercept. Warm-startable.
pub fn lasso_coordinate_descent(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    w: &mut Vec<f64>,
    b: &mut f64,
) -> usize {
    let n = x.len();
    let nf = n as f64;
    let p = w.len();
    let z: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf)
        .collect();
    // Residual r = y - b - Xw.
    let mut residual: Vec<f64> = (0..n)
        .map(|i| y[i] - *b - x[i].iter().zip(w.iter()).map(|(xi, wi)| xi * wi).sum::<f64>())
        .collect();
    for sweep in 0..CD_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        // Intercept update.
        let db = residual.iter().sum::<f64>() / nf;
        *b += db;
        for r in residual.iter_mut() {
            *r -= db;
        }
        max_delta = max_delta.max(db.abs());
        for j in 0..p {
            if z[j] == 0.0 {
                continue;
            }
            let wj_old = w[j];
            let rho = x
                .iter()
                .zip(residual.iter())
                .map(|(row, r)| row[j] * (r + row[j] * wj_old))
                .sum::<f64>()
                / nf;
            let wj_new = soft(rho, lambda) / z[j];
            if wj_new != wj_old {
                let delta = wj_new - wj_old;
                for (row, r) in x.iter().zip(residual.iter_mut()) {
                    *r -= row[j] * delta;
                }
                w[j] = wj_new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < CD_TOL {
            return sweep + 1;
        }
    }
    CD_MAX_SWEEPS
}

pub fn lasso_objective(x: &[Vec<f64>], y: &[f64], lambda: f64, w: &[f64], b: f64) -> f64 {
    let n = x.len() as f64;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let pred = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            (yi - pred) * (yi - pred)
        })
        .sum();
    rss / (2.0 * n) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Smallest penalty that zeroes every weight: max_j |<x_j, y - mean(y)>| / n.
pub fn lambda_max(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let p = x.first().map_or(0, Vec::len);
    (0..p)
        .map(|j| {
            x.iter()
                .zip(y)
                .map(|(row, &yi)| row[j] * (yi - ybar))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

/// Result of the CV-driven lasso fit: the chosen penalty and the indices of
/// nonzero weights (empty means the caller should fall back).
pub struct LassoFit {
    pub lambda: f64,
    pub nonzero: Vec<usize>,
    pub weights: Vec<f64>,
}

pub fn fit_lasso_cv(x: &[Vec<f64>], y01: &[u8], seed: u64) -> Result<LassoFit> {
    let n = x.len();
    if n < CV_FOLDS {
        return Err(Error::EmptyInput(format!("lasso CV needs >= {CV_FOLDS} rows")));
    }
    let p = x.first().map_or(0, Vec::len);
    let y: Vec<f64> = y01.iter().map(|&l| f64::from(l)).collect();
    let lmax = lambda_max(x, &y);
    if lmax == 0.0 {
        // y constant or features orthogonal to it: nothing selectable.
        return Ok(LassoFit { lambda: 0.0, nonzero: Vec::new(), weights: vec![0.0; p] });
    }
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lmax * 1000f64.powf(-(i as f64) / (GRID_POINTS as f64 - 1.0)))
        .collect();

    // Seeded fold assignment.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(seed, &[0x6c61_73736f]);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut cv_mse = vec![0.0f64; grid.len()];
    for fold in 0..CV_FOLDS {
        let val_set: Vec<usize> = order
            .iter()
            .copied()
            .skip(fold)
            .step_by(CV_FOLDS)
            .collect();
        let val_mask: Vec<bool> = {
            let mut m = vec![false; n];
            for &i in &val_set {
                m[i] = true;
            }
            m
        };
        let train_x: Vec<Vec<f64>> = (0..n).filter(|&i| !val_mask[i]).map(|i| x[i].clone()).collect();
        let train_y: Vec<f64> = (0..n).filter(|&i| !val_mask[i]).map(|i| y[i]).collect();
        let mut w = vec![0.0; p];
        let mut b = 0.0;
        for (gi, &lambda) in grid.iter().enumerate() {
            lasso_coordinate_descent(&train_x, &train_y, lambda, &mut w, &mut b);
            let mse: f64 = val_set
                .iter()
                .map(|&i| {
                    let pred = b + x[i].iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                    (y[i] - pred) * (y[i] - pred)
                })
                .sum::<f64>()
                / val_set.len() as f64;
            cv_mse[gi] += mse;
        }
    }
    // Ties resolve to the larger penalty (earlier grid entry).
    let mut best = 0usize;
    for gi in 1..grid.len() {
        if cv_mse[gi] < cv_mse[best] {
            best = gi;
        }
    }
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    for &lambda in &grid[..=best] {
        lasso_coordinate_descent(x, &y, lambda, &mut w, &mut b);
    }
    let nonzero: Vec<usize> = (0..p).filter(|&j| w[j] != 0.0).collect();
    Ok(LassoFit { lambda: grid[best], nonzero, weights: w })
}

/// |Pearson correlation| of each column with the labels; the top-5 fallback
/// ranking when the lasso zeroes everything.
pub fn top_by_abs_correlation(x: &[Vec<f64>], y01: &[u8], count: usize) -> Vec<usize> {
    let n = x.len() as f64;
    let p = x.first().map_or(0, Vec::len);
    let ybar = y01.iter().map(|&l| f64::from(l)).sum::<f64>() / n;
    let ysd = (y01.iter().map(|&l| (f64::from(l) - ybar).powi(2)).sum::<f64>() / n).sqrt();
    let mut scored: Vec<(f64, usize)> = (0..p)
        .map(|j| {
            let xbar = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let xsd = (x.iter().map(|r| (r[j] - xbar).powi(2)).sum::<f64>() / n).sqrt();
            if xsd == 0.0 || ysd == 0.0 {
                return (0.0, j);
            }
            let cov = x
                .iter()
                .zip(y01)
                .map(|(r, &l)| (r[j] - xbar) * (f64::from(l) - ybar))
                .sum::<f64>()
                / n;
            ((cov / (xsd * ysd)).abs(), j)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(count).map(|(_, j)| j).collect()
}
