//! Boruta all-relevant feature selection.
//!
//! Each iteration appends a shadow copy of every column with rows
//! independently permuted, fits a 100-tree random forest on [real | shadow],
//! and scores a hit for every real feature whose importance beats the best
//! shadow. After all iterations a feature is confirmed when its hit count is
//! significantly above Binomial(n_iter, 1/2) under a two-sided test with
//! Bonferroni correction across features; rejected and tentative features
//! are dropped. If nothing is confirmed the top-5 features by mean
//! importance are kept so a sweep configuration never comes back empty.

use rand::Rng;

use crate::error::Result;
use crate::learners::forest::{train_rf, MaxDepth, MaxFeaturesRule};
use crate::seeding::rng_for;

const SHADOW_TAG: u64 = 0x626f72; // "bor"
const FOREST_TREES: usize = 100;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_ALPHA: f64 = 0.05;
const FALLBACK_COUNT: usize = 5;

/// Indices of the selected features, in schema order.
pub fn boruta_indices(
    x: &[Vec<f64>],
    y: &[u8],
    seed: u64,
    max_iter: usize,
    alpha: f64,
) -> Result<Vec<usize>> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    let mut hits = vec![0usize; p];
    let mut importance_sum = vec![0.0f64; p];
    for iteration in 0..max_iter {
        let mut rng = rng_for(seed, &[SHADOW_TAG, iteration as u64]);
        // Augment with per-column independently permuted shadows.
        let mut augmented: Vec<Vec<f64>> = x.iter().map(|r| {
            let mut row = r.clone();
            row.extend(std::iter::repeat(0.0).take(p));
            row
        }).collect();
        for j in 0..p {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let k = rng.gen_range(0..=i);
                perm.swap(i, k);
            }
            for i in 0..n {
                augmented[i][p + j] = x[perm[i]][j];
            }
        }
        let forest = train_rf(
            &augmented,
            y,
            FOREST_TREES,
            MaxFeaturesRule::Sqrt,
            MaxDepth::Unlimited,
            crate::seeding::derive_seed(seed, &[SHADOW_TAG, iteration as u64, 1]),
        )?;
        let imp = &forest.importance;
        let max_shadow = imp[p..].iter().cloned().fold(0.0f64, f64::max);
        for j in 0..p {
            importance_sum[j] += imp[j];
            if imp[j] > max_shadow {
                hits[j] += 1;
            }
        }
    }
    let bonferroni = alpha / p as f64;
    let mut confirmed: Vec<usize> = (0..p)
        .filter(|&j| {
            hits[j] * 2 > max_iter && binomial_two_sided(max_iter, hits[j]) < bonferroni
        })
        .collect();
    if confirmed.is_empty() {
        let mut scored: Vec<(f64, usize)> =
            importance_sum.iter().enumerate().map(|(j, &s)| (s, j)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        confirmed = scored.into_iter().take(FALLBACK_COUNT.min(p)).map(|(_, j)| j).collect();
        confirmed.sort_unstable();
    }
    Ok(confirmed)
}

/// Two-sided p-value for observing `hits` successes out of `n` fair coin
/// flips: 2 * min(P(X >= hits), P(X <= hits)), capped at 1.
pub fn binomial_two_sided(n: usize, hits: usize) -> f64 {
    let p_hi = binomial_tail_ge(n, hits);
    let p_lo = 1.0 - binomial_tail_ge(n, hits + 1);
    (2.0 * p_hi.min(p_lo)).min(1.0)
}

/// P(X >= k) for X ~ Binomial(n, 1/2), exact summation in f64.
fn binomial_tail_ge(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // term_i = C(n, i) / 2^n, built up iteratively from i = 0.
    let mut term = 0.5f64.powi(n as i32);
    let mut acc = 0.0;
    for i in 0..=n {
        if i >= k {
            acc += term;
        }
        if i < n {
            term *= (n - i) as f64 / (i + 1) as f64;
        }
    }
    acc.min(1.0)
}
