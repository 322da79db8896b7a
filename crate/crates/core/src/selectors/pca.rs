//! Principal component analysis with a cyclic Jacobi eigensolver.

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors) sorted by descending eigenvalue;
/// eigenvectors are rows.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let off = |m: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                s += m[i][j] * m[i][j];
            }
        }
        s
    };
    let scale: f64 = (0..p).map(|i| a[i][i].abs()).fold(1e-300, f64::max);
    for _sweep in 0..100 {
        if off(&a).sqrt() <= 1e-14 * scale * p as f64 {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a[i][j];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[j][j] - a[i][i]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aik = a[i][k];
                    let ajk = a[j][k];
                    a[i][k] = c * aik - s * ajk;
                    a[j][k] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let aki = a[k][i];
                    let akj = a[k][j];
                    a[k][i] = c * aki - s * akj;
                    a[k][j] = s * aki + c * akj;
                }
                for k in 0..p {
                    let vki = v[k][i];
                    let vkj = v[k][j];
                    v[k][i] = c * vki - s * vkj;
                    v[k][j] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| (0..p).map(|k| v[k][i]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// Column-centered PCA; keeps the smallest k whose explained-variance ratio
/// reaches the target. Returns (mean, components as rows, eigenvalues).
pub fn fit_pca(x: &[Vec<f64>], variance_target: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    if x.len() < 2 {
        return Err(Error::EmptyInput("pca needs >= 2 rows".into()));
    }
    let n = x.len() as f64;
    let p = x[0].len();
    let mut mean = vec![0.0; p];
    for row in x {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    // Population covariance.
    let mut cov = vec![vec![0.0; p]; p];
    for row in x {
        for i in 0..p {
            let di = row[i] - mean[i];
            for j in i..p {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }
    let (eigenvalues, eigenvectors) = jacobi_eigen(cov);
    let total: f64 = eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let k = if total <= 0.0 {
        1
    } else {
        let mut acc = 0.0;
        let mut k = eigenvalues.len();
        for (i, &l) in eigenvalues.iter().enumerate() {
            acc += l.max(0.0);
            if acc / total >= variance_target {
                k = i + 1;
                break;
            }
        }
        k
    };
    let components = eigenvectors.into_iter().take(k).collect();
    Ok((mean, components, eigenvalues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rank_one_data_keeps_one_component() {
        let mut rng = crate::seeding::rng_for(81, &[0]);
        let dir = [1.0, -2.0, 0.5];
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let t: f64 = rng.gen_range(-3.0..3.0);
                dir.iter().map(|d| d * t).collect()
            })
            .collect();
        let (_, components, _) = fit_pca(&x, 0.95).unwrap();
        assert_eq!(components.len(), 1);
    }

    #[test]
    fn isotropic_gaussian_needs_all_three() {
        let mut rng = crate::seeding::rng_for(82, &[0]);
        let x: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let (_, components, eigenvalues) = fit_pca(&x, 0.95).unwrap();
        assert_eq!(components.len(), 3);
        // Eigenvalue oracle: sample covariance of an isotropic Gaussian has
        // near-equal eigenvalues, so two components explain < 95%.
        let total: f64 = eigenvalues.iter().sum();
        assert!((eigenvalues[0] + eigenvalues[1]) / total < 0.95);
    }

    #[test]
    fn components_are_orthonormal() {
        let mut rng = crate::seeding::rng_for(83, &[0]);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let (_, components, _) = fit_pca(&x, 0.999999).unwrap();
        for (i, ci) in components.iter().enumerate() {
            for (j, cj) in components.iter().enumerate() {
                let d: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                let expect = f64::from(u8::from(i == j));
                assert!((d - expect).abs() < 1e-9, "<c{i}, c{j}> = {d}");
            }
        }
    }

    #[test]
    fn reconstruction_error_equals_discarded_eigenvalue_sum() {
        let mut rng = crate::seeding::rng_for(84, &[0]);
        let n = 200;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a: f64 = rng.gen_range(-2.0..2.0);
                let b: f64 = rng.gen_range(-0.5..0.5);
                let c: f64 = rng.gen_range(-0.1..0.1);
                vec![a + 0.2 * b, b - c, c + 0.1 * a, a - b + c]
            })
            .collect();
        let (mean, components, eigenvalues) = fit_pca(&x, 0.9).unwrap();
        let k = components.len();
        assert!(k < 4);
        // Mean squared reconstruction error over rows.
        let mut err = 0.0;
        for row in &x {
            let centered: Vec<f64> = row.iter().zip(&mean).map(|(v, m)| v - m).collect();
            let coords: Vec<f64> = components
                .iter()
                .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let mut recon = vec![0.0; row.len()];
            for (t, c) in coords.iter().zip(&components) {
                for (r, &cv) in recon.iter_mut().zip(c) {
                    *r += t * cv;
                }
            }
            err += centered
                .iter()
                .zip(&recon)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        err /= n as f64;
        let discarded: f64 = eigenvalues[k..].iter().sum();
        assert!(
            (err - discarded).abs() <= 1e-9 * discarded.max(1e-12),
            "{err} vs {discarded}"
        );
    }

    #[test]
    fn jacobi_matches_known_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let (vals, vecs) = jacobi_eigen(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let v0 = &vecs[0];
        assert!((v0[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }
}
