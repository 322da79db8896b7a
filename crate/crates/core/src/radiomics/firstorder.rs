//! First-order intensity statistics.

/// Histogram bin count for the entropy estimate.
const ENTROPY_BINS: usize = 32;

/// Feature names in schema order.
pub const FIRSTORDER_NAMES: [&str; 10] = [
    "Energy",
    "Entropy",
    "Kurtosis",
    "Maximum",
    "Mean",
    "Minimum",
    "Range",
    "RootMeanSquared",
    "Skewness",
    "Variance",
];

/// Compute the first-order features of a sample, in schema order.
/// Returns (value, degenerate) pairs; skewness and kurtosis of a constant
/// sample are 0 with the degenerate flag set.
pub fn firstorder(values: &[f64]) -> Vec<(f64, bool)> {
    let n = values.len() as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    let (skewness, kurtosis, moment_degenerate) = if m2 == 0.0 {
        (0.0, 0.0, true)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2), false)
    };

    let entropy = histogram_entropy(values, min, max);

    vec![
        (sum_sq, false),                   // Energy
        (entropy, false),                  // Entropy
        (kurtosis, moment_degenerate),     // Kurtosis (non-excess)
        (max, false),                      // Maximum
        (mean, false),                     // Mean
        (min, false),                      // Minimum
        (max - min, false),                // Range
        ((sum_sq / n).sqrt(), false),      // RootMeanSquared
        (skewness, moment_degenerate),     // Skewness
        (m2, false),                       // Variance (population)
    ]
}

/// Shannon entropy (bits) over a 32-bin equal-width histogram of the sample.
fn histogram_entropy(values: &[f64], min: f64, max: f64) -> f64 {
    if max == min {
        return 0.0;
    }
    let span = max - min;
    let mut hist = [0usize; ENTROPY_BINS];
    for &v in values {
        let b = (((v - min) / span * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1);
        hist[b] += 1;
    }
    let n = values.len() as f64;
    let mut h = 0.0;
    for &c in &hist {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value_of(values: &[f64], name: &str) -> f64 {
        let idx = FIRSTORDER_NAMES.iter().position(|&n| n == name).unwrap();
        firstorder(values)[idx].0
    }

    #[test]
    fn energy_is_sum_of_squares() {
        assert_eq!(value_of(&[1.0, 2.0, 3.0], "Energy"), 14.0);
    }

    #[test]
    fn kurtosis_of_bernoulli_half() {
        // Central moments of {0,0,1,1}: m2 = 0.25, m4 = 0.0625 -> 0.0625/0.0625 = 1.
        assert!((value_of(&[0.0, 0.0, 1.0, 1.0], "Kurtosis") - 1.0).abs() < 1e-15);
    }

    #[test]
    fn skewness_vanishes_for_symmetric_samples() {
        let sym = [-3.0, -1.0, 1.0, 3.0, 0.0];
        assert!(value_of(&sym, "Skewness").abs() < 1e-12);
        let sym2 = [2.0, 4.0, 6.0, 8.0];
        assert!(value_of(&sym2, "Skewness").abs() < 1e-12);
    }

    #[test]
    fn constant_sample_flags_moments() {
        let feats = firstorder(&[5.0; 8]);
        let k = FIRSTORDER_NAMES.iter().position(|&n| n == "Kurtosis").unwrap();
        let s = FIRSTORDER_NAMES.iter().position(|&n| n == "Skewness").unwrap();
        assert_eq!(feats[k], (0.0, true));
        assert_eq!(feats[s], (0.0, true));
        let e = FIRSTORDER_NAMES.iter().position(|&n| n == "Entropy").unwrap();
        assert_eq!(feats[e], (0.0, false));
    }

    #[test]
    fn order_free_statistics() {
        let a = [4.0, -1.0, 7.5, 2.0, 2.0, 9.0];
        let mut b = a;
        b.reverse();
        for ((va, da), (vb, db)) in firstorder(&a).into_iter().zip(firstorder(&b)) {
            assert_eq!(da, db);
            assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0), "{va} vs {vb}");
        }
    }

    #[test]
    fn moment_oracle_on_random_samples() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(23, &[0]);
        for _ in 0..50 {
            let n = rng.gen_range(3..100);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let nn = n as f64;
            let mean = values.iter().sum::<f64>() / nn;
            let cm = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / nn;
            let feats = firstorder(&values);
            let get = |name: &str| feats[FIRSTORDER_NAMES.iter().position(|&x| x == name).unwrap()].0;
            assert!((get("Variance") - cm(2)).abs() < 1e-10);
            assert!((get("Skewness") - cm(3) / cm(2).powf(1.5)).abs() < 1e-9);
            assert!((get("Kurtosis") - cm(4) / cm(2).powi(2)).abs() < 1e-9);
            assert!((get("Mean") - mean).abs() < 1e-12);
        }
    }
}
