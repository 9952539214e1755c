//! Goodness-of-fit and Monte Carlo error summaries.

/// Kolmogorov–Smirnov distance between a sample and a cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Sample mean and its naive standard error.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Mean of a correlated series with a batch-means standard error.
pub fn batch_means(x: &[f64], batches: usize) -> (f64, f64) {
    let batches = batches.max(2);
    let len = x.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|k| x[k * len..(k + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let (_, se) = mean_and_se(&means);
    (x.iter().sum::<f64>() / x.len() as f64, se)
}

/// Central moments `E(X − c)^p` of a sample about a given centre, for `p = 0..=p_max`.
pub fn central_moments_about(x: &[f64], centre: f64, p_max: usize) -> Vec<f64> {
    let n = x.len() as f64;
    let mut acc = vec![0.0; p_max + 1];
    for &v in x {
        let d = v - centre;
        let mut pw = 1.0;
        for a in acc.iter_mut() {
            *a += pw;
            pw *= d;
        }
    }
    acc.into_iter().map(|a| a / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_grid_is_small() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&x, |t| t.clamp(0.0, 1.0)) <= 0.0005 + 1e-12);
    }

    #[test]
    fn ks_two_sample_disjoint() {
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn moments_about_centre() {
        let m = central_moments_about(&[1.0, 3.0], 2.0, 4);
        assert_eq!(m, vec![1.0, 0.0, 1.0, 0.0, 1.0]);
    }
}
