//! Gamma, Beta and Dirichlet variates.
//!
//! Gamma draws use Marsaglia–Tsang squeeze-rejection for shape ≥ 1. For
//! shape < 1 the boost identity `Gamma(a) = Gamma(a + 1) · U^(1/a)` is used,
//! carried out on the log scale: shapes like `b/m = 5e-4` produce variates
//! far below the smallest positive double, and Dirichlet weights are formed
//! by a log-sum-exp normalization of these log-variates.

use super::RngState;
use crate::error::{domain, Result};
use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub(crate) fn std_normal(rng: &mut RngState) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Marsaglia–Tsang for shape ≥ 1.
fn gamma_mt(shape: f64, rng: &mut RngState) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = std_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.open_uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

#[inline]
pub(crate) fn log_gamma_unchecked(shape: f64, rng: &mut RngState) -> f64 {
    if shape >= 1.0 {
        gamma_mt(shape, rng).ln()
    } else {
        let g = gamma_mt(shape + 1.0, rng);
        g.ln() + rng.open_uniform().ln() / shape
    }
}

/// ln of a Gamma(shape, 1) draw; finite even when the draw itself underflows.
pub fn sample_log_gamma(shape: f64, rng: &mut RngState) -> Result<f64> {
    check_shape(shape)?;
    Ok(log_gamma_unchecked(shape, rng))
}

/// One Gamma(shape, 1) draw (unit rate).
pub fn sample_gamma(shape: f64, rng: &mut RngState) -> Result<f64> {
    check_shape(shape)?;
    if shape >= 1.0 {
        Ok(gamma_mt(shape, rng))
    } else {
        Ok(log_gamma_unchecked(shape, rng).exp())
    }
}

fn check_shape(shape: f64) -> Result<()> {
    if !(shape > 0.0) || !shape.is_finite() {
        return domain(format!("gamma shape must be finite and positive, got {shape}"));
    }
    Ok(())
}

/// `(B, 1 - B)` for `B ~ Beta(a, b)`, each side computed without cancellation.
pub(crate) fn beta_pair_unchecked(a: f64, b: f64, rng: &mut RngState) -> (f64, f64) {
    if a == 1.0 {
        let t = rng.open_uniform().ln() / b;
        (-t.exp_m1(), t.exp())
    } else if b == 1.0 {
        let t = rng.open_uniform().ln() / a;
        (t.exp(), -t.exp_m1())
    } else {
        let lx = log_gamma_unchecked(a, rng);
        let ly = log_gamma_unchecked(b, rng);
        let d = ly - lx;
        (1.0 / (1.0 + d.exp()), 1.0 / (1.0 + (-d).exp()))
    }
}

/// One Beta(a, b) draw.
pub fn sample_beta(a: f64, b: f64, rng: &mut RngState) -> Result<f64> {
    check_shape(a)?;
    check_shape(b)?;
    Ok(beta_pair_unchecked(a, b, rng).0)
}

/// Dirichlet(alphas) as normalized independent Gamma(alpha_j, 1) draws.
pub fn sample_dirichlet(alphas: &[f64], rng: &mut RngState) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return domain("Dirichlet needs at least one parameter");
    }
    for &a in alphas {
        check_shape(a)?;
    }
    let mut w: Vec<f64> = alphas
        .iter()
        .map(|&a| log_gamma_unchecked(a, rng))
        .collect();
    normalize_log_weights(&mut w);
    Ok(w)
}

/// Symmetric Dirichlet(alpha, ..., alpha) of dimension `k`.
pub fn sample_symmetric_dirichlet(alpha: f64, k: usize, rng: &mut RngState) -> Result<Vec<f64>> {
    if k == 0 {
        return domain("Dirichlet needs at least one parameter");
    }
    check_shape(alpha)?;
    let mut w: Vec<f64> = (0..k).map(|_| log_gamma_unchecked(alpha, rng)).collect();
    normalize_log_weights(&mut w);
    Ok(w)
}

/// In-place exp + normalize of log-weights.
pub(crate) fn normalize_log_weights(w: &mut [f64]) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in w.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in w.iter_mut() {
        *x /= sum;
    }
}

/// Poisson(mean) count.
pub fn sample_poisson(mean: f64, rng: &mut RngState) -> Result<u64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return domain(format!("Poisson mean must be finite and nonnegative, got {mean}"));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let d = rand_distr::Poisson::new(mean).map_err(|e| crate::Error::Domain(e.to_string()))?;
    Ok(rng.sample::<f64, _>(d) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::reg_inc_beta;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn gamma_exponential_case() {
        let mut rng = RngState::new(2024);
        let x: Vec<f64> = (0..100_000)
            .map(|_| sample_gamma(1.0, &mut rng).unwrap())
            .collect();
        let (m, v) = mean_var(&x);
        let se = (v / x.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn gamma_mean_and_variance() {
        for (i, &shape) in [0.01, 0.5, 3.0].iter().enumerate() {
            let mut rng = RngState::new(100 + i as u64);
            let x: Vec<f64> = (0..100_000)
                .map(|_| sample_gamma(shape, &mut rng).unwrap())
                .collect();
            let n = x.len() as f64;
            let (m, v) = mean_var(&x);
            // Gamma(a): var = a, fourth central moment = 3a^2 + 6a.
            let se_m = (shape / n).sqrt();
            let mu4 = 3.0 * shape * shape + 6.0 * shape;
            let se_v = ((mu4 - shape * shape) / n).sqrt();
            assert!((m - shape).abs() < 3.0 * se_m, "shape {shape}: mean {m}");
            assert!((v - shape).abs() < 3.0 * se_v, "shape {shape}: var {v}");
        }
    }

    #[test]
    fn gamma_is_deterministic() {
        let a = sample_gamma(0.3, &mut RngState::new(9)).unwrap();
        let b = sample_gamma(0.3, &mut RngState::new(9)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gamma_rejects_bad_shape() {
        let mut rng = RngState::new(0);
        assert!(sample_gamma(0.0, &mut rng).is_err());
        assert!(sample_gamma(-1.0, &mut rng).is_err());
        assert!(sample_log_gamma(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn log_gamma_finite_for_tiny_shape() {
        let mut rng = RngState::new(3);
        for _ in 0..10_000 {
            let l = sample_log_gamma(1e-4, &mut rng).unwrap();
            assert!(l.is_finite());
        }
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut rng = RngState::new(4);
        for alphas in [vec![1.0], vec![0.3, 2.0, 5.0], vec![1e-4; 500]] {
            let w = sample_dirichlet(&alphas, &mut rng).unwrap();
            assert_eq!(w.len(), alphas.len());
            assert!(w.iter().all(|&x| x >= 0.0 && x.is_finite()));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(sample_dirichlet(&[], &mut rng).is_err());
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn dirichlet_exchangeable_means() {
        let k = 4;
        let mut rng = RngState::new(5);
        let mut draws = vec![Vec::new(); k];
        for _ in 0..10_000 {
            let w = sample_dirichlet(&[0.7; 4], &mut rng).unwrap();
            for (j, x) in w.into_iter().enumerate() {
                draws[j].push(x);
            }
        }
        for d in &draws {
            let (m, v) = mean_var(d);
            let se = (v / d.len() as f64).sqrt();
            assert!((m - 0.25).abs() < 3.0 * se);
        }
    }

    #[test]
    fn dirichlet_aggregation_is_beta() {
        // Sum of j of m coordinates of Dir(b/m, ..., b/m) ~ Beta(jb/m, (m-j)b/m).
        let (m, j, b) = (40usize, 13usize, 2.0);
        let mut rng = RngState::new(6);
        let mut s: Vec<f64> = (0..5000)
            .map(|_| {
                let w = sample_symmetric_dirichlet(b / m as f64, m, &mut rng).unwrap();
                w[..j].iter().sum()
            })
            .collect();
        s.sort_by(f64::total_cmp);
        let a1 = j as f64 * b / m as f64;
        let a2 = (m - j) as f64 * b / m as f64;
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = reg_inc_beta(x.clamp(0.0, 1.0), a1, a2).unwrap();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / n.sqrt(), "KS {ks}");
    }

    #[test]
    fn beta_pair_complements() {
        let mut rng = RngState::new(8);
        for &(a, b) in &[(1.0, 3.0), (2.0, 1.0), (0.4, 0.6), (5.0, 7.0)] {
            for _ in 0..1000 {
                let (x, y) = beta_pair_unchecked(a, b, &mut rng);
                assert!((x + y - 1.0).abs() < 1e-15);
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }

    #[test]
    fn poisson_mean() {
        let mut rng = RngState::new(10);
        let n = 20_000;
        let s: u64 = (0..n).map(|_| sample_poisson(3.5, &mut rng).unwrap()).sum();
        let m = s as f64 / n as f64;
        assert!((m - 3.5).abs() < 3.0 * (3.5 / n as f64).sqrt());
        assert_eq!(sample_poisson(0.0, &mut rng).unwrap(), 0);
    }
}
