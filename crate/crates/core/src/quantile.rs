//! Quantile inference under a Dirichlet-process prior.
//!
//! For `P ~ DP(b F0)` the random quantile `Q(y) = inf{x : F(x) ≥ y}` has
//! `Pr{Q(y) ≤ x} = Pr{F(x) ≥ y}`, and `F(x) ~ Beta(b F0(x), b F̄0(x))`.
//! After observing distinct `x_(1) < ⋯ < x_(n)` the same holds with the
//! updated parameters, which gives a law with a density inside data windows
//! and point masses at the data.

use crate::base::BaseDistribution;
use crate::error::{domain, Error, Result};
use crate::numeric::{bisect_increasing, integrate};
use crate::randkit::{beta_cdf_ext, ln_gamma};
use serde::Serialize;

/// Quadrature tolerance for each window of [`quantile_posterior_mean`].
pub const WINDOW_TOL: f64 = 1e-8;

/// Strictly increasing finite data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    /// Sorts `values`; rejects ties, non-finite values and empty input.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return domain("sample must contain at least one point");
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return domain(format!("sample contains non-finite value {x}"));
        }
        values.sort_by(f64::total_cmp);
        if let Some(w) = values.windows(2).find(|w| w[0] == w[1]) {
            return domain(format!("sample contains tied value {}", w[0]));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_y(y: f64) -> Result<()> {
    if !(y > 0.0 && y < 1.0) {
        return domain(format!("y must lie in (0, 1), got {y}"));
    }
    Ok(())
}

/// `Pr{Q(y) ≤ x} = G(1 − y; b F̄0(x), b F0(x))` with `G` the Beta cdf.
///
/// Depends on `x` only through `F0(x)`; exact 0 and 1 where `F0(x)` is 0 or 1.
pub fn prior_quantile_cdf(y: f64, x: f64, b: f64, base: &BaseDistribution) -> Result<f64> {
    check_y(y)?;
    if !(b > 0.0 && b.is_finite()) {
        return domain(format!("b must be positive, got {b}"));
    }
    let f = base.cdf(x);
    Ok(beta_cdf_ext(1.0 - y, b * (1.0 - f), b * f))
}

/// `p_i = C(n−1, i−1) y^{i−1} (1−y)^{n−i}`, `i = 1..n`: the posterior masses at
/// the order statistics in the `b → 0` limit.
pub fn noninf_point_masses(y: f64, n: usize) -> Result<Vec<f64>> {
    check_y(y)?;
    if n == 0 {
        return domain("need n ≥ 1");
    }
    Ok(bernstein_weights(y, n))
}

/// Binomial(n − 1, y) probabilities shifted to `1..n`; `y` may be 0 or 1.
fn bernstein_weights(y: f64, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if y <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    if y >= 1.0 {
        w[n - 1] = 1.0;
        return w;
    }
    let (ly, l1y) = (y.ln(), (-y).ln_1p());
    let lg_n = ln_gamma(n as f64);
    for (k, wk) in w.iter_mut().enumerate() {
        // k = i − 1 successes out of n − 1
        let lc = lg_n - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64);
        *wk = (lc + k as f64 * ly + (n - 1 - k) as f64 * l1y).exp();
    }
    w
}

/// `Q̂_0(y) = Σ_i C(n−1, i−1) y^{i−1} (1−y)^{n−i} x_(i)`, the mean of the
/// `b → 0` posterior law of `Q(y)`.
pub fn bernstein_quantile(y: f64, data: &SortedSample) -> Result<f64> {
    check_y(y)?;
    Ok(bernstein_at(y, data.values()))
}

fn bernstein_at(y: f64, x: &[f64]) -> f64 {
    bernstein_weights(y, x.len())
        .iter()
        .zip(x)
        .map(|(w, v)| w * v)
        .sum()
}

/// `q̂_0(y) = (n − 1) Σ_k C(n−2, k−1) y^{k−1} (1−y)^{n−1−k} (x_(k+1) − x_(k))`.
fn bernstein_derivative_at(y: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let gaps: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let s: f64 = bernstein_weights(y, n - 1)
        .iter()
        .zip(&gaps)
        .map(|(w, g)| w * g)
        .sum();
    (n - 1) as f64 * s
}

/// Law of `Q(y)` given the data: right-continuous cdf with atoms at the data.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantilePosteriorLaw {
    pub y: f64,
    pub b: f64,
    data: Vec<f64>,
    base: BaseDistribution,
    atoms: Vec<f64>,
}

/// Posterior law of `Q(y)`; `b = 0` gives the exact limiting law on the data.
pub fn posterior_quantile_law(
    y: f64,
    data: &SortedSample,
    b: f64,
    base: &BaseDistribution,
) -> Result<QuantilePosteriorLaw> {
    QuantilePosteriorLaw::build(y, data.values().to_vec(), b, base)
}

impl QuantilePosteriorLaw {
    /// The prior law of `Q(y)` (no data), `b > 0`.
    pub fn prior(y: f64, b: f64, base: &BaseDistribution) -> Result<Self> {
        if b <= 0.0 {
            return domain("the prior law needs b > 0");
        }
        Self::build(y, Vec::new(), b, base)
    }

    fn build(y: f64, data: Vec<f64>, b: f64, base: &BaseDistribution) -> Result<Self> {
        check_y(y)?;
        if !(b >= 0.0 && b.is_finite()) {
            return domain(format!("b must be finite and nonnegative, got {b}"));
        }
        base.validate()?;
        let mut law = Self {
            y,
            b,
            data,
            base: base.clone(),
            atoms: Vec::new(),
        };
        law.atoms = if b == 0.0 {
            bernstein_weights(y, law.data.len())
        } else {
            let n = law.data.len() as f64;
            law.data
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let i = (k + 1) as f64;
                    let (f, f_left) = (base.cdf(x), base.cdf_left(x));
                    let at = beta_cdf_ext(1.0 - y, b * (1.0 - f) + n - i, b * f + i);
                    let before =
                        beta_cdf_ext(1.0 - y, b * (1.0 - f_left) + n - i + 1.0, b * f_left + i - 1.0);
                    at - before
                })
                .collect()
        };
        Ok(law)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Point masses at `x_(1), …, x_(n)`.
    pub fn atom_masses(&self) -> &[f64] {
        &self.atoms
    }

    /// `H(x) = G(1 − y; b F̄0(x) + n − i, b F0(x) + i)` with `i = #{x_(k) ≤ x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        let i = self.data.partition_point(|&d| d <= x);
        let n = self.data.len();
        if self.b == 0.0 {
            return self.atoms[..i].iter().sum::<f64>().min(1.0);
        }
        let f = self.base.cdf(x);
        beta_cdf_ext(
            1.0 - self.y,
            self.b * (1.0 - f) + (n - i) as f64,
            self.b * f + i as f64,
        )
    }

    /// `H(x−)`.
    fn cdf_left(&self, x: f64) -> f64 {
        let i = self.data.partition_point(|&d| d < x);
        let n = self.data.len();
        if self.b == 0.0 {
            return self.atoms[..i].iter().sum::<f64>().min(1.0);
        }
        let f = self.base.cdf_left(x);
        beta_cdf_ext(
            1.0 - self.y,
            self.b * (1.0 - f) + (n - i) as f64,
            self.b * f + i as f64,
        )
    }

    /// Mass outside the data atoms: increments of `H` over the open windows
    /// between consecutive data points and the two tails.
    pub fn continuous_mass(&self) -> f64 {
        if self.b == 0.0 {
            return 0.0;
        }
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(&self.data);
        edges.push(f64::INFINITY);
        edges
            .windows(2)
            .map(|w| {
                let hi = if w[1].is_finite() { self.cdf_left(w[1]) } else { 1.0 };
                let lo = if w[0].is_finite() { self.cdf(w[0]) } else { 0.0 };
                hi - lo
            })
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().sum::<f64>() + self.continuous_mass()
    }

    /// `E Q(y)`: atom sum for `b = 0`, otherwise `L + ∫_L^U (1 − H)` split at
    /// the data and base atoms and integrated window by window.
    pub fn mean(&self) -> Result<f64> {
        if self.b == 0.0 {
            return Ok(self.atoms.iter().zip(&self.data).map(|(p, x)| p * x).sum());
        }
        if !self.base.has_finite_mean() {
            return Err(Error::NotIntegrable(format!(
                "base {:?} has no finite mean",
                self.base
            )));
        }
        let (mut lo, mut hi) = self.base.effective_support();
        if let (Some(first), Some(last)) = (self.data.first(), self.data.last()) {
            lo = lo.min(*first);
            hi = hi.max(*last);
        }
        let mut edges = vec![lo, hi];
        edges.extend(self.data.iter().copied());
        edges.extend(self.base.atoms());
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut total = lo;
        for w in edges.windows(2) {
            let q = integrate(|x| 1.0 - self.cdf(x), w[0], w[1], 1, WINDOW_TOL, 0.0)?;
            total += q.value;
        }
        Ok(total)
    }
}

/// `Q̂_b(y) = E{Q(y) | data}` for `b > 0`.
pub fn quantile_posterior_mean(
    y: f64,
    data: &SortedSample,
    b: f64,
    base: &BaseDistribution,
) -> Result<f64> {
    if !(b > 0.0) {
        return domain(format!("b must be positive, got {b}; use bernstein_quantile for b = 0"));
    }
    posterior_quantile_law(y, data, b, base)?.mean()
}

/// Prior mean of `Q(y)`.
pub fn prior_quantile_mean(y: f64, b: f64, base: &BaseDistribution) -> Result<f64> {
    QuantilePosteriorLaw::prior(y, b, base)?.mean()
}

/// Bisection width for inverting `Q̂_0`.
const INVERSION_TOL: f64 = 1e-12;

/// `f̂_0(x) = 1 / q̂_0(F̂_0(x))` with `F̂_0` the inverse of `Q̂_0`; zero outside the data range.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomaticDensity {
    data: Vec<f64>,
}

/// Density estimate without a smoothing parameter; needs `n ≥ 3` distinct points.
pub fn automatic_density(data: &SortedSample) -> Result<AutomaticDensity> {
    if data.len() < 3 {
        return domain(format!("automatic density needs n ≥ 3, got {}", data.len()));
    }
    Ok(AutomaticDensity {
        data: data.values().to_vec(),
    })
}

impl AutomaticDensity {
    pub fn support(&self) -> (f64, f64) {
        (self.data[0], self.data[self.data.len() - 1])
    }

    /// `Q̂_0(y)` for `y` in `[0, 1]`.
    pub fn quantile(&self, y: f64) -> f64 {
        bernstein_at(y.clamp(0.0, 1.0), &self.data)
    }

    /// `q̂_0(y) = dQ̂_0/dy` for `y` in `[0, 1]`.
    pub fn quantile_density(&self, y: f64) -> f64 {
        bernstein_derivative_at(y.clamp(0.0, 1.0), &self.data)
    }

    /// `F̂_0(x)`: solves `Q̂_0(y) = x` by bisection.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        bisect_increasing(|y| self.quantile(y) - x, 0.0, 1.0, INVERSION_TOL)
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        1.0 / self.quantile_density(self.cdf(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{stick_breaking_sample, DpParams};
    use crate::randkit::{reg_inc_beta, RngState};

    fn unif() -> BaseDistribution {
        BaseDistribution::uniform(0.0, 1.0).unwrap()
    }

    fn sample(v: &[f64]) -> SortedSample {
        SortedSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sorted_sample_validation() {
        assert!(SortedSample::new(vec![]).is_err());
        assert!(SortedSample::new(vec![1.0, 1.0]).is_err());
        assert!(SortedSample::new(vec![f64::NAN]).is_err());
        assert_eq!(sample(&[3.0, 1.0, 2.0]).values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn prior_cdf_median_symmetry() {
        let n = BaseDistribution::standard_normal();
        for b in [0.1, 1.0, 7.0, 300.0] {
            assert!((prior_quantile_cdf(0.5, 0.0, b, &n).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_cdf_endpoints_and_concentration() {
        let u = unif();
        assert_eq!(prior_quantile_cdf(0.3, -1.0, 2.0, &u).unwrap(), 0.0);
        assert_eq!(prior_quantile_cdf(0.3, 1.0, 2.0, &u).unwrap(), 1.0);
        for x in [0.1, 0.25, 0.35, 0.9] {
            let v = prior_quantile_cdf(0.3, x, 1e6, &u).unwrap();
            let step = if x >= 0.3 { 1.0 } else { 0.0 };
            assert!((v - step).abs() < 1e-3, "x={x}: {v}");
        }
    }

    #[test]
    fn prior_cdf_factorizes_through_base_cdf() {
        let n = BaseDistribution::normal(1.0, 2.0).unwrap();
        for &x in &[-3.0, 0.0, 0.4, 2.5] {
            for &y in &[0.1, 0.5, 0.8] {
                let a = prior_quantile_cdf(y, x, 3.0, &n).unwrap();
                let b = prior_quantile_cdf(y, n.cdf(x), 3.0, &unif()).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn prior_cdf_matches_dp_monte_carlo() {
        // Pr{Q(y) ≤ x} = Pr{P(−∞, x] ≥ y} estimated from stick-breaking draws.
        let params = DpParams::new(2.0, unif()).unwrap();
        let mut rng = RngState::new(11);
        let (y, x) = (0.4, 0.35);
        let reps = 20_000;
        let hits = (0..reps)
            .filter(|_| {
                let p = stick_breaking_sample(&params, 1e-10, &mut rng).unwrap();
                p.mass(|t| t <= x) >= y
            })
            .count() as f64
            / reps as f64;
        let exact = prior_quantile_cdf(y, x, 2.0, &unif()).unwrap();
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!((hits - exact).abs() < 4.0 * se, "{hits} vs {exact}");
    }

    #[test]
    fn noninf_masses_examples() {
        assert_eq!(noninf_point_masses(0.3, 1).unwrap(), vec![1.0]);
        let m = noninf_point_masses(0.5, 3).unwrap();
        for (a, b) in m.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        for n in [1usize, 2, 7, 50, 200] {
            for k in 1..100 {
                let s: f64 = noninf_point_masses(k as f64 / 100.0, n).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bernstein_examples() {
        let d = sample(&[0.0, 1.0]);
        assert_eq!(bernstein_quantile(0.5, &d).unwrap(), 0.5);
        let d = sample(&[0.2, 0.3, 1.7, 4.0]);
        assert!((bernstein_quantile(1e-12, &d).unwrap() - 0.2).abs() < 1e-10);
        assert!((bernstein_quantile(1.0 - 1e-12, &d).unwrap() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn zero_b_law_on_two_points() {
        let law = posterior_quantile_law(0.5, &sample(&[0.0, 1.0]), 0.0, &unif()).unwrap();
        assert_eq!(law.atom_masses(), &[0.5, 0.5]);
        assert_eq!(law.continuous_mass(), 0.0);
        assert_eq!(law.mean().unwrap(), 0.5);
    }

    #[test]
    fn atoms_match_binomial_limit_for_small_b() {
        let d = sample(&[0.1, 0.4, 0.45, 0.8, 0.9]);
        let law = posterior_quantile_law(0.35, &d, 1e-9, &unif()).unwrap();
        let limit = noninf_point_masses(0.35, 5).unwrap();
        for (a, b) in law.atom_masses().iter().zip(&limit) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(law.continuous_mass() < 1e-6);
    }

    #[test]
    fn posterior_mass_conservation() {
        let mut rng = RngState::new(4);
        for &b in &[0.0, 0.5, 5.0] {
            for &n in &[1usize, 5, 50] {
                let d = SortedSample::new((0..n).map(|_| rng.uniform()).collect()).unwrap();
                for &y in &[0.05, 0.5, 0.93] {
                    let law = posterior_quantile_law(y, &d, b, &unif()).unwrap();
                    assert!((law.total_mass() - 1.0).abs() < 1e-10, "b={b} n={n} y={y}");
                    assert!((law.cdf(2.0) - 1.0).abs() < 1e-10);
                    assert!(law.cdf(-1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn posterior_atom_is_beta_difference() {
        // n = 1: the atom equals Pr{Beta(b F̄0 + 1, b F0) > 1 − y} − Pr{Beta(b F̄0, b F0 + 1) > 1 − y}
        // written through the survival functions directly.
        let (y, b, x) = (0.3, 2.0, 0.6);
        let law = posterior_quantile_law(y, &sample(&[x]), b, &unif()).unwrap();
        let hi = reg_inc_beta(1.0 - y, b * (1.0 - x), b * x + 1.0).unwrap();
        let lo = reg_inc_beta(1.0 - y, b * (1.0 - x) + 1.0, b * x).unwrap();
        assert!((law.atom_masses()[0] - (hi - lo)).abs() < 1e-15);
        assert!(law.atom_masses()[0] > 0.0);
    }

    #[test]
    fn posterior_cdf_monotone() {
        let d = sample(&[0.2, 0.3, 0.7]);
        let law = posterior_quantile_law(0.6, &d, 1.5, &unif()).unwrap();
        let mut prev = 0.0;
        for k in 0..=1000 {
            let v = law.cdf(-0.1 + 1.2 * k as f64 / 1000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn posterior_mean_small_b_matches_bernstein() {
        let d = sample(&[0.05, 0.2, 0.21, 0.6, 0.77, 0.9]);
        for k in 1..20 {
            let y = k as f64 / 20.0;
            let m = quantile_posterior_mean(y, &d, 1e-8, &unif()).unwrap();
            assert!((m - bernstein_quantile(y, &d).unwrap()).abs() < 1e-4, "y={y}");
        }
    }

    #[test]
    fn posterior_mean_monotone_in_y() {
        let d = sample(&[-0.4, 0.3, 1.2, 2.0]);
        let base = BaseDistribution::standard_normal();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let m = quantile_posterior_mean(k as f64 / 20.0, &d, 2.0, &base).unwrap();
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn prior_mean_matches_monte_carlo() {
        assert!((prior_quantile_mean(0.5, 3.0, &unif()).unwrap() - 0.5).abs() < 1e-8);
        let params = DpParams::new(1.0, unif()).unwrap();
        let mut rng = RngState::new(8);
        let y = 0.25;
        let reps = 20_000;
        let draws: Vec<f64> = (0..reps)
            .map(|_| {
                let p = stick_breaking_sample(&params, 1e-10, &mut rng).unwrap();
                let mut pts: Vec<(f64, f64)> = p.atoms.iter().copied().zip(p.weights.iter().copied()).collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut acc = 0.0;
                for (x, w) in pts {
                    acc += w;
                    if acc >= y {
                        return x;
                    }
                }
                1.0
            })
            .collect();
        let (m, se) = crate::diagnostics::mean_and_se(&draws);
        let exact = prior_quantile_mean(y, 1.0, &unif()).unwrap();
        assert!((m - exact).abs() < 4.0 * se, "{m} ± {se} vs {exact}");
    }

    #[test]
    fn heavy_tailed_base_is_not_integrable() {
        let c = BaseDistribution::Cauchy {
            location: 0.0,
            scale: 1.0,
        };
        assert!(matches!(
            quantile_posterior_mean(0.5, &sample(&[0.0]), 1.0, &c),
            Err(Error::NotIntegrable(_))
        ));
    }

    #[test]
    fn density_boundaries_and_support() {
        let f = automatic_density(&sample(&[0.0, 1.0, 3.0])).unwrap();
        assert_eq!(f.density(0.0), 0.5);
        assert_eq!(f.density(3.0), 0.25);
        assert_eq!(f.density(-0.1), 0.0);
        assert_eq!(f.density(3.1), 0.0);
        assert!(automatic_density(&sample(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let d = sample(&[0.0, 0.4, 0.5, 1.9, 2.2, 5.0]);
        let f = automatic_density(&d).unwrap();
        let mut total = 0.0;
        for w in d.values().windows(2) {
            total += integrate(|x| f.density(x), w[0], w[1], 2, 1e-10, 0.0).unwrap().value;
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bernstein_derivative_matches_differences() {
        let f = automatic_density(&sample(&[0.1, 0.35, 0.4, 0.8, 1.3, 2.0, 2.1])).unwrap();
        let h = 1e-5;
        for k in 1..20 {
            let y = k as f64 / 20.0;
            let fd = (f.quantile(y + h) - f.quantile(y - h)) / (2.0 * h);
            assert!((fd - f.quantile_density(y)).abs() < 1e-6);
        }
    }

    proptest::proptest! {
        #[test]
        fn bernstein_is_weighted_mean(mut xs in proptest::collection::vec(-10.0f64..10.0, 1..40), y in 0.001f64..0.999) {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let d = SortedSample::new(xs).unwrap();
            let w = noninf_point_masses(y, d.len()).unwrap();
            let dot: f64 = w.iter().zip(d.values()).map(|(a, b)| a * b).sum();
            proptest::prop_assert!((bernstein_quantile(y, &d).unwrap() - dot).abs() <= 1e-12);
        }

        #[test]
        fn prior_cdf_monotone_in_x(y in 0.01f64..0.99, b in 0.05f64..50.0) {
            let u = BaseDistribution::uniform(0.0, 1.0).unwrap();
            let mut prev = 0.0;
            for k in 0..=50 {
                let v = prior_quantile_cdf(y, k as f64 / 50.0, b, &u).unwrap();
                proptest::prop_assert!(v >= prev - 1e-14);
                prev = v;
            }
        }
    }
}
