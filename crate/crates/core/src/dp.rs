//! Dirichlet-process draws and the conjugate update.
//!
//! Three constructions of a random discrete measure are provided:
//!
//! * [`finite_approx_sample`]: `m` atoms from the base with symmetric
//!   `Dir(b/m, ..., b/m)` weights; converges to `DP(b, P0)` as `m → ∞`.
//! * [`stick_breaking_sample`]: `γ_j = B̄_1 ⋯ B̄_{j-1} B_j` with i.i.d. Beta
//!   sticks, truncated once the leftover stick mass drops below a threshold.
//!   `Beta(1, b)` sticks give `DP(b, P0)`; `Beta(a, b)` sticks the
//!   generalized `(a, b, P0)` process.
//! * [`random_m_sample`]: the finite construction with a random number of atoms.

use crate::base::BaseDistribution;
use crate::error::{domain, Error, Result};
use crate::randkit::{
    beta_pair_unchecked, sample_poisson, sample_symmetric_dirichlet, BetaLaw, RngState,
};
use serde::{Deserialize, Serialize};

/// Hard cap on the number of sticks in a single stick-breaking draw.
pub const MAX_STICKS: usize = 1_000_000;

/// Below this, a concentration is treated as the `b → 0` limit.
pub const SMALL_B_FLOOR: f64 = 1e-8;

/// Law of the stick fractions `B_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StickLaw {
    /// `Beta(1, b)` with `b` the concentration: the Dirichlet process.
    #[default]
    Dirichlet,
    /// `Beta(a, b)` sticks: the generalized process.
    Beta { a: f64, b: f64 },
}

/// Parameters `(b, P0)` or `(a, b, P0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpParams {
    pub b: f64,
    pub base: BaseDistribution,
    #[serde(default)]
    pub stick: StickLaw,
}

impl DpParams {
    pub fn new(b: f64, base: BaseDistribution) -> Result<Self> {
        let p = Self {
            b,
            base,
            stick: StickLaw::Dirichlet,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn generalized(stick_a: f64, stick_b: f64, base: BaseDistribution) -> Result<Self> {
        let p = Self {
            b: stick_b,
            base,
            stick: StickLaw::Beta {
                a: stick_a,
                b: stick_b,
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return domain(format!("concentration b must be finite and positive, got {}", self.b));
        }
        if let StickLaw::Beta { a, b } = self.stick {
            BetaLaw::new(a, b)?;
        }
        self.base.validate()
    }

    /// `(stick_a, stick_b)`.
    pub fn stick_params(&self) -> (f64, f64) {
        match self.stick {
            StickLaw::Dirichlet => (1.0, self.b),
            StickLaw::Beta { a, b } => (a, b),
        }
    }

    /// True when the sticks are `Beta(1, b)` with `b` the concentration.
    pub fn is_dirichlet(&self) -> bool {
        let (a, b) = self.stick_params();
        a == 1.0 && b == self.b
    }
}

/// Realized discrete measure `Σ w_j δ(x_j)`; `residual_mass` is truncated stick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub residual_mass: f64,
}

impl AtomicMeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `P(A)` for the set `A = {x : contains(x)}`, ignoring residual mass.
    pub fn mass<F: Fn(f64) -> bool>(&self, contains: F) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(x, _)| contains(**x))
            .map(|(_, w)| w)
            .sum()
    }

    /// `∫ g dP` over the realized atoms.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// `|Σ w + residual − 1|`.
    pub fn simplex_defect(&self) -> f64 {
        (self.weights.iter().sum::<f64>() + self.residual_mass - 1.0).abs()
    }
}

/// `P_m = Σ_{j≤m} β_j δ(ξ_j)` with `β ~ Dir(b/m, ..., b/m)` and `ξ_j` i.i.d. from the base.
pub fn finite_approx_sample(m: usize, params: &DpParams, rng: &mut RngState) -> Result<AtomicMeasure> {
    if m < 1 {
        return domain("finite approximation needs m ≥ 1");
    }
    params.validate()?;
    let weights = sample_symmetric_dirichlet(params.b / m as f64, m, rng)?;
    let atoms = (0..m).map(|_| params.base.sample(rng)).collect();
    Ok(AtomicMeasure {
        atoms,
        weights,
        residual_mass: 0.0,
    })
}

/// Stick-breaking draw, stopped once `B̄_1 ⋯ B̄_k ≤ truncation_eps`.
pub fn stick_breaking_sample(
    params: &DpParams,
    truncation_eps: f64,
    rng: &mut RngState,
) -> Result<AtomicMeasure> {
    if !(truncation_eps > 0.0 && truncation_eps < 1.0) {
        return domain(format!("truncation_eps must lie in (0, 1), got {truncation_eps}"));
    }
    params.validate()?;
    let (a, b) = params.stick_params();
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut left = 1.0;
    while left > truncation_eps {
        if weights.len() >= MAX_STICKS {
            return Err(Error::StickRunaway {
                eps: truncation_eps,
                cap: MAX_STICKS,
            });
        }
        let (stick, rest) = beta_pair_unchecked(a, b, rng);
        weights.push(left * stick);
        left *= rest;
        atoms.push(params.base.sample(rng));
    }
    Ok(AtomicMeasure {
        atoms,
        weights,
        residual_mass: left,
    })
}

/// Law of the number of atoms `M` in [`random_m_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MLaw {
    /// `M ≡ m`.
    Fixed { m: usize },
    /// `M = 1 + Poisson(mean)`.
    ShiftedPoisson { mean: f64 },
    /// `M = 1 + Geometric(p)` (number of failures before the first success).
    ShiftedGeometric { p: f64 },
}

impl MLaw {
    pub fn sample(&self, rng: &mut RngState) -> Result<usize> {
        match *self {
            MLaw::Fixed { m } => {
                if m < 1 {
                    return domain("fixed M must be at least 1");
                }
                Ok(m)
            }
            MLaw::ShiftedPoisson { mean } => Ok(1 + sample_poisson(mean, rng)? as usize),
            MLaw::ShiftedGeometric { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return domain(format!("geometric p must lie in (0, 1], got {p}"));
                }
                if p == 1.0 {
                    return Ok(1);
                }
                let k = (rng.open_uniform().ln() / (1.0 - p).ln()).floor();
                Ok(1 + k as usize)
            }
        }
    }
}

/// Draws `M` from `m_law`, then a symmetric `Dir(b/M, ..., b/M)` finite measure with `M` atoms.
pub fn random_m_sample(m_law: &MLaw, params: &DpParams, rng: &mut RngState) -> Result<AtomicMeasure> {
    let m = m_law.sample(rng)?;
    finite_approx_sample(m, params, rng)
}

/// Conjugate update: total measure `b P0 + n P̂_n`.
///
/// The returned base is a [`BaseDistribution::Mixture`] keeping the original
/// prior mass and appending the data as atoms, so successive updates compose
/// exactly.
pub fn posterior_update(params: &DpParams, data: &[f64]) -> Result<DpParams> {
    params.validate()?;
    if !params.is_dirichlet() {
        return Err(Error::NonConjugate);
    }
    if data.iter().any(|x| !x.is_finite()) {
        return domain("data must be finite");
    }
    if data.is_empty() {
        return Ok(params.clone());
    }
    let (prior, prior_mass, mut atoms) = match &params.base {
        BaseDistribution::Mixture {
            prior,
            prior_mass,
            atoms,
        } => (prior.clone(), *prior_mass, atoms.clone()),
        other => (Box::new(other.clone()), params.b, Vec::new()),
    };
    atoms.extend_from_slice(data);
    let b = prior_mass + atoms.len() as f64;
    Ok(DpParams {
        b,
        base: BaseDistribution::Mixture {
            prior,
            prior_mass,
            atoms,
        },
        stick: StickLaw::Dirichlet,
    })
}

/// Marginal law of `P(A)` under `DP(b, P0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetLaw {
    Beta {
        law: BetaLaw,
        mean: f64,
        variance: f64,
    },
    /// `P0(A) ∈ {0, 1}`: `P(A)` is degenerate.
    PointMass { at: f64 },
}

impl SetLaw {
    pub fn mean(&self) -> f64 {
        match self {
            SetLaw::Beta { mean, .. } => *mean,
            SetLaw::PointMass { at } => *at,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            SetLaw::Beta { variance, .. } => *variance,
            SetLaw::PointMass { .. } => 0.0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, SetLaw::PointMass { .. })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            SetLaw::Beta { law, .. } => law.cdf(x),
            SetLaw::PointMass { at } => {
                if x >= *at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `P(A) ~ Beta(b P0(A), b (1 − P0(A)))`, mean `P0(A)`, variance `P0(A)(1 − P0(A))/(1 + b)`.
pub fn set_probability_law(params: &DpParams, p0a: f64) -> Result<SetLaw> {
    if !(0.0..=1.0).contains(&p0a) {
        return domain(format!("P0(A) must lie in [0, 1], got {p0a}"));
    }
    if !(params.b > 0.0) {
        return domain("concentration must be positive");
    }
    if p0a == 0.0 || p0a == 1.0 {
        return Ok(SetLaw::PointMass { at: p0a });
    }
    let b = params.b;
    Ok(SetLaw::Beta {
        law: BetaLaw::new(b * p0a, b * (1.0 - p0a))?,
        mean: p0a,
        variance: p0a * (1.0 - p0a) / (1.0 + b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_one_sample, ks_two_sample, mean_and_se};

    fn normal_params(b: f64) -> DpParams {
        DpParams::new(b, BaseDistribution::standard_normal()).unwrap()
    }

    #[test]
    fn single_atom_finite() {
        let mut rng = RngState::new(1);
        let p = finite_approx_sample(1, &normal_params(2.0), &mut rng).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.weights, vec![1.0]);
        assert!(finite_approx_sample(0, &normal_params(2.0), &mut rng).is_err());
    }

    #[test]
    fn finite_approx_set_law() {
        let params = normal_params(1.0);
        let mut rng = RngState::new(11);
        let draws: Vec<f64> = (0..5000)
            .map(|_| {
                finite_approx_sample(2000, &params, &mut rng)
                    .unwrap()
                    .mass(|x| x <= 0.0)
            })
            .collect();
        let (m, se) = mean_and_se(&draws);
        assert!((m - 0.5).abs() < 3.0 * se);
        let law = BetaLaw::new(0.5, 0.5).unwrap();
        assert!(ks_one_sample(&draws, |x| law.cdf(x)) < 0.03);
    }

    #[test]
    fn partition_marginals_match_dirichlet() {
        // P0 masses (0.2, 0.3, 0.5) on a uniform base; b = 2.
        let params = DpParams::new(2.0, BaseDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let mut rng = RngState::new(12);
        let mut cols = vec![Vec::new(); 3];
        for _ in 0..5000 {
            let p = finite_approx_sample(2000, &params, &mut rng).unwrap();
            cols[0].push(p.mass(|x| x < 0.2));
            cols[1].push(p.mass(|x| (0.2..0.5).contains(&x)));
            cols[2].push(p.mass(|x| x >= 0.5));
        }
        let alphas = [0.4, 0.6, 1.0];
        for (j, c) in cols.iter().enumerate() {
            let law = BetaLaw::new(alphas[j], 2.0 - alphas[j]).unwrap();
            let ks = ks_one_sample(c, |x| law.cdf(x));
            assert!(ks < 0.03, "coordinate {j}: {ks}");
        }
    }

    #[test]
    fn stick_breaking_first_weight_and_residual() {
        let b = 3.0;
        let params = normal_params(b);
        let mut rng = RngState::new(13);
        let mut first = Vec::new();
        for _ in 0..10_000 {
            let p = stick_breaking_sample(&params, 1e-6, &mut rng).unwrap();
            assert!(p.residual_mass <= 1e-6);
            assert!(p.simplex_defect() < 1e-12);
            first.push(p.weights[0]);
        }
        let (m, se) = mean_and_se(&first);
        assert!((m - 1.0 / (1.0 + b)).abs() < 3.0 * se);
    }

    #[test]
    fn stick_breaking_rejects_bad_eps() {
        let mut rng = RngState::new(0);
        assert!(stick_breaking_sample(&normal_params(1.0), 0.0, &mut rng).is_err());
        assert!(stick_breaking_sample(&normal_params(1.0), 1.0, &mut rng).is_err());
    }

    #[test]
    fn stick_breaking_runaway_guard() {
        // Beta(1e-3, 1e3) sticks almost never remove mass.
        let params = DpParams::generalized(1e-3, 1e3, BaseDistribution::standard_normal()).unwrap();
        let mut rng = RngState::new(0);
        let err = stick_breaking_sample(&params, 1e-12, &mut rng).unwrap_err();
        assert!(matches!(err, Error::StickRunaway { .. }));
    }

    #[test]
    fn generalized_sticks_first_weight() {
        let params = DpParams::generalized(2.0, 3.0, BaseDistribution::standard_normal()).unwrap();
        let mut rng = RngState::new(14);
        let first: Vec<f64> = (0..10_000)
            .map(|_| stick_breaking_sample(&params, 1e-6, &mut rng).unwrap().weights[0])
            .collect();
        let (m, se) = mean_and_se(&first);
        assert!((m - 0.4).abs() < 3.0 * se);
    }

    #[test]
    fn representations_agree_on_random_mean() {
        let params = DpParams::new(1.0, BaseDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let mut rng = RngState::new(15);
        let a: Vec<f64> = (0..5000)
            .map(|_| finite_approx_sample(2000, &params, &mut rng).unwrap().integrate(|x| x))
            .collect();
        let b: Vec<f64> = (0..5000)
            .map(|_| stick_breaking_sample(&params, 1e-8, &mut rng).unwrap().integrate(|x| x))
            .collect();
        assert!(ks_two_sample(&a, &b) < 0.03);
    }

    #[test]
    fn random_m_reductions() {
        let params = normal_params(1.0);
        let p = random_m_sample(&MLaw::Fixed { m: 1 }, &params, &mut RngState::new(3)).unwrap();
        assert_eq!(p.len(), 1);
        let law = MLaw::Fixed { m: 17 };
        let x = random_m_sample(&law, &params, &mut RngState::new(4)).unwrap();
        let y = finite_approx_sample(17, &params, &mut RngState::new(4)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn random_m_approaches_dirichlet_as_mean_grows() {
        let params = normal_params(1.0);
        let law = BetaLaw::new(0.5, 0.5).unwrap();
        let mut ks = Vec::new();
        for (i, mean) in [5.0, 50.0, 500.0].into_iter().enumerate() {
            let mut rng = RngState::new(200 + i as u64);
            let m_law = MLaw::ShiftedPoisson { mean };
            let draws: Vec<f64> = (0..4000)
                .map(|_| random_m_sample(&m_law, &params, &mut rng).unwrap().mass(|x| x <= 0.0))
                .collect();
            ks.push(ks_one_sample(&draws, |x| law.cdf(x)));
        }
        assert!(ks[0] > ks[1] && ks[1] > ks[2], "{ks:?}");
    }

    #[test]
    fn geometric_m_law() {
        let mut rng = RngState::new(5);
        let n = 20_000;
        let s: usize = (0..n)
            .map(|_| MLaw::ShiftedGeometric { p: 0.25 }.sample(&mut rng).unwrap())
            .sum();
        let m = s as f64 / n as f64;
        // mean 1 + (1 − p)/p = 4, variance (1 − p)/p² = 12
        assert!((m - 4.0).abs() < 3.0 * (12.0 / n as f64).sqrt());
    }

    #[test]
    fn posterior_update_basics() {
        let params = normal_params(2.0);
        assert_eq!(posterior_update(&params, &[]).unwrap(), params);
        let post = posterior_update(&params, &[0.5, 1.5, -1.0]).unwrap();
        assert_eq!(post.b, 5.0);
        assert!((post.base.prior_weight() - 0.4).abs() < 1e-15);
        let gen = DpParams::generalized(0.5, 2.0, BaseDistribution::standard_normal()).unwrap();
        assert_eq!(posterior_update(&gen, &[1.0]).unwrap_err(), Error::NonConjugate);
    }

    #[test]
    fn posterior_update_composes() {
        let params = DpParams::new(0.3, BaseDistribution::standard_normal()).unwrap();
        let d1 = [0.1, 0.7, -2.2];
        let d2 = [1.3, 0.4];
        let twice = posterior_update(&posterior_update(&params, &d1).unwrap(), &d2).unwrap();
        let all: Vec<f64> = d1.iter().chain(&d2).copied().collect();
        let once = posterior_update(&params, &all).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn posterior_set_law_is_beta() {
        let params = normal_params(2.0);
        let data = [-1.2, -0.3, 0.4, 0.9, 1.7, 2.5];
        let post = posterior_update(&params, &data).unwrap();
        let mut rng = RngState::new(16);
        let draws: Vec<f64> = (0..5000)
            .map(|_| {
                stick_breaking_sample(&post, 1e-9, &mut rng)
                    .unwrap()
                    .mass(|x| x <= 0.0)
            })
            .collect();
        // b P0(A) + n P̂n(A) = 1 + 2, b(1 − P0(A)) + n(1 − P̂n(A)) = 1 + 4
        let law = BetaLaw::new(3.0, 5.0).unwrap();
        assert!(ks_one_sample(&draws, |x| law.cdf(x)) < 0.03);
    }

    #[test]
    fn small_b_posterior_is_bayesian_bootstrap() {
        let params = normal_params(SMALL_B_FLOOR);
        let data = [0.3, 1.1, 2.0];
        let post = posterior_update(&params, &data).unwrap();
        let mut rng = RngState::new(17);
        let mut first = Vec::new();
        for _ in 0..5000 {
            let p = stick_breaking_sample(&post, 1e-12, &mut rng).unwrap();
            let on_data = p.mass(|x| data.contains(&x));
            assert!(on_data >= 1.0 - 1e-6 - p.residual_mass);
            first.push(p.mass(|x| x == 0.3));
        }
        // Flat Dirichlet(1, 1, 1): one coordinate ~ Beta(1, 2).
        let law = BetaLaw::new(1.0, 2.0).unwrap();
        assert!(ks_one_sample(&first, |x| law.cdf(x)) < 0.03);
    }

    #[test]
    fn set_law_examples() {
        let law = set_probability_law(&normal_params(1.0), 0.5).unwrap();
        assert!((law.variance() - 0.125).abs() < 1e-15);
        assert_eq!(law.mean(), 0.5);
        let pm = set_probability_law(&normal_params(1.0), 0.0).unwrap();
        assert!(pm.is_degenerate());
        assert_eq!(pm.mean(), 0.0);
        let tight = set_probability_law(&normal_params(1e6), 0.3).unwrap();
        assert!(tight.variance() < 1e-6);
        assert!(set_probability_law(&normal_params(1.0), 1.5).is_err());
    }
}
