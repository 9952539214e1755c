//! Random means `θ = ∫ g dP` under Dirichlet-type priors.
//!
//! Writing the stick-breaking series as `θ = B_1 Y_1 + B̄_1 (B_2 Y_2 + B̄_2 B_3 Y_3 + ⋯)`
//! shows `θ =_d B Y + B̄ θ` with `B`, `Y`, `θ` independent. Expanding
//! `E(θ − θ0)^p` through that equation gives a triangular linear system for
//! the central moments; [`central_moments`] solves it order by order, and
//! [`stochastic_chain`] iterates the map itself as a Markov chain whose
//! equilibrium is the law of `θ`.

use crate::base::BaseDistribution;
use crate::dp::{stick_breaking_sample, DpParams};
use crate::error::{domain, Error, Result};
use crate::numeric::KahanSum;
use crate::randkit::{beta_pair_unchecked, ln_gamma, RngState};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Orders above this use floating point even when exact moments are available.
const EXACT_ORDER_LIMIT: usize = 40;

/// `E[B^i B̄^j]` for `i + j ≤ p_max`, `B ~ Beta(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StickMomentTable {
    pub stick_a: f64,
    pub stick_b: f64,
    pub p_max: usize,
    entries: Vec<Vec<f64>>,
}

impl StickMomentTable {
    /// `E[B^i B̄^j]`; panics if `i + j > p_max`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }
}

/// Exact Beta product moments
/// `E[B^i B̄^j] = ∏_{r<i}(a + r) ∏_{s<j}(b + s) / ∏_{t<i+j}(a + b + t)`.
pub fn stick_moments(stick_a: f64, stick_b: f64, p_max: usize) -> Result<StickMomentTable> {
    if p_max < 2 {
        return domain("stick moment table needs p_max ≥ 2");
    }
    if !(stick_a > 0.0 && stick_b > 0.0) || !stick_a.is_finite() || !stick_b.is_finite() {
        return domain(format!(
            "stick law parameters must be finite and positive, got ({stick_a}, {stick_b})"
        ));
    }
    let (a, b) = (stick_a, stick_b);
    let mut entries = Vec::with_capacity(p_max + 1);
    for i in 0..=p_max {
        let mut row = Vec::with_capacity(p_max + 1 - i);
        for j in 0..=(p_max - i) {
            let v = if i + j <= 64 {
                // Each factor is below one, so the running product cannot overflow.
                let mut v = 1.0;
                for r in 0..i {
                    v *= (a + r as f64) / (a + b + r as f64);
                }
                for s in 0..j {
                    v *= (b + s as f64) / (a + b + (i + s) as f64);
                }
                v
            } else {
                let (fi, fj) = (i as f64, j as f64);
                (ln_gamma(a + fi) - ln_gamma(a) + ln_gamma(b + fj) - ln_gamma(b)
                    - ln_gamma(a + b + fi + fj)
                    + ln_gamma(a + b))
                    .exp()
            };
            row.push(v);
        }
        entries.push(row);
    }
    Ok(StickMomentTable {
        stick_a,
        stick_b,
        p_max,
        entries,
    })
}

/// Moments of `Y = g(ξ)`, `ξ ~ P0`: mean `θ0` and central moments `μ_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMomentSpec {
    pub theta0: f64,
    /// `μ_p` indexed by `p`; `μ_0 = 1`, `μ_1 = 0`.
    pub central: Vec<f64>,
    pub support: (f64, f64),
    /// The same moments as exact rationals, when they are known exactly.
    pub exact: Option<Vec<BigRational>>,
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

impl BaseMomentSpec {
    /// From explicitly supplied `μ_2..μ_{p_max}`.
    pub fn from_central(theta0: f64, mu_2_up: &[f64], support: (f64, f64)) -> Result<Self> {
        let mut central = vec![1.0, 0.0];
        central.extend_from_slice(mu_2_up);
        for (p, &m) in central.iter().enumerate() {
            if !m.is_finite() {
                return domain(format!("central moment of order {p} is not finite"));
            }
            if p % 2 == 0 && m < 0.0 {
                return domain(format!("even central moment of order {p} is negative"));
            }
        }
        Ok(Self {
            theta0,
            central,
            support,
            exact: None,
        })
    }

    /// `Y ≡ c`.
    pub fn degenerate(c: f64, p_max: usize) -> Self {
        let mut central = vec![0.0; p_max + 1];
        central[0] = 1.0;
        let mut exact = vec![BigRational::zero(); p_max + 1];
        exact[0] = BigRational::one();
        Self {
            theta0: c,
            central,
            support: (c, c),
            exact: Some(exact),
        }
    }

    /// `Y ~ U(lo, hi)`: `μ_p = w^p / (p + 1)` for even `p` with `w` the half-width.
    pub fn uniform(lo: f64, hi: f64, p_max: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return domain("uniform moments need finite lo < hi");
        }
        let w = (rational(hi) - rational(lo)) / BigRational::from_integer(BigInt::from(2));
        let exact: Vec<BigRational> = (0..=p_max)
            .map(|p| {
                if p % 2 == 1 {
                    BigRational::zero()
                } else {
                    num_traits::pow(w.clone(), p) / BigRational::from_integer(BigInt::from(p + 1))
                }
            })
            .collect();
        Ok(Self::from_exact(0.5 * (lo + hi), exact, (lo, hi)))
    }

    /// `Y ~ N(mean, sd²)`: `μ_p = sd^p (p − 1)!!` for even `p`.
    pub fn normal(mean: f64, sd: f64, p_max: usize) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return domain("normal moments need finite mean and sd > 0");
        }
        let s2 = rational(sd) * rational(sd);
        let mut exact = vec![BigRational::zero(); p_max + 1];
        exact[0] = BigRational::one();
        let mut p = 2;
        while p <= p_max {
            exact[p] = exact[p - 2].clone() * s2.clone() * BigRational::from_integer(BigInt::from(p - 1));
            p += 2;
        }
        Ok(Self::from_exact(
            mean,
            exact,
            (f64::NEG_INFINITY, f64::INFINITY),
        ))
    }

    /// `Y` uniform over a finite list of values.
    pub fn empirical(points: &[f64], p_max: usize) -> Result<Self> {
        if points.is_empty() || points.iter().any(|x| !x.is_finite()) {
            return domain("empirical moments need finite points");
        }
        let n = BigRational::from_integer(BigInt::from(points.len()));
        let mean = points.iter().map(|&x| rational(x)).fold(BigRational::zero(), |a, x| a + x) / n.clone();
        let devs: Vec<BigRational> = points.iter().map(|&x| rational(x) - mean.clone()).collect();
        let exact: Vec<BigRational> = (0..=p_max)
            .map(|p| {
                devs.iter()
                    .map(|d| num_traits::pow(d.clone(), p))
                    .fold(BigRational::zero(), |a, x| a + x)
                    / n.clone()
            })
            .collect();
        let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self::from_exact(mean.to_f64().unwrap_or(f64::NAN), exact, (lo, hi)))
    }

    /// Moments of `Y ~ base`; exact for uniform, normal and empirical bases,
    /// by quadrature otherwise.
    pub fn from_distribution(base: &BaseDistribution, p_max: usize) -> Result<Self> {
        match base {
            BaseDistribution::Uniform { lo, hi } => Self::uniform(*lo, *hi, p_max),
            BaseDistribution::Normal { mean, sd } => Self::normal(*mean, *sd, p_max),
            BaseDistribution::Empirical { points } => Self::empirical(points, p_max),
            _ => {
                let theta0 = base
                    .mean()
                    .ok_or_else(|| Error::NotIntegrable(format!("{base:?}")))?;
                let mut central = vec![1.0, 0.0];
                for p in 2..=p_max {
                    central.push(base.expect(&|x: f64| (x - theta0).powi(p as i32), 16, 1e-13)?);
                }
                Self::from_central(theta0, &central[2..], base.effective_support())
            }
        }
    }

    fn from_exact(theta0: f64, exact: Vec<BigRational>, support: (f64, f64)) -> Self {
        let central = exact.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect();
        Self {
            theta0,
            central,
            support,
            exact: Some(exact),
        }
    }

    pub fn p_max(&self) -> usize {
        self.central.len() - 1
    }
}

fn binomial(p: usize, j: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..j {
        c = c * (p - k) as f64 / (k + 1) as f64;
    }
    c.round()
}

/// Central moments `m_p = E(θ − θ0)^p` for `p = 0..=p_max` (`m_0 = 1`, `m_1 = 0`).
///
/// Solves, for `p = 2, 3, ...`,
/// `m_p (1 − E B̄^p) = Σ_{j<p} C(p, j) μ_{p−j} E[B^{p−j} B̄^j] m_j`.
/// Uses exact rational arithmetic when the base moments are exact and
/// `p_max ≤ 40`; otherwise double precision with compensated sums.
pub fn central_moments(
    base: &BaseMomentSpec,
    sticks: &StickMomentTable,
    p_max: usize,
) -> Result<Vec<f64>> {
    if p_max < 2 {
        return domain("central moments need p_max ≥ 2");
    }
    if base.p_max() < p_max || sticks.p_max < p_max {
        return domain(format!(
            "moments available to order {} (base) and {} (sticks), requested {p_max}",
            base.p_max(),
            sticks.p_max
        ));
    }
    for p in 2..=p_max {
        if 1.0 - sticks.get(0, p) <= 0.0 {
            return Err(Error::DegenerateSticks { p });
        }
    }
    if let (Some(exact), true) = (&base.exact, p_max <= EXACT_ORDER_LIMIT) {
        let m = central_moments_exact(exact, sticks.stick_a, sticks.stick_b, p_max)?;
        return Ok(m.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect());
    }
    let mu = &base.central;
    let mut m = vec![1.0, 0.0];
    for p in 2..=p_max {
        let mut acc = KahanSum::default();
        for j in 0..p {
            if m[j] == 0.0 {
                continue;
            }
            acc.add(binomial(p, j) * mu[p - j] * sticks.get(p - j, j) * m[j]);
        }
        m.push(acc.value() / (1.0 - sticks.get(0, p)));
    }
    Ok(m)
}

/// The same recursion in exact rationals; `a`, `b` enter through their exact binary values.
pub fn central_moments_exact(
    mu: &[BigRational],
    stick_a: f64,
    stick_b: f64,
    p_max: usize,
) -> Result<Vec<BigRational>> {
    if mu.len() <= p_max {
        return domain("not enough exact base moments");
    }
    let a = rational(stick_a);
    let b = rational(stick_b);
    let one = BigRational::one();
    // e[i][j] = E[B^i B̄^j]
    let mut e = vec![vec![BigRational::zero(); p_max + 1]; p_max + 1];
    for i in 0..=p_max {
        for j in 0..=(p_max - i) {
            let mut v = one.clone();
            for r in 0..i {
                let r = BigRational::from_integer(BigInt::from(r));
                v = v * (a.clone() + r.clone()) / (a.clone() + b.clone() + r);
            }
            for s in 0..j {
                let s_r = BigRational::from_integer(BigInt::from(s));
                let t = BigRational::from_integer(BigInt::from(i + s));
                v = v * (b.clone() + s_r) / (a.clone() + b.clone() + t);
            }
            e[i][j] = v;
        }
    }
    let mut m = vec![one.clone(), BigRational::zero()];
    for p in 2..=p_max {
        let denom = one.clone() - e[0][p].clone();
        if denom <= BigRational::zero() {
            return Err(Error::DegenerateSticks { p });
        }
        let mut acc = BigRational::zero();
        let mut c = BigInt::one();
        for j in 0..p {
            if j > 0 {
                c = c * BigInt::from(p - j + 1) / BigInt::from(j);
            }
            if m[j].is_zero() || mu[p - j].is_zero() {
                continue;
            }
            acc += BigRational::from_integer(c.clone()) * mu[p - j].clone() * e[p - j][j].clone() * m[j].clone();
        }
        m.push(acc / denom);
    }
    Ok(m)
}

/// Nonnegative function `g` applied to `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GFunction {
    Identity,
    Constant { value: f64 },
    Power { exponent: f64 },
    Indicator { lo: f64, hi: f64 },
}

impl GFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            GFunction::Identity => x,
            GFunction::Constant { value } => value,
            GFunction::Power { exponent } => x.powf(exponent),
            GFunction::Indicator { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Checks `g ≥ 0` on quantiles of the base and at its atoms.
    pub fn check_nonnegative(&self, base: &BaseDistribution) -> Result<()> {
        let mut pts = base.atoms();
        let (lo, hi) = base.effective_support();
        pts.extend([lo, hi]);
        pts.extend((1..1000).map(|k| base.quantile(k as f64 / 1000.0)));
        for x in pts {
            let v = self.eval(x);
            if !(v >= 0.0) {
                return domain(format!("g must be nonnegative on the base support; g({x}) = {v}"));
            }
        }
        Ok(())
    }
}

/// Both sides of `E exp{−b log(1 + u ∫g dP)} = exp[−b ∫ log{1 + u g} dP0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformCheck {
    pub u: f64,
    pub lhs_mc: f64,
    pub mc_se: f64,
    pub rhs_exact: f64,
}

impl TransformCheck {
    /// `|lhs − rhs| / se`.
    pub fn z_score(&self) -> f64 {
        (self.lhs_mc - self.rhs_exact).abs() / self.mc_se
    }
}

/// Truncation used for the stick-breaking draws of [`transform_identity_check`].
pub const TRANSFORM_TRUNCATION: f64 = 1e-10;

/// Monte Carlo left side over `n_sim` stick-breaking draws, quadrature right side.
pub fn transform_identity_check(
    u: f64,
    params: &DpParams,
    g: &GFunction,
    n_sim: usize,
    quad_points: usize,
    rng: &mut RngState,
) -> Result<TransformCheck> {
    if !(u > 0.0 && u.is_finite()) {
        return domain(format!("u must be positive, got {u}"));
    }
    if n_sim < 2 {
        return domain("transform check needs at least two simulations");
    }
    params.validate()?;
    g.check_nonnegative(&params.base)?;
    let b = params.b;
    let integral = params
        .base
        .expect(&|x: f64| (u * g.eval(x)).ln_1p(), quad_points.max(1), 1e-13)?;
    let rhs_exact = (-b * integral).exp();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_sim {
        let p = stick_breaking_sample(params, TRANSFORM_TRUNCATION, rng)?;
        let theta = p.integrate(|x| g.eval(x));
        let v = (-b * (u * theta).ln_1p()).exp();
        sum += v;
        sum_sq += v * v;
    }
    let n = n_sim as f64;
    let lhs_mc = sum / n;
    let var = (sum_sq - n * lhs_mc * lhs_mc) / (n - 1.0);
    Ok(TransformCheck {
        u,
        lhs_mc,
        mc_se: (var.max(0.0) / n).sqrt(),
        rhs_exact,
    })
}

/// Default burn-in: 1% of the steps.
pub fn default_burn_in(steps: usize) -> usize {
    steps / 100
}

/// Iterates `θ ← B Y + B̄ θ` with fresh `B ~ Beta(stick_a, stick_b)` and
/// `Y` from `y_sampler`, starting from a draw of `Y`. Returns the
/// `steps − burn_in` states after burn-in.
pub fn stochastic_chain<F: FnMut(&mut RngState) -> f64>(
    stick_a: f64,
    stick_b: f64,
    mut y_sampler: F,
    steps: usize,
    burn_in: usize,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if steps <= burn_in {
        return domain(format!("steps ({steps}) must exceed burn_in ({burn_in})"));
    }
    if !(stick_a > 0.0 && stick_b > 0.0) {
        return domain("stick parameters must be positive");
    }
    let mut theta = y_sampler(rng);
    let mut out = Vec::with_capacity(steps - burn_in);
    for t in 0..steps {
        let (stick, _) = beta_pair_unchecked(stick_a, stick_b, rng);
        let y = y_sampler(rng);
        let next = theta + stick * (y - theta);
        theta = next.clamp(theta.min(y), theta.max(y));
        if t >= burn_in {
            out.push(theta);
        }
    }
    Ok(out)
}

/// Affine map of chain output so its sample mean and variance equal the
/// exact `θ0` and `m_2`. Not part of the fixed-point construction itself.
pub fn affine_correct(samples: &[f64], theta0: f64, m2: f64) -> Vec<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { (m2 / var).sqrt() } else { 0.0 };
    samples.iter().map(|x| theta0 + (x - mean) * scale).collect()
}
