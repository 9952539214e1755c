//! Cumulative-damage frailty processes.
//!
//! `Z(t) = Σ_{j ≤ M(t)} θ G_j` with `M` a Poisson process of cumulative rate
//! `Λ`. Given the path, survival is `exp{−Z(t)}`; marginally
//! `S(t) = exp[−Λ(t){1 − L0(θ)}]` with `L0` the Laplace transform of `G`.

use crate::error::{domain, Error, Result};
use crate::numeric::integrate;
use crate::randkit::{ln_beta, sample_beta, sample_gamma, std_normal, RngState};
use serde::{Deserialize, Serialize};

/// Law of the damage increments `G_j ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Gamma with the given shape and unit rate: `L0(u) = (1 + u)^{−shape}`.
    Gamma { shape: f64 },
    /// `G ≡ value`.
    PointMass { value: f64 },
    /// `G = −ln(1 − R)` with risk multiplier `R ~ Beta(alpha, beta)`:
    /// `L0(u) = E(1 − R)^u = B(alpha, beta + u) / B(alpha, beta)`.
    RiskBeta { alpha: f64, beta: f64 },
    /// `ln G ~ N(mu, sigma²)`; simulable, no closed-form transform.
    LogNormal { mu: f64, sigma: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::Gamma { shape } => shape > 0.0 && shape.is_finite(),
            JumpLaw::PointMass { value } => value >= 0.0 && value.is_finite(),
            JumpLaw::RiskBeta { alpha, beta } => {
                alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()
            }
            JumpLaw::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid jump law parameters {self:?}"))
        }
    }

    pub fn sample(&self, rng: &mut RngState) -> Result<f64> {
        match *self {
            JumpLaw::Gamma { shape } => sample_gamma(shape, rng),
            JumpLaw::PointMass { value } => Ok(value),
            JumpLaw::RiskBeta { alpha, beta } => {
                // −ln(1 − R) with 1 − R ~ Beta(beta, alpha)
                Ok(-sample_beta(beta, alpha, rng)?.ln())
            }
            JumpLaw::LogNormal { mu, sigma } => Ok((mu + sigma * std_normal(rng)).exp()),
        }
    }

    /// `1 − L0(u)`, computed without cancellation for small `u`.
    pub fn one_minus_laplace(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return domain(format!("Laplace argument must be nonnegative, got {u}"));
        }
        match *self {
            JumpLaw::Gamma { shape } => Ok(-(-shape * u.ln_1p()).exp_m1()),
            JumpLaw::PointMass { value } => Ok(-(-u * value).exp_m1()),
            JumpLaw::RiskBeta { alpha, beta } => {
                if u == 1.0 {
                    Ok(alpha / (alpha + beta))
                } else {
                    Ok(-(ln_beta(alpha, beta + u) - ln_beta(alpha, beta)).exp_m1())
                }
            }
            JumpLaw::LogNormal { .. } => Err(Error::UnsupportedJumpLaw(format!(
                "{self:?} has no closed-form Laplace transform"
            ))),
        }
    }

    /// `L0(u) = E exp(−u G)`.
    pub fn laplace(&self, u: f64) -> Result<f64> {
        Ok(1.0 - self.one_minus_laplace(u)?)
    }
}

/// Cumulative Poisson rate `Λ(t)` with `Λ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateFunction {
    /// `Λ(t) = kappa t`.
    Linear { kappa: f64 },
    /// `Λ(t) = kappa t^power`.
    Power { kappa: f64, power: f64 },
}

impl Default for RateFunction {
    fn default() -> Self {
        RateFunction::Linear { kappa: 1.0 }
    }
}

impl RateFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateFunction::Linear { kappa } => kappa >= 0.0 && kappa.is_finite(),
            RateFunction::Power { kappa, power } => {
                kappa >= 0.0 && kappa.is_finite() && power > 0.0 && power.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid rate function {self:?}"))
        }
    }

    /// `Λ(t)`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            RateFunction::Linear { kappa } => kappa * t,
            RateFunction::Power { kappa, power } => kappa * t.powf(power),
        }
    }

    /// `λ(s) = Λ'(s)`.
    pub fn intensity(&self, s: f64) -> f64 {
        match *self {
            RateFunction::Linear { kappa } => kappa,
            RateFunction::Power { kappa, power } => kappa * power * s.powf(power - 1.0),
        }
    }

    /// `Λ^{−1}(v)`; requires `kappa > 0`.
    pub fn inverse(&self, v: f64) -> f64 {
        match *self {
            RateFunction::Linear { kappa } => v / kappa,
            RateFunction::Power { kappa, power } => (v / kappa).powf(1.0 / power),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrailtySpec {
    pub theta: f64,
    pub jump_law: JumpLaw,
    #[serde(default)]
    pub rate: RateFunction,
}

impl FrailtySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return domain(format!("theta must be finite and nonnegative, got {}", self.theta));
        }
        self.jump_law.validate()?;
        self.rate.validate()
    }

    /// `1 − L0(θ)`, the fraction of Poisson shocks that register as hazard.
    pub fn thinning(&self) -> Result<f64> {
        self.jump_law.one_minus_laplace(self.theta)
    }
}

/// Jump times on `[0, t_max]` with the raw increments `G_j` and running `Z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DamagePath {
    pub t_max: f64,
    pub theta: f64,
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    /// `Z` just after each jump.
    pub z: Vec<f64>,
}

impl DamagePath {
    /// `M(t)`.
    pub fn jump_count(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// `Z(t)`, right-continuous.
    pub fn z_at(&self, t: f64) -> f64 {
        match self.jump_count(t) {
            0 => 0.0,
            k => self.z[k - 1],
        }
    }

    /// `exp{−Z(t)}`.
    pub fn conditional_survival(&self, t: f64) -> f64 {
        (-self.z_at(t)).exp()
    }

    /// `∏_{j ≤ M(t)} (1 − R_j)^θ` with `R_j = 1 − exp(−G_j)`.
    pub fn survival_product(&self, t: f64) -> f64 {
        self.increments[..self.jump_count(t)]
            .iter()
            .map(|g| {
                let r = -(-g).exp_m1();
                (1.0 - r).powf(self.theta)
            })
            .product()
    }
}

/// One path on `[0, t_max]`: arrival times are `Λ^{−1}` of unit-rate Poisson arrivals.
pub fn simulate_path(spec: &FrailtySpec, t_max: f64, rng: &mut RngState) -> Result<DamagePath> {
    spec.validate()?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return domain(format!("t_max must be positive, got {t_max}"));
    }
    let horizon = spec.rate.cumulative(t_max);
    let mut path = DamagePath {
        t_max,
        theta: spec.theta,
        times: Vec::new(),
        increments: Vec::new(),
        z: Vec::new(),
    };
    let mut clock = 0.0;
    let mut z = 0.0;
    loop {
        clock -= rng.open_uniform().ln();
        if clock > horizon {
            break;
        }
        let g = spec.jump_law.sample(rng)?;
        z += spec.theta * g;
        path.times.push(spec.rate.inverse(clock).min(t_max));
        path.increments.push(g);
        path.z.push(z);
    }
    Ok(path)
}

/// `S(t) = exp[−Λ(t){1 − L0(θ)}]`.
pub fn marginal_survival(spec: &FrailtySpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0) {
        return domain(format!("t must be nonnegative, got {t}"));
    }
    Ok((-spec.rate.cumulative(t) * spec.thinning()?).exp())
}

/// `h(s) = λ(s){1 − L0(θ)}`.
pub fn hazard_rate(spec: &FrailtySpec, s: f64) -> Result<f64> {
    spec.validate()?;
    if !(s >= 0.0) {
        return domain(format!("s must be nonnegative, got {s}"));
    }
    Ok(spec.rate.intensity(s) * spec.thinning()?)
}

/// How covariates enter the frailty process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegressionStructure {
    /// Common `θ` and `G` law; Poisson intensity `λ0(s) exp(β'x)`.
    Cox { theta: f64, jump_law: JumpLaw },
    /// `θ = 1`, `R ~ Beta(c μ(x), c − c μ(x))` with `μ(x) = logistic(γ'x)`.
    BetaMultiplier { c: f64, gamma: Vec<f64> },
}

/// `h_i(s) = λ0(s) · rate_multiplier · thinning`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndividualHazard {
    pub baseline: RateFunction,
    /// `exp(β'x_i)`.
    pub rate_multiplier: f64,
    /// `1 − L0(θ_i)`.
    pub thinning: f64,
    /// The individual's own process.
    pub spec: FrailtySpec,
}

impl IndividualHazard {
    pub fn hazard(&self, s: f64) -> f64 {
        self.baseline.intensity(s) * self.rate_multiplier * self.thinning
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        self.baseline.cumulative(t) * self.rate_multiplier * self.thinning
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scale_rate(rate: &RateFunction, m: f64) -> RateFunction {
    match *rate {
        RateFunction::Linear { kappa } => RateFunction::Linear { kappa: kappa * m },
        RateFunction::Power { kappa, power } => RateFunction::Power { kappa: kappa * m, power },
    }
}

/// Per-individual hazards for covariate vectors `x_i`.
pub fn regression_hazards(
    covariates: &[Vec<f64>],
    beta: &[f64],
    structure: &RegressionStructure,
    baseline: &RateFunction,
) -> Result<Vec<IndividualHazard>> {
    baseline.validate()?;
    covariates
        .iter()
        .map(|x| {
            if x.len() != beta.len() {
                return Err(Error::LengthMismatch {
                    what: "covariates and beta",
                    left: x.len(),
                    right: beta.len(),
                });
            }
            let rate_multiplier = dot(beta, x).exp();
            let (theta, jump_law) = match structure {
                RegressionStructure::Cox { theta, jump_law } => (*theta, *jump_law),
                RegressionStructure::BetaMultiplier { c, gamma } => {
                    if gamma.len() != x.len() {
                        return Err(Error::LengthMismatch {
                            what: "covariates and gamma",
                            left: x.len(),
                            right: gamma.len(),
                        });
                    }
                    let eta = dot(gamma, x);
                    let mu = 1.0 / (1.0 + (-eta).exp());
                    let (alpha, beta_param) = (c * mu, c - c * mu);
                    if !(alpha > 0.0 && beta_param > 0.0) {
                        return domain(format!(
                            "risk-multiplier law Beta({alpha}, {beta_param}) is invalid (c = {c}, mu = {mu})"
                        ));
                    }
                    (
                        1.0,
                        JumpLaw::RiskBeta {
                            alpha,
                            beta: beta_param,
                        },
                    )
                }
            };
            let spec = FrailtySpec {
                theta,
                jump_law,
                rate: scale_rate(baseline, rate_multiplier),
            };
            spec.validate()?;
            Ok(IndividualHazard {
                baseline: *baseline,
                rate_multiplier,
                thinning: spec.thinning()?,
                spec,
            })
        })
        .collect()
}

/// `exp{−∫_0^t h(s) ds}` by quadrature, for checking against [`marginal_survival`].
pub fn survival_from_hazard(spec: &FrailtySpec, t: f64) -> Result<f64> {
    let q = integrate(|s| hazard_rate(spec, s).unwrap_or(f64::NAN), 0.0, t, 4, 1e-12, 1e-13)?;
    Ok((-q.value).exp())
}
