//! Base (prior guess) distributions on the real line.

use crate::error::{domain, Error, Result};
use crate::numeric::integrate;
use crate::randkit::{normal_cdf, normal_quantile, std_normal, RngState};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Prior guess distribution `P0` (also used for `F0`, `G0` and jump laws of `Y`).
///
/// `Mixture` is the normalized total measure `prior_mass · prior + Σ δ(atom)`,
/// i.e. weight `prior_mass / (prior_mass + n)` on `prior` and `1 / (prior_mass + n)`
/// on each atom. It is what the conjugate Dirichlet update produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Cauchy {
        location: f64,
        scale: f64,
    },
    Empirical {
        points: Vec<f64>,
    },
    Mixture {
        prior: Box<BaseDistribution>,
        prior_mass: f64,
        atoms: Vec<f64>,
    },
}

const TAIL: f64 = 1e-17;

impl BaseDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Self::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn standard_normal() -> Self {
        Self::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let d = Self::Normal { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(points: Vec<f64>) -> Result<Self> {
        let d = Self::Empirical { points };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return domain(format!("uniform needs finite lo < hi, got [{lo}, {hi}]"));
                }
            }
            Self::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                    return domain(format!("normal needs finite mean and sd > 0, got ({mean}, {sd})"));
                }
            }
            Self::Cauchy { location, scale } => {
                if !(location.is_finite() && scale.is_finite() && *scale > 0.0) {
                    return domain(format!(
                        "cauchy needs finite location and scale > 0, got ({location}, {scale})"
                    ));
                }
            }
            Self::Empirical { points } => {
                if points.is_empty() || points.iter().any(|x| !x.is_finite()) {
                    return domain("empirical base needs a nonempty list of finite points");
                }
            }
            Self::Mixture {
                prior,
                prior_mass,
                atoms,
            } => {
                prior.validate()?;
                if !(prior_mass.is_finite() && *prior_mass > 0.0) {
                    return domain(format!("mixture prior mass must be positive, got {prior_mass}"));
                }
                if atoms.iter().any(|x| !x.is_finite()) {
                    return domain("mixture atoms must be finite");
                }
            }
        }
        Ok(())
    }

    /// Weight on the prior component of a mixture (1 for the plain families).
    pub fn prior_weight(&self) -> f64 {
        match self {
            Self::Mixture {
                prior_mass, atoms, ..
            } => prior_mass / (prior_mass + atoms.len() as f64),
            _ => 1.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            Self::Cauchy { location, scale } => 0.5 + ((x - location) / scale).atan() / PI,
            Self::Empirical { points } => {
                points.iter().filter(|&&p| p <= x).count() as f64 / points.len() as f64
            }
            Self::Mixture {
                prior,
                prior_mass,
                atoms,
            } => {
                let total = prior_mass + atoms.len() as f64;
                let hits = atoms.iter().filter(|&&p| p <= x).count() as f64;
                (prior_mass * prior.cdf(x) + hits) / total
            }
        }
    }

    /// `F(x−)`, the mass strictly below `x`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Self::Empirical { points } => {
                points.iter().filter(|&&p| p < x).count() as f64 / points.len() as f64
            }
            Self::Mixture {
                prior,
                prior_mass,
                atoms,
            } => {
                let total = prior_mass + atoms.len() as f64;
                let hits = atoms.iter().filter(|&&p| p < x).count() as f64;
                (prior_mass * prior.cdf_left(x) + hits) / total
            }
            _ => self.cdf(x),
        }
    }

    /// Left-continuous inverse `inf{x : F(x) ≥ p}` for `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => lo + p.clamp(0.0, 1.0) * (hi - lo),
            Self::Normal { mean, sd } => mean + sd * normal_quantile(p),
            Self::Cauchy { location, scale } => location + scale * (PI * (p - 0.5)).tan(),
            Self::Empirical { points } => {
                let mut s = points.clone();
                s.sort_by(f64::total_cmp);
                let k = ((p * s.len() as f64).ceil() as usize).clamp(1, s.len());
                s[k - 1]
            }
            Self::Mixture { prior, atoms, .. } => {
                let mut lo = prior.quantile(TAIL);
                let mut hi = prior.quantile(1.0 - 1e-12);
                for &a in atoms {
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
                lo -= 1.0 + lo.abs();
                while self.cdf(hi) < p {
                    hi += 1.0 + hi.abs();
                }
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        return hi;
                    }
                    if self.cdf(mid) >= p {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut RngState) -> f64 {
        match self {
            Self::Uniform { lo, hi } => rng.uniform_in(*lo, *hi),
            Self::Normal { mean, sd } => mean + sd * std_normal(rng),
            Self::Cauchy { location, scale } => {
                location + scale * (PI * (rng.open_uniform() - 0.5)).tan()
            }
            Self::Empirical { points } => points[rng.index(points.len())],
            Self::Mixture {
                prior,
                prior_mass,
                atoms,
            } => {
                let total = prior_mass + atoms.len() as f64;
                let u = rng.uniform() * total;
                if u < *prior_mass || atoms.is_empty() {
                    prior.sample(rng)
                } else {
                    atoms[rng.index(atoms.len())]
                }
            }
        }
    }

    pub fn has_finite_mean(&self) -> bool {
        match self {
            Self::Cauchy { .. } => false,
            Self::Mixture { prior, .. } => prior.has_finite_mean(),
            _ => true,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Self::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            Self::Normal { mean, .. } => Some(*mean),
            Self::Cauchy { .. } => None,
            Self::Empirical { points } => Some(points.iter().sum::<f64>() / points.len() as f64),
            Self::Mixture {
                prior,
                prior_mass,
                atoms,
            } => {
                let total = prior_mass + atoms.len() as f64;
                Some((prior_mass * prior.mean()? + atoms.iter().sum::<f64>()) / total)
            }
        }
    }

    /// Interval outside of which the base puts at most about 1e-17 of its mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match self {
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Normal { mean, sd } => {
                let z = -normal_quantile(TAIL);
                (mean - z * sd, mean + z * sd)
            }
            Self::Cauchy { location, scale } => {
                let z = (PI * (0.5 - TAIL)).tan();
                (location - z * scale, location + z * scale)
            }
            Self::Empirical { points } => points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &p| (l.min(p), h.max(p))),
            Self::Mixture { prior, atoms, .. } => atoms
                .iter()
                .fold(prior.effective_support(), |(l, h), &p| (l.min(p), h.max(p))),
        }
    }

    /// Locations of point masses, sorted.
    pub fn atoms(&self) -> Vec<f64> {
        let mut v = match self {
            Self::Empirical { points } => points.clone(),
            Self::Mixture { prior, atoms, .. } => {
                let mut v = prior.atoms();
                v.extend_from_slice(atoms);
                v
            }
            _ => Vec::new(),
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// `∫ g dP0` by adaptive quadrature (exact averages for point masses).
    pub fn expect<G: Fn(f64) -> f64>(&self, g: &G, panels: usize, tol: f64) -> Result<f64> {
        match self {
            Self::Uniform { lo, hi } => {
                let w = hi - lo;
                Ok(integrate(|x| g(x), *lo, *hi, panels, tol * w, 0.0)?.value / w)
            }
            Self::Normal { mean, sd } => {
                let z = 12.0;
                let c = 1.0 / (2.0 * PI).sqrt();
                let q = integrate(
                    |t| g(mean + sd * t) * c * (-0.5 * t * t).exp(),
                    -z,
                    z,
                    panels.max(8),
                    tol,
                    0.0,
                )?;
                Ok(q.value)
            }
            Self::Cauchy { .. } => {
                let q = integrate(|p| g(self.quantile(p)), 0.0, 1.0, panels, tol, 0.0)
                    .map_err(|e| Error::Quadrature(format!("expectation under cauchy base: {e}")))?;
                Ok(q.value)
            }
            Self::Empirical { points } => {
                Ok(points.iter().map(|&x| g(x)).sum::<f64>() / points.len() as f64)
            }
            Self::Mixture {
                prior,
                prior_mass,
                atoms,
            } => {
                let total = prior_mass + atoms.len() as f64;
                let e = prior.expect(g, panels, tol)?;
                Ok((prior_mass * e + atoms.iter().map(|&x| g(x)).sum::<f64>()) / total)
            }
        }
    }
}
