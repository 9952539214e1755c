//! Nonparametric envelopes around a parametric regression model.
//!
//! With `G ~ Dir(b, G0)` for standardized residuals, the posterior mean of
//! `G(t)` given `(β, σ)` draws is `w_n G0(t) + (1 − w_n) n^{−1} Σ Pr{r_i ≤ t}`,
//! `w_n = b/(b+n)`. Pinning `G(B_j) = z_j` on a partition multiplies the
//! likelihood by `M_n(θ) = Π (b z_j)^{N_j} / (b z_j)^{[N_j]}`.

use crate::base::BaseDistribution;
use crate::error::{domain, Error, Result};
use crate::randkit::ln_gamma;
use serde::{Deserialize, Serialize};

/// `r_i = (y_i − x_i'β) / σ`.
pub fn standardized_residuals(y: &[f64], rows: &[Vec<f64>], beta: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if y.len() != rows.len() {
        return Err(Error::LengthMismatch {
            what: "responses and covariate rows",
            left: y.len(),
            right: rows.len(),
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    y.iter()
        .zip(rows)
        .map(|(&yi, row)| {
            if row.len() != beta.len() {
                return Err(Error::LengthMismatch {
                    what: "covariate row and beta",
                    left: row.len(),
                    right: beta.len(),
                });
            }
            let fit: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            Ok((yi - fit) / sigma)
        })
        .collect()
}

/// Prior weight `w_n = b / (b + n)`.
pub fn prior_weight(b: f64, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        b / (b + n as f64)
    }
}

/// `Ĝ(t)` from residual vectors, one per posterior draw. `w_override`
/// replaces `b/(b+n)`, e.g. for generalized stick laws.
pub fn predictive_cdf(
    t: f64,
    residual_draws: &[Vec<f64>],
    b: f64,
    base: &BaseDistribution,
    w_override: Option<f64>,
) -> Result<f64> {
    let n = residual_draws.first().map_or(0, Vec::len);
    if let Some(bad) = residual_draws.iter().find(|d| d.len() != n) {
        return Err(Error::LengthMismatch {
            what: "residual draws",
            left: n,
            right: bad.len(),
        });
    }
    if !(b > 0.0 && b.is_finite()) {
        return domain(format!("b must be positive, got {b}"));
    }
    let w = match w_override {
        Some(w) if (0.0..=1.0).contains(&w) => w,
        Some(w) => return domain(format!("w_n override must lie in [0, 1], got {w}")),
        None => prior_weight(b, n),
    };
    if n == 0 || residual_draws.is_empty() {
        return Ok(base.cdf(t));
    }
    let below = residual_draws
        .iter()
        .flat_map(|d| d.iter())
        .filter(|&&r| r <= t)
        .count();
    let empirical = below as f64 / (n * residual_draws.len()) as f64;
    Ok((w * base.cdf(t) + (1.0 - w) * empirical).clamp(0.0, 1.0))
}

/// `ln x^{[m]} = ln Γ(x + m) − ln Γ(x)`.
pub fn rising_factorial_log(x: f64, m: u64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return domain(format!("rising factorial needs x > 0, got {x}"));
    }
    if m == 0 {
        return Ok(0.0);
    }
    if m <= 32 {
        // Direct product is exact enough and sidesteps cancellation for large x.
        return Ok((0..m).map(|k| (x + k as f64).ln()).sum());
    }
    Ok(ln_gamma(x + m as f64) - ln_gamma(x))
}

fn check_targets(z: &[f64]) -> Result<()> {
    if z.is_empty() || z.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return domain("control targets must be positive");
    }
    let total: f64 = z.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("control targets must sum to 1, got {total}"));
    }
    Ok(())
}

/// `ln M_n = Σ_j [N_j ln(b z_j) − ln (b z_j)^{[N_j]}]`.
pub fn control_log_factor(counts: &[u64], z: &[f64], b: f64) -> Result<f64> {
    if counts.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "control counts and targets",
            left: counts.len(),
            right: z.len(),
        });
    }
    check_targets(z)?;
    if !(b > 0.0 && b.is_finite()) {
        return domain(format!("b must be positive, got {b}"));
    }
    let mut total = 0.0;
    for (&nj, &zj) in counts.iter().zip(z) {
        if nj > 0 {
            let bz = b * zj;
            total += nj as f64 * bz.ln() - rising_factorial_log(bz, nj)?;
        }
    }
    Ok(total)
}

/// Residuals at one parameter value with a control partition of the line.
///
/// Cell `j` is `[c_{j−1}, c_j)` with `c_0 = −∞`, `c_k = +∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualSet {
    pub residuals: Vec<f64>,
    /// Interior cut points, strictly increasing; `k − 1` of them.
    pub cuts: Vec<f64>,
    pub z: Vec<f64>,
}

impl ResidualSet {
    pub fn new(residuals: Vec<f64>, cuts: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let s = Self { residuals, cuts, z };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cuts.len() + 1 != self.z.len() {
            return Err(Error::LengthMismatch {
                what: "control cells (cuts + 1) and targets",
                left: self.cuts.len() + 1,
                right: self.z.len(),
            });
        }
        if !self.cuts.windows(2).all(|w| w[0] < w[1]) || self.cuts.iter().any(|c| !c.is_finite()) {
            return domain("control cut points must be finite and strictly increasing");
        }
        if self.residuals.iter().any(|r| r.is_nan()) {
            return domain("residuals must not be NaN");
        }
        check_targets(&self.z)
    }

    pub fn cell_of(&self, r: f64) -> usize {
        self.cuts.partition_point(|&c| c <= r)
    }

    /// `N_j`, the number of residuals in each cell.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.z.len()];
        for &r in &self.residuals {
            counts[self.cell_of(r)] += 1;
        }
        counts
    }

    pub fn log_factor(&self, b: f64) -> Result<f64> {
        control_log_factor(&self.counts(), &self.z, b)
    }

    /// Total-variation distance between cell frequencies and targets.
    pub fn frequency_distance(&self) -> f64 {
        let n = self.residuals.len().max(1) as f64;
        0.5 * self
            .counts()
            .iter()
            .zip(&self.z)
            .map(|(&c, &z)| (c as f64 / n - z).abs())
            .sum::<f64>()
    }
}
