//! Quantile pyramids on `[0, 1]`.
//!
//! The median is drawn first, then each quartile inside its parent bracket,
//! then the octiles, and so on down to depth `m`. Node `j` of a depth-`m`
//! pyramid holds `q_j = Q(j / 2^m)`; its parents are `j ± s` where `s` is the
//! lowest set bit of `j`.

use crate::error::{domain, Error, Result};
use crate::randkit::{beta_cdf_ext, ln_beta, ln_gamma, RngState};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Brackets narrower than this are treated as numerical collapse.
pub const COLLAPSE_WIDTH: f64 = 1e-14;

/// Deepest supported pyramid.
pub const MAX_DEPTH: usize = 20;

/// Default depth: 15 sedecimiles, 16 cells.
pub const DEFAULT_DEPTH: usize = 4;

/// The density `h` on `[0, 1]`, rescaled to `h / ∫_a^b h` on each bracket.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevelDensity {
    #[default]
    Uniform,
    Beta { alpha: f64, beta: f64 },
}

impl LevelDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LevelDensity::Uniform => Ok(()),
            LevelDensity::Beta { alpha, beta } => {
                if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
                    Ok(())
                } else {
                    domain(format!("level density Beta({alpha}, {beta}) needs positive parameters"))
                }
            }
        }
    }

    /// `ln h(x)`.
    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            LevelDensity::Uniform => 0.0,
            LevelDensity::Beta { alpha, beta } => {
                (alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_beta(alpha, beta)
            }
        }
    }

    /// `∫_0^x h`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            LevelDensity::Uniform => x,
            LevelDensity::Beta { alpha, beta } => beta_cdf_ext(x, alpha, beta),
        }
    }

    /// `ln ∫_a^b h`.
    fn ln_mass(&self, a: f64, b: f64) -> f64 {
        match self {
            LevelDensity::Uniform => (b - a).ln(),
            _ => (self.cdf(b) - self.cdf(a)).ln(),
        }
    }

    /// Log density of `x` under `h` restricted to `(a, b)`.
    pub fn ln_density_on(&self, x: f64, a: f64, b: f64) -> f64 {
        if !(x > a && x < b) {
            return f64::NEG_INFINITY;
        }
        self.ln_density(x) - self.ln_mass(a, b)
    }

    /// Draw from `h` restricted to `(a, b)`.
    pub fn sample_on(&self, a: f64, b: f64, rng: &mut RngState) -> Result<f64> {
        if !(b - a >= COLLAPSE_WIDTH) {
            return Err(Error::Collapse(format!("bracket [{a}, {b}] has collapsed")));
        }
        match *self {
            LevelDensity::Uniform => {
                let x = a + rng.open_uniform() * (b - a);
                Ok(if x > a && x < b { x } else { 0.5 * (a + b) })
            }
            LevelDensity::Beta { .. } => {
                let (ha, hb) = (self.cdf(a), self.cdf(b));
                if !(hb > ha) {
                    return Err(Error::Collapse(format!("bracket [{a}, {b}] carries no mass")));
                }
                let u = ha + rng.open_uniform() * (hb - ha);
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// Dyadic quantiles `q_0 = 0 < q_1 < ⋯ < q_{2^m − 1} < q_{2^m} = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pyramid {
    depth: usize,
    values: Vec<f64>,
}

fn lowest_bit(j: usize) -> usize {
    j & j.wrapping_neg()
}

fn check_depth(depth: usize) -> Result<()> {
    if depth == 0 || depth > MAX_DEPTH {
        return domain(format!("depth must be in 1..={MAX_DEPTH}, got {depth}"));
    }
    Ok(())
}

/// Node indices level by level: median, quartiles, octiles, ...
pub fn tree_order(depth: usize) -> Vec<usize> {
    let k = 1usize << depth;
    (1..=depth)
        .flat_map(|level| {
            let step = 1usize << (depth - level);
            (step..k).step_by(2 * step)
        })
        .collect()
}

impl Pyramid {
    /// From the interior values `q_1..q_{2^m − 1}`.
    pub fn from_interior(depth: usize, interior: &[f64]) -> Result<Self> {
        check_depth(depth)?;
        let k = 1usize << depth;
        if interior.len() != k - 1 {
            return Err(Error::LengthMismatch {
                what: "pyramid interior values",
                left: interior.len(),
                right: k - 1,
            });
        }
        let mut values = Vec::with_capacity(k + 1);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(1.0);
        let p = Self { depth, values };
        if !p.is_valid() {
            return domain("pyramid values must be strictly increasing inside (0, 1)");
        }
        Ok(p)
    }

    /// `q_j = j / 2^m`.
    pub fn equally_spaced(depth: usize) -> Result<Self> {
        check_depth(depth)?;
        let k = 1usize << depth;
        Ok(Self {
            depth,
            values: (0..=k).map(|j| j as f64 / k as f64).collect(),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of cells, `2^m`.
    pub fn cells(&self) -> usize {
        1 << self.depth
    }

    /// `q_j` for `j = 0..=2^m`.
    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// `q_1..q_{2^m − 1}`.
    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    /// Parent bracket indices of node `j`.
    pub fn parents(&self, j: usize) -> (usize, usize) {
        let s = lowest_bit(j);
        (j - s, j + s)
    }

    /// `"j/2^m"`.
    pub fn label(&self, j: usize) -> String {
        format!("{}/{}", j, self.cells())
    }

    pub fn is_valid(&self) -> bool {
        self.values.windows(2).all(|w| w[0] < w[1]) && self.values.iter().all(|v| v.is_finite())
    }

    /// Linear interpolation between the dyadic quantiles.
    pub fn quantile(&self, y: f64) -> f64 {
        let t = y.clamp(0.0, 1.0) * self.cells() as f64;
        let j = (t.floor() as usize).min(self.cells() - 1);
        let f = t - j as f64;
        self.values[j] + f * (self.values[j + 1] - self.values[j])
    }

    /// `N_j`: counts in `[q_{j−1}, q_j)`, the last cell closed. `data` must lie in `[0, 1]`.
    pub fn cell_counts(&self, data: &[f64]) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; self.cells()];
        let inner = self.interior();
        for &x in data {
            if !(0.0..=1.0).contains(&x) {
                return domain(format!("data value {x} lies outside [0, 1]"));
            }
            counts[inner.partition_point(|&q| q <= x)] += 1;
        }
        Ok(counts)
    }
}

/// Level-by-level prior draw.
pub fn sample_prior(depth: usize, level: &LevelDensity, rng: &mut RngState) -> Result<Pyramid> {
    check_depth(depth)?;
    level.validate()?;
    let mut p = Pyramid::equally_spaced(depth)?;
    for j in tree_order(depth) {
        let (l, r) = p.parents(j);
        p.values[j] = level.sample_on(p.values[l], p.values[r], rng)?;
    }
    Ok(p)
}

/// Log prior density of a pyramid; `−∞` when a node leaves its parent bracket.
pub fn log_prior(p: &Pyramid, level: &LevelDensity) -> f64 {
    let mut total = 0.0;
    for j in 1..p.cells() {
        let (l, r) = p.parents(j);
        let (a, b) = (p.values[l], p.values[r]);
        if b - a < COLLAPSE_WIDTH {
            return f64::NEG_INFINITY;
        }
        total += level.ln_density_on(p.values[j], a, b);
    }
    total
}

/// `ln L_{n,1} = Σ_j N_j ln{1/(q_j − q_{j−1})}`.
pub fn loglik_interp(p: &Pyramid, data: &[f64]) -> Result<f64> {
    let counts = p.cell_counts(data)?;
    Ok(interp_from_counts(p, &counts))
}

fn interp_from_counts(p: &Pyramid, counts: &[usize]) -> f64 {
    let mut total = 0.0;
    for (j, &n) in counts.iter().enumerate() {
        let w = p.values[j + 1] - p.values[j];
        if !(w > 0.0) {
            return f64::NEG_INFINITY;
        }
        if n > 0 {
            total -= n as f64 * w.ln();
        }
    }
    total
}

/// `ln L_{n,2} = ln n! − Σ_j ln N_j! + n ln(1/2^m)`.
pub fn loglik_substitute(p: &Pyramid, data: &[f64]) -> Result<f64> {
    let counts = p.cell_counts(data)?;
    Ok(substitute_from_counts(&counts, p.depth))
}

/// The multinomial log-probability of `counts` with equal cell probabilities `2^{−depth}`.
pub fn substitute_from_counts(counts: &[usize], depth: usize) -> f64 {
    let n: usize = counts.iter().sum();
    ln_gamma(n as f64 + 1.0) - counts.iter().map(|&c| ln_gamma(c as f64 + 1.0)).sum::<f64>()
        - n as f64 * depth as f64 * LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Likelihood {
    Interp,
    #[default]
    Substitute,
}

impl Likelihood {
    fn from_counts(&self, p: &Pyramid, counts: &[usize]) -> f64 {
        match self {
            Likelihood::Interp => interp_from_counts(p, counts),
            Likelihood::Substitute => substitute_from_counts(counts, p.depth),
        }
    }
}

/// Run lengths and move settings for [`posterior_sampler`]. One sweep updates every node once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    /// Retained draws.
    pub iterations: usize,
    /// Sweeps discarded before the first retained draw.
    pub burn_in: usize,
    /// Sweeps per retained draw.
    pub thin: usize,
    /// Random-walk half-width as a fraction of the parent bracket.
    pub proposal_scale: f64,
    /// Carry the node's descendants along affinely when it moves.
    pub rescale_subtree: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 200,
            thin: 5,
            proposal_scale: 0.5,
            rescale_subtree: true,
        }
    }
}

/// Retained pyramids and per-node acceptance rates (tree order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PyramidChain {
    pub draws: Vec<Pyramid>,
    pub acceptance: Vec<(usize, f64)>,
}

impl PyramidChain {
    /// Posterior mean of `q_j`.
    pub fn node_mean(&self, j: usize) -> f64 {
        self.draws.iter().map(|p| p.value(j)).sum::<f64>() / self.draws.len() as f64
    }

    /// Draws of `q_j`.
    pub fn node_draws(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|p| p.value(j)).collect()
    }

    /// `(iteration, node label, value)` rows in tree order.
    pub fn rows(&self) -> Vec<(usize, String, f64)> {
        let Some(first) = self.draws.first() else {
            return Vec::new();
        };
        let order = tree_order(first.depth);
        self.draws
            .iter()
            .enumerate()
            .flat_map(|(i, p)| order.iter().map(move |&j| (i, p.label(j), p.value(j))))
            .collect()
    }
}

fn reflect(x: f64, a: f64, b: f64) -> f64 {
    let w = b - a;
    // Fold into [a, a + 2w) then mirror the upper half.
    let mut t = (x - a).rem_euclid(2.0 * w);
    if t > w {
        t = 2.0 * w - t;
    }
    a + t
}

/// Recounts cells `from..to` (0-based; cell `c` is `[q_c, q_{c+1})`, the last one closed).
fn recount(sorted: &[f64], q: &[f64], counts: &mut [usize], from: usize, to: usize) {
    let lb = |t: f64| sorted.partition_point(|&x| x < t);
    let last = q.len() - 1;
    let mut start = lb(q[from]);
    for c in from..to {
        let end = if c + 1 == last { sorted.len() } else { lb(q[c + 1]) };
        counts[c] = end - start;
        start = end;
    }
}

/// Metropolis-within-Gibbs over the nodes in tree order, started from the
/// equally spaced pyramid.
///
/// Node `j` with parent bracket `(a, b)` gets a uniform random-walk proposal
/// of half-width `proposal_scale · (b − a)`, reflected into the bracket. With
/// `rescale_subtree` its descendants are mapped affinely from `(a, q_j)` and
/// `(q_j, b)` onto the new sub-brackets, and the ratio carries the Jacobian
/// `r_L^{s−1} r_R^{s−1}` (`s − 1` descendants on each side). Without it only
/// `q_j` moves and proposals crossing a neighbour are rejected.
pub fn posterior_sampler(
    depth: usize,
    level: &LevelDensity,
    data: &[f64],
    likelihood: Likelihood,
    settings: &SamplerSettings,
    rng: &mut RngState,
) -> Result<PyramidChain> {
    check_depth(depth)?;
    level.validate()?;
    if settings.iterations == 0 || settings.thin == 0 {
        return domain("iterations and thin must be at least 1");
    }
    if !(settings.proposal_scale > 0.0 && settings.proposal_scale.is_finite()) {
        return domain("proposal_scale must be positive");
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut state = Pyramid::equally_spaced(depth)?;
    let mut counts = state.cell_counts(&sorted)?;
    let mut log_post = log_prior(&state, level) + likelihood.from_counts(&state, &counts);
    let order = tree_order(depth);
    let mut accepted = vec![0usize; state.cells()];
    let sweeps = settings.burn_in + settings.iterations * settings.thin;
    let mut draws = Vec::with_capacity(settings.iterations);
    let mut candidate = state.clone();
    let mut candidate_counts = counts.clone();

    for sweep in 0..sweeps {
        for &j in &order {
            let s = lowest_bit(j);
            let (a, b) = (state.values[j - s], state.values[j + s]);
            let current = state.values[j];
            let proposal = reflect(current + settings.proposal_scale * (b - a) * (2.0 * rng.uniform() - 1.0), a, b);
            if !(proposal > a && proposal < b) || proposal == current {
                continue;
            }
            let rescale = settings.rescale_subtree && s > 1;
            let (from, to) = if rescale { (j - s, j + s) } else { (j - 1, j + 1) };
            if !rescale && !(proposal > state.values[j - 1] && proposal < state.values[j + 1]) {
                continue;
            }
            candidate.values.copy_from_slice(&state.values);
            candidate.values[j] = proposal;
            let mut log_jacobian = 0.0;
            if rescale {
                let (r_left, r_right) = ((proposal - a) / (current - a), (b - proposal) / (b - current));
                for k in (j - s + 1)..j {
                    candidate.values[k] = a + (state.values[k] - a) * r_left;
                }
                for k in (j + 1)..(j + s) {
                    candidate.values[k] = b - (b - state.values[k]) * r_right;
                }
                log_jacobian = (s - 1) as f64 * (r_left.ln() + r_right.ln());
            }
            candidate_counts.copy_from_slice(&counts);
            recount(&sorted, &candidate.values, &mut candidate_counts, from, to);
            let target = log_prior(&candidate, level) + likelihood.from_counts(&candidate, &candidate_counts);
            let log_ratio = target - log_post + log_jacobian;
            if target.is_finite() && (log_ratio >= 0.0 || rng.open_uniform().ln() < log_ratio) {
                std::mem::swap(&mut state, &mut candidate);
                std::mem::swap(&mut counts, &mut candidate_counts);
                log_post = target;
                accepted[j] += 1;
            }
        }
        if sweep >= settings.burn_in && (sweep - settings.burn_in + 1) % settings.thin == 0 {
            draws.push(state.clone());
        }
    }
    let acceptance = order
        .iter()
        .map(|&j| (j, accepted[j] as f64 / sweeps as f64))
        .collect();
    Ok(PyramidChain { draws, acceptance })
}
