//! Local Bayesian regression with a local-constant model.
//!
//! Data pairs near `x` carry information weight `K̄((x_i − x)/h)` with
//! `K̄ = K / K(0)` supported on `[−½, ½]`. A `N(m0(x), σ²/w0(x))` prior on
//! the local level combined with the weighted Gaussian likelihood gives a
//! `N(m̂(x), σ²/(w0 + s0))` posterior, `s0 = Σ K̄`.

use crate::error::{domain, Error, Result};
use crate::randkit::{std_normal, RngState};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Floor on the estimated prior variance in the empirical-Bayes step.
pub const EB_FLOOR: f64 = 1e-8;

/// Symmetric unimodal kernels on `[−½, ½]`, each integrating to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Uniform,
    #[default]
    Epanechnikov,
    Triangular,
    Biweight,
}

impl Kernel {
    /// `K(u)`.
    pub fn density(&self, u: f64) -> f64 {
        if u.abs() > 0.5 {
            return 0.0;
        }
        match self {
            Kernel::Uniform => 1.0,
            Kernel::Epanechnikov => 1.5 * (1.0 - 4.0 * u * u),
            Kernel::Triangular => 2.0 * (1.0 - 2.0 * u.abs()),
            Kernel::Biweight => {
                let v = 1.0 - 4.0 * u * u;
                1.875 * v * v
            }
        }
    }

    /// `K(0)`.
    pub fn peak(&self) -> f64 {
        self.density(0.0)
    }

    /// `K̄(u) = K(u) / K(0)`.
    pub fn scaled(&self, u: f64) -> f64 {
        if u.abs() > 0.5 {
            return 0.0;
        }
        match self {
            Kernel::Uniform => 1.0,
            Kernel::Epanechnikov => 1.0 - 4.0 * u * u,
            Kernel::Triangular => 1.0 - 2.0 * u.abs(),
            Kernel::Biweight => {
                let v = 1.0 - 4.0 * u * u;
                v * v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RegressionData {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = Self { x, y };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::LengthMismatch {
                what: "regression x and y",
                left: self.x.len(),
                right: self.y.len(),
            });
        }
        if self.x.is_empty() {
            return domain("regression data must contain at least one pair");
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return domain("regression data must be finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Piecewise-linear interpolation through `(xs, ys)`, flat outside.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&t| t <= x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let f = (x - x0) / (x1 - x0);
    ys[k - 1] + f * (ys[k] - ys[k - 1])
}

fn check_table(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() || xs.is_empty() {
        return domain("tabulated function needs equal-length, nonempty x and y");
    }
    if !xs.windows(2).all(|w| w[0] < w[1]) {
        return domain("tabulated x values must be strictly increasing");
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return domain("tabulated values must be finite");
    }
    Ok(())
}

/// Prior guess `m0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorGuess {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

impl PriorGuess {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PriorGuess::Constant { value } => *value,
            PriorGuess::Linear { intercept, slope } => intercept + slope * x,
            PriorGuess::Tabulated { x: xs, y } => interpolate(xs, y, x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorGuess::Constant { value } if value.is_finite() => Ok(()),
            PriorGuess::Linear { intercept, slope } if intercept.is_finite() && slope.is_finite() => Ok(()),
            PriorGuess::Tabulated { x, y } => check_table(x, y),
            _ => domain("prior guess must be finite"),
        }
    }
}

/// Prior precision `w0(x) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorPrecision {
    Constant { value: f64 },
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

impl PriorPrecision {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PriorPrecision::Constant { value } => *value,
            PriorPrecision::Tabulated { x: xs, y } => interpolate(xs, y, x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorPrecision::Constant { value } if *value >= 0.0 && value.is_finite() => Ok(()),
            PriorPrecision::Tabulated { x, y } => {
                check_table(x, y)?;
                if y.iter().any(|&w| w < 0.0) {
                    return domain("prior precision must be nonnegative");
                }
                Ok(())
            }
            _ => domain("prior precision must be finite and nonnegative"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPrior {
    pub m0: PriorGuess,
    pub w0: PriorPrecision,
    pub sigma: f64,
}

impl LocalPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return domain(format!("sigma must be positive, got {}", self.sigma));
        }
        self.m0.validate()?;
        self.w0.validate()
    }
}

/// Information weights at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    /// `K̄((x_i − x)/h)` for every data point, zero outside the window.
    pub weights: Vec<f64>,
    /// `s0(x) = Σ K̄`; zero flags an empty window.
    pub s0: f64,
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    Ok(())
}

pub fn kernel_weights(x: f64, data: &RegressionData, h: f64, kernel: Kernel) -> Result<KernelWeights> {
    check_bandwidth(h)?;
    let weights: Vec<f64> = data.x.iter().map(|&xi| kernel.scaled((xi - x) / h)).collect();
    let s0 = weights.iter().sum();
    Ok(KernelWeights { weights, s0 })
}

/// Kernel density estimate `f_n(x) = (nh)^{−1} Σ K((x_i − x)/h)`.
pub fn kernel_density(x: f64, points: &[f64], h: f64, kernel: Kernel) -> f64 {
    points.iter().map(|&xi| kernel.density((xi - x) / h)).sum::<f64>() / (points.len() as f64 * h)
}

fn weighted_mean(w: &KernelWeights, y: &[f64]) -> f64 {
    w.weights.iter().zip(y).map(|(k, v)| k * v).sum::<f64>() / w.s0
}

/// Nadaraya–Watson `m̃(x) = Σ K̄ y_i / Σ K̄`.
pub fn local_constant_estimate(x: f64, data: &RegressionData, h: f64, kernel: Kernel) -> Result<f64> {
    let w = kernel_weights(x, data, h, kernel)?;
    if w.s0 <= 0.0 {
        return Err(Error::EmptyWindow { x });
    }
    Ok(weighted_mean(&w, &data.y))
}

/// `Q(x, a) = Q0(x) + s0 (a − m̃)²` with `Q0 = Σ K̄ (y_i − m̃)²`.
pub fn local_quadratic(x: f64, data: &RegressionData, h: f64, kernel: Kernel, a: f64) -> Result<f64> {
    let w = kernel_weights(x, data, h, kernel)?;
    if w.s0 <= 0.0 {
        return Err(Error::EmptyWindow { x });
    }
    let m = weighted_mean(&w, &data.y);
    let q0: f64 = w.weights.iter().zip(&data.y).map(|(k, y)| k * (y - m) * (y - m)).sum();
    Ok(q0 + w.s0 * (a - m) * (a - m))
}

/// `ln L_n(x, a, σ) = Σ K̄_i ln φ(y_i; a, σ)` over the window.
pub fn local_log_likelihood(
    x: f64,
    data: &RegressionData,
    h: f64,
    kernel: Kernel,
    a: f64,
    sigma: f64,
) -> Result<f64> {
    let w = kernel_weights(x, data, h, kernel)?;
    let c = -0.5 * (2.0 * PI).ln() - sigma.ln();
    Ok(w
        .weights
        .iter()
        .zip(&data.y)
        .filter(|(k, _)| **k > 0.0)
        .map(|(k, y)| k * (c - 0.5 * ((y - a) / sigma).powi(2)))
        .sum())
}

/// Posterior of the local level at one position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalPosterior {
    pub x: f64,
    pub mean: f64,
    pub variance: f64,
    pub s0: f64,
    /// `None` for an empty window.
    pub m_tilde: Option<f64>,
    pub m0: f64,
    pub w0: f64,
}

impl LocalPosterior {
    /// Weight on the data estimate, `s0 / (w0 + s0)`; the prior gets one minus this.
    pub fn data_weight(&self) -> f64 {
        self.s0 / (self.w0 + self.s0)
    }
}

fn posterior_from_parts(x: f64, w: &KernelWeights, y: &[f64], m0: f64, w0: f64, sigma: f64) -> Result<LocalPosterior> {
    let total = w0 + w.s0;
    if !(total > 0.0) {
        return Err(Error::ZeroPrecision { x });
    }
    let (mean, m_tilde) = if w.s0 > 0.0 {
        let mt = weighted_mean(w, y);
        let b = w.s0 / total;
        let m = (1.0 - b) * m0 + b * mt;
        (m.clamp(m0.min(mt), m0.max(mt)), Some(mt))
    } else {
        (m0, None)
    };
    Ok(LocalPosterior {
        x,
        mean,
        variance: sigma * sigma / total,
        s0: w.s0,
        m_tilde,
        m0,
        w0,
    })
}

/// `m̂(x) = [w0 m0 + s0 m̃] / (w0 + s0)`, variance `σ² / (w0 + s0)`.
pub fn local_posterior(
    x: f64,
    data: &RegressionData,
    h: f64,
    kernel: Kernel,
    prior: &LocalPrior,
) -> Result<LocalPosterior> {
    prior.validate()?;
    let w = kernel_weights(x, data, h, kernel)?;
    posterior_from_parts(x, &w, &data.y, prior.m0.eval(x), prior.w0.eval(x), prior.sigma)
}

/// Method-of-moments precision `σ² / max(ε, avg[(m̃ − m0)² − σ²/s0])` over
/// grid points with nonempty windows.
pub fn empirical_bayes_precision(
    data: &RegressionData,
    grid: &[f64],
    h: f64,
    kernel: Kernel,
    m0: &PriorGuess,
    sigma: f64,
) -> Result<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for &x in grid {
        let w = kernel_weights(x, data, h, kernel)?;
        if w.s0 > 0.0 {
            let d = weighted_mean(&w, &data.y) - m0.eval(x);
            acc += d * d - sigma * sigma / w.s0;
            count += 1;
        }
    }
    if count == 0 {
        return domain("every grid window is empty");
    }
    Ok(sigma * sigma / (acc / count as f64).max(EB_FLOOR))
}

/// Plug-in noise level `σ̂² = n^{−1} Σ (y_i − m̃(x_i))²` from local residuals.
pub fn plugin_sigma(data: &RegressionData, h: f64, kernel: Kernel) -> Result<f64> {
    let mut ss = 0.0;
    for (&x, &y) in data.x.iter().zip(&data.y) {
        let r = y - local_constant_estimate(x, data, h, kernel)?;
        ss += r * r;
    }
    Ok((ss / data.len() as f64).sqrt())
}

/// Gaussian background prior on a linear guess `m0(x, ξ) = ξ0 + ξ1 x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchicalPrior {
    pub xi_mean: [f64; 2],
    /// Positive semidefinite; all zeros fixes `ξ`.
    pub xi_cov: [[f64; 2]; 2],
    pub n_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    /// Replace `w0` by the empirical-Bayes constant.
    pub empirical_bayes: bool,
    pub hierarchical: Option<HierarchicalPrior>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    pub x: f64,
    /// NaN at gaps.
    pub mean: f64,
    /// NaN at gaps.
    pub variance: f64,
    pub s0: f64,
    /// NaN for an empty window.
    pub m_tilde: f64,
    pub gap: bool,
}

impl FitPoint {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalFit {
    pub points: Vec<FitPoint>,
    /// Empirical-Bayes precision when step D ran (last draw for hierarchical fits).
    pub w0_hat: Option<f64>,
    /// Posterior mean of `ξ` when step E ran.
    pub xi_posterior_mean: Option<[f64; 2]>,
}

impl LocalFit {
    pub fn gaps(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.gap).map(|p| p.x).collect()
    }
}

fn fit_once(
    data: &RegressionData,
    weights: &[KernelWeights],
    grid: &[f64],
    h: f64,
    kernel: Kernel,
    m0: &PriorGuess,
    w0: &PriorPrecision,
    sigma: f64,
    empirical_bayes: bool,
) -> Result<(Vec<FitPoint>, Option<f64>)> {
    let w0_hat = if empirical_bayes {
        Some(empirical_bayes_precision(data, grid, h, kernel, m0, sigma)?)
    } else {
        None
    };
    let points = grid
        .iter()
        .zip(weights)
        .map(|(&x, w)| {
            let prec = w0_hat.unwrap_or_else(|| w0.eval(x));
            match posterior_from_parts(x, w, &data.y, m0.eval(x), prec, sigma) {
                Ok(p) => Ok(FitPoint {
                    x,
                    mean: p.mean,
                    variance: p.variance,
                    s0: p.s0,
                    m_tilde: p.m_tilde.unwrap_or(f64::NAN),
                    gap: false,
                }),
                Err(Error::ZeroPrecision { .. }) => Ok(FitPoint {
                    x,
                    mean: f64::NAN,
                    variance: f64::NAN,
                    s0: 0.0,
                    m_tilde: f64::NAN,
                    gap: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, w0_hat))
}

/// Posterior of `ξ` under `y_i = ξ0 + ξ1 x_i + N(0, σ²)`: with `S = X'X/σ²`,
/// `b = X'y/σ²`, covariance `Σ (I + S Σ)^{−1}` and mean `μ + Σ_post (b − S μ)`.
/// Valid for singular `Σ`.
pub fn xi_posterior(data: &RegressionData, prior: &HierarchicalPrior, sigma: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let c = prior.xi_cov;
    if c[0][1] != c[1][0] || c[0][0] < 0.0 || c[1][1] < 0.0 || c[0][0] * c[1][1] - c[0][1] * c[1][0] < 0.0 {
        return domain("xi covariance must be symmetric positive semidefinite");
    }
    let s2 = sigma * sigma;
    let (mut sxx, mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in data.x.iter().zip(&data.y) {
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    let n = data.len() as f64;
    let s = [[n / s2, sx / s2], [sx / s2, sxx / s2]];
    let b = [sy / s2, sxy / s2];
    // M = I + S Σ
    let m = [
        [1.0 + s[0][0] * c[0][0] + s[0][1] * c[1][0], s[0][0] * c[0][1] + s[0][1] * c[1][1]],
        [s[1][0] * c[0][0] + s[1][1] * c[1][0], 1.0 + s[1][0] * c[0][1] + s[1][1] * c[1][1]],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let mut post = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            post[i][j] = c[i][0] * inv[0][j] + c[i][1] * inv[1][j];
        }
    }
    // symmetrize against rounding
    let off = 0.5 * (post[0][1] + post[1][0]);
    post[0][1] = off;
    post[1][0] = off;
    let mu = prior.xi_mean;
    let r = [
        b[0] - (s[0][0] * mu[0] + s[0][1] * mu[1]),
        b[1] - (s[1][0] * mu[0] + s[1][1] * mu[1]),
    ];
    let mean = [
        mu[0] + (post[0][0] * r[0] + post[0][1] * r[1]),
        mu[1] + (post[1][0] * r[0] + post[1][1] * r[1]),
    ];
    Ok((mean, post))
}

/// Steps A–C at every grid point, D when `options.empirical_bayes`, and E
/// (average of curves over `ξ` posterior draws) when `options.hierarchical`.
/// Grid points with `w0 + s0 = 0` become flagged gaps.
pub fn fit_curve(
    data: &RegressionData,
    grid: &[f64],
    h: f64,
    kernel: Kernel,
    prior: &LocalPrior,
    options: &FitOptions,
    rng: &mut RngState,
) -> Result<LocalFit> {
    data.validate()?;
    prior.validate()?;
    if grid.is_empty() {
        return domain("grid must be nonempty");
    }
    let weights = grid
        .iter()
        .map(|&x| kernel_weights(x, data, h, kernel))
        .collect::<Result<Vec<_>>>()?;
    let Some(hier) = &options.hierarchical else {
        let (points, w0_hat) = fit_once(
            data, &weights, grid, h, kernel, &prior.m0, &prior.w0, prior.sigma, options.empirical_bayes,
        )?;
        return Ok(LocalFit {
            points,
            w0_hat,
            xi_posterior_mean: None,
        });
    };
    if hier.n_draws == 0 {
        return domain("hierarchical step needs n_draws ≥ 1");
    }
    let (mean, cov) = xi_posterior(data, hier, prior.sigma)?;
    let l11 = cov[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
    let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();
    let k = grid.len();
    let mut avg_mean = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let mut avg_var = vec![0.0; k];
    let mut template = Vec::new();
    let mut w0_hat = None;
    for draw in 0..hier.n_draws {
        let (z0, z1) = (std_normal(rng), std_normal(rng));
        let xi = [mean[0] + l11 * z0, mean[1] + (l21 * z0 + l22 * z1)];
        let m0 = PriorGuess::Linear {
            intercept: xi[0],
            slope: xi[1],
        };
        let (points, w) = fit_once(
            data, &weights, grid, h, kernel, &m0, &prior.w0, prior.sigma, options.empirical_bayes,
        )?;
        w0_hat = w;
        // Incremental means keep a run of identical curves exactly unchanged.
        let t = (draw + 1) as f64;
        for (i, p) in points.iter().enumerate() {
            let delta = p.mean - avg_mean[i];
            avg_mean[i] += delta / t;
            m2[i] += delta * (p.mean - avg_mean[i]);
            avg_var[i] += (p.variance - avg_var[i]) / t;
        }
        template = points;
    }
    let n = hier.n_draws as f64;
    let points = template
        .into_iter()
        .enumerate()
        .map(|(i, p)| FitPoint {
            mean: avg_mean[i],
            variance: avg_var[i] + m2[i] / n,
            ..p
        })
        .collect();
    Ok(LocalFit {
        points,
        w0_hat,
        xi_posterior_mean: Some(mean),
    })
}
