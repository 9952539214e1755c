//! Parameter blocks for each command, with defaults.

use crate::config::{collect, Command};
use npbayes_core::dp::{MLaw, StickLaw};
use npbayes_core::envelope::ResidualSet;
use npbayes_core::frailty::{FrailtySpec, JumpLaw, RateFunction};
use npbayes_core::localreg::{HierarchicalPrior, Kernel, PriorGuess, PriorPrecision, RegressionData};
use npbayes_core::means::GFunction;
use npbayes_core::pyramid::{LevelDensity, Likelihood, SamplerSettings, MAX_DEPTH};
use npbayes_core::quantile::SortedSample;
use npbayes_core::{BaseDistribution, DpParams, Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

fn unit_uniform() -> BaseDistribution {
    BaseDistribution::Uniform { lo: 0.0, hi: 1.0 }
}

fn standard_normal() -> BaseDistribution {
    BaseDistribution::standard_normal()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpMethod {
    FiniteApprox,
    #[default]
    StickBreaking,
    RandomM,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpSampleParams {
    pub b: f64,
    pub base: BaseDistribution,
    pub stick: StickLaw,
    pub method: DpMethod,
    /// Atoms for the finite approximation.
    pub m: usize,
    /// Law of the number of atoms for `random-m`.
    pub m_law: MLaw,
    pub truncation_eps: f64,
    /// Number of random measures drawn.
    pub draws: usize,
    /// Observations for a conjugate update before sampling.
    pub data: Vec<f64>,
}

impl Default for DpSampleParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            base: unit_uniform(),
            stick: StickLaw::Dirichlet,
            method: DpMethod::StickBreaking,
            m: 100,
            m_law: MLaw::ShiftedPoisson { mean: 50.0 },
            truncation_eps: 1e-6,
            draws: 1,
            data: Vec::new(),
        }
    }
}

impl DpSampleParams {
    pub fn process(&self) -> DpParams {
        DpParams {
            b: self.b,
            base: self.base.clone(),
            stick: self.stick,
        }
    }

    fn validate(&self) -> Result<()> {
        self.process().validate()?;
        if self.draws == 0 || self.m == 0 {
            return domain("draws and m must be at least 1");
        }
        if !(self.truncation_eps > 0.0 && self.truncation_eps < 1.0) {
            return domain("truncation_eps must lie in (0, 1)");
        }
        if self.method != DpMethod::StickBreaking && !self.process().is_dirichlet() {
            return domain("finite-approx and random-m need Dirichlet sticks");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanMomentsParams {
    pub b: f64,
    pub stick: StickLaw,
    pub base: BaseDistribution,
    pub p_max: usize,
}

impl Default for MeanMomentsParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            stick: StickLaw::Dirichlet,
            base: unit_uniform(),
            p_max: 6,
        }
    }
}

impl MeanMomentsParams {
    pub fn process(&self) -> DpParams {
        DpParams {
            b: self.b,
            base: self.base.clone(),
            stick: self.stick,
        }
    }

    fn validate(&self) -> Result<()> {
        self.process().validate()?;
        if !(2..=200).contains(&self.p_max) {
            return domain("p_max must lie in 2..=200");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanChainParams {
    pub b: f64,
    pub stick: StickLaw,
    pub base: BaseDistribution,
    pub steps: usize,
    /// Defaults to 1% of `steps`.
    pub burn_in: Option<usize>,
    /// Emit every `thin`-th retained state.
    pub thin: usize,
}

impl Default for MeanChainParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            stick: StickLaw::Dirichlet,
            base: unit_uniform(),
            steps: 100_000,
            burn_in: None,
            thin: 1,
        }
    }
}

impl MeanChainParams {
    pub fn process(&self) -> DpParams {
        DpParams {
            b: self.b,
            base: self.base.clone(),
            stick: self.stick,
        }
    }

    fn validate(&self) -> Result<()> {
        self.process().validate()?;
        if self.thin == 0 {
            return domain("thin must be at least 1");
        }
        let burn = self.burn_in.unwrap_or(self.steps / 100);
        if self.steps <= burn {
            return domain("steps must exceed burn_in");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformCheckParams {
    pub b: f64,
    pub base: BaseDistribution,
    pub g: GFunction,
    pub u: Vec<f64>,
    pub n_sim: usize,
    /// Quadrature panels for the exact side.
    pub quad_points: usize,
}

impl Default for TransformCheckParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            base: unit_uniform(),
            g: GFunction::Identity,
            u: vec![1.0],
            n_sim: 10_000,
            quad_points: 16,
        }
    }
}

impl TransformCheckParams {
    fn validate(&self) -> Result<()> {
        DpParams::new(self.b, self.base.clone())?;
        if self.u.is_empty() || self.u.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
            return domain("u must be a nonempty list of positive values");
        }
        if self.n_sim < 2 {
            return domain("n_sim must be at least 2");
        }
        self.g.check_nonnegative(&self.base)
    }
}

fn default_y_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileEstimateParams {
    pub data: Vec<f64>,
    /// `0` gives the Bernstein (non-informative) estimate only.
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub base: Option<BaseDistribution>,
    #[serde(default = "default_y_grid")]
    pub y: Vec<f64>,
    /// Levels at which the point masses on the order statistics are listed.
    #[serde(default)]
    pub masses_at: Vec<f64>,
}

impl QuantileEstimateParams {
    fn validate(&self) -> Result<()> {
        SortedSample::new(self.data.clone())?;
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return domain("b must be finite and nonnegative");
        }
        if self.b > 0.0 {
            match &self.base {
                Some(base) => base.validate()?,
                None => return domain("b > 0 needs a base distribution"),
            }
        }
        if self.y.iter().chain(&self.masses_at).any(|&y| !(y > 0.0 && y < 1.0)) {
            return domain("quantile levels must lie in (0, 1)");
        }
        Ok(())
    }
}

fn default_grid_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityEstimateParams {
    pub data: Vec<f64>,
    /// Explicit evaluation points; otherwise `grid_points` spanning the data range.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl DensityEstimateParams {
    fn validate(&self) -> Result<()> {
        let s = SortedSample::new(self.data.clone())?;
        if s.len() < 3 {
            return domain("density estimation needs at least three observations");
        }
        if self.grid.is_none() && self.grid_points < 2 {
            return domain("grid_points must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PyramidFitParams {
    pub depth: usize,
    pub level: LevelDensity,
    pub data: Vec<f64>,
    pub likelihood: Likelihood,
    pub sampler: SamplerSettings,
}

impl Default for PyramidFitParams {
    fn default() -> Self {
        Self {
            depth: npbayes_core::pyramid::DEFAULT_DEPTH,
            level: LevelDensity::Uniform,
            data: Vec::new(),
            likelihood: Likelihood::Substitute,
            sampler: SamplerSettings::default(),
        }
    }
}

impl PyramidFitParams {
    fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return domain(format!("depth must lie in 1..={MAX_DEPTH}"));
        }
        self.level.validate()?;
        if self.data.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return domain("pyramid data must lie in [0, 1]");
        }
        if self.sampler.iterations == 0 || self.sampler.thin == 0 {
            return domain("sampler iterations and thin must be at least 1");
        }
        Ok(())
    }
}

fn default_times() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrailtySimParams {
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "default_jump_law")]
    pub jump_law: JumpLaw,
    #[serde(default)]
    pub rate: RateFunction,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
}

fn default_jump_law() -> JumpLaw {
    JumpLaw::Gamma { shape: 1.0 }
}

fn default_paths() -> usize {
    10_000
}

impl Default for FrailtySimParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            jump_law: default_jump_law(),
            rate: RateFunction::default(),
            paths: default_paths(),
            times: default_times(),
        }
    }
}

impl FrailtySimParams {
    pub fn spec(&self) -> FrailtySpec {
        FrailtySpec {
            theta: self.theta,
            jump_law: self.jump_law,
            rate: self.rate,
        }
    }

    fn validate(&self) -> Result<()> {
        self.spec().validate()?;
        if self.paths < 2 {
            return domain("paths must be at least 2");
        }
        if self.times.is_empty() || self.times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return domain("times must be a nonempty list of finite nonnegative values");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalregPrior {
    #[serde(default = "zero_guess")]
    pub m0: PriorGuess,
    #[serde(default = "zero_precision")]
    pub w0: PriorPrecision,
    /// Required unless `plugin_sigma` is set.
    #[serde(default)]
    pub sigma: Option<f64>,
}

fn zero_guess() -> PriorGuess {
    PriorGuess::Constant { value: 0.0 }
}

fn zero_precision() -> PriorPrecision {
    PriorPrecision::Constant { value: 0.0 }
}

impl Default for LocalregPrior {
    fn default() -> Self {
        Self {
            m0: zero_guess(),
            w0: zero_precision(),
            sigma: None,
        }
    }
}

fn default_localreg_points() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalregFitParams {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub bandwidth: f64,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_localreg_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub prior: LocalregPrior,
    /// Estimate σ from local residuals instead of using `prior.sigma`.
    #[serde(default)]
    pub plugin_sigma: bool,
    #[serde(default)]
    pub empirical_bayes: bool,
    #[serde(default)]
    pub hierarchical: Option<HierarchicalPrior>,
}

impl LocalregFitParams {
    pub fn data(&self) -> Result<RegressionData> {
        RegressionData::new(self.x.clone(), self.y.clone())
    }

    fn validate(&self) -> Result<()> {
        self.data()?;
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return domain("bandwidth must be positive");
        }
        self.prior.m0.validate()?;
        self.prior.w0.validate()?;
        match (self.prior.sigma, self.plugin_sigma) {
            (Some(_), true) => return domain("give either prior.sigma or plugin_sigma, not both"),
            (None, false) => return domain("prior.sigma is required unless plugin_sigma is true"),
            (Some(s), false) if !(s > 0.0 && s.is_finite()) => return domain("prior.sigma must be positive"),
            _ => {}
        }
        if self.grid.is_none() && self.grid_points < 2 {
            return domain("grid_points must be at least 2");
        }
        if let Some(h) = &self.hierarchical {
            if h.n_draws == 0 {
                return domain("hierarchical.n_draws must be at least 1");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Interior cut points of the residual line.
    pub cuts: Vec<f64>,
    pub z: Vec<f64>,
}

fn default_t_grid() -> Vec<f64> {
    (0..=80).map(|k| -4.0 + k as f64 * 0.1).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeParams {
    /// Standardized residuals, one vector per posterior draw of `(β, σ)`.
    #[serde(default)]
    pub residual_draws: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "standard_normal")]
    pub base: BaseDistribution,
    /// Replaces `b/(b+n)`.
    #[serde(default)]
    pub w_override: Option<f64>,
    #[serde(default = "default_t_grid")]
    pub t: Vec<f64>,
    #[serde(default)]
    pub control: Option<ControlSpec>,
}

impl EnvelopeParams {
    fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return domain("b must be positive");
        }
        self.base.validate()?;
        if let Some(first) = self.residual_draws.first() {
            if self.residual_draws.iter().any(|d| d.len() != first.len()) {
                return domain("all residual draws must have the same length");
            }
        }
        if let Some(c) = &self.control {
            ResidualSet::new(Vec::new(), c.cuts.clone(), c.z.clone())?;
        }
        Ok(())
    }
}

/// The parameter block of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    DpSample(DpSampleParams),
    MeanMoments(MeanMomentsParams),
    MeanChain(MeanChainParams),
    TransformCheck(TransformCheckParams),
    QuantileEstimate(QuantileEstimateParams),
    DensityEstimate(DensityEstimateParams),
    PyramidFit(PyramidFitParams),
    FrailtySim(FrailtySimParams),
    LocalregFit(LocalregFitParams),
    Envelope(EnvelopeParams),
}

impl Params {
    pub(crate) fn parse(command: Command, raw: Value, violations: &mut Vec<String>) -> Option<Params> {
        let v = violations;
        Some(match command {
            Command::DpSample => Params::DpSample(collect(raw, "params", v)?),
            Command::MeanMoments => Params::MeanMoments(collect(raw, "params", v)?),
            Command::MeanChain => Params::MeanChain(collect(raw, "params", v)?),
            Command::TransformCheck => Params::TransformCheck(collect(raw, "params", v)?),
            Command::QuantileEstimate => Params::QuantileEstimate(collect(raw, "params", v)?),
            Command::DensityEstimate => Params::DensityEstimate(collect(raw, "params", v)?),
            Command::PyramidFit => Params::PyramidFit(collect(raw, "params", v)?),
            Command::FrailtySim => Params::FrailtySim(collect(raw, "params", v)?),
            Command::LocalregFit => Params::LocalregFit(collect(raw, "params", v)?),
            Command::Envelope => Params::Envelope(collect(raw, "params", v)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Params::DpSample(p) => p.validate(),
            Params::MeanMoments(p) => p.validate(),
            Params::MeanChain(p) => p.validate(),
            Params::TransformCheck(p) => p.validate(),
            Params::QuantileEstimate(p) => p.validate(),
            Params::DensityEstimate(p) => p.validate(),
            Params::PyramidFit(p) => p.validate(),
            Params::FrailtySim(p) => p.validate(),
            Params::LocalregFit(p) => p.validate(),
            Params::Envelope(p) => p.validate(),
        }
    }

    /// Whether a run draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            Params::DpSample(_)
            | Params::MeanChain(_)
            | Params::TransformCheck(_)
            | Params::PyramidFit(_)
            | Params::FrailtySim(_) => true,
            Params::LocalregFit(p) => p.hierarchical.is_some(),
            Params::MeanMoments(_) | Params::QuantileEstimate(_) | Params::DensityEstimate(_) | Params::Envelope(_) => {
                false
            }
        }
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            Params::DpSample(p) => serde_json::to_value(p),
            Params::MeanMoments(p) => serde_json::to_value(p),
            Params::MeanChain(p) => serde_json::to_value(p),
            Params::TransformCheck(p) => serde_json::to_value(p),
            Params::QuantileEstimate(p) => serde_json::to_value(p),
            Params::DensityEstimate(p) => serde_json::to_value(p),
            Params::PyramidFit(p) => serde_json::to_value(p),
            Params::FrailtySim(p) => serde_json::to_value(p),
            Params::LocalregFit(p) => serde_json::to_value(p),
            Params::Envelope(p) => serde_json::to_value(p),
        };
        v.expect("parameter blocks serialize")
    }
}
