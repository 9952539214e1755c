//! Command dispatch: turns a validated configuration into a [`Report`].

use crate::config::{CliError, RunConfig};
use crate::output::{Cell, Report, Table};
use crate::params::*;
use npbayes_core::diagnostics::{central_moments_about, mean_and_se};
use npbayes_core::dp::{self, AtomicMeasure};
use npbayes_core::envelope::{predictive_cdf, prior_weight, ResidualSet};
use npbayes_core::frailty::{hazard_rate, marginal_survival, simulate_path};
use npbayes_core::localreg::{fit_curve, plugin_sigma, FitOptions, LocalPrior};
use npbayes_core::means::{
    central_moments, central_moments_exact, default_burn_in, stick_moments, stochastic_chain,
    transform_identity_check, BaseMomentSpec,
};
use npbayes_core::pyramid::posterior_sampler;
use npbayes_core::quantile::{
    automatic_density, bernstein_quantile, noninf_point_masses, quantile_posterior_mean, SortedSample,
};
use npbayes_core::{Error, RngState};
use serde_json::{json, Map};

/// Largest order for the exact rational moment path.
const EXACT_MOMENT_LIMIT: usize = 40;

/// Runs the configured command.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let mut rng = RngState::new(config.seed.unwrap_or(0));
    let mut report = Report {
        command: config.command.name(),
        seed: config.seed,
        config: config.resolved(),
        summary: Map::new(),
        table: Table::new(&[]),
    };
    let result = match &config.params {
        Params::DpSample(p) => dp_sample(p, &mut rng, &mut report),
        Params::MeanMoments(p) => mean_moments(p, &mut report),
        Params::MeanChain(p) => mean_chain(p, &mut rng, &mut report),
        Params::TransformCheck(p) => transform_check(p, &mut rng, &mut report),
        Params::QuantileEstimate(p) => quantile_estimate(p, &mut report),
        Params::DensityEstimate(p) => density_estimate(p, &mut report),
        Params::PyramidFit(p) => pyramid_fit(p, &mut rng, &mut report),
        Params::FrailtySim(p) => frailty_sim(p, &mut report),
        Params::LocalregFit(p) => localreg_fit(p, &mut rng, &mut report),
        Params::Envelope(p) => envelope(p, &mut report),
    };
    result.map_err(|e| CliError::from(e).with_command(config.command))?;
    Ok(report)
}

type Outcome = Result<(), Error>;

fn dp_sample(p: &DpSampleParams, rng: &mut RngState, report: &mut Report) -> Outcome {
    let mut process = p.process();
    if !p.data.is_empty() {
        process = dp::posterior_update(&process, &p.data)?;
    }
    let mut table = Table::new(&["draw", "atom", "location", "weight"]);
    let mut max_residual: f64 = 0.0;
    let mut atoms = 0usize;
    for d in 0..p.draws {
        let mut sub = rng.split(d as u64);
        let measure: AtomicMeasure = match p.method {
            DpMethod::FiniteApprox => dp::finite_approx_sample(p.m, &process, &mut sub)?,
            DpMethod::StickBreaking => dp::stick_breaking_sample(&process, p.truncation_eps, &mut sub)?,
            DpMethod::RandomM => dp::random_m_sample(&p.m_law, &process, &mut sub)?,
        };
        max_residual = max_residual.max(measure.residual_mass);
        atoms += measure.len();
        for (k, (x, w)) in measure.atoms.iter().zip(&measure.weights).enumerate() {
            table.push(vec![d.into(), k.into(), (*x).into(), (*w).into()]);
        }
    }
    report.summarize("draws", p.draws);
    report.summarize("mean_atoms", atoms as f64 / p.draws as f64);
    report.summarize("max_residual_mass", max_residual);
    report.table = table;
    Ok(())
}

fn exact_moments(base: &BaseMomentSpec, a: f64, b: f64, p_max: usize) -> Option<Vec<String>> {
    if p_max > EXACT_MOMENT_LIMIT {
        return None;
    }
    let mu = base.exact.as_ref()?;
    let m = central_moments_exact(mu, a, b, p_max).ok()?;
    Some(m.iter().map(|r| r.to_string()).collect())
}

fn mean_moments(p: &MeanMomentsParams, report: &mut Report) -> Outcome {
    let (a, b) = p.process().stick_params();
    let base = BaseMomentSpec::from_distribution(&p.base, p.p_max)?;
    let sticks = stick_moments(a, b, p.p_max)?;
    let m = central_moments(&base, &sticks, p.p_max)?;
    let exact = exact_moments(&base, a, b, p.p_max);
    let mut table = Table::new(&["p", "central_moment", "exact"]);
    for (k, v) in m.iter().enumerate() {
        let e = exact.as_ref().map_or(Cell::Empty, |e| Cell::Text(e[k].clone()));
        table.push(vec![k.into(), (*v).into(), e]);
    }
    report.summarize("mean", base.theta0);
    report.summarize("exact_path", exact.is_some());
    report.table = table;
    Ok(())
}

fn mean_chain(p: &MeanChainParams, rng: &mut RngState, report: &mut Report) -> Outcome {
    let (a, b) = p.process().stick_params();
    let burn = p.burn_in.unwrap_or_else(|| default_burn_in(p.steps));
    let base = p.base.clone();
    let chain = stochastic_chain(a, b, |r| base.sample(r), p.steps, burn, rng)?;
    let mut table = Table::new(&["step", "theta"]);
    for (k, v) in chain.iter().enumerate().step_by(p.thin) {
        table.push(vec![(burn + k + 1).into(), (*v).into()]);
    }
    if let Ok(spec) = BaseMomentSpec::from_distribution(&p.base, 4) {
        let exact = central_moments(&spec, &stick_moments(a, b, 4)?, 4)?;
        let mc = central_moments_about(&chain, spec.theta0, 4);
        for k in 2..=4 {
            report.summarize(&format!("m{k}_chain"), mc[k]);
            report.summarize(&format!("m{k}_recursion"), exact[k]);
        }
    }
    report.summarize("retained", chain.len());
    report.table = table;
    Ok(())
}

fn transform_check(p: &TransformCheckParams, rng: &mut RngState, report: &mut Report) -> Outcome {
    let process = npbayes_core::DpParams::new(p.b, p.base.clone())?;
    let mut table = Table::new(&["u", "lhs_mc", "mc_se", "rhs_exact", "z_score"]);
    let mut worst: f64 = 0.0;
    for (i, &u) in p.u.iter().enumerate() {
        let c = transform_identity_check(u, &process, &p.g, p.n_sim, p.quad_points, &mut rng.split(i as u64))?;
        worst = worst.max(c.z_score().abs());
        table.push(vec![u.into(), c.lhs_mc.into(), c.mc_se.into(), c.rhs_exact.into(), c.z_score().into()]);
    }
    report.summarize("max_abs_z", worst);
    report.summarize("within_3se", worst <= 3.0);
    report.table = table;
    Ok(())
}

fn quantile_estimate(p: &QuantileEstimateParams, report: &mut Report) -> Outcome {
    let data = SortedSample::new(p.data.clone())?;
    let mut table = Table::new(&["quantity", "y", "index", "value"]);
    for &y in &p.y {
        table.push(vec!["bernstein".into(), y.into(), Cell::Empty, bernstein_quantile(y, &data)?.into()]);
    }
    if p.b > 0.0 {
        let base = p.base.as_ref().expect("validated: b > 0 has a base");
        for &y in &p.y {
            let m = quantile_posterior_mean(y, &data, p.b, base)?;
            table.push(vec!["posterior-mean".into(), y.into(), Cell::Empty, m.into()]);
        }
    }
    for &y in &p.masses_at {
        for (i, w) in noninf_point_masses(y, data.len())?.into_iter().enumerate() {
            table.push(vec!["mass".into(), y.into(), (i + 1).into(), w.into()]);
        }
    }
    report.summarize("n", data.len());
    report.summarize("b", p.b);
    report.table = table;
    Ok(())
}

fn density_estimate(p: &DensityEstimateParams, report: &mut Report) -> Outcome {
    let data = SortedSample::new(p.data.clone())?;
    let f = automatic_density(&data)?;
    let (lo, hi) = f.support();
    let grid = p.grid.clone().unwrap_or_else(|| {
        let k = p.grid_points - 1;
        (0..=k)
            .map(|i| if i == k { hi } else { lo + (hi - lo) * i as f64 / k as f64 })
            .collect()
    });
    let mut table = Table::new(&["x", "density", "cdf"]);
    for &x in &grid {
        table.push(vec![x.into(), f.density(x).into(), f.cdf(x).into()]);
    }
    report.summarize("support", json!([lo, hi]));
    report.summarize("density_at_min", f.density(lo));
    report.summarize("density_at_max", f.density(hi));
    report.table = table;
    Ok(())
}

fn pyramid_fit(p: &PyramidFitParams, rng: &mut RngState, report: &mut Report) -> Outcome {
    let chain = posterior_sampler(p.depth, &p.level, &p.data, p.likelihood, &p.sampler, rng)?;
    let mut table = Table::new(&["iteration", "node", "value"]);
    for (it, label, v) in chain.rows() {
        table.push(vec![it.into(), label.into(), v.into()]);
    }
    let nodes = (1usize << p.depth) - 1;
    let first = chain.draws.first().expect("at least one retained draw");
    let means: Map<String, serde_json::Value> =
        (1..=nodes).map(|j| (first.label(j), json!(chain.node_mean(j)))).collect();
    let acceptance: Map<String, serde_json::Value> =
        chain.acceptance.iter().map(|(j, r)| (first.label(*j), json!(r))).collect();
    report.summarize("node_means", means);
    report.summarize("acceptance", acceptance);
    report.table = table;
    Ok(())
}

fn frailty_sim(p: &FrailtySimParams, report: &mut Report) -> Outcome {
    let spec = p.spec();
    let t_max = p.times.iter().cloned().fold(0.0, f64::max);
    let seed = report.seed.unwrap_or(0);
    let root = RngState::new(seed);
    let paths = (0..p.paths)
        .map(|i| simulate_path(&spec, t_max, &mut root.split(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let closed_form_available = marginal_survival(&spec, 0.0).is_ok();
    let mut table = Table::new(&["t", "survival_mc", "mc_se", "survival_exact", "hazard_exact", "z_score"]);
    let mut worst: f64 = 0.0;
    for &t in &p.times {
        let v: Vec<f64> = paths.iter().map(|path| path.conditional_survival(t)).collect();
        let (m, se) = mean_and_se(&v);
        let (exact, hazard) = if closed_form_available {
            (marginal_survival(&spec, t)?, hazard_rate(&spec, t)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        let z = if se > 0.0 { (m - exact) / se } else if m == exact { 0.0 } else { f64::NAN };
        if z.is_finite() {
            worst = worst.max(z.abs());
        }
        table.push(vec![t.into(), m.into(), se.into(), exact.into(), hazard.into(), z.into()]);
    }
    let jumps = paths.iter().map(|p| p.jump_count(t_max) as f64).sum::<f64>() / p.paths as f64;
    report.summarize("paths", p.paths);
    report.summarize("mean_jumps", jumps);
    report.summarize("closed_form", closed_form_available);
    if closed_form_available {
        report.summarize("max_abs_z", worst);
    }
    report.table = table;
    Ok(())
}

fn localreg_fit(p: &LocalregFitParams, rng: &mut RngState, report: &mut Report) -> Outcome {
    let data = p.data()?;
    let sigma = match p.prior.sigma {
        Some(s) => s,
        None => plugin_sigma(&data, p.bandwidth, p.kernel)?,
    };
    let grid = p.grid.clone().unwrap_or_else(|| {
        let lo = data.x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let k = p.grid_points - 1;
        (0..=k)
            .map(|i| if i == k { hi } else { lo + (hi - lo) * i as f64 / k as f64 })
            .collect()
    });
    let prior = LocalPrior {
        m0: p.prior.m0.clone(),
        w0: p.prior.w0.clone(),
        sigma,
    };
    let options = FitOptions {
        empirical_bayes: p.empirical_bayes,
        hierarchical: p.hierarchical.clone(),
    };
    let fit = fit_curve(&data, &grid, p.bandwidth, p.kernel, &prior, &options, rng)?;
    let mut table = Table::new(&["x", "mean", "sd", "s0", "m_tilde", "gap"]);
    for pt in &fit.points {
        table.push(vec![pt.x.into(), pt.mean.into(), pt.sd().into(), pt.s0.into(), pt.m_tilde.into(), pt.gap.into()]);
    }
    report.summarize("sigma", sigma);
    report.summarize("sigma_source", if p.plugin_sigma { "plug-in" } else { "given" });
    report.summarize("gaps", fit.gaps());
    if let Some(w) = fit.w0_hat {
        report.summarize("w0_empirical_bayes", w);
    }
    if let Some(xi) = fit.xi_posterior_mean {
        report.summarize("xi_posterior_mean", json!(xi));
    }
    report.table = table;
    Ok(())
}

fn envelope(p: &EnvelopeParams, report: &mut Report) -> Outcome {
    let n = p.residual_draws.first().map_or(0, Vec::len);
    let mut table = Table::new(&["t", "g_hat", "base_cdf"]);
    for &t in &p.t {
        let g = predictive_cdf(t, &p.residual_draws, p.b, &p.base, p.w_override)?;
        table.push(vec![t.into(), g.into(), p.base.cdf(t).into()]);
    }
    report.summarize("n", n);
    report.summarize("w_n", p.w_override.unwrap_or_else(|| prior_weight(p.b, n)));
    if let Some(c) = &p.control {
        let mut logs = Vec::new();
        let mut counts = Vec::new();
        for draw in &p.residual_draws {
            let set = ResidualSet::new(draw.clone(), c.cuts.clone(), c.z.clone())?;
            logs.push(set.log_factor(p.b)?);
            counts.push(set.counts());
        }
        report.summarize("control_log_factor", logs);
        report.summarize("control_counts", json!(counts));
    }
    report.table = table;
    Ok(())
}
