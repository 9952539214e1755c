//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line (visible with `--nocapture`) and then asserts.

use npbayes_core::diagnostics::{central_moments_about, ks_one_sample, ks_two_sample, mean_and_se};
use npbayes_core::envelope::{control_log_factor, predictive_cdf, ResidualSet};
use npbayes_core::frailty::{
    marginal_survival, regression_hazards, simulate_path, FrailtySpec, JumpLaw, RateFunction, RegressionStructure,
};
use npbayes_core::localreg::{
    fit_curve, kernel_density, kernel_weights, local_constant_estimate, local_log_likelihood, local_quadratic,
    FitOptions, Kernel, LocalPrior, PriorGuess, PriorPrecision, RegressionData,
};
use npbayes_core::means::{
    central_moments, default_burn_in, stick_moments, stochastic_chain, transform_identity_check, BaseMomentSpec,
    GFunction,
};
use npbayes_core::numeric::integrate;
use npbayes_core::pyramid::{posterior_sampler, sample_prior, Likelihood, LevelDensity, SamplerSettings};
use npbayes_core::quantile::{automatic_density, bernstein_quantile, noninf_point_masses, SortedSample};
use npbayes_core::{dp, BaseDistribution, BetaLaw, DpParams, RngState};
use std::time::{Duration, Instant};

fn report(id: u32, name: &str, limit_secs: u64, run: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (ok, detail) = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= Duration::from_secs(limit_secs);
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {verdict} {name}: {detail}; {:.2}s (limit {limit_secs}s)",
        elapsed.as_secs_f64()
    );
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
    assert!(in_time, "criterion {id} ({name}) exceeded {limit_secs}s");
}

fn uniform_sample(n: usize, rng: &mut RngState) -> SortedSample {
    SortedSample::new((0..n).map(|_| rng.uniform()).collect()).unwrap()
}

#[test]
fn criterion_01_finite_approximation_limit_law() {
    report(1, "finite approximation set-probability law", 60, || {
        let params = DpParams::new(1.0, BaseDistribution::standard_normal()).unwrap();
        let root = RngState::new(101);
        let draws: Vec<f64> = (0..5000)
            .map(|i| {
                let p = dp::finite_approx_sample(2000, &params, &mut root.split(i)).unwrap();
                p.mass(|x| x <= 0.0)
            })
            .collect();
        let law = BetaLaw::new(0.5, 0.5).unwrap();
        let ks = ks_one_sample(&draws, |x| law.cdf(x));
        (ks < 0.03, format!("KS vs Beta(0.5, 0.5) = {ks:.4} (< 0.03)"))
    });
}

#[test]
fn criterion_02_representation_equivalence() {
    report(2, "finite approximation vs stick-breaking mean", 60, || {
        let params = DpParams::new(2.0, BaseDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let finite_root = RngState::new(201);
        let stick_root = RngState::new(202);
        let finite: Vec<f64> = (0..5000)
            .map(|i| {
                dp::finite_approx_sample(2000, &params, &mut finite_root.split(i))
                    .unwrap()
                    .integrate(|x| x)
            })
            .collect();
        let sticks: Vec<f64> = (0..5000)
            .map(|i| {
                dp::stick_breaking_sample(&params, 1e-10, &mut stick_root.split(i))
                    .unwrap()
                    .integrate(|x| x)
            })
            .collect();
        let ks = ks_two_sample(&finite, &sticks);
        (ks < 0.03, format!("two-sample KS = {ks:.4} (< 0.03)"))
    });
}

#[test]
fn criterion_03_moment_recursion_vs_chain() {
    report(3, "moment recursion vs stochastic-equation chain", 120, || {
        let steps = 1_000_000;
        let base = BaseMomentSpec::uniform(0.0, 1.0, 4).unwrap();
        let mut ok = true;
        let mut parts = Vec::new();
        for (k, &b) in [0.5, 1.0, 2.0].iter().enumerate() {
            let exact = central_moments(&base, &stick_moments(1.0, b, 4).unwrap(), 4).unwrap();
            let mut rng = RngState::new(300 + k as u64);
            let chain = stochastic_chain(1.0, b, |r| r.uniform(), steps, default_burn_in(steps), &mut rng).unwrap();
            let mc = central_moments_about(&chain, 0.5, 4);
            let r2 = (mc[2] / exact[2] - 1.0).abs();
            let r4 = (mc[4] / exact[4] - 1.0).abs();
            // The exact third moment is zero (symmetric base): compare on the standardized scale.
            let s3 = mc[3].abs() / exact[2].powf(1.5);
            ok &= r2 < 0.02 && r4 < 0.02 && s3 <= 0.02 && exact[3] == 0.0;
            if b == 1.0 {
                ok &= exact[2] == 1.0 / 24.0;
            }
            parts.push(format!("b={b}: rel m2 {r2:.4}, rel m4 {r4:.4}, |m3|/m2^1.5 {s3:.4}"));
        }
        // Skewed base: a genuine relative check on m3.
        let points = [0.0, 0.05, 0.1, 0.2, 1.0];
        let skew = BaseMomentSpec::empirical(&points, 4).unwrap();
        let exact = central_moments(&skew, &stick_moments(1.0, 1.0, 4).unwrap(), 4).unwrap();
        let mut rng = RngState::new(310);
        let chain = stochastic_chain(1.0, 1.0, |r| points[r.index(points.len())], steps, default_burn_in(steps), &mut rng)
            .unwrap();
        let theta0 = points.iter().sum::<f64>() / points.len() as f64;
        let mc = central_moments_about(&chain, theta0, 4);
        let r3 = (mc[3] / exact[3] - 1.0).abs();
        ok &= r3 < 0.02;
        parts.push(format!("skewed base rel m3 {r3:.4}"));
        (ok, parts.join("; "))
    });
}

#[test]
fn criterion_04_transform_identity() {
    report(4, "transform identity", 60, || {
        let params = DpParams::new(1.0, BaseDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let mut rng = RngState::new(401);
        let mut ok = true;
        let mut parts = Vec::new();
        for &u in &[0.5, 1.0, 2.0] {
            let c = transform_identity_check(u, &params, &GFunction::Identity, 100_000, 16, &mut rng).unwrap();
            let z = c.z_score();
            ok &= z.abs() <= 3.0;
            if u == 1.0 {
                let err = (c.rhs_exact - std::f64::consts::E / 4.0).abs();
                ok &= err <= 1e-9;
                parts.push(format!("rhs(1) - e/4 = {err:.1e}"));
            }
            parts.push(format!("u={u}: z = {z:.2}"));
        }
        (ok, parts.join("; "))
    });
}

#[test]
fn criterion_05_quantile_exactness() {
    report(5, "quantile point masses and Bernstein estimator", 10, || {
        let mut rng = RngState::new(501);
        let mut worst_sum: f64 = 0.0;
        let mut worst_mean: f64 = 0.0;
        let mut worst_end: f64 = 0.0;
        for n in 1..=200 {
            let data = uniform_sample(n, &mut rng);
            let x = data.values();
            for k in 1..=99 {
                let y = k as f64 / 100.0;
                let p = noninf_point_masses(y, n).unwrap();
                worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
                let weighted: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
                worst_mean = worst_mean.max((bernstein_quantile(y, &data).unwrap() - weighted).abs());
            }
            let lo = bernstein_quantile(1e-15, &data).unwrap();
            let hi = bernstein_quantile(1.0 - 1e-15, &data).unwrap();
            worst_end = worst_end.max((lo - x[0]).abs()).max((hi - x[n - 1]).abs());
        }
        let ok = worst_sum <= 1e-12 && worst_mean <= 1e-12 && worst_end <= 1e-12;
        (
            ok,
            format!("max |Σp − 1| = {worst_sum:.1e}, max |Q̂ − Σp x| = {worst_mean:.1e}, endpoint error {worst_end:.1e}"),
        )
    });
}

#[test]
fn criterion_06_automatic_density() {
    report(6, "automatic density", 30, || {
        let mut rng = RngState::new(601);
        let mut ok = true;
        let mut parts = Vec::new();
        for &n in &[3usize, 10, 100] {
            let data = uniform_sample(n, &mut rng);
            let x = data.values();
            let f = automatic_density(&data).unwrap();
            let left = 1.0 / ((n - 1) as f64 * (x[1] - x[0]));
            let right = 1.0 / ((n - 1) as f64 * (x[n - 1] - x[n - 2]));
            let boundary_exact = f.density(x[0]) == left && f.density(x[n - 1]) == right;
            let mut total = 0.0;
            for w in x.windows(2) {
                total += integrate(|t| f.density(t), w[0], w[1], 2, 1e-10, 0.0).unwrap().value;
            }
            let err = (total - 1.0).abs();
            ok &= boundary_exact && err < 1e-6;
            parts.push(format!("n={n}: boundary exact {boundary_exact}, |∫f − 1| = {err:.1e}"));
        }
        (ok, parts.join("; "))
    });
}

#[test]
fn criterion_07_pyramid_sampler() {
    report(7, "quantile pyramid sampler", 300, || {
        let level = LevelDensity::Uniform;
        let settings = SamplerSettings::default();
        let mut rng = RngState::new(701);
        let chain = posterior_sampler(4, &level, &[], Likelihood::Substitute, &settings, &mut rng).unwrap();
        let prior: Vec<_> = (0..20_000).map(|_| sample_prior(4, &level, &mut rng).unwrap()).collect();
        let mut worst: f64 = 0.0;
        for j in 1..16 {
            let p: Vec<f64> = prior.iter().map(|q| q.value(j)).collect();
            worst = worst.max(ks_two_sample(&chain.node_draws(j), &p));
        }
        let retained = chain.draws.len();
        let mut data: Vec<f64> = (0..400).map(|_| rng.uniform()).collect();
        let post = posterior_sampler(4, &level, &data, Likelihood::Substitute, &settings, &mut rng).unwrap();
        data.sort_by(f64::total_cmp);
        let median = 0.5 * (data[199] + data[200]);
        let gap = (post.node_mean(8) - median).abs();
        let ok = worst < 0.05 && retained == 2000 && gap < 0.05;
        (
            ok,
            format!("worst node KS (no data, {retained} draws) = {worst:.4}; |E Q(½) − median| = {gap:.4}"),
        )
    });
}

#[test]
fn criterion_08_frailty() {
    report(8, "frailty survival and Cox hazards", 60, || {
        let spec = FrailtySpec {
            theta: 0.8,
            jump_law: JumpLaw::Gamma { shape: 2.0 },
            rate: RateFunction::Linear { kappa: 1.5 },
        };
        let root = RngState::new(801);
        let paths: Vec<_> = (0..100_000)
            .map(|i| simulate_path(&spec, 2.0, &mut root.split(i)).unwrap())
            .collect();
        let mut ok = true;
        let mut parts = Vec::new();
        for &t in &[0.5, 1.0, 2.0] {
            let v: Vec<f64> = paths.iter().map(|p| p.conditional_survival(t)).collect();
            let (m, se) = mean_and_se(&v);
            let exact = marginal_survival(&spec, t).unwrap();
            let z = (m - exact) / se;
            ok &= z.abs() <= 3.0;
            parts.push(format!("t={t}: z = {z:.2}"));
        }
        let xs = vec![vec![0.5, -1.0], vec![1.5, 0.3]];
        let beta = [0.7, -0.4];
        let structure = RegressionStructure::Cox {
            theta: 2.0,
            jump_law: JumpLaw::Gamma { shape: 0.5 },
        };
        let base = RateFunction::Power { kappa: 1.0, power: 1.7 };
        let h = regression_hazards(&xs, &beta, &structure, &base).unwrap();
        let expected = (0.7f64 * (0.5 - 1.5) - 0.4 * (-1.0 - 0.3)).exp();
        let worst = [0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0]
            .iter()
            .map(|&s| (h[0].hazard(s) / h[1].hazard(s) - expected).abs() / expected)
            .fold(0.0, f64::max);
        ok &= worst <= 4.0 * f64::EPSILON;
        parts.push(format!("hazard ratio relative spread {worst:.1e}"));
        (ok, parts.join("; "))
    });
}

#[test]
fn criterion_09_local_regression() {
    report(9, "local Bayesian regression", 10, || {
        let mut rng = RngState::new(901);
        let x: Vec<f64> = (0..300).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&t| (6.0 * t).sin() + 0.3 * (rng.uniform() - 0.5))
            .collect();
        let data = RegressionData::new(x, y).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| 0.02 + 0.96 * i as f64 / 49.0).collect();
        let (h, kernel) = (0.15, Kernel::Epanechnikov);
        let prior = LocalPrior {
            m0: PriorGuess::Constant { value: 0.0 },
            w0: PriorPrecision::Constant { value: 0.0 },
            sigma: 0.3,
        };
        let fit = fit_curve(&data, &grid, h, kernel, &prior, &FitOptions::default(), &mut rng).unwrap();
        let nw_err = fit
            .points
            .iter()
            .map(|p| (p.mean - local_constant_estimate(p.x, &data, h, kernel).unwrap()).abs())
            .fold(0.0, f64::max);
        let mut s0_err: f64 = 0.0;
        for k in [Kernel::Uniform, Kernel::Epanechnikov, Kernel::Triangular, Kernel::Biweight] {
            for &x in &grid {
                let s0 = kernel_weights(x, &data, h, k).unwrap().s0;
                let via_density = data.len() as f64 * h * kernel_density(x, &data.x, h, k) / k.peak();
                s0_err = s0_err.max((s0 - via_density).abs());
            }
        }
        let mut spread: f64 = 0.0;
        for &x in &[0.2, 0.5, 0.8] {
            let s0 = kernel_weights(x, &data, h, kernel).unwrap().s0;
            let mut consts = Vec::new();
            for &a in &[-1.0, 0.0, 0.5, 1.5] {
                for &sigma in &[0.05, 0.3, 2.0] {
                    let ll = local_log_likelihood(x, &data, h, kernel, a, sigma).unwrap();
                    let q = local_quadratic(x, &data, h, kernel, a).unwrap();
                    consts.push(ll - (-s0 * sigma.ln() - 0.5 * q / (sigma * sigma)));
                }
            }
            let (lo, hi) = consts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &c| (l.min(c), u.max(c)));
            spread = spread.max(hi - lo);
        }
        let ok = nw_err <= 1e-12 && s0_err <= 1e-12 && spread <= 1e-10;
        (
            ok,
            format!("w0=0 vs NW {nw_err:.1e}; s0 identity {s0_err:.1e}; likelihood identity spread {spread:.1e}"),
        )
    });
}

#[test]
fn criterion_10_envelope() {
    report(10, "parametric envelope", 10, || {
        let g0 = BaseDistribution::standard_normal();
        let draws = vec![vec![-1.2, -0.3, 0.4, 1.1, 2.0], vec![-0.9, -0.1, 0.2, 0.8, 2.5]];
        let mut limit_err: f64 = 0.0;
        for k in -30..=30 {
            let t = k as f64 / 10.0;
            limit_err = limit_err.max((predictive_cdf(t, &[], 1.0, &g0, None).unwrap() - g0.cdf(t)).abs());
            let ecdf = draws.iter().flatten().filter(|&&r| r <= t).count() as f64 / 10.0;
            limit_err = limit_err.max((predictive_cdf(t, &draws, 1e-9, &g0, None).unwrap() - ecdf).abs());
        }
        let y = [-1.9, -0.8, -0.35, 0.1, 0.3, 0.9, 1.6, 2.8];
        let z = vec![0.25, 0.5, 0.25];
        let cuts = vec![-0.6745, 0.6745];
        let grid: Vec<f64> = (0..=400).map(|k| -2.0 + k as f64 * 0.01).collect();
        let sets: Vec<ResidualSet> = grid
            .iter()
            .map(|&theta| ResidualSet::new(y.iter().map(|v| v - theta).collect(), cuts.clone(), z.clone()).unwrap())
            .collect();
        let logs: Vec<f64> = sets
            .iter()
            .map(|s| control_log_factor(&s.counts(), &s.z, 20.0).unwrap())
            .collect();
        let best = (0..grid.len()).max_by(|&i, &j| logs[i].total_cmp(&logs[j])).unwrap();
        let min_tv = sets.iter().map(ResidualSet::frequency_distance).fold(f64::INFINITY, f64::min);
        let best_tv = sets[best].frequency_distance();
        let ok = limit_err <= 1e-8 && best_tv == min_tv;
        (
            ok,
            format!(
                "mixture limits {limit_err:.1e}; argmax θ = {:.2} with counts {:?}, TV {best_tv} (grid min {min_tv})",
                grid[best],
                sets[best].counts()
            ),
        )
    });
}
