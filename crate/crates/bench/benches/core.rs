use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use npbayes_core::dp::{finite_approx_sample, stick_breaking_sample};
use npbayes_core::envelope::control_log_factor;
use npbayes_core::frailty::{simulate_path, FrailtySpec, JumpLaw, RateFunction};
use npbayes_core::localreg::{fit_curve, FitOptions, Kernel, LocalPrior, PriorGuess, PriorPrecision, RegressionData};
use npbayes_core::means::{central_moments, stick_moments, BaseMomentSpec};
use npbayes_core::pyramid::{posterior_sampler, LevelDensity, Likelihood, SamplerSettings};
use npbayes_core::quantile::{automatic_density, bernstein_quantile, posterior_quantile_law, SortedSample};
use npbayes_core::{BaseDistribution, DpParams, RngState};
use std::hint::black_box;

fn uniform_data(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngState::new(seed);
    (0..n).map(|_| rng.uniform()).collect()
}

fn random_measures(c: &mut Criterion) {
    let params = DpParams::new(1.0, BaseDistribution::standard_normal()).unwrap();
    let mut rng = RngState::new(1);
    c.bench_function("finite_approx m=2000", |b| {
        b.iter(|| finite_approx_sample(2000, &params, &mut rng).unwrap())
    });
    c.bench_function("stick_breaking eps=1e-10", |b| {
        b.iter(|| stick_breaking_sample(&params, 1e-10, &mut rng).unwrap())
    });
}

fn moments(c: &mut Criterion) {
    let base = BaseMomentSpec::normal(0.0, 1.0, 40).unwrap();
    let sticks = stick_moments(1.0, 2.0, 40).unwrap();
    c.bench_function("central_moments p=40 exact", |b| {
        b.iter(|| central_moments(black_box(&base), &sticks, 40).unwrap())
    });
    let approx = BaseMomentSpec { exact: None, ..base.clone() };
    c.bench_function("central_moments p=40 float", |b| {
        b.iter(|| central_moments(black_box(&approx), &sticks, 40).unwrap())
    });
}

fn quantiles(c: &mut Criterion) {
    let data = SortedSample::new(uniform_data(200, 2)).unwrap();
    c.bench_function("bernstein_quantile n=200", |b| {
        b.iter(|| bernstein_quantile(black_box(0.37), &data).unwrap())
    });
    let base = BaseDistribution::uniform(0.0, 1.0).unwrap();
    c.bench_function("posterior_quantile_mean n=200 b=2", |b| {
        b.iter(|| posterior_quantile_law(0.37, &data, 2.0, &base).unwrap().mean().unwrap())
    });
    let f = automatic_density(&data).unwrap();
    c.bench_function("automatic_density eval n=200", |b| b.iter(|| f.density(black_box(0.42))));
}

fn pyramid(c: &mut Criterion) {
    let data = uniform_data(400, 3);
    let settings = SamplerSettings {
        iterations: 200,
        burn_in: 20,
        ..SamplerSettings::default()
    };
    c.bench_function("pyramid depth=4 n=400 200 draws", |b| {
        b.iter_batched(
            || RngState::new(4),
            |mut rng| {
                posterior_sampler(4, &LevelDensity::Uniform, &data, Likelihood::Substitute, &settings, &mut rng).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn frailty(c: &mut Criterion) {
    let spec = FrailtySpec {
        theta: 0.8,
        jump_law: JumpLaw::Gamma { shape: 2.0 },
        rate: RateFunction::Linear { kappa: 1.5 },
    };
    let mut rng = RngState::new(5);
    c.bench_function("frailty path t=2", |b| b.iter(|| simulate_path(&spec, 2.0, &mut rng).unwrap()));
}

fn local_regression(c: &mut Criterion) {
    let x = uniform_data(1000, 6);
    let y: Vec<f64> = x.iter().map(|t| (6.0 * t).sin()).collect();
    let data = RegressionData::new(x, y).unwrap();
    let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let prior = LocalPrior {
        m0: PriorGuess::Constant { value: 0.0 },
        w0: PriorPrecision::Constant { value: 1.0 },
        sigma: 0.3,
    };
    let options = FitOptions {
        empirical_bayes: true,
        hierarchical: None,
    };
    let mut rng = RngState::new(7);
    c.bench_function("localreg fit n=1000 grid=100", |b| {
        b.iter(|| fit_curve(&data, &grid, 0.1, Kernel::Epanechnikov, &prior, &options, &mut rng).unwrap())
    });
}

fn envelope(c: &mut Criterion) {
    let counts = [120u64, 260, 140, 480];
    let z = [0.1, 0.3, 0.2, 0.4];
    c.bench_function("control_log_factor k=4 n=1000", |b| {
        b.iter(|| control_log_factor(black_box(&counts), &z, 25.0).unwrap())
    });
}

criterion_group!(benches, random_measures, moments, quantiles, pyramid, frailty, local_regression, envelope);
criterion_main!(benches);
