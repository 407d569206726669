use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use regimecast::estimator::{fit, FitOptions};
use regimecast::forecast::{egarch_multistep, rolling_forecast, McOptions, RollingOptions};
use regimecast::garch::{EgarchParams, GarchParams};
use regimecast::market_data::split;
use regimecast::simlab::{mc_forecast_oracle, simulate, OracleState, DEFAULT_BURN_IN};
use regimecast::{Exec, ModelSpec, ParamVector};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn garch() -> ParamVector {
    ParamVector::Garch(GarchParams {
        delta: 0.05,
        alpha0: 0.1,
        alpha1: 0.07,
        beta: 0.91,
        nu: 7.0,
    })
}

fn egarch() -> EgarchParams {
    EgarchParams {
        delta: 0.05,
        alpha0: -0.06,
        alpha1: 0.1,
        xi: -0.04,
        beta: 0.98,
        nu: 7.0,
    }
}

fn mc_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("mc_oracle_100k_k10");
    g.sample_size(10);
    let p = garch();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_forecast_oracle(&p, &OracleState::Single { h_next: 2.0 }, 10, 100_000, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn egarch_mc(c: &mut Criterion) {
    let mut g = c.benchmark_group("egarch_multistep_10k_k22");
    let p = egarch();
    for (name, exec) in MODES {
        let opts = McOptions { paths: 10_000, seed: 1, exec };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| egarch_multistep(&p, 2f64.ln(), 22, &opts).unwrap())
        });
    }
    g.finish();
}

fn fit_restarts(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_garch_5_restarts");
    g.sample_size(10);
    let sim = simulate(&garch(), 2000, DEFAULT_BURN_IN, 3).unwrap();
    for (name, exec) in MODES {
        let opts = FitOptions { exec, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit(ModelSpec::Garch, &sim.returns, &opts).unwrap())
        });
    }
    g.finish();
}

fn rolling_egarch(c: &mut Criterion) {
    let mut g = c.benchmark_group("rolling_egarch_k5");
    g.sample_size(10);
    let sim = simulate(&ParamVector::Egarch(egarch()), 700, DEFAULT_BURN_IN, 4).unwrap();
    let returns = sim.returns;
    let s = split(&returns, returns.dates()[599]).unwrap();
    let f = fit(ModelSpec::Egarch, &returns.slice(0..600), &FitOptions { restarts: 1, ..Default::default() }).unwrap();
    for (name, exec) in MODES {
        let opts = RollingOptions {
            mc: McOptions { paths: 2000, seed: 1, exec },
            exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rolling_forecast(&f, &returns, &s, 5, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, mc_oracle, egarch_mc, fit_restarts, rolling_egarch);
criterion_main!(benches);
