use regimecast::backtest::backtest;
use regimecast::estimator::{fit, FitOptions};
use regimecast::evaluation::evaluate;
use regimecast::forecast::{rolling_forecasts, ForecastTable, McOptions, RollingOptions};
use regimecast::garch::GjrParams;
use regimecast::market_data::split;
use regimecast::simlab::{simulate, DEFAULT_BURN_IN};
use regimecast::{Exec, ModelSpec, ParamVector, ReturnSeries, SampleSplit};

fn sample() -> (ReturnSeries, SampleSplit) {
    let p = ParamVector::Gjr(GjrParams {
        delta: 0.05,
        alpha0: 0.08,
        alpha1: 0.1,
        xi: 0.04,
        beta: 0.86,
        nu: 6.0,
    });
    let sim = simulate(&p, 460, DEFAULT_BURN_IN, 8).unwrap();
    let returns = sim.returns;
    let s = split(&returns, returns.dates()[399]).unwrap();
    (returns, s)
}

fn run(exec: Exec) -> Vec<Vec<ForecastTable>> {
    let (returns, s) = sample();
    let fit_options = FitOptions {
        restarts: 2,
        exec,
        ..Default::default()
    };
    let opts = RollingOptions {
        fit_options,
        mc: McOptions {
            paths: 1000,
            seed: 5,
            exec,
        },
        exec,
        ..Default::default()
    };
    ModelSpec::ALL
        .iter()
        .map(|&m| {
            let f = fit(m, &returns.slice(s.in_sample.clone()), &fit_options).unwrap();
            rolling_forecasts(&f, &returns, &s, &[1, 5], &opts).unwrap()
        })
        .collect()
}

#[test]
fn fit_forecast_evaluate_backtest() {
    let tables = run(Exec::Parallel);
    for j in 0..2 {
        let group: Vec<ForecastTable> = tables.iter().map(|t| t[j].clone()).collect();
        let report = evaluate(&group).unwrap();
        assert_eq!(report.entries.len(), 4);
        assert_eq!(report.n_rows, group[0].len());
        for ranks in &report.ranks {
            assert!(ranks.iter().all(|&r| (1..=4).contains(&r)));
        }
    }
    for t in tables.iter().flatten() {
        assert_eq!(t.len(), 60 - t.k + 1);
        let (series, lr) = backtest(t, 0.05).unwrap();
        assert_eq!(series.rows.len(), t.len());
        assert_eq!(lr.n, t.len());
        assert!(lr.lruc >= 0.0 && lr.lrind >= 0.0);
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

#[test]
fn forecast_csv_round_trip() {
    let tables = run(Exec::Parallel);
    let t = &tables[2][1];
    let mut buf = b"# provenance line\n".to_vec();
    t.write_csv(&mut buf).unwrap();
    let back = ForecastTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.model, t.model);
    assert_eq!(back.k, t.k);
    assert_eq!(back.forecasts(), t.forecasts());
    assert_eq!(back.realized(), t.realized());
    for (a, b) in back.rows.iter().zip(&t.rows) {
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.origin_date, b.origin_date);
        assert!(a.var_inputs.is_none());
    }
}
