//! Stage functions shared by the subcommands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use regimecast::backtest::{backtest, LrReport, VarSeries};
use regimecast::estimator::{fit, FitOptions, FitResult};
use regimecast::evaluation::{evaluate, losses, LossReport};
use regimecast::forecast::{rolling_forecast, ForecastTable, McOptions, RollingOptions};
use regimecast::market_data::{load_prices, split, to_returns, MIN_IN_SAMPLE};
use regimecast::{Error, Exec, Frequency, ModelSpec, ReturnSeries, SampleSplit};

use crate::config::{InputSpec, RunConfig};
use crate::report::{InSampleRow, InSampleTable, Provenance};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// A failure with the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_DATA,
            message: format!("{}: {e}", path.display()),
        }
    }

    /// Prefix the message with the stage that failed.
    pub fn at(mut self, stage: &str) -> Self {
        self.message = format!("stage `{stage}` failed: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::InvalidProbability(_) | Error::HorizonTooLong { .. } => EXIT_USAGE,
        Error::NonFinite(_) | Error::Overflow { .. } | Error::EstimationFailed(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attach a stage name to a core error.
pub fn stage<T>(r: regimecast::Result<T>, name: &str) -> CliResult<T> {
    r.map_err(|e| CliError::from(e).at(name))
}

/// Returns, split and input checksum for one frequency.
pub struct Prepared {
    pub frequency: Frequency,
    pub returns: ReturnSeries,
    pub split: SampleSplit,
    pub checksum: String,
}

impl Prepared {
    pub fn in_sample(&self) -> ReturnSeries {
        self.returns.slice(self.split.in_sample.clone())
    }
}

/// Last in-sample date when none is configured: 90% of the returns.
pub fn default_in_sample_end(returns: &ReturnSeries) -> regimecast::Result<NaiveDate> {
    let n = returns.len();
    let n_in = ((n as f64 * 0.9).floor() as usize).max(MIN_IN_SAMPLE);
    if n_in >= n {
        return Err(Error::SeriesTooShort {
            needed: MIN_IN_SAMPLE + 1,
            got: n,
        });
    }
    Ok(returns.dates()[n_in - 1])
}

pub fn prepare(cfg: &RunConfig, input: &InputSpec) -> CliResult<Prepared> {
    let name = format!("load {}", input.frequency);
    let prices = stage(
        load_prices(&input.path, input.frequency, &cfg.date_column, &cfg.price_column),
        &name,
    )?;
    let checksum = prices.checksum().unwrap_or_default().to_string();
    let returns = stage(to_returns(&prices), &name)?;
    let end = match cfg.in_sample_end_for(input.frequency) {
        Some(d) => d,
        None => stage(default_in_sample_end(&returns), &format!("split {}", input.frequency))?,
    };
    let split = stage(split(&returns, end), &format!("split {}", input.frequency))?;
    Ok(Prepared {
        frequency: input.frequency,
        returns,
        split,
        checksum,
    })
}

pub fn prepare_all(cfg: &RunConfig) -> CliResult<Vec<Prepared>> {
    if cfg.inputs.is_empty() {
        return Err(CliError::usage("no --input given"));
    }
    let mut inputs = cfg.inputs.clone();
    inputs.sort_by_key(|i| i.frequency);
    inputs.iter().map(|i| prepare(cfg, i)).collect()
}

pub fn provenance(cfg: &RunConfig, prepared: &[Prepared]) -> Provenance {
    let sums: Vec<(Frequency, String)> = prepared.iter().map(|p| (p.frequency, p.checksum.clone())).collect();
    Provenance {
        config_hash: cfg.hash(&sums, &[]),
        seeds: vec![("fit".into(), cfg.seed), ("mc".into(), cfg.seed)],
    }
}

pub fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        exec: Exec::default(),
        ..FitOptions::default()
    }
}

pub fn rolling_options(cfg: &RunConfig) -> RollingOptions {
    RollingOptions {
        stride: cfg.stride,
        reestimate_every: cfg.reestimate,
        fit_options: fit_options(cfg),
        mc: McOptions {
            paths: cfg.mc_paths,
            seed: cfg.seed,
            exec: Exec::default(),
        },
        exec: Exec::default(),
    }
}

pub fn fit_model(cfg: &RunConfig, p: &Prepared, model: ModelSpec) -> CliResult<FitResult> {
    stage(
        fit(model, &p.in_sample(), &fit_options(cfg)),
        &format!("fit {} {}", p.frequency, model.id()),
    )
}

/// Fits every configured model, in configuration order.
pub fn fit_all(cfg: &RunConfig, p: &Prepared) -> CliResult<Vec<FitResult>> {
    cfg.models.iter().map(|&m| fit_model(cfg, p, m)).collect()
}

/// One table per horizon for one fitted model.
pub fn forecast_model(cfg: &RunConfig, p: &Prepared, f: &FitResult) -> CliResult<Vec<ForecastTable>> {
    let opts = rolling_options(cfg);
    cfg.horizons_for(p.frequency)
        .into_iter()
        .map(|k| {
            stage(
                rolling_forecast(f, &p.returns, &p.split, k, &opts),
                &format!("forecast {} {} k={k}", p.frequency, f.model.id()),
            )
        })
        .collect()
}

/// `tables[model][horizon]` regrouped as one report per horizon.
pub fn evaluate_by_horizon(frequency: Frequency, tables: &[Vec<ForecastTable>]) -> CliResult<Vec<LossReport>> {
    let n_k = tables.first().map_or(0, Vec::len);
    (0..n_k)
        .map(|j| {
            let group: Vec<ForecastTable> = tables.iter().map(|t| t[j].clone()).collect();
            let k = group[0].k;
            stage(evaluate(&group), &format!("evaluate {frequency} k={k}"))
        })
        .collect()
}

pub fn backtest_all(
    frequency: Frequency,
    tables: &[Vec<ForecastTable>],
    alpha: f64,
) -> CliResult<Vec<(VarSeries, LrReport)>> {
    let mut out = Vec::new();
    for t in tables.iter().flatten() {
        out.push(stage(
            backtest(t, alpha),
            &format!("backtest {frequency} {} k={}", t.model.id(), t.k),
        )?);
    }
    Ok(out)
}

/// AIC and in-sample one-step losses against squared returns.
pub fn in_sample_table(p: &Prepared, fits: &[FitResult]) -> CliResult<InSampleTable> {
    let realized: Vec<f64> = p.in_sample().values().iter().map(|r| r * r).collect();
    let rows = fits
        .iter()
        .map(|f| {
            let l = stage(
                losses(&f.variance_path.h, &realized),
                &format!("in-sample losses {} {}", p.frequency, f.model.id()),
            )?;
            Ok(InSampleRow {
                model: f.model,
                aic: f.aic,
                losses: l,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(InSampleTable::new(p.frequency, rows))
}

/// Writes `header` followed by `body` to `dir/name`.
pub fn write_file(dir: &Path, name: &str, header: &str, body: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, format!("{header}{body}")).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Render a CSV writer callback into a string.
pub fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> regimecast::Result<()>) -> CliResult<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError {
        code: EXIT_DATA,
        message: e.to_string(),
    })
}

pub fn var_series_csv(v: &VarSeries) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("model,k,alpha,origin_date,var,realized_return,violation\n");
    for r in &v.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            v.model.id(),
            v.k,
            v.alpha,
            r.origin_date,
            r.threshold,
            r.realized_return,
            u8::from(r.violation)
        );
    }
    s
}
