//! `regimecast` command-line tool.

pub mod config;
pub mod pipeline;
pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use regimecast::backtest::{lr_text, write_lr_csv};
use regimecast::estimator::{fit, FitOptions, FitResult};
use regimecast::evaluation::evaluate;
use regimecast::forecast::ForecastTable;
use regimecast::garch::moment_diagnostics;
use regimecast::mrs::{hamilton_filter, regime_prob_series, FilterInit};
use regimecast::simlab::{simulate, write_prices_csv, DEFAULT_BURN_IN};
use regimecast::{Frequency, ModelSpec, ParamVector};

use config::{parse_list, Format, RunConfig};
use pipeline::*;
use report::{coefficients_csv, moments_csv, moments_text, table1_text, table2_text, Provenance, Recovery};

#[derive(Debug, Parser)]
#[command(name = "regimecast", version, about = "Volatility forecasting with GARCH-family and regime-switching models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the models on the in-sample block.
    Fit(CommonArgs),
    /// Rolling out-of-sample forecasts, one CSV per model and horizon.
    Forecast(CommonArgs),
    /// Loss functions, ranks, SR and DA.
    Evaluate(EvaluateArgs),
    /// VaR thresholds and likelihood-ratio coverage tests.
    Backtest(CommonArgs),
    /// Simulate prices from a model and optionally refit.
    Simulate(SimulateArgs),
    /// Full pipeline producing every table.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args, Clone, Default)]
struct CommonArgs {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Price CSV, either `FREQ=PATH` or a path for `--frequency`. Repeatable.
    #[arg(long)]
    input: Vec<String>,
    /// Frequency of untagged `--input` and `--in-sample-end` values.
    #[arg(long)]
    frequency: Option<String>,
    /// Last in-sample date, `YYYY-MM-DD` or `FREQ=YYYY-MM-DD`. Repeatable.
    #[arg(long)]
    in_sample_end: Vec<String>,
    #[arg(long)]
    date_column: Option<String>,
    #[arg(long)]
    price_column: Option<String>,
    /// Comma list of garch, gjr, egarch, mrs.
    #[arg(long)]
    models: Option<String>,
    /// Comma list overriding the frequency presets.
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Monte Carlo paths for EGARCH forecasts.
    #[arg(long)]
    mc_paths: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Refit on the expanding window every N origins (`off` to disable).
    #[arg(long)]
    reestimate: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Forecast CSVs written by `forecast`; when absent the forecasts are
    /// produced from `--input`.
    #[arg(long, num_args = 1..)]
    forecasts: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "garch")]
    model: String,
    /// Comma list in parameter order; defaults to typical daily WTI
    /// estimates.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Refit the simulated sample and report recovery.
    #[arg(long)]
    recover: bool,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value = "regimecast-out")]
    out: PathBuf,
    #[arg(long, default_value = "text")]
    format: String,
}

/// Typical daily WTI estimates, used as simulation defaults.
pub fn default_params(model: ModelSpec) -> Vec<f64> {
    match model {
        ModelSpec::Garch => vec![0.0932, 0.1051, 0.0636, 0.9154, 7.1651],
        ModelSpec::Gjr => vec![0.0812, 0.1011, 0.0843, 0.0328, 0.9199, 7.2264],
        // intercept shifted by alpha1 * E|z| for the centered magnitude term
        ModelSpec::Egarch => vec![0.0651, 0.0146, 0.1048, -0.0425, 0.9900, 7.1394],
        ModelSpec::Mrs => vec![
            0.0599, 0.0448, 0.0640, 0.9266, 10.0291, 0.1653, 0.4011, 0.0474, 0.8906, 5.6071, 0.9996, 0.9996,
        ],
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return e.code;
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// `REGIMECAST_THREADS` sizes the global worker pool.
fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("REGIMECAST_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("REGIMECAST_THREADS must be a positive integer, got `{v}`")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(&build_config(&a)?),
        Command::Forecast(a) => cmd_forecast(&build_config(&a)?),
        Command::Evaluate(a) => cmd_evaluate(&build_config(&a.common)?, &a.forecasts),
        Command::Backtest(a) => cmd_backtest(&build_config(&a)?),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Reproduce(a) => cmd_reproduce(&build_config(&a.common)?, a.force),
    }
}

fn build_config(a: &CommonArgs) -> CliResult<RunConfig> {
    let freq: Frequency = match &a.frequency {
        Some(f) => f.parse().map_err(|e: regimecast::Error| CliError::usage(e.to_string()))?,
        None => Frequency::Daily,
    };
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            RunConfig::parse_file(&text, freq).map_err(CliError::usage)?
        }
        None => RunConfig::default(),
    };
    let mut flags: Vec<(&str, String)> = Vec::new();
    for i in &a.input {
        flags.push(("input", i.clone()));
    }
    for d in &a.in_sample_end {
        flags.push(("in_sample_end", d.clone()));
    }
    let mut opt = |key: &'static str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((key, v));
        }
    };
    opt("date_column", a.date_column.clone());
    opt("price_column", a.price_column.clone());
    opt("models", a.models.clone());
    opt("horizons", a.horizons.clone());
    opt("alpha", a.alpha.map(|v| v.to_string()));
    opt("seed", a.seed.map(|v| v.to_string()));
    opt("restarts", a.restarts.map(|v| v.to_string()));
    opt("mc_paths", a.mc_paths.map(|v| v.to_string()));
    opt("stride", a.stride.map(|v| v.to_string()));
    opt("reestimate", a.reestimate.clone());
    opt("out", a.out.as_ref().map(|p| p.display().to_string()));
    opt("format", a.format.clone());
    for (k, v) in flags {
        cfg.set(k, &v, freq).map_err(CliError::usage)?;
    }
    cfg.validate().map_err(CliError::usage)?;
    for i in &cfg.inputs {
        if !i.path.is_file() {
            return Err(CliError::usage(format!("input file {} does not exist", i.path.display())));
        }
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn cmd_fit(cfg: &RunConfig) -> CliResult<()> {
    let prepared = prepare_all(cfg)?;
    let header = provenance(cfg, &prepared).header();
    ensure_dir(&cfg.out)?;
    for p in &prepared {
        let mut fits = Vec::new();
        let mut failures = Vec::new();
        for &m in &cfg.models {
            match fit_model(cfg, p, m) {
                Ok(f) => fits.push(f),
                Err(e) => {
                    eprintln!("warning: {e}");
                    failures.push(e);
                }
            }
        }
        if fits.is_empty() {
            return Err(failures.pop().expect("at least one model"));
        }
        let refs: Vec<&FitResult> = fits.iter().collect();
        let text = fit_text(p.frequency, &refs);
        print!("{text}");
        match cfg.format {
            Format::Text => write_file(&cfg.out, &format!("fit_{}.txt", p.frequency), &header, &text)?,
            Format::Csv => write_file(
                &cfg.out,
                &format!("fit_{}.csv", p.frequency),
                &header,
                &coefficients_csv(p.frequency, &refs),
            )?,
        };
    }
    Ok(())
}

fn fit_text(frequency: Frequency, fits: &[&FitResult]) -> String {
    let single: Vec<&FitResult> = fits.iter().copied().filter(|f| f.model != ModelSpec::Mrs).collect();
    let mut text = String::new();
    if !single.is_empty() {
        text.push_str(&table1_text(frequency, &single));
    }
    if let Some(m) = fits.iter().find(|f| f.model == ModelSpec::Mrs) {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&table2_text(frequency, m));
    }
    text
}

/// Fits and forecasts every model; `tables[model][horizon]`.
fn forecast_all(cfg: &RunConfig, p: &Prepared) -> CliResult<(Vec<FitResult>, Vec<Vec<ForecastTable>>)> {
    let fits = fit_all(cfg, p)?;
    let tables = fits
        .iter()
        .map(|f| forecast_model(cfg, p, f))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((fits, tables))
}

fn forecast_file_name(t: &ForecastTable) -> String {
    format!("forecast_{}_{}_k{}.csv", t.frequency, t.model.id(), t.k)
}

fn write_forecasts(dir: &Path, header: &str, tables: &[Vec<ForecastTable>]) -> CliResult<()> {
    for t in tables.iter().flatten() {
        let body = csv_string(|w| t.write_csv(w))?;
        write_file(dir, &forecast_file_name(t), header, &body)?;
    }
    Ok(())
}

fn cmd_forecast(cfg: &RunConfig) -> CliResult<()> {
    let prepared = prepare_all(cfg)?;
    let header = provenance(cfg, &prepared).header();
    ensure_dir(&cfg.out)?;
    for p in &prepared {
        let (_, tables) = forecast_all(cfg, p)?;
        write_forecasts(&cfg.out, &header, &tables)?;
        for t in tables.iter().flatten() {
            println!("{} {} k={}: {} origins", t.frequency, t.model.label(), t.k, t.len());
        }
    }
    Ok(())
}

fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn cmd_evaluate(cfg: &RunConfig, forecast_files: &[PathBuf]) -> CliResult<()> {
    let (header, groups) = if forecast_files.is_empty() {
        let prepared = prepare_all(cfg)?;
        let header = provenance(cfg, &prepared).header();
        let mut groups = Vec::new();
        for p in &prepared {
            let (_, tables) = forecast_all(cfg, p)?;
            groups.push((p.frequency, evaluate_by_horizon(p.frequency, &tables)?));
        }
        (header, groups)
    } else {
        let mut extra = Vec::new();
        let mut by_key: BTreeMap<(Frequency, usize), Vec<ForecastTable>> = BTreeMap::new();
        for path in forecast_files {
            let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            let t = stage(ForecastTable::read_csv(file), &format!("read {}", path.display()))?;
            extra.push(format!("forecasts_sha256={}", file_sha256(path)?));
            by_key.entry((t.frequency, t.k)).or_default().push(t);
        }
        let header = Provenance {
            config_hash: cfg.hash(&[], &extra),
            seeds: vec![("fit".into(), cfg.seed), ("mc".into(), cfg.seed)],
        }
        .header();
        let mut groups: Vec<(Frequency, Vec<_>)> = Vec::new();
        for ((f, k), tables) in by_key {
            let r = stage(evaluate(&tables), &format!("evaluate {f} k={k}"))?;
            match groups.last_mut() {
                Some((g, v)) if *g == f => v.push(r),
                _ => groups.push((f, vec![r])),
            }
        }
        (header, groups)
    };
    ensure_dir(&cfg.out)?;
    for (f, reports) in groups {
        let text: Vec<String> = reports.iter().map(|r| r.to_text()).collect();
        let text = text.join("\n");
        print!("{text}");
        match cfg.format {
            Format::Text => {
                write_file(&cfg.out, &format!("evaluation_{f}.txt"), &header, &text)?;
            }
            Format::Csv => {
                for r in &reports {
                    let body = csv_string(|w| r.write_csv(w))?;
                    write_file(&cfg.out, &format!("evaluation_{f}_k{}.csv", r.k), &header, &body)?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_backtest(cfg: &RunConfig) -> CliResult<()> {
    let prepared = prepare_all(cfg)?;
    let header = provenance(cfg, &prepared).header();
    ensure_dir(&cfg.out)?;
    for p in &prepared {
        let (_, tables) = forecast_all(cfg, p)?;
        let results = backtest_all(p.frequency, &tables, cfg.alpha)?;
        let reports: Vec<_> = results.iter().map(|(_, r)| *r).collect();
        let text = lr_text(&reports);
        print!("{text}");
        match cfg.format {
            Format::Text => write_file(&cfg.out, &format!("backtest_{}.txt", p.frequency), &header, &text)?,
            Format::Csv => write_file(
                &cfg.out,
                &format!("backtest_{}.csv", p.frequency),
                &header,
                &csv_string(|w| write_lr_csv(&reports, w))?,
            )?,
        };
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let model: ModelSpec = a.model.parse().map_err(|e: regimecast::Error| CliError::usage(e.to_string()))?;
    let format: Format = a.format.parse().map_err(CliError::usage)?;
    let values = match &a.params {
        Some(s) => parse_list::<f64>(s).map_err(|e| CliError::usage(format!("params: {e}")))?,
        None => default_params(model),
    };
    let params = ParamVector::from_values(model, &values)?;
    params.validate()?;
    if a.restarts == 0 {
        return Err(CliError::usage("restarts must be >= 1"));
    }
    let sim = stage(simulate(&params, a.n, a.burn_in, a.seed), "simulate")?;
    let extra = vec![
        format!("model={}", model.id()),
        format!("params={}", values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        format!("n={}", a.n),
        format!("burn_in={}", a.burn_in),
        format!("recover={}", a.recover),
        format!("restarts={}", a.restarts),
    ];
    let cfg = RunConfig {
        seed: a.seed,
        restarts: a.restarts,
        ..RunConfig::default()
    };
    let header = Provenance {
        config_hash: cfg.hash(&[], &extra),
        seeds: vec![("simulate".into(), a.seed), ("fit".into(), a.seed)],
    }
    .header();
    ensure_dir(&a.out)?;
    let prices = csv_string(|w| write_prices_csv(&sim.returns, w))?;
    write_file(&a.out, &format!("simulated_{}_prices.csv", model.id()), &header, &prices)?;

    let mut truth = String::from("date,return,variance");
    if sim.regimes.is_some() {
        truth.push_str(",regime");
    }
    truth.push('\n');
    for (i, (d, r)) in sim.returns.dates().iter().zip(sim.returns.values()).enumerate() {
        truth.push_str(&format!("{d},{r},{}", sim.variances[i]));
        if let Some(reg) = &sim.regimes {
            truth.push_str(&format!(",{}", reg[i] + 1));
        }
        truth.push('\n');
    }
    write_file(&a.out, &format!("simulated_{}_truth.csv", model.id()), &header, &truth)?;

    if a.recover {
        let opts = FitOptions {
            restarts: a.restarts,
            seed: a.seed,
            ..FitOptions::default()
        };
        let f = stage(fit(model, &sim.returns, &opts), "recover")?;
        let accuracy = match (&params, &f.regime_path, &sim.regimes) {
            (ParamVector::Mrs(t), Some(path), Some(regimes)) => {
                let high = t.high_regime();
                let hits = path
                    .steps
                    .iter()
                    .zip(regimes)
                    .filter(|(s, &r)| (s.filtered[path.high_regime] > 0.5) == (r == high))
                    .count();
                Some(hits as f64 / regimes.len() as f64)
            }
            _ => None,
        };
        let rec = Recovery {
            truth: params,
            fit: f,
            accuracy,
        };
        print!("{}", rec.to_text());
        match format {
            Format::Text => write_file(&a.out, &format!("recovery_{}.txt", model.id()), &header, &rec.to_text())?,
            Format::Csv => write_file(&a.out, &format!("recovery_{}.csv", model.id()), &header, &rec.to_csv())?,
        };
    } else {
        println!("{} observations written to {}", a.n, a.out.display());
    }
    Ok(())
}

fn cmd_reproduce(cfg: &RunConfig, force: bool) -> CliResult<()> {
    let out = &cfg.out;
    if out.exists() && !force {
        return Err(CliError::usage(format!(
            "{} exists; pass --force to replace it",
            out.display()
        )));
    }
    let mut partial = out.clone().into_os_string();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(|e| CliError::io(&partial, e))?;
    }
    ensure_dir(&partial)?;
    match reproduce_into(cfg, &partial) {
        Ok(()) => {
            if out.exists() {
                fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))?;
            }
            fs::rename(&partial, out).map_err(|e| CliError::io(out, e))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&partial);
            Err(e)
        }
    }
}

fn reproduce_into(cfg: &RunConfig, dir: &Path) -> CliResult<()> {
    let prepared = prepare_all(cfg)?;
    let prov = provenance(cfg, &prepared);
    let header = prov.header();
    write_file(dir, "config.txt", &header, &cfg.to_bundle_string())?;
    for p in &prepared {
        let f = p.frequency;
        let (fits, tables) = forecast_all(cfg, p)?;
        let refs: Vec<&FitResult> = fits.iter().collect();

        let single: Vec<&FitResult> = refs.iter().copied().filter(|f| f.model != ModelSpec::Mrs).collect();
        if !single.is_empty() {
            write_file(dir, &format!("table1_{f}.txt"), &header, &table1_text(f, &single))?;
            write_file(dir, &format!("table1_{f}.csv"), &header, &coefficients_csv(f, &single))?;
        }
        if let Some(m) = fits.iter().find(|x| x.model == ModelSpec::Mrs) {
            write_file(dir, &format!("table2_{f}.txt"), &header, &table2_text(f, m))?;
            write_file(dir, &format!("table2_{f}.csv"), &header, &coefficients_csv(f, &[m]))?;
            let params = match m.estimates {
                ParamVector::Mrs(mp) => mp,
                _ => unreachable!(),
            };
            let (_, path) = stage(
                hamilton_filter(&params, &p.returns, m.h_init, FilterInit::Ergodic),
                &format!("figure2 {f}"),
            )?;
            let mut body = String::from("date,prob_high_regime,in_sample\n");
            for (i, (d, pr)) in regime_prob_series(&path).into_iter().enumerate() {
                body.push_str(&format!("{d},{pr},{}\n", u8::from(i < p.split.in_sample_len())));
            }
            write_file(dir, &format!("figure2_{f}.csv"), &header, &body)?;
        }

        let t3 = in_sample_table(p, &fits)?;
        write_file(dir, &format!("table3_{f}.txt"), &header, &t3.to_text())?;
        write_file(dir, &format!("table3_{f}.csv"), &header, &t3.to_csv())?;

        if let Some(ParamVector::Garch(g)) = fits.iter().find(|x| x.model == ModelSpec::Garch).map(|x| x.estimates) {
            let d = moment_diagnostics(&g);
            write_file(dir, &format!("moments_{f}.txt"), &header, &moments_text(f, &d))?;
            write_file(dir, &format!("moments_{f}.csv"), &header, &moments_csv(f, &d))?;
        }

        write_forecasts(dir, &header, &tables)?;

        let reports = evaluate_by_horizon(f, &tables)?;
        let text: Vec<String> = reports.iter().map(|r| r.to_text()).collect();
        write_file(dir, &format!("table4_{f}.txt"), &header, &text.join("\n"))?;
        for r in &reports {
            let body = csv_string(|w| r.write_csv(w))?;
            write_file(dir, &format!("table4_{f}_k{}.csv", r.k), &header, &body)?;
        }

        let results = backtest_all(f, &tables, cfg.alpha)?;
        let lr: Vec<_> = results.iter().map(|(_, r)| *r).collect();
        write_file(dir, &format!("table5_{f}.txt"), &header, &lr_text(&lr))?;
        write_file(dir, &format!("table5_{f}.csv"), &header, &csv_string(|w| write_lr_csv(&lr, w))?)?;
        for (v, _) in &results {
            write_file(dir, &format!("var_{f}_{}_k{}.csv", v.model.id(), v.k), &header, &var_series_csv(v))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        for m in ModelSpec::ALL {
            let p = ParamVector::from_values(m, &default_params(m)).unwrap();
            p.validate().unwrap();
        }
    }

    #[test]
    fn help_exits_zero_and_bad_flag_exits_one() {
        assert_eq!(run(["regimecast", "--help"]), 0);
        assert_eq!(run(["regimecast", "fit", "--no-such-flag"]), EXIT_USAGE);
        assert_eq!(run(["regimecast", "fit", "--alpha", "0.9", "--input", "x.csv"]), EXIT_USAGE);
    }
}
