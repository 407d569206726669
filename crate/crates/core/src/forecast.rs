//! Multi-step variance forecasts and the rolling out-of-sample harness.
//!
//! The k-period forecast at origin `t` is the sum of the per-step
//! forecasts for `t+1 ..= t+k`, compared against the sum of squared
//! returns over the same window.

use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::estimator::{fit, FitOptions, FitResult};
use crate::garch::{egarch_variances, garch_variances, gjr_variances, EgarchParams, GarchParams, GjrParams};
use crate::market_data::{window_sum, Frequency, ReturnSeries, SampleSplit};
use crate::model::{ModelSpec, ParamVector};
use crate::mrs::{backward_probs, klaassen_recombine, propagate, run_filter, transition_matrix, FilterInit, MrsParams};
use crate::par::{chunk_sizes, map_indexed, Exec};
use crate::rng::stream;
use crate::tdist::StudentT;

/// Sum of per-step forecasts, accumulated left to right.
pub fn cumulative(steps: &[f64]) -> f64 {
    steps.iter().sum()
}

fn check_start(h_next: f64, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    if !(h_next > 0.0 && h_next.is_finite()) {
        return Err(Error::InvalidParameter(format!("one-step variance must be > 0, got {h_next}")));
    }
    Ok(())
}

fn affine_steps(intercept: f64, slope: f64, h_next: f64, k: usize) -> Vec<f64> {
    let mut steps = Vec::with_capacity(k);
    steps.push(h_next);
    for tau in 1..k {
        steps.push(intercept + slope * steps[tau - 1]);
    }
    steps
}

/// Per-step GARCH forecasts for `tau = 1..=k`.
pub fn garch_multistep(p: &GarchParams, h_next: f64, k: usize) -> Result<Vec<f64>> {
    p.validate()?;
    check_start(h_next, k)?;
    Ok(affine_steps(p.alpha0, p.alpha1 + p.beta, h_next, k))
}

/// Per-step GJR forecasts; positive and non-positive shocks are equally likely.
pub fn gjr_multistep(p: &GjrParams, h_next: f64, k: usize) -> Result<Vec<f64>> {
    p.validate()?;
    check_start(h_next, k)?;
    Ok(affine_steps(p.alpha0, 0.5 * (p.alpha1 + p.xi) + p.beta, h_next, k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub paths: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            paths: 10_000,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// Paths per random stream.
pub(crate) const MC_CHUNK: usize = 1024;

/// Monte Carlo forecast with sampling error.
#[derive(Debug, Clone, PartialEq)]
pub struct McForecast {
    pub steps: Vec<f64>,
    /// Standard error of each step mean (0 for the known first step).
    pub std_errors: Vec<f64>,
    pub cumulative_se: f64,
    pub discarded: usize,
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    cum_sum: f64,
    cum_sq: f64,
    discarded: usize,
}

/// Per-step EGARCH forecasts by simulating the log-variance recursion.
pub fn egarch_multistep(p: &EgarchParams, logh_next: f64, k: usize, opts: &McOptions) -> Result<McForecast> {
    p.validate()?;
    check_start(logh_next.exp(), k)?;
    if opts.paths < 1000 {
        return Err(Error::InvalidParameter(format!("need >= 1000 paths, got {}", opts.paths)));
    }
    let d = StudentT::new(p.nu)?;
    let chi = d.chi_squared();
    let abs_mean = d.abs_moment();
    let h1 = logh_next.exp();

    let sizes = chunk_sizes(opts.paths, MC_CHUNK);
    let chunks = map_indexed(opts.exec, sizes.len(), |c| {
        let mut rng = stream(opts.seed, c as u64);
        let mut m = Moments {
            sum: vec![0.0; k],
            sum_sq: vec![0.0; k],
            ..Default::default()
        };
        let mut path = vec![0.0; k];
        'paths: for _ in 0..sizes[c] {
            let mut logh = logh_next;
            path[0] = h1;
            for h in path.iter_mut().skip(1) {
                let z = d.draw(&chi, &mut rng);
                logh = p.alpha0 + p.alpha1 * (z.abs() - abs_mean) + p.xi * z + p.beta * logh;
                *h = logh.exp();
                if !h.is_finite() {
                    m.discarded += 1;
                    continue 'paths;
                }
            }
            m.n += 1;
            for (tau, &h) in path.iter().enumerate() {
                m.sum[tau] += h;
                m.sum_sq[tau] += h * h;
            }
            let c = cumulative(&path);
            m.cum_sum += c;
            m.cum_sq += c * c;
        }
        m
    });

    let mut total = Moments {
        sum: vec![0.0; k],
        sum_sq: vec![0.0; k],
        ..Default::default()
    };
    for m in chunks {
        total.n += m.n;
        total.discarded += m.discarded;
        total.cum_sum += m.cum_sum;
        total.cum_sq += m.cum_sq;
        for tau in 0..k {
            total.sum[tau] += m.sum[tau];
            total.sum_sq[tau] += m.sum_sq[tau];
        }
    }
    if total.discarded * 100 > opts.paths {
        return Err(Error::Overflow { step: k });
    }
    let n = total.n as f64;
    let se = |s: f64, sq: f64| ((sq / n - (s / n).powi(2)).max(0.0) / n).sqrt();
    let mut steps: Vec<f64> = total.sum.iter().map(|s| s / n).collect();
    let mut std_errors: Vec<f64> = total.sum.iter().zip(&total.sum_sq).map(|(&s, &q)| se(s, q)).collect();
    steps[0] = h1;
    std_errors[0] = 0.0;
    Ok(McForecast {
        steps,
        std_errors,
        cumulative_se: se(total.cum_sum, total.cum_sq),
        discarded: total.discarded,
    })
}

/// Filter state at a forecast origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrsState {
    /// `Pr(s_t = i | data up to t)`
    pub filtered: [f64; 2],
    /// `h_{t+1}^(i)`
    pub next_variances: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrsForecast {
    pub steps: Vec<f64>,
    /// `Pr(s_{t+tau} = i | data up to t)`
    pub regime_probs: Vec<[f64; 2]>,
    pub regime_variances: Vec<[f64; 2]>,
}

impl MrsForecast {
    /// Per-regime sums of the regime variance forecasts.
    pub fn regime_cumulative(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for v in &self.regime_variances {
            out[0] += v[0];
            out[1] += v[1];
        }
        out
    }
}

/// Per-step MRS-GARCH forecasts with regime probabilities from powers of
/// the transition matrix.
pub fn mrs_multistep(p: &MrsParams, state: &MrsState, k: usize) -> Result<MrsForecast> {
    p.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let trans = transition_matrix(p.p, p.q)?;
    let means = [p.regimes[0].delta, p.regimes[1].delta];
    let mut probs = vec![propagate(state.filtered, &trans)];
    let mut vars = vec![state.next_variances];
    for tau in 1..k {
        let lagged = probs[tau - 1];
        let mut next = [0.0; 2];
        for (i, r) in p.regimes.iter().enumerate() {
            let w = backward_probs(&trans, lagged, i)?;
            next[i] = r.alpha0 + (r.alpha1 + r.beta) * klaassen_recombine(w, means, vars[tau - 1]);
        }
        vars.push(next);
        probs.push(propagate(lagged, &trans));
    }
    let steps = probs
        .iter()
        .zip(&vars)
        .map(|(pr, v)| pr[0] * v[0] + pr[1] * v[1])
        .collect();
    Ok(MrsForecast {
        steps,
        regime_probs: probs,
        regime_variances: vars,
    })
}

/// Predictive law of the k-period return, used for VaR.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveLaw {
    Student {
        mean: f64,
        variance: f64,
        nu: f64,
    },
    /// Weighted by the next-step regime probabilities.
    Mixture {
        weights: [f64; 2],
        means: [f64; 2],
        variances: [f64; 2],
        nus: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInputs {
    pub law: PredictiveLaw,
    /// Sum of returns over the forecast window.
    pub realized_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    /// Index of the origin in the return series.
    pub origin_index: usize,
    pub origin_date: NaiveDate,
    pub forecast: f64,
    pub realized: f64,
    pub steps: Vec<f64>,
    /// Present on tables built in memory; not serialized.
    pub var_inputs: Option<VarInputs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    pub model: ModelSpec,
    pub frequency: Frequency,
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<ForecastRow>,
}

const CSV_HEADER: [&str; 8] = ["model", "frequency", "origin_date", "k", "forecast", "realized", "seed", "steps"];

impl ForecastTable {
    pub fn forecasts(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.forecast).collect()
    }

    pub fn realized(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.realized).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Floats use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let steps: Vec<String> = r.steps.iter().map(f64::to_string).collect();
            w.write_record([
                self.model.id().to_string(),
                self.frequency.to_string(),
                r.origin_date.to_string(),
                self.k.to_string(),
                r.forecast.to_string(),
                r.realized.to_string(),
                self.seed.to_string(),
                steps.join(";"),
            ])?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    /// Reads what [`ForecastTable::write_csv`] wrote; `#` lines are skipped.
    /// Origin indices are row positions and VaR inputs are absent.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let idx: Vec<usize> = CSV_HEADER[..7].iter().map(|c| col(c)).collect::<Result<_>>()?;
        let steps_col = headers.iter().position(|h| h == "steps");
        let mut meta: Option<(ModelSpec, Frequency, usize, u64)> = None;
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i as u64 + 2, |p| p.line());
            let bad = |m: String| Error::MalformedRow { row: line, message: m };
            let field = |j: usize| rec.get(idx[j]).unwrap_or("").trim();
            let num = |j: usize| field(j).parse::<f64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[j])));
            let this = (
                field(0).parse::<ModelSpec>().map_err(|e| bad(e.to_string()))?,
                field(1).parse::<Frequency>().map_err(|e| bad(e.to_string()))?,
                field(3).parse::<usize>().map_err(|e| bad(format!("k: {e}")))?,
                field(6).parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?,
            );
            match meta {
                None => meta = Some(this),
                Some(m) if m != this => return Err(bad("model, frequency, k and seed must be constant".into())),
                _ => {}
            }
            let origin_date = NaiveDate::parse_from_str(field(2), "%Y-%m-%d").map_err(|e| bad(format!("origin_date: {e}")))?;
            let steps = match steps_col.and_then(|c| rec.get(c)).map(str::trim) {
                Some(s) if !s.is_empty() => s
                    .split(';')
                    .map(|v| v.parse::<f64>().map_err(|e| bad(format!("steps: {e}"))))
                    .collect::<Result<Vec<_>>>()?,
                _ => Vec::new(),
            };
            rows.push(ForecastRow {
                origin_index: i,
                origin_date,
                forecast: num(4)?,
                realized: num(5)?,
                steps,
                var_inputs: None,
            });
        }
        let (model, frequency, k, seed) = meta.ok_or(Error::EmptyTable)?;
        Ok(Self {
            model,
            frequency,
            k,
            seed,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingOptions {
    /// Distance between consecutive origins.
    pub stride: usize,
    /// Refit on the expanding window every this many origins.
    pub reestimate_every: Option<usize>,
    pub fit_options: FitOptions,
    pub mc: McOptions,
    pub exec: Exec,
}

impl Default for RollingOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            reestimate_every: None,
            fit_options: FitOptions::default(),
            mc: McOptions::default(),
            exec: Exec::default(),
        }
    }
}

/// Filter output over the whole series under one parameter set.
enum Filtered {
    /// `h[t + 1]` is the one-step variance after observing `t`.
    Single(Vec<f64>),
    Mrs { filtered: Vec<[f64; 2]>, variances: Vec<[f64; 2]> },
}

fn run_model_filter(params: &ParamVector, values: &[f64], h_init: f64) -> Result<Filtered> {
    Ok(match params {
        ParamVector::Garch(p) => Filtered::Single(garch_variances(p, values, h_init)?),
        ParamVector::Gjr(p) => Filtered::Single(gjr_variances(p, values, h_init)?),
        ParamVector::Egarch(p) => Filtered::Single(egarch_variances(p, values, h_init.ln())?),
        ParamVector::Mrs(p) => {
            let out = run_filter(p, values, h_init, FilterInit::Ergodic, true)?;
            let filtered = out.steps.iter().map(|s| s.filtered).collect();
            let mut variances: Vec<[f64; 2]> = out.steps.iter().map(|s| s.variances).collect();
            variances.push(out.next_variances);
            Filtered::Mrs { filtered, variances }
        }
    })
}

/// Per-origin seed for Monte Carlo forecasts.
fn origin_seed(seed: u64, origin: usize) -> u64 {
    seed ^ (origin as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn forecast_at(
    params: &ParamVector,
    filtered: &Filtered,
    origin: usize,
    k: usize,
    mc: &McOptions,
) -> Result<(Vec<f64>, PredictiveLaw)> {
    let kf = k as f64;
    let student = |steps: Vec<f64>, delta: f64, nu: f64| {
        let variance = cumulative(&steps);
        (steps, PredictiveLaw::Student { mean: kf * delta, variance, nu })
    };
    match (params, filtered) {
        (ParamVector::Garch(p), Filtered::Single(h)) => Ok(student(garch_multistep(p, h[origin + 1], k)?, p.delta, p.nu)),
        (ParamVector::Gjr(p), Filtered::Single(h)) => Ok(student(gjr_multistep(p, h[origin + 1], k)?, p.delta, p.nu)),
        (ParamVector::Egarch(p), Filtered::Single(h)) => {
            let opts = McOptions {
                seed: origin_seed(mc.seed, origin),
                ..*mc
            };
            let f = egarch_multistep(p, h[origin + 1].ln(), k, &opts)?;
            Ok(student(f.steps, p.delta, p.nu))
        }
        (ParamVector::Mrs(p), Filtered::Mrs { filtered, variances }) => {
            let state = MrsState {
                filtered: filtered[origin],
                next_variances: variances[origin + 1],
            };
            let f = mrs_multistep(p, &state, k)?;
            let law = PredictiveLaw::Mixture {
                weights: f.regime_probs[0],
                means: [kf * p.regimes[0].delta, kf * p.regimes[1].delta],
                variances: f.regime_cumulative(),
                nus: [p.regimes[0].nu, p.regimes[1].nu],
            };
            Ok((f.steps, law))
        }
        _ => unreachable!("filter output matches the parameter record"),
    }
}

/// Origins for horizon `k`: from the last in-sample observation up to the
/// last one with a full realized window.
pub fn origins(split: &SampleSplit, k: usize, stride: usize) -> Result<Vec<usize>> {
    let available = split.out_of_sample_len();
    if k == 0 || k > available {
        return Err(Error::HorizonTooLong { k, available });
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let first = split.in_sample.end - 1;
    let last = split.out_of_sample.end - 1 - k;
    Ok((first..=last).step_by(stride).collect())
}

/// Rolling k-period forecasts over the out-of-sample block with the
/// parameters in `fit` (refitted on the expanding window when asked).
pub fn rolling_forecast(
    fit_result: &FitResult,
    returns: &ReturnSeries,
    split: &SampleSplit,
    k: usize,
    options: &RollingOptions,
) -> Result<ForecastTable> {
    if split.out_of_sample.end != returns.len() {
        return Err(Error::InvalidParameter("split does not match the return series".into()));
    }
    let origins = origins(split, k, options.stride)?;
    let values = returns.values();
    let squares: Vec<f64> = values.iter().map(|r| r * r).collect();

    // one parameter set per block of origins
    let block_len = options.reestimate_every.unwrap_or(origins.len()).max(1);
    let mut rows = Vec::with_capacity(origins.len());
    for (b, block) in origins.chunks(block_len).enumerate() {
        let (params, h_init) = if b == 0 {
            (fit_result.estimates, fit_result.h_init)
        } else {
            let window = returns.slice(0..block[0] + 1);
            let refit = fit(fit_result.model, &window, &options.fit_options)?;
            (refit.estimates, refit.h_init)
        };
        let filtered = run_model_filter(&params, values, h_init)?;
        let out = map_indexed(options.exec, block.len(), |j| -> Result<ForecastRow> {
            let origin = block[j];
            let (steps, law) = forecast_at(&params, &filtered, origin, k, &options.mc)?;
            Ok(ForecastRow {
                origin_index: origin,
                origin_date: returns.dates()[origin],
                forecast: cumulative(&steps),
                realized: window_sum(&squares, origin, k)?,
                steps,
                var_inputs: Some(VarInputs {
                    law,
                    realized_return: window_sum(values, origin, k)?,
                }),
            })
        });
        for row in out {
            rows.push(row?);
        }
    }
    Ok(ForecastTable {
        model: fit_result.model,
        frequency: returns.frequency(),
        k,
        seed: options.mc.seed,
        rows,
    })
}

/// One table per horizon.
pub fn rolling_forecasts(
    fit_result: &FitResult,
    returns: &ReturnSeries,
    split: &SampleSplit,
    horizons: &[usize],
    options: &RollingOptions,
) -> Result<Vec<ForecastTable>> {
    horizons
        .iter()
        .map(|&k| rolling_forecast(fit_result, returns, split, k, options))
        .collect()
}
