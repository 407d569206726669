//! Simulation with known parameters and brute-force Monte Carlo forecast
//! oracles.
//!
//! The recursions here are written out again on purpose and share no code
//! with [`crate::garch`], [`crate::mrs`] or [`crate::forecast`]; only the
//! innovation distribution is common.

use std::io::Write;

use chrono::Duration;
use rand::Rng;
use rand_distr::ChiSquared;

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::model::ParamVector;
use crate::mrs::MrsParams;
use crate::par::{map_indexed, Exec};
use crate::rng::{stream, SimRng};
use crate::tdist::StudentT;

pub const DEFAULT_BURN_IN: usize = 1000;

/// Paths per random stream in the oracle.
const ORACLE_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub returns: ReturnSeries,
    /// Conditional variance of each return (the active regime's for MRS).
    pub variances: Vec<f64>,
    /// Active regime per date, 0 or 1 (MRS only).
    pub regimes: Option<Vec<usize>>,
    /// Both regime variances per date (MRS only).
    pub regime_variances: Option<Vec<[f64; 2]>>,
    /// Filtered regime probabilities computed inside the generator (MRS only).
    pub filtered: Option<Vec<[f64; 2]>>,
    pub params: ParamVector,
    pub seed: u64,
}

struct Innovation {
    dist: StudentT,
    chi: ChiSquared<f64>,
}

impl Innovation {
    fn new(nu: f64) -> Result<Self> {
        let dist = StudentT::new(nu)?;
        let chi = dist.chi_squared();
        Ok(Self { dist, chi })
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        self.dist.draw(&self.chi, rng)
    }
}

/// Filter quantities carried by the MRS generator and oracle.
#[derive(Clone, Copy)]
struct MrsDgp<'a> {
    params: &'a MrsParams,
    dists: &'a [StudentT; 2],
}

impl MrsDgp<'_> {
    fn trans(&self, from: usize, to: usize) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        match (from, to) {
            (0, 0) => p,
            (0, _) => 1.0 - p,
            (_, 0) => 1.0 - q,
            _ => q,
        }
    }

    /// Posterior regime probabilities after seeing `r`.
    fn posterior(&self, predicted: [f64; 2], h: [f64; 2], r: f64) -> [f64; 2] {
        let mut w = [0.0; 2];
        for i in 0..2 {
            let reg = &self.params.regimes[i];
            let z = (r - reg.delta) / h[i].sqrt();
            w[i] = predicted[i].ln() + self.dists[i].log_density(z) - 0.5 * h[i].ln();
        }
        let top = w[0].max(w[1]);
        let e = [(w[0] - top).exp(), (w[1] - top).exp()];
        [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])]
    }

    /// Next regime variances and predicted probabilities.
    fn advance(&self, filtered: [f64; 2], h: [f64; 2], r: f64) -> ([f64; 2], [f64; 2]) {
        let regs = &self.params.regimes;
        let mu = [regs[0].delta, regs[1].delta];
        let eps = r - filtered[0] * mu[0] - filtered[1] * mu[1];
        let mut next = [0.0; 2];
        let mut pred = [0.0; 2];
        for i in 0..2 {
            let a = self.trans(0, i) * filtered[0];
            let b = self.trans(1, i) * filtered[1];
            pred[i] = a + b;
            let (wa, wb) = if a + b > 0.0 { (a / (a + b), b / (a + b)) } else { (0.5, 0.5) };
            let m = wa * mu[0] + wb * mu[1];
            let lagged = wa * (mu[0] * mu[0] + h[0]) + wb * (mu[1] * mu[1] + h[1]) - m * m;
            next[i] = regs[i].alpha0 + regs[i].alpha1 * eps * eps + regs[i].beta * lagged;
        }
        (next, pred)
    }

    fn draw_regime(&self, probs: [f64; 2], rng: &mut SimRng) -> usize {
        usize::from(rng.random::<f64>() >= probs[0])
    }
}

fn ergodic(p: f64, q: f64) -> [f64; 2] {
    let a = (1.0 - q) / (2.0 - p - q);
    [a, 1.0 - a]
}

/// Simulate `n` returns after `burn_in` discarded steps.
pub fn simulate(params: &ParamVector, n: usize, burn_in: usize, seed: u64) -> Result<SimOutput> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let total = n + burn_in;
    let mut rng = stream(seed, 0);
    let mut r = Vec::with_capacity(total);
    let mut h = Vec::with_capacity(total);
    let mut regimes = None;
    let mut regime_variances = None;
    let mut filtered_path = None;

    match params {
        ParamVector::Garch(p) => {
            let eta = Innovation::new(p.nu)?;
            let mut ht = p.alpha0 / (1.0 - p.alpha1 - p.beta);
            for _ in 0..total {
                let e = ht.sqrt() * eta.draw(&mut rng);
                r.push(p.delta + e);
                h.push(ht);
                ht = p.alpha0 + p.alpha1 * e * e + p.beta * ht;
            }
        }
        ParamVector::Gjr(p) => {
            let eta = Innovation::new(p.nu)?;
            let mut ht = p.alpha0 / (1.0 - 0.5 * (p.alpha1 + p.xi) - p.beta);
            for _ in 0..total {
                let e = ht.sqrt() * eta.draw(&mut rng);
                r.push(p.delta + e);
                h.push(ht);
                let load = if e > 0.0 { p.xi } else { p.alpha1 };
                ht = p.alpha0 + load * e * e + p.beta * ht;
            }
        }
        ParamVector::Egarch(p) => {
            let eta = Innovation::new(p.nu)?;
            let abs_mean = eta.dist.abs_moment();
            let mut lh = p.alpha0 / (1.0 - p.beta);
            for t in 0..total {
                let ht = lh.exp();
                if !ht.is_finite() || ht == 0.0 {
                    return Err(Error::Overflow { step: t });
                }
                let z = eta.draw(&mut rng);
                r.push(p.delta + ht.sqrt() * z);
                h.push(ht);
                lh = p.alpha0 + p.alpha1 * (z.abs() - abs_mean) + p.xi * z + p.beta * lh;
            }
        }
        ParamVector::Mrs(m) => {
            let dists = [StudentT::new(m.regimes[0].nu)?, StudentT::new(m.regimes[1].nu)?];
            let chis = [dists[0].chi_squared(), dists[1].chi_squared()];
            let dgp = MrsDgp { params: m, dists: &dists };
            let reg1 = m.regimes[0];
            let start = reg1.alpha0 / (1.0 - reg1.alpha1 - reg1.beta);
            let mut hv = [start, start];
            let mut pred = ergodic(m.p, m.q);
            let mut s = dgp.draw_regime(pred, &mut rng);
            let (mut states, mut hs, mut filt) = (Vec::with_capacity(total), Vec::with_capacity(total), Vec::with_capacity(total));
            for t in 0..total {
                if t > 0 {
                    let stay = if s == 0 { m.p } else { m.q };
                    if rng.random::<f64>() >= stay {
                        s = 1 - s;
                    }
                }
                let z = dists[s].draw(&chis[s], &mut rng);
                let rt = m.regimes[s].delta + hv[s].sqrt() * z;
                r.push(rt);
                h.push(hv[s]);
                states.push(s);
                hs.push(hv);
                let f = dgp.posterior(pred, hv, rt);
                filt.push(f);
                let (next, next_pred) = dgp.advance(f, hv, rt);
                if !(next[0].is_finite() && next[1].is_finite()) {
                    return Err(Error::NonFinite(format!("regime variance at step {}", t + 1)));
                }
                hv = next;
                pred = next_pred;
            }
            regimes = Some(states.split_off(burn_in));
            regime_variances = Some(hs.split_off(burn_in));
            filtered_path = Some(filt.split_off(burn_in));
        }
    }

    Ok(SimOutput {
        returns: ReturnSeries::from_values(r.split_off(burn_in)),
        variances: h.split_off(burn_in),
        regimes,
        regime_variances,
        filtered: filtered_path,
        params: *params,
        seed,
    })
}

/// State at the forecast origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleState {
    /// One-step variance `h_{t+1}` for GARCH, GJR and EGARCH.
    Single { h_next: f64 },
    Mrs {
        /// `Pr(s_t = i | data up to t)`
        filtered: [f64; 2],
        /// `h_{t+1}^(i)`
        next_variances: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleForecast {
    pub steps: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub cumulative: f64,
    pub cumulative_se: f64,
    pub discarded: usize,
}

struct Acc {
    n: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
    csum: f64,
    csq: f64,
    discarded: usize,
}

impl Acc {
    fn new(k: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; k],
            sq: vec![0.0; k],
            csum: 0.0,
            csq: 0.0,
            discarded: 0,
        }
    }

    fn push(&mut self, path: &[f64]) {
        self.n += 1;
        let mut c = 0.0;
        for (t, &v) in path.iter().enumerate() {
            self.sum[t] += v;
            self.sq[t] += v * v;
            c += v;
        }
        self.csum += c;
        self.csq += c * c;
    }

    fn merge(&mut self, o: &Acc) {
        self.n += o.n;
        self.discarded += o.discarded;
        self.csum += o.csum;
        self.csq += o.csq;
        for t in 0..self.sum.len() {
            self.sum[t] += o.sum[t];
            self.sq[t] += o.sq[t];
        }
    }
}

/// Brute-force Monte Carlo of the expected conditional variance at each of
/// the next `k` steps. For MRS the recorded quantity at step `tau >= 2` is
/// the expectation over `s_{t+tau}` given the simulated `s_{t+tau-1}`, which
/// has the same mean and lower variance than the raw draw.
pub fn mc_forecast_oracle(
    params: &ParamVector,
    state: &OracleState,
    k: usize,
    paths: usize,
    seed: u64,
    exec: Exec,
) -> Result<OracleForecast> {
    params.validate()?;
    if paths < 1000 {
        return Err(Error::InvalidParameter(format!("need >= 1000 paths, got {paths}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    match (params, state) {
        (ParamVector::Mrs(_), OracleState::Mrs { .. }) | (ParamVector::Garch(_) | ParamVector::Gjr(_) | ParamVector::Egarch(_), OracleState::Single { .. }) => {}
        _ => return Err(Error::InvalidParameter("oracle state does not match the model".into())),
    }

    let n_chunks = paths.div_ceil(ORACLE_CHUNK);
    let chunks = map_indexed(exec, n_chunks, |c| -> Result<Acc> {
        let size = ORACLE_CHUNK.min(paths - c * ORACLE_CHUNK);
        let mut rng = stream(seed, c as u64);
        let mut acc = Acc::new(k);
        let mut path = vec![0.0; k];
        match (params, *state) {
            (ParamVector::Garch(p), OracleState::Single { h_next }) => {
                let eta = Innovation::new(p.nu)?;
                for _ in 0..size {
                    let mut h = h_next;
                    for v in path.iter_mut() {
                        *v = h;
                        let e = h.sqrt() * eta.draw(&mut rng);
                        h = p.alpha0 + p.alpha1 * e * e + p.beta * h;
                    }
                    acc.push(&path);
                }
            }
            (ParamVector::Gjr(p), OracleState::Single { h_next }) => {
                let eta = Innovation::new(p.nu)?;
                for _ in 0..size {
                    let mut h = h_next;
                    for v in path.iter_mut() {
                        *v = h;
                        let e = h.sqrt() * eta.draw(&mut rng);
                        let load = if e > 0.0 { p.xi } else { p.alpha1 };
                        h = p.alpha0 + load * e * e + p.beta * h;
                    }
                    acc.push(&path);
                }
            }
            (ParamVector::Egarch(p), OracleState::Single { h_next }) => {
                let eta = Innovation::new(p.nu)?;
                let abs_mean = eta.dist.abs_moment();
                'paths: for _ in 0..size {
                    let mut lh = h_next.ln();
                    for v in path.iter_mut() {
                        *v = lh.exp();
                        if !v.is_finite() {
                            acc.discarded += 1;
                            continue 'paths;
                        }
                        let z = eta.draw(&mut rng);
                        lh = p.alpha0 + p.alpha1 * (z.abs() - abs_mean) + p.xi * z + p.beta * lh;
                    }
                    acc.push(&path);
                }
            }
            (ParamVector::Mrs(m), OracleState::Mrs { filtered, next_variances }) => {
                let dists = [StudentT::new(m.regimes[0].nu)?, StudentT::new(m.regimes[1].nu)?];
                let chis = [dists[0].chi_squared(), dists[1].chi_squared()];
                let dgp = MrsDgp { params: m, dists: &dists };
                let pred0 = [
                    dgp.trans(0, 0) * filtered[0] + dgp.trans(1, 0) * filtered[1],
                    dgp.trans(0, 1) * filtered[0] + dgp.trans(1, 1) * filtered[1],
                ];
                for _ in 0..size {
                    let (mut hv, mut pred) = (next_variances, pred0);
                    let mut s = usize::MAX;
                    for (tau, v) in path.iter_mut().enumerate() {
                        let law = if tau == 0 { pred0 } else { [dgp.trans(s, 0), dgp.trans(s, 1)] };
                        *v = law[0] * hv[0] + law[1] * hv[1];
                        s = dgp.draw_regime(law, &mut rng);
                        let rt = m.regimes[s].delta + hv[s].sqrt() * dists[s].draw(&chis[s], &mut rng);
                        let f = dgp.posterior(pred, hv, rt);
                        (hv, pred) = dgp.advance(f, hv, rt);
                    }
                    acc.push(&path);
                }
            }
            _ => unreachable!("checked above"),
        }
        Ok(acc)
    });

    let mut total = Acc::new(k);
    for c in chunks {
        total.merge(&c?);
    }
    if total.discarded * 100 > paths {
        return Err(Error::Overflow { step: k });
    }
    let n = total.n as f64;
    let se = |s: f64, q: f64| ((q / n - (s / n).powi(2)).max(0.0) / n).sqrt();
    let mut steps: Vec<f64> = total.sum.iter().map(|s| s / n).collect();
    let mut std_errors: Vec<f64> = total.sum.iter().zip(&total.sq).map(|(&s, &q)| se(s, q)).collect();
    // no randomness enters the first step
    steps[0] = match (params, *state) {
        (ParamVector::Mrs(m), OracleState::Mrs { filtered, next_variances }) => {
            let p1 = filtered[0] * m.p + filtered[1] * (1.0 - m.q);
            p1 * next_variances[0] + (1.0 - p1) * next_variances[1]
        }
        (_, OracleState::Single { h_next }) => h_next,
        _ => unreachable!("checked above"),
    };
    std_errors[0] = 0.0;
    Ok(OracleForecast {
        steps,
        std_errors,
        cumulative: total.csum / n,
        cumulative_se: se(total.csum, total.csq),
        discarded: total.discarded,
    })
}

/// `date,price` rows with prices rebuilt from percent log returns, starting
/// from 100 one day before the first return.
pub fn write_prices_csv<W: Write>(returns: &ReturnSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "price"])?;
    let first = returns.dates().first().ok_or(Error::EmptyTable)?;
    let mut log_price = 100f64.ln();
    w.write_record([(*first - Duration::days(1)).to_string(), 100f64.to_string()])?;
    for (d, r) in returns.dates().iter().zip(returns.values()) {
        log_price += r / 100.0;
        w.write_record([d.to_string(), log_price.exp().to_string()])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
