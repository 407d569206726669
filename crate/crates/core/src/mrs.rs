//! Two-regime Markov-switching GARCH with Klaassen's recombination of the
//! regime-conditional lagged variance.
//!
//! Regime `i` has its own mean, GARCH(1,1) coefficients and t degrees of
//! freedom. The chain has `P(s_t = 1 | s_{t-1} = 1) = p` and
//! `P(s_t = 2 | s_{t-1} = 2) = q`. Indices 0 and 1 in code are regimes 1 and 2.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::tdist::StudentT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub delta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub nu: f64,
}

impl RegimeParams {
    /// alpha0 / (1 - alpha1 - beta); orders the regimes.
    pub fn variance_proxy(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha1 - self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrsParams {
    pub regimes: [RegimeParams; 2],
    pub p: f64,
    pub q: f64,
}

impl MrsParams {
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.regimes.iter().enumerate() {
            let bad = |what: &str| Err(Error::InvalidParameter(format!("regime {}: {what}", i + 1)));
            if !(r.alpha0 > 0.0) {
                return bad("alpha0 must be > 0");
            }
            if !(r.alpha1 >= 0.0 && r.beta >= 0.0) {
                return bad("alpha1 and beta must be >= 0");
            }
            if !(r.alpha1 + r.beta < 1.0) {
                return bad("alpha1 + beta must be < 1");
            }
            if !(r.nu > 2.0) {
                return bad("nu must be > 2");
            }
            if !r.delta.is_finite() {
                return bad("delta must be finite");
            }
        }
        transition_matrix(self.p, self.q).map(|_| ())
    }

    /// Index of the regime with the larger variance proxy.
    pub fn high_regime(&self) -> usize {
        if self.regimes[1].variance_proxy() >= self.regimes[0].variance_proxy() {
            1
        } else {
            0
        }
    }

    /// Swap regime labels together with `(p, q)`.
    pub fn swapped(&self) -> Self {
        Self {
            regimes: [self.regimes[1], self.regimes[0]],
            p: self.q,
            q: self.p,
        }
    }

    /// Relabel so regime 2 is the high-variance regime.
    pub fn identified(&self) -> Self {
        if self.high_regime() == 0 {
            self.swapped()
        } else {
            *self
        }
    }

    fn means(&self) -> [f64; 2] {
        [self.regimes[0].delta, self.regimes[1].delta]
    }
}

pub type TransitionMatrix = [[f64; 2]; 2];

/// `[[p, 1-p], [1-q, q]]`; entry `[i][j]` is `P(s_t = j | s_{t-1} = i)`.
pub fn transition_matrix(p: f64, q: f64) -> Result<TransitionMatrix> {
    for v in [p, q] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidProbability(v));
        }
    }
    Ok([[p, 1.0 - p], [1.0 - q, q]])
}

pub fn ergodic_probs(p: f64, q: f64) -> Result<[f64; 2]> {
    let denom = 2.0 - p - q;
    if !(denom > 0.0) || !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "no unique ergodic distribution for p = {p}, q = {q}"
        )));
    }
    let pi1 = (1.0 - q) / denom;
    Ok([pi1, 1.0 - pi1])
}

/// One step of the chain: `probs * P`.
#[inline]
pub fn propagate(probs: [f64; 2], trans: &TransitionMatrix) -> [f64; 2] {
    [
        probs[0] * trans[0][0] + probs[1] * trans[1][0],
        probs[0] * trans[0][1] + probs[1] * trans[1][1],
    ]
}

/// `Pr(s_{t-1} = j | s_t = target)` for `j = 1, 2`, from the lagged
/// probabilities of `s_{t-1}`.
pub fn backward_probs(trans: &TransitionMatrix, lagged: [f64; 2], target: usize) -> Result<[f64; 2]> {
    let a = trans[0][target] * lagged[0];
    let b = trans[1][target] * lagged[1];
    let denom = a + b;
    if !(denom > 0.0) {
        return Err(Error::NonFinite(format!(
            "regime {} has zero predicted probability",
            target + 1
        )));
    }
    Ok([a / denom, b / denom])
}

/// Mixture second moment minus squared mixture mean:
/// `sum_j w_j (mu_j^2 + h_j) - (sum_j w_j mu_j)^2`.
#[inline]
pub fn klaassen_recombine(weights: [f64; 2], means: [f64; 2], variances: [f64; 2]) -> f64 {
    let second = weights[0] * (means[0] * means[0] + variances[0])
        + weights[1] * (means[1] * means[1] + variances[1]);
    let mean = weights[0] * means[0] + weights[1] * means[1];
    second - mean * mean
}

/// `E[h_{t-1} | s_t = target]` given lagged regime probabilities.
pub fn expected_lagged_variance(
    trans: &TransitionMatrix,
    lagged: [f64; 2],
    target: usize,
    means: [f64; 2],
    variances: [f64; 2],
) -> Result<f64> {
    let w = backward_probs(trans, lagged, target)?;
    Ok(klaassen_recombine(w, means, variances))
}

/// Filter quantities at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    /// `Pr(s_t = i | data up to t-1)`
    pub predicted: [f64; 2],
    /// `Pr(s_t = i | data up to t)`
    pub filtered: [f64; 2],
    /// `h_t^(i)`
    pub variances: [f64; 2],
    /// `sum_i predicted_i * h_t^(i)`
    pub predictive_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeProbPath {
    pub dates: Vec<NaiveDate>,
    pub steps: Vec<FilterStep>,
    /// Predicted probabilities and regime variances for the step after the sample.
    pub next_predicted: [f64; 2],
    pub next_variances: [f64; 2],
    /// Index of the high-variance regime under the parameters used.
    pub high_regime: usize,
}

impl RegimeProbPath {
    pub fn predictive_variances(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.predictive_variance).collect()
    }

    pub fn next_predictive_variance(&self) -> f64 {
        self.next_predicted[0] * self.next_variances[0] + self.next_predicted[1] * self.next_variances[1]
    }
}

/// Starting regime distribution for the filter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FilterInit {
    #[default]
    Ergodic,
    Supplied([f64; 2]),
}

pub(crate) struct FilterOutput {
    pub loglik: f64,
    pub steps: Vec<FilterStep>,
    pub next_predicted: [f64; 2],
    pub next_variances: [f64; 2],
}

/// Hamilton filter on raw values. With `keep_path` false only the
/// likelihood is tracked.
pub(crate) fn run_filter(
    params: &MrsParams,
    returns: &[f64],
    h_init: f64,
    init: FilterInit,
    keep_path: bool,
) -> Result<FilterOutput> {
    if !(h_init > 0.0 && h_init.is_finite()) {
        return Err(Error::InvalidParameter(format!("h_init must be > 0, got {h_init}")));
    }
    let trans = transition_matrix(params.p, params.q)?;
    let dists = [
        StudentT::new(params.regimes[0].nu)?,
        StudentT::new(params.regimes[1].nu)?,
    ];
    let means = params.means();
    let [r1, r2] = params.regimes;

    let mut predicted = match init {
        FilterInit::Ergodic => ergodic_probs(params.p, params.q)?,
        FilterInit::Supplied(p) => p,
    };
    let mut variances = [h_init, h_init];
    let mut loglik = 0.0;
    let mut steps = Vec::with_capacity(if keep_path { returns.len() } else { 0 });

    for (t, &r) in returns.iter().enumerate() {
        let mut logs = [0.0; 2];
        for i in 0..2 {
            let z = (r - means[i]) / variances[i].sqrt();
            logs[i] = predicted[i].ln() + dists[i].log_density(z) - 0.5 * variances[i].ln();
        }
        // log-sum-exp scaling by the larger term
        let m = logs[0].max(logs[1]);
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("mixture density at step {}", t + 1)));
        }
        let w = [(logs[0] - m).exp(), (logs[1] - m).exp()];
        let total = w[0] + w[1];
        loglik += m + total.ln();
        let filtered = [w[0] / total, w[1] / total];

        if keep_path {
            steps.push(FilterStep {
                predicted,
                filtered,
                variances,
                predictive_variance: predicted[0] * variances[0] + predicted[1] * variances[1],
            });
        }

        let eps = r - (filtered[0] * means[0] + filtered[1] * means[1]);
        let eps2 = eps * eps;
        let next_predicted = propagate(filtered, &trans);
        let mut next_variances = [0.0; 2];
        for (i, reg) in [r1, r2].iter().enumerate() {
            let lagged = expected_lagged_variance(&trans, filtered, i, means, variances)?;
            let h = reg.alpha0 + reg.alpha1 * eps2 + reg.beta * lagged;
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::NonFinite(format!(
                    "regime {} variance {h} at step {}",
                    i + 1,
                    t + 2
                )));
            }
            next_variances[i] = h;
        }
        predicted = next_predicted;
        variances = next_variances;
    }

    if !loglik.is_finite() {
        return Err(Error::NonFinite("log-likelihood".into()));
    }
    Ok(FilterOutput {
        loglik,
        steps,
        next_predicted: predicted,
        next_variances: variances,
    })
}

/// Returns the log-likelihood and the full filter path.
pub fn hamilton_filter(
    params: &MrsParams,
    returns: &ReturnSeries,
    h_init: f64,
    init: FilterInit,
) -> Result<(f64, RegimeProbPath)> {
    let out = run_filter(params, returns.values(), h_init, init, true)?;
    Ok((
        out.loglik,
        RegimeProbPath {
            dates: returns.dates().to_vec(),
            steps: out.steps,
            next_predicted: out.next_predicted,
            next_variances: out.next_variances,
            high_regime: params.high_regime(),
        },
    ))
}

/// `Pr(high-variance regime | data up to t)` per date.
pub fn regime_prob_series(path: &RegimeProbPath) -> Vec<(NaiveDate, f64)> {
    path.dates
        .iter()
        .zip(&path.steps)
        .map(|(&d, s)| (d, s.filtered[path.high_regime]))
        .collect()
}
