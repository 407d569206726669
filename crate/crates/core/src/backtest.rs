//! Left-tail VaR from the predictive law and the likelihood-ratio coverage
//! tests of Kupiec and Christoffersen.

use std::fmt::Write as _;
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::forecast::{ForecastTable, PredictiveLaw};
use crate::model::ModelSpec;
use crate::tdist::StudentT;

/// 5% critical values of chi-square with 1 and 2 degrees of freedom.
pub const CHI2_1_CRITICAL: f64 = 3.841;
pub const CHI2_2_CRITICAL: f64 = 5.991;

fn check_alpha(alpha: f64, upper: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= upper {
        Ok(())
    } else {
        Err(Error::InvalidProbability(alpha))
    }
}

/// `mean * k + q_alpha * sqrt(variance)` for a per-period mean and a
/// k-period variance.
pub fn var_forecast(mean: f64, variance: f64, k: usize, alpha: f64, d: &StudentT) -> Result<f64> {
    check_alpha(alpha, 0.5)?;
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance must be > 0, got {variance}")));
    }
    Ok(mean * k as f64 + d.quantile(alpha)? * variance.sqrt())
}

/// Quantile of `sum_i w_i t_{nu_i}(m_i, v_i)` by bisection on the mixture CDF.
pub fn mixture_quantile(weights: [f64; 2], means: [f64; 2], variances: [f64; 2], nus: [f64; 2], alpha: f64) -> Result<f64> {
    check_alpha(alpha, 1.0 - f64::EPSILON)?;
    let d = [StudentT::new(nus[0])?, StudentT::new(nus[1])?];
    let sd = [variances[0].sqrt(), variances[1].sqrt()];
    if !(sd[0] > 0.0 && sd[1] > 0.0 && sd.iter().all(|s| s.is_finite())) {
        return Err(Error::InvalidParameter("mixture variances must be > 0".into()));
    }
    let total = weights[0] + weights[1];
    if !(weights[0] >= 0.0 && weights[1] >= 0.0 && total > 0.0) {
        return Err(Error::InvalidParameter("mixture weights must be >= 0".into()));
    }
    let w = [weights[0] / total, weights[1] / total];
    let cdf = |x: f64| (0..2).map(|i| w[i] * d[i].cdf((x - means[i]) / sd[i])).sum::<f64>();
    // the mixture quantile lies between the component quantiles
    let q: Vec<f64> = (0..2)
        .map(|i| d[i].quantile(alpha).map(|z| means[i] + sd[i] * z))
        .collect::<Result<_>>()?;
    let (mut lo, mut hi) = (q[0].min(q[1]), q[0].max(q[1]));
    let tol = 1e-12 * (lo.abs().max(hi.abs()).max(1.0));
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// VaR threshold of a k-period predictive law (means already scaled by k).
pub fn law_var(law: &PredictiveLaw, alpha: f64) -> Result<f64> {
    match *law {
        PredictiveLaw::Student { mean, variance, nu } => var_forecast(mean, variance, 1, alpha, &StudentT::new(nu)?),
        PredictiveLaw::Mixture {
            weights,
            means,
            variances,
            nus,
        } => {
            check_alpha(alpha, 0.5)?;
            mixture_quantile(weights, means, variances, nus, alpha)
        }
    }
}

/// `x ln y` with `0 ln 0 = 0`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Unconditional coverage statistic.
pub fn lruc(n: usize, n1: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha, 1.0 - f64::EPSILON)?;
    if n == 0 || n1 > n {
        return Err(Error::InvalidParameter(format!("need 0 <= n1 <= n and n >= 1, got n={n}, n1={n1}")));
    }
    let (n0, n1f) = ((n - n1) as f64, n1 as f64);
    let pi = n1f / n as f64;
    let null = xlny(n0, 1.0 - alpha) + xlny(n1f, alpha);
    let alt = xlny(n0, 1.0 - pi) + xlny(n1f, pi);
    Ok((-2.0 * (null - alt)).max(0.0))
}

/// Counts of consecutive violation pairs; `nij` is `i` followed by `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransitionCounts {
    pub n00: usize,
    pub n01: usize,
    pub n10: usize,
    pub n11: usize,
}

pub fn transition_counts(violations: &[bool]) -> TransitionCounts {
    let mut c = TransitionCounts::default();
    for w in violations.windows(2) {
        match (w[0], w[1]) {
            (false, false) => c.n00 += 1,
            (false, true) => c.n01 += 1,
            (true, false) => c.n10 += 1,
            (true, true) => c.n11 += 1,
        }
    }
    c
}

/// Independence statistic against a first-order Markov alternative.
pub fn lrind(violations: &[bool]) -> Result<f64> {
    if violations.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: violations.len(),
        });
    }
    let c = transition_counts(violations);
    let [n00, n01, n10, n11] = [c.n00, c.n01, c.n10, c.n11].map(|v| v as f64);
    let ratio = |a: f64, b: f64| if a + b > 0.0 { b / (a + b) } else { 0.0 };
    let pi0 = ratio(n00, n01);
    let pi1 = ratio(n10, n11);
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let null = xlny(n00 + n10, 1.0 - pi) + xlny(n01 + n11, pi);
    let alt = xlny(n00, 1.0 - pi0) + xlny(n01, pi0) + xlny(n10, 1.0 - pi1) + xlny(n11, pi1);
    Ok((-2.0 * (null - alt)).max(0.0))
}

/// Conditional coverage: `LRuc + LRind`.
pub fn lrcc(n: usize, n1: usize, violations: &[bool], alpha: f64) -> Result<f64> {
    Ok(lruc(n, n1, alpha)? + lrind(violations)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarRow {
    pub origin_date: NaiveDate,
    pub threshold: f64,
    pub realized_return: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarSeries {
    pub model: ModelSpec,
    pub k: usize,
    pub alpha: f64,
    pub rows: Vec<VarRow>,
}

impl VarSeries {
    pub fn violations(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.violation).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrReport {
    pub model: ModelSpec,
    pub k: usize,
    pub alpha: f64,
    pub n: usize,
    pub n1: usize,
    pub counts: TransitionCounts,
    pub lruc: f64,
    pub lrind: f64,
    pub lrcc: f64,
    pub reject_uc: bool,
    pub reject_ind: bool,
    pub reject_cc: bool,
}

/// Statistics and 5% decisions for a violation sequence.
pub fn lr_report(model: ModelSpec, k: usize, alpha: f64, violations: &[bool]) -> Result<LrReport> {
    let n = violations.len();
    let n1 = violations.iter().filter(|&&v| v).count();
    let uc = lruc(n, n1, alpha)?;
    let ind = lrind(violations)?;
    let cc = uc + ind;
    Ok(LrReport {
        model,
        k,
        alpha,
        n,
        n1,
        counts: transition_counts(violations),
        lruc: uc,
        lrind: ind,
        lrcc: cc,
        reject_uc: uc > CHI2_1_CRITICAL,
        reject_ind: ind > CHI2_1_CRITICAL,
        reject_cc: cc > CHI2_2_CRITICAL,
    })
}

/// VaR per row from the table's predictive laws, violations against the
/// realized k-period returns, and the three tests.
pub fn backtest(table: &ForecastTable, alpha: f64) -> Result<(VarSeries, LrReport)> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let inputs = r.var_inputs.as_ref().ok_or_else(|| {
                Error::Format(format!("{} k={} row {} has no predictive law", table.model, table.k, r.origin_date))
            })?;
            let threshold = law_var(&inputs.law, alpha)?;
            Ok(VarRow {
                origin_date: r.origin_date,
                threshold,
                realized_return: inputs.realized_return,
                violation: inputs.realized_return < threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = VarSeries {
        model: table.model,
        k: table.k,
        alpha,
        rows,
    };
    let report = lr_report(table.model, table.k, alpha, &series.violations())?;
    Ok((series, report))
}

pub fn write_lr_csv<W: Write>(reports: &[LrReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model", "k", "alpha", "n", "n1", "n00", "n01", "n10", "n11", "lruc", "lrind", "lrcc", "reject_uc", "reject_ind",
        "reject_cc",
    ])?;
    for r in reports {
        w.write_record([
            r.model.id().to_string(),
            r.k.to_string(),
            r.alpha.to_string(),
            r.n.to_string(),
            r.n1.to_string(),
            r.counts.n00.to_string(),
            r.counts.n01.to_string(),
            r.counts.n10.to_string(),
            r.counts.n11.to_string(),
            r.lruc.to_string(),
            r.lrind.to_string(),
            r.lrcc.to_string(),
            r.reject_uc.to_string(),
            r.reject_ind.to_string(),
            r.reject_cc.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Model rows with LRuc, LRind, LRcc; `**` marks rejection at 5%.
pub fn lr_text(reports: &[LrReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>3} {:>5} {:>4} {:>10} {:>10} {:>10}", "Model", "k", "n", "n1", "LRuc", "LRind", "LRcc");
    let cell = |v: f64, reject: bool| if reject { format!("{v:.4}**") } else { format!("{v:.4}") };
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:>3} {:>5} {:>4} {:>10} {:>10} {:>10}",
            r.model.label(),
            r.k,
            r.n,
            r.n1,
            cell(r.lruc, r.reject_uc),
            cell(r.lrind, r.reject_ind),
            cell(r.lrcc, r.reject_cc)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn var_examples() {
        let d = StudentT::new(7.0).unwrap();
        assert_eq!(var_forecast(0.3, 2.0, 5, 0.5, &d).unwrap(), 1.5);
        let a = var_forecast(0.1, 1.0, 1, 0.05, &d).unwrap() - 0.1;
        let b = var_forecast(0.1, 4.0, 1, 0.05, &d).unwrap() - 0.1;
        assert!((b - 2.0 * a).abs() < 1e-12);
        let v = var_forecast(0.0, 1.0, 1, 0.05, &d).unwrap();
        assert!((d.cdf(v) - 0.05).abs() < 1e-10);
        assert!(var_forecast(0.0, 1.0, 1, 0.0, &d).is_err());
        assert!(var_forecast(0.0, 1.0, 1, 0.6, &d).is_err());
    }

    #[test]
    fn mixture_quantile_oracle() {
        let (w, m, v, nu) = ([0.3, 0.7], [0.1, -0.2], [1.0, 6.0], [5.0, 9.0]);
        let q = mixture_quantile(w, m, v, nu, 0.05).unwrap();
        let d = [StudentT::new(5.0).unwrap(), StudentT::new(9.0).unwrap()];
        let cdf = 0.3 * d[0].cdf((q - 0.1) / 1.0) + 0.7 * d[1].cdf((q + 0.2) / 6f64.sqrt());
        assert!((cdf - 0.05).abs() < 1e-10);
        // one-component limit
        let q1 = mixture_quantile([1.0, 0.0], m, v, nu, 0.05).unwrap();
        assert!((q1 - (0.1 + d[0].quantile(0.05).unwrap())).abs() < 1e-9);
    }

    #[test]
    fn lruc_hand_values() {
        assert!(lruc(100, 5, 0.05).unwrap().abs() < 1e-12);
        assert!((lruc(100, 10, 0.05).unwrap() - 4.1308).abs() < 1e-3);
        assert!((lruc(100, 0, 0.05).unwrap() + 200.0 * 0.95f64.ln()).abs() < 1e-12);
        assert!(lruc(100, 100, 0.05).unwrap().is_finite());
    }

    #[test]
    fn lrind_cases() {
        let iid = [false, false, true, false, false, true, false, false, true];
        let c = transition_counts(&iid);
        assert_eq!((c.n00, c.n01, c.n10, c.n11), (3, 3, 2, 0));
        let balanced = [false, false, true, true, false, false, true, true, false];
        let c = transition_counts(&balanced);
        assert_eq!(c.n01 * (c.n10 + c.n11), c.n11 * (c.n00 + c.n01));
        assert!(lrind(&balanced).unwrap().abs() < 1e-12);
        let clustered: Vec<bool> = (0..100).map(|i| i >= 90).collect();
        assert!(lrind(&clustered).unwrap() > CHI2_1_CRITICAL);
        let alternating: Vec<bool> = (0..100).map(|i| i % 2 == 1).collect();
        assert!(lrind(&alternating).unwrap() > CHI2_1_CRITICAL);
        assert!(lrind(&[true]).is_err());
    }

    proptest! {
        #[test]
        fn lr_additivity_and_sign(v in prop::collection::vec(prop::bool::weighted(0.1), 2..300)) {
            let n1 = v.iter().filter(|&&b| b).count();
            let r = lr_report(ModelSpec::Garch, 1, 0.05, &v).unwrap();
            prop_assert!(r.lruc >= 0.0 && r.lrind >= 0.0);
            prop_assert!((r.lrcc - (r.lruc + r.lrind)).abs() < 1e-10);
            prop_assert!((r.lrcc - lrcc(v.len(), n1, &v, 0.05).unwrap()).abs() < 1e-10);
            let c = r.counts;
            prop_assert_eq!(c.n00 + c.n01 + c.n10 + c.n11, v.len() - 1);
        }

        #[test]
        fn lruc_grows_away_from_alpha(n in 20usize..400) {
            let a = 0.05;
            let vals: Vec<f64> = (0..=n).map(|n1| lruc(n, n1, a).unwrap()).collect();
            let best = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
            for i in best..n {
                prop_assert!(vals[i + 1] >= vals[i] - 1e-12);
            }
            for i in 1..=best {
                prop_assert!(vals[i - 1] >= vals[i] - 1e-12);
            }
        }

        #[test]
        fn violation_invariant_under_increasing_map(t in -5.0f64..5.0, r in -5.0f64..5.0) {
            let g = |x: f64| x.exp() + 3.0 * x;
            prop_assert_eq!(r < t, g(r) < g(t));
        }
    }
}
