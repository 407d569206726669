//! Single-regime variance recursions with constant mean and standardized-t
//! innovations: GARCH(1,1), GJR-GARCH(1,1) and Nelson's EGARCH(1,1).

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::tdist::StudentT;

/// Floor applied to variance intercepts proposed by the optimizer.
pub const ALPHA0_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub delta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub nu: f64,
}

impl GarchParams {
    pub fn persistence(&self) -> f64 {
        self.alpha1 + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.persistence())
    }

    pub fn validate(&self) -> Result<()> {
        check(self.alpha0 > 0.0, "alpha0 must be > 0")?;
        check(self.alpha1 >= 0.0, "alpha1 must be >= 0")?;
        check(self.beta >= 0.0, "beta must be >= 0")?;
        check(self.persistence() < 1.0, "alpha1 + beta must be < 1")?;
        check(self.nu > 2.0, "nu must be > 2")?;
        check(self.delta.is_finite(), "delta must be finite")
    }
}

/// `alpha1` loads on non-positive shocks, `xi` on positive shocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GjrParams {
    pub delta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub xi: f64,
    pub beta: f64,
    pub nu: f64,
}

impl GjrParams {
    /// Persistence under symmetric innovations, Pr(eps > 0) = 1/2.
    pub fn persistence(&self) -> f64 {
        0.5 * (self.alpha1 + self.xi) + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.persistence())
    }

    pub fn validate(&self) -> Result<()> {
        check(self.alpha0 > 0.0, "alpha0 must be > 0")?;
        check(self.alpha1 >= 0.0, "alpha1 must be >= 0")?;
        check(self.xi >= 0.0, "xi must be >= 0")?;
        check(self.beta >= 0.0, "beta must be >= 0")?;
        check(self.persistence() < 1.0, "(alpha1 + xi)/2 + beta must be < 1")?;
        check(self.nu > 2.0, "nu must be > 2")?;
        check(self.delta.is_finite(), "delta must be finite")
    }
}

/// Log-variance recursion; `alpha0` and `xi` are sign-unrestricted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgarchParams {
    pub delta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub xi: f64,
    pub beta: f64,
    pub nu: f64,
}

impl EgarchParams {
    /// Fixed point of the shock-free log-variance recursion.
    pub fn log_variance_mean(&self) -> f64 {
        self.alpha0 / (1.0 - self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.beta.abs() < 1.0, "|beta| must be < 1")?;
        check(self.nu > 2.0, "nu must be > 2")?;
        check(
            self.delta.is_finite()
                && self.alpha0.is_finite()
                && self.alpha1.is_finite()
                && self.xi.is_finite(),
            "coefficients must be finite",
        )
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.to_string()))
    }
}

/// Filtered conditional variances, one per return date.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePath {
    pub dates: Vec<NaiveDate>,
    pub h: Vec<f64>,
    pub h_init: f64,
    /// One-step-ahead variance after the last observation.
    pub next: f64,
}

impl VariancePath {
    pub(crate) fn from_recursion(returns: &ReturnSeries, mut h: Vec<f64>, h_init: f64) -> Self {
        let next = h.pop().expect("recursion yields n + 1 values");
        Self {
            dates: returns.dates().to_vec(),
            h,
            h_init,
            next,
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Variance of the demeaned series; the default recursion start.
pub fn initial_variance(returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n
}

#[inline]
fn accept(h: f64, step: usize) -> Result<f64> {
    if h.is_finite() && h > 0.0 {
        Ok(h)
    } else {
        Err(Error::NonFinite(format!("conditional variance {h} at step {step}")))
    }
}

fn check_init(h_init: f64) -> Result<()> {
    if h_init > 0.0 && h_init.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("h_init must be > 0, got {h_init}")))
    }
}

/// `n + 1` variances: `h_1 = h_init`, then the recursion, ending with the
/// forecast for the step after the sample.
pub fn garch_variances(p: &GarchParams, returns: &[f64], h_init: f64) -> Result<Vec<f64>> {
    check_init(h_init)?;
    let mut h = Vec::with_capacity(returns.len() + 1);
    h.push(h_init);
    for (t, r) in returns.iter().enumerate() {
        let eps = r - p.delta;
        let next = p.alpha0 + p.alpha1 * eps * eps + p.beta * h[t];
        h.push(accept(next, t + 1)?);
    }
    Ok(h)
}

pub fn gjr_variances(p: &GjrParams, returns: &[f64], h_init: f64) -> Result<Vec<f64>> {
    check_init(h_init)?;
    let mut h = Vec::with_capacity(returns.len() + 1);
    h.push(h_init);
    for (t, r) in returns.iter().enumerate() {
        let eps = r - p.delta;
        // eps == 0 falls in the alpha1 branch
        let load = if eps > 0.0 { p.xi } else { p.alpha1 };
        let next = p.alpha0 + load * eps * eps + p.beta * h[t];
        h.push(accept(next, t + 1)?);
    }
    Ok(h)
}

pub fn egarch_variances(p: &EgarchParams, returns: &[f64], logh_init: f64) -> Result<Vec<f64>> {
    let abs_mean = StudentT::new(p.nu)?.abs_moment();
    let mut h = Vec::with_capacity(returns.len() + 1);
    let mut logh = logh_init;
    h.push(accept(logh.exp(), 0).map_err(|_| Error::Overflow { step: 0 })?);
    for (t, r) in returns.iter().enumerate() {
        let z = (r - p.delta) / h[t].sqrt();
        logh = p.alpha0 + p.alpha1 * (z.abs() - abs_mean) + p.xi * z + p.beta * logh;
        let next = logh.exp();
        if !(next.is_finite() && next > 0.0) {
            return Err(Error::Overflow { step: t + 1 });
        }
        h.push(next);
    }
    Ok(h)
}

pub fn garch_filter(p: &GarchParams, returns: &ReturnSeries, h_init: f64) -> Result<VariancePath> {
    let h = garch_variances(p, returns.values(), h_init)?;
    Ok(VariancePath::from_recursion(returns, h, h_init))
}

pub fn gjr_filter(p: &GjrParams, returns: &ReturnSeries, h_init: f64) -> Result<VariancePath> {
    let h = gjr_variances(p, returns.values(), h_init)?;
    Ok(VariancePath::from_recursion(returns, h, h_init))
}

pub fn egarch_filter(p: &EgarchParams, returns: &ReturnSeries, logh_init: f64) -> Result<VariancePath> {
    let h = egarch_variances(p, returns.values(), logh_init)?;
    Ok(VariancePath::from_recursion(returns, h, logh_init.exp()))
}

/// Sum of `ln f(eps_t / sqrt(h_t)) - ln(h_t) / 2` over the sample.
pub(crate) fn student_loglik(returns: &[f64], delta: f64, h: &[f64], nu: f64) -> Result<f64> {
    let d = StudentT::new(nu)?;
    let ll: f64 = returns
        .iter()
        .zip(h)
        .map(|(r, &h)| d.log_density((r - delta) / h.sqrt()) - 0.5 * h.ln())
        .sum();
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::NonFinite("log-likelihood".into()))
    }
}

/// Second- and fourth-moment checks for GARCH(1,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDiagnostics {
    pub persistence: f64,
    pub second_moment: bool,
    /// `beta^2 + 2 alpha1 beta + 3 alpha1^2`
    pub fourth_moment_value: f64,
    /// Gaussian-innovation condition; only approximate under t innovations.
    pub fourth_moment_gaussian: bool,
}

pub fn moment_diagnostics(p: &GarchParams) -> MomentDiagnostics {
    let persistence = p.alpha1 + p.beta;
    let fourth = p.beta * p.beta + 2.0 * p.alpha1 * p.beta + 3.0 * p.alpha1 * p.alpha1;
    MomentDiagnostics {
        persistence,
        second_moment: persistence < 1.0,
        fourth_moment_value: fourth,
        fourth_moment_gaussian: fourth < 1.0,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn garch(delta: f64, alpha0: f64, alpha1: f64, beta: f64) -> GarchParams {
        GarchParams {
            delta,
            alpha0,
            alpha1,
            beta,
            nu: 7.0,
        }
    }

    #[test]
    fn constant_variance_without_dynamics() {
        let h = garch_variances(&garch(0.0, 1.0, 0.0, 0.0), &[3.0, -5.0, 0.2], 1.0).unwrap();
        assert!(h.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn garch_hand_recursion() {
        let h = garch_variances(&garch(0.0, 0.1, 0.1, 0.8), &[1.0, -2.0], 1.0).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-15);
        assert!((h[1] - 1.0).abs() < 1e-15);
        assert!((h[2] - 1.3).abs() < 1e-15);
    }

    #[test]
    fn table_like_persistence_is_stationary() {
        let p = GarchParams {
            delta: 0.0932,
            alpha0: 0.1051,
            alpha1: 0.0636,
            beta: 0.9154,
            nu: 7.1651,
        };
        assert!(p.validate().is_ok());
        assert!((p.persistence() - 0.979).abs() < 1e-12);
        let d = moment_diagnostics(&p);
        assert!(d.second_moment);
    }

    #[test]
    fn moment_diagnostic_edges() {
        let d = moment_diagnostics(&garch(0.0, 0.1, 0.0, 0.0));
        assert!(d.second_moment && d.fourth_moment_gaussian);
        let d = moment_diagnostics(&garch(0.0, 0.1, 0.6, 0.5));
        assert!(!d.second_moment);
        assert!(!d.fourth_moment_gaussian);
    }

    #[test]
    fn gjr_hand_recursion() {
        let p = GjrParams {
            delta: 0.0,
            alpha0: 0.1,
            alpha1: 0.2,
            xi: 0.0,
            beta: 0.5,
            nu: 7.0,
        };
        let h = gjr_variances(&p, &[1.0, -1.0], 1.0).unwrap();
        assert!((h[1] - 0.6).abs() < 1e-15);
        assert!((h[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn gjr_negative_shocks_match_garch() {
        let p = GjrParams {
            delta: 0.0,
            alpha0: 0.1,
            alpha1: 0.12,
            xi: 0.4,
            beta: 0.8,
            nu: 7.0,
        };
        let returns = [-1.0, -0.3, -2.2, 0.0, -0.7];
        let a = gjr_variances(&p, &returns, 1.5).unwrap();
        let b = garch_variances(&garch(0.0, 0.1, 0.12, 0.8), &returns, 1.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn egarch_shock_free_ar1() {
        let p = EgarchParams {
            delta: 0.0,
            alpha0: 0.2,
            alpha1: 0.0,
            xi: 0.0,
            beta: 0.9,
            nu: 7.0,
        };
        let h = egarch_variances(&p, &vec![0.5; 400], 0.0).unwrap();
        let target = p.log_variance_mean();
        let mut gap = target.abs();
        for (t, v) in h.iter().enumerate().skip(1) {
            let g = (v.ln() - target).abs();
            // geometric at rate |beta|
            assert!((g - 0.9f64.powi(t as i32) * target.abs()).abs() < 1e-9);
            assert!(g <= gap + 1e-15);
            gap = g;
        }
    }

    #[test]
    fn egarch_zero_shock_increment() {
        let p = EgarchParams {
            delta: 0.3,
            alpha0: 0.05,
            alpha1: 0.2,
            xi: -0.1,
            beta: 0.95,
            nu: 6.0,
        };
        let h = egarch_variances(&p, &[0.3], 0.4).unwrap();
        let eabs = StudentT::new(6.0).unwrap().abs_moment();
        let expected = 0.05 - 0.2 * eabs + 0.95 * 0.4;
        assert!((h[1].ln() - expected).abs() < 1e-14);
    }

    #[test]
    fn egarch_leverage_direction() {
        let p = EgarchParams {
            delta: 0.0,
            alpha0: 0.0,
            alpha1: 0.1,
            xi: -0.05,
            beta: 0.9,
            nu: 7.0,
        };
        let up = egarch_variances(&p, &[1.5], 0.0).unwrap()[1];
        let down = egarch_variances(&p, &[-1.5], 0.0).unwrap()[1];
        assert!(down > up);
    }

    #[test]
    fn egarch_overflow_reported() {
        let p = EgarchParams {
            delta: 0.0,
            alpha0: 400.0,
            alpha1: 0.0,
            xi: 0.0,
            beta: 0.99,
            nu: 7.0,
        };
        assert!(matches!(
            egarch_variances(&p, &[0.1, 0.1, 0.1], 0.0),
            Err(Error::Overflow { step: 2 })
        ));
    }

    #[test]
    fn non_positive_start_rejected() {
        assert!(garch_variances(&garch(0.0, 0.1, 0.1, 0.8), &[1.0], 0.0).is_err());
    }

    #[test]
    fn single_point_loglik() {
        let d = StudentT::new(5.0).unwrap();
        let ll = student_loglik(&[0.7], 0.7, &[1.0], 5.0).unwrap();
        assert_eq!(ll, d.log_density(0.0));
    }

    proptest! {
        #[test]
        fn positivity(
            returns in prop::collection::vec(-20.0f64..20.0, 1..200),
            alpha0 in 1e-6f64..5.0,
            alpha1 in 0.0f64..0.5,
            frac in 0.0f64..0.999,
            h_init in 1e-3f64..50.0,
        ) {
            let beta = (1.0 - alpha1) * frac;
            let h = garch_variances(&garch(0.1, alpha0, alpha1, beta), &returns, h_init).unwrap();
            prop_assert!(h.iter().all(|&v| v > 0.0));
        }

        #[test]
        fn nested_gjr_equals_garch(
            returns in prop::collection::vec(-10.0f64..10.0, 1..200),
            alpha1 in 0.0f64..0.3,
            beta in 0.0f64..0.69,
        ) {
            let g = garch(0.05, 0.2, alpha1, beta);
            let j = GjrParams { delta: 0.05, alpha0: 0.2, alpha1, xi: alpha1, beta, nu: 7.0 };
            let a = garch_variances(&g, &returns, 2.0).unwrap();
            let b = gjr_variances(&j, &returns, 2.0).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
            }
        }

        #[test]
        fn variance_homogeneity(
            returns in prop::collection::vec(-10.0f64..10.0, 1..100),
            alpha1 in 0.0f64..0.3,
            beta in 0.0f64..0.69,
        ) {
            let base = garch_variances(&garch(0.0, 0.2, alpha1, beta), &returns, 1.3).unwrap();
            let doubled: Vec<f64> = returns.iter().map(|r| 2.0 * r).collect();
            let scaled = garch_variances(&garch(0.0, 0.8, alpha1, beta), &doubled, 5.2).unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((4.0 * a - b).abs() <= 1e-12 * b);
            }
        }
    }
}
