use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::garch::{
    egarch_variances, garch_variances, gjr_variances, student_loglik, EgarchParams, GarchParams,
    GjrParams, VariancePath,
};
use crate::market_data::ReturnSeries;
use crate::mrs::{hamilton_filter, run_filter, FilterInit, MrsParams, RegimeParams, RegimeProbPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelSpec {
    Garch,
    Gjr,
    Egarch,
    Mrs,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 4] = [ModelSpec::Garch, ModelSpec::Gjr, ModelSpec::Egarch, ModelSpec::Mrs];

    /// Short identifier used on the command line and in CSV files.
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Garch => "garch",
            ModelSpec::Gjr => "gjr",
            ModelSpec::Egarch => "egarch",
            ModelSpec::Mrs => "mrs",
        }
    }

    /// Display name used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Garch => "GARCH",
            ModelSpec::Gjr => "GJR-GARCH",
            ModelSpec::Egarch => "EGARCH",
            ModelSpec::Mrs => "MRS-GARCH",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelSpec::Garch => &["delta", "alpha0", "alpha1", "beta", "nu"],
            ModelSpec::Gjr | ModelSpec::Egarch => &["delta", "alpha0", "alpha1", "xi", "beta", "nu"],
            ModelSpec::Mrs => &[
                "delta(1)", "alpha0(1)", "alpha1(1)", "beta(1)", "nu(1)", "delta(2)", "alpha0(2)",
                "alpha1(2)", "beta(2)", "nu(2)", "p", "q",
            ],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "garch" => Ok(ModelSpec::Garch),
            "gjr" | "gjr-garch" => Ok(ModelSpec::Gjr),
            "egarch" => Ok(ModelSpec::Egarch),
            "mrs" | "mrs-garch" => Ok(ModelSpec::Mrs),
            other => Err(Error::Format(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamVector {
    Garch(GarchParams),
    Gjr(GjrParams),
    Egarch(EgarchParams),
    Mrs(MrsParams),
}

impl ParamVector {
    pub fn model(&self) -> ModelSpec {
        match self {
            ParamVector::Garch(_) => ModelSpec::Garch,
            ParamVector::Gjr(_) => ModelSpec::Gjr,
            ParamVector::Egarch(_) => ModelSpec::Egarch,
            ParamVector::Mrs(_) => ModelSpec::Mrs,
        }
    }

    /// Values in [`ModelSpec::param_names`] order.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ParamVector::Garch(p) => vec![p.delta, p.alpha0, p.alpha1, p.beta, p.nu],
            ParamVector::Gjr(p) => vec![p.delta, p.alpha0, p.alpha1, p.xi, p.beta, p.nu],
            ParamVector::Egarch(p) => vec![p.delta, p.alpha0, p.alpha1, p.xi, p.beta, p.nu],
            ParamVector::Mrs(m) => {
                let mut v = Vec::with_capacity(12);
                for r in m.regimes {
                    v.extend([r.delta, r.alpha0, r.alpha1, r.beta, r.nu]);
                }
                v.extend([m.p, m.q]);
                v
            }
        }
    }

    /// Inverse of [`ParamVector::values`]; does not validate.
    pub fn from_values(model: ModelSpec, v: &[f64]) -> Result<Self> {
        if v.len() != model.n_params() {
            return Err(Error::InvalidParameter(format!(
                "{} expects {} values, got {}",
                model.label(),
                model.n_params(),
                v.len()
            )));
        }
        Ok(match model {
            ModelSpec::Garch => ParamVector::Garch(GarchParams {
                delta: v[0],
                alpha0: v[1],
                alpha1: v[2],
                beta: v[3],
                nu: v[4],
            }),
            ModelSpec::Gjr => ParamVector::Gjr(GjrParams {
                delta: v[0],
                alpha0: v[1],
                alpha1: v[2],
                xi: v[3],
                beta: v[4],
                nu: v[5],
            }),
            ModelSpec::Egarch => ParamVector::Egarch(EgarchParams {
                delta: v[0],
                alpha0: v[1],
                alpha1: v[2],
                xi: v[3],
                beta: v[4],
                nu: v[5],
            }),
            ModelSpec::Mrs => {
                let regime = |o: usize| RegimeParams {
                    delta: v[o],
                    alpha0: v[o + 1],
                    alpha1: v[o + 2],
                    beta: v[o + 3],
                    nu: v[o + 4],
                };
                ParamVector::Mrs(MrsParams {
                    regimes: [regime(0), regime(5)],
                    p: v[10],
                    q: v[11],
                })
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParamVector::Garch(p) => p.validate(),
            ParamVector::Gjr(p) => p.validate(),
            ParamVector::Egarch(p) => p.validate(),
            ParamVector::Mrs(p) => p.validate(),
        }
    }

    /// Largest degrees-of-freedom value in the record.
    pub fn max_nu(&self) -> f64 {
        match self {
            ParamVector::Garch(p) => p.nu,
            ParamVector::Gjr(p) => p.nu,
            ParamVector::Egarch(p) => p.nu,
            ParamVector::Mrs(m) => m.regimes[0].nu.max(m.regimes[1].nu),
        }
    }
}

/// Log-likelihood only, on raw values. `h_init` is the variance start
/// (EGARCH uses its logarithm).
pub fn loglik_value(params: &ParamVector, returns: &[f64], h_init: f64) -> Result<f64> {
    let n = returns.len();
    match params {
        ParamVector::Garch(p) => {
            let h = garch_variances(p, returns, h_init)?;
            student_loglik(returns, p.delta, &h[..n], p.nu)
        }
        ParamVector::Gjr(p) => {
            let h = gjr_variances(p, returns, h_init)?;
            student_loglik(returns, p.delta, &h[..n], p.nu)
        }
        ParamVector::Egarch(p) => {
            let h = egarch_variances(p, returns, h_init.ln())?;
            student_loglik(returns, p.delta, &h[..n], p.nu)
        }
        ParamVector::Mrs(p) => Ok(run_filter(p, returns, h_init, FilterInit::Ergodic, false)?.loglik),
    }
}

/// Log-likelihood plus the filtered variance path. For MRS-GARCH the path
/// holds the regime-mixed one-step predictive variance and the regime path
/// is returned too.
pub fn loglik(
    params: &ParamVector,
    returns: &ReturnSeries,
    h_init: f64,
) -> Result<(f64, VariancePath, Option<RegimeProbPath>)> {
    let values = returns.values();
    let n = values.len();
    let (h, delta, nu) = match params {
        ParamVector::Garch(p) => (garch_variances(p, values, h_init)?, p.delta, p.nu),
        ParamVector::Gjr(p) => (gjr_variances(p, values, h_init)?, p.delta, p.nu),
        ParamVector::Egarch(p) => (egarch_variances(p, values, h_init.ln())?, p.delta, p.nu),
        ParamVector::Mrs(p) => {
            let (ll, path) = hamilton_filter(p, returns, h_init, FilterInit::Ergodic)?;
            let mut h = path.predictive_variances();
            h.push(path.next_predictive_variance());
            let vp = VariancePath::from_recursion(returns, h, h_init);
            return Ok((ll, vp, Some(path)));
        }
    };
    let ll = student_loglik(values, delta, &h[..n], nu)?;
    Ok((ll, VariancePath::from_recursion(returns, h, h_init), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdist::StudentT;

    fn returns() -> Vec<f64> {
        vec![
            0.3, -1.2, 2.5, -0.4, 0.9, 1.7, -3.1, 0.05, 0.6, -0.8, 1.1, -2.2, 0.4, 0.0, -0.9, 2.8,
            -1.5, 0.7, 0.2, -0.3,
        ]
    }

    /// Term-by-term density written out from the closed form.
    fn brute_force(delta: f64, h: &[f64], nu: f64, r: &[f64]) -> f64 {
        use statrs::function::gamma::ln_gamma;
        let mut total = 0.0;
        for (x, v) in r.iter().zip(h) {
            let z = (x - delta) / v.sqrt();
            let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
            let f = c.exp() * (1.0 + z * z / (nu - 2.0)).powf(-(nu + 1.0) / 2.0) / v.sqrt();
            total += f.ln();
        }
        total
    }

    fn hand_garch(delta: f64, a0: f64, a1: f64, b: f64, h0: f64, r: &[f64]) -> Vec<f64> {
        let mut h = vec![h0];
        for t in 1..r.len() {
            let e = r[t - 1] - delta;
            h.push(a0 + a1 * e * e + b * h[t - 1]);
        }
        h
    }

    #[test]
    fn loglik_matches_brute_force() {
        let r = returns();
        let p = GarchParams {
            delta: 0.1,
            alpha0: 0.2,
            alpha1: 0.1,
            beta: 0.8,
            nu: 6.5,
        };
        let ll = loglik_value(&ParamVector::Garch(p), &r, 1.4).unwrap();
        let h = hand_garch(0.1, 0.2, 0.1, 0.8, 1.4, &r);
        let bf = brute_force(0.1, &h, 6.5, &r);
        assert!((ll - bf).abs() < 1e-10, "{ll} vs {bf}");
    }

    #[test]
    fn nested_loglik_identity() {
        let r = returns();
        let g = ParamVector::Garch(GarchParams {
            delta: 0.1,
            alpha0: 0.2,
            alpha1: 0.1,
            beta: 0.8,
            nu: 6.5,
        });
        let j = ParamVector::Gjr(GjrParams {
            delta: 0.1,
            alpha0: 0.2,
            alpha1: 0.1,
            xi: 0.1,
            beta: 0.8,
            nu: 6.5,
        });
        let a = loglik_value(&g, &r, 1.4).unwrap();
        let b = loglik_value(&j, &r, 1.4).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn one_point_likelihood() {
        let p = ParamVector::Garch(GarchParams {
            delta: 0.4,
            alpha0: 0.2,
            alpha1: 0.1,
            beta: 0.8,
            nu: 5.0,
        });
        let ll = loglik_value(&p, &[0.4], 1.0).unwrap();
        assert_eq!(ll, StudentT::new(5.0).unwrap().log_density(0.0));
    }

    #[test]
    fn inflated_variance_lowers_likelihood() {
        let d = StudentT::new(7.0).unwrap();
        let r: Vec<f64> = d.sample(11, 2000);
        let truth = GarchParams {
            delta: 0.0,
            alpha0: 1.0,
            alpha1: 0.0,
            beta: 0.0,
            nu: 7.0,
        };
        let inflated = GarchParams { alpha0: 25.0, ..truth };
        let a = loglik_value(&ParamVector::Garch(truth), &r, 1.0).unwrap();
        let b = loglik_value(&ParamVector::Garch(inflated), &r, 25.0).unwrap();
        assert!(a > b);
    }

    #[test]
    fn values_round_trip() {
        for m in ModelSpec::ALL {
            let v: Vec<f64> = (0..m.n_params()).map(|i| 0.1 + i as f64).collect();
            let p = ParamVector::from_values(m, &v).unwrap();
            assert_eq!(p.values(), v);
            assert_eq!(p.model(), m);
            assert_eq!(m.id().parse::<ModelSpec>().unwrap(), m);
        }
        assert!(ParamVector::from_values(ModelSpec::Garch, &[1.0]).is_err());
    }

    #[test]
    fn mrs_path_is_predictive_mixture() {
        let r = ReturnSeries::from_values(returns());
        let reg = RegimeParams {
            delta: 0.1,
            alpha0: 0.2,
            alpha1: 0.1,
            beta: 0.8,
            nu: 6.5,
        };
        let m = ParamVector::Mrs(MrsParams {
            regimes: [reg, RegimeParams { alpha0: 0.9, ..reg }],
            p: 0.9,
            q: 0.8,
        });
        let (ll, vp, path) = loglik(&m, &r, 1.4).unwrap();
        let path = path.unwrap();
        assert_eq!(vp.h.len(), 20);
        assert_eq!(vp.h[3], path.steps[3].predictive_variance);
        assert_eq!(ll, loglik_value(&m, r.values(), 1.4).unwrap());
    }
}
