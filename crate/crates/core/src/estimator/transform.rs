//! Maps between constrained parameter records and the unconstrained
//! coordinates the optimizer works in.
//!
//! Stationarity is built into the coordinates: GARCH-type records carry a
//! persistence in `(0, 0.9999)` and logistic shares that split it between
//! the ARCH and GARCH loadings.

use crate::error::{Error, Result};
use crate::garch::{EgarchParams, GarchParams, GjrParams, ALPHA0_FLOOR};
use crate::model::{ModelSpec, ParamVector};
use crate::mrs::{MrsParams, RegimeParams};
use crate::tdist::NU_MAX;

/// Upper bound on any persistence sum.
pub const PERSISTENCE_CAP: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformKind {
    Identity,
    /// `(0, inf)`, floored at the variance-intercept floor.
    Log,
    /// `(0, 1)`
    Logit,
    /// `(0, scale)`
    ScaledLogit { scale: f64 },
    /// `(-scale, scale)`
    SymmetricLogit { scale: f64 },
    /// `(shift, cap]`
    ShiftedLog { shift: f64, cap: f64 },
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

impl TransformKind {
    /// Constrained value to unconstrained coordinate.
    pub fn forward(&self, x: f64) -> Result<f64> {
        let out_of_range = || Error::InvalidParameter(format!("{x} outside the domain of {self:?}"));
        let u = match *self {
            TransformKind::Identity => x,
            TransformKind::Log => {
                if !(x > 0.0) {
                    return Err(out_of_range());
                }
                x.ln()
            }
            TransformKind::Logit => {
                if !(x > 0.0 && x < 1.0) {
                    return Err(out_of_range());
                }
                logit(x)
            }
            TransformKind::ScaledLogit { scale } => {
                if !(x > 0.0 && x < scale) {
                    return Err(out_of_range());
                }
                logit(x / scale)
            }
            TransformKind::SymmetricLogit { scale } => {
                if !(x.abs() < scale) {
                    return Err(out_of_range());
                }
                logit(0.5 * (x / scale + 1.0))
            }
            TransformKind::ShiftedLog { shift, cap } => {
                if !(x > shift && x <= cap) {
                    return Err(out_of_range());
                }
                (x - shift).ln()
            }
        };
        if u.is_finite() {
            Ok(u)
        } else {
            Err(out_of_range())
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        match *self {
            TransformKind::Identity => u,
            TransformKind::Log => u.exp().max(ALPHA0_FLOOR),
            TransformKind::Logit => logistic(u),
            TransformKind::ScaledLogit { scale } => scale * logistic(u),
            TransformKind::SymmetricLogit { scale } => scale * (2.0 * logistic(u) - 1.0),
            TransformKind::ShiftedLog { shift, cap } => shift + u.exp().min(cap - shift),
        }
    }
}

const PERSISTENCE: TransformKind = TransformKind::ScaledLogit {
    scale: PERSISTENCE_CAP,
};
const NU: TransformKind = TransformKind::ShiftedLog {
    shift: 2.0,
    cap: NU_MAX,
};

/// Unconstrained coordinates of one model, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub model: ModelSpec,
    pub coords: Vec<(&'static str, TransformKind)>,
}

impl TransformSpec {
    pub fn for_model(model: ModelSpec) -> Self {
        use TransformKind::*;
        let coords = match model {
            ModelSpec::Garch => vec![
                ("delta", Identity),
                ("alpha0", Log),
                ("persistence", PERSISTENCE),
                ("alpha1_share", Logit),
                ("nu", NU),
            ],
            ModelSpec::Gjr => vec![
                ("delta", Identity),
                ("alpha0", Log),
                ("persistence", PERSISTENCE),
                ("beta_share", Logit),
                ("alpha1_share", Logit),
                ("nu", NU),
            ],
            ModelSpec::Egarch => vec![
                ("delta", Identity),
                ("alpha0", Identity),
                ("alpha1", Identity),
                ("xi", Identity),
                ("beta", SymmetricLogit { scale: PERSISTENCE_CAP }),
                ("nu", NU),
            ],
            ModelSpec::Mrs => vec![
                ("delta(1)", Identity),
                ("alpha0(1)", Log),
                ("persistence(1)", PERSISTENCE),
                ("alpha1_share(1)", Logit),
                ("nu(1)", NU),
                ("delta(2)", Identity),
                ("alpha0(2)", Log),
                ("persistence(2)", PERSISTENCE),
                ("alpha1_share(2)", Logit),
                ("nu(2)", NU),
                ("p", Logit),
                ("q", Logit),
            ],
        };
        Self { model, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Intermediate constrained coordinates (persistence/share form).
    fn raw_coords(&self, params: &ParamVector) -> Result<Vec<f64>> {
        if params.model() != self.model {
            return Err(Error::InvalidParameter(format!(
                "{} record given to {} transform",
                params.model().label(),
                self.model.label()
            )));
        }
        Ok(match *params {
            ParamVector::Garch(p) => {
                let s = p.alpha1 + p.beta;
                vec![p.delta, p.alpha0, s, p.alpha1 / s, p.nu]
            }
            ParamVector::Gjr(p) => {
                let s = p.persistence();
                let arch = 0.5 * (p.alpha1 + p.xi);
                vec![p.delta, p.alpha0, s, p.beta / s, p.alpha1 / (2.0 * arch), p.nu]
            }
            ParamVector::Egarch(p) => vec![p.delta, p.alpha0, p.alpha1, p.xi, p.beta, p.nu],
            ParamVector::Mrs(m) => {
                let mut v = Vec::with_capacity(12);
                for r in m.regimes {
                    let s = r.alpha1 + r.beta;
                    v.extend([r.delta, r.alpha0, s, r.alpha1 / s, r.nu]);
                }
                v.extend([m.p, m.q]);
                v
            }
        })
    }

    pub fn to_unconstrained(&self, params: &ParamVector) -> Result<Vec<f64>> {
        self.raw_coords(params)?
            .into_iter()
            .zip(&self.coords)
            .map(|(x, (_, kind))| kind.forward(x))
            .collect()
    }

    pub fn to_params(&self, u: &[f64]) -> ParamVector {
        let c: Vec<f64> = u
            .iter()
            .zip(&self.coords)
            .map(|(&u, (_, kind))| kind.inverse(u))
            .collect();
        match self.model {
            ModelSpec::Garch => {
                let (s, w) = (c[2], c[3]);
                ParamVector::Garch(GarchParams {
                    delta: c[0],
                    alpha0: c[1],
                    alpha1: s * w,
                    beta: s * (1.0 - w),
                    nu: c[4],
                })
            }
            ModelSpec::Gjr => {
                let (s, wb, wa) = (c[2], c[3], c[4]);
                let arch = s * (1.0 - wb);
                ParamVector::Gjr(GjrParams {
                    delta: c[0],
                    alpha0: c[1],
                    alpha1: 2.0 * arch * wa,
                    xi: 2.0 * arch * (1.0 - wa),
                    beta: s * wb,
                    nu: c[5],
                })
            }
            ModelSpec::Egarch => ParamVector::Egarch(EgarchParams {
                delta: c[0],
                alpha0: c[1],
                alpha1: c[2],
                xi: c[3],
                beta: c[4],
                nu: c[5],
            }),
            ModelSpec::Mrs => {
                let regime = |o: usize| {
                    let (s, w) = (c[o + 2], c[o + 3]);
                    RegimeParams {
                        delta: c[o],
                        alpha0: c[o + 1],
                        alpha1: s * w,
                        beta: s * (1.0 - w),
                        nu: c[o + 4],
                    }
                };
                ParamVector::Mrs(MrsParams {
                    regimes: [regime(0), regime(5)],
                    p: c[10],
                    q: c[11],
                })
            }
        }
    }
}
