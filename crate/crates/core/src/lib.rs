//! Volatility forecasting with single-regime GARCH-family models and a
//! two-regime Markov-switching GARCH.
//!
//! The crate covers the whole pipeline: price ingest and return
//! construction ([`market_data`]), the standardized Student-t kernel
//! ([`tdist`]), the variance recursions ([`garch`], [`mrs`]), maximum
//! likelihood estimation ([`estimator`]), multi-step and rolling forecasts
//! ([`forecast`]), loss-function and directional evaluation
//! ([`evaluation`]), VaR backtests ([`backtest`]) and a simulation lab of
//! independent oracles ([`simlab`]).
//!
//! Data-parallel loops (restarts, Monte Carlo paths, forecast origins) run
//! on rayon when the default `parallel` feature is on; see [`par`].

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod forecast;
pub mod garch;
pub mod market_data;
pub mod model;
pub mod mrs;
pub mod par;
pub mod rng;
pub mod simlab;
pub mod tdist;

pub use error::{Error, Result};
pub use market_data::{Frequency, PriceSeries, RealizedVolSeries, ReturnSeries, SampleSplit};
pub use model::{ModelSpec, ParamVector};
pub use par::Exec;
