//! Postprocessing of ensemble temperature forecasts.
//!
//! The crate fits autoregressive models to forecast-error series and uses
//! them to correct ensemble members ([`artime`], [`ensemble`]), builds the
//! AR-EMOS and classical EMOS Gaussian predictive distributions ([`emos`],
//! [`pooling`]), combines them in a spread-adjusted linear pool, and
//! verifies everything with proper scores and calibration diagnostics
//! ([`verification`]). [`pipeline`] ties the pieces into a rolling-window
//! experiment with CSV ingestion and report emission.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artime;
pub mod emos;
pub mod ensemble;
pub mod error;
pub mod normal;
pub mod optim;
pub mod pipeline;
pub mod pooling;
pub mod verification;

pub use error::{Error, Result};
