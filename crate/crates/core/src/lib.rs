//! Trend-line prediction for univariate time series.
//!
//! The pipeline: impute gaps ([`series`]), segment into (slope, duration)
//! trends and build sliding-window instances ([`segmentation`]), train
//! next-trend predictors ([`nn`], [`models`]), and score them with
//! walk-forward validation ([`evaluation`]).

pub mod error;
pub mod evaluation;
pub mod models;
pub mod nn;
pub mod segmentation;
pub mod series;

pub use error::{Error, Result};
