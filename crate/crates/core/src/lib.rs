//! Core numerics for fusing bias-corrected crowdsourced wind observations with
//! trusted station data.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithm; file formats,
//! configuration, parallel runners and the command line live in the `windfuse`
//! companion crate.
//!
//! Module map:
//!
//! * [`model`]: stations, hourly series, Weibull parameters, dataset validation.
//! * [`distributions`]: Weibull / Gamma / log-normal fitting and goodness of fit.
//! * [`qc`]: missing-data and Spearman-neighbour station filters.
//! * [`bias`]: gridded-field interpolation, parameter calibration and quantile mapping.
//! * [`gp`]: Matérn spatial / separable AR(1) Gaussian-process model with grouped nuggets.
//! * [`eval`]: RMSE / CRPS scoring, leave-one-station-out cross-validation.
//! * [`exec`]: sequential / pluggable execution of independent work items.
//! * [`sim`]: synthetic separable space-time fields and the strategy comparison study.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bias;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geo;
pub mod gp;
pub mod model;
pub mod optim;
pub mod qc;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    Dataset, HourOfDay, StationClass, StationRecord, Timestamp, WeibullParams, WindSeries,
};
