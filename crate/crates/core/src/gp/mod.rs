//! Latent Gaussian model for hourly √wind: Matérn ν = 1 spatial field,
//! class-grouped nuggets, intercept / covariate / cyclic diurnal fixed
//! effects, independent-replicate or AR(1) time structure, MAP inference
//! under PC priors and kriging prediction.

pub mod backend;
pub mod data;
pub mod fit;
pub mod hyper;
pub mod likelihood;
pub mod matern;
pub mod predict;
pub mod prior;

pub use backend::Backend;
pub use data::{GpData, Site};
pub use fit::{fit, fit_warm, FitConfig, FixedEffects, ModelFit, WarmStart};
pub use hyper::{GpHyperParams, ModelSpec, NoiseGrouping, ParamLayout, Variant};
pub use likelihood::{log_likelihood, log_posterior, Problem};
pub use matern::matern_nu1;
pub use predict::{kriging_weights, predict, Prediction, Target};
pub use prior::Priors;
