//! Bias correction of crowdsourced wind series: gridded Weibull field →
//! stations (inverse distance weighting), calibration of the gridded
//! parameters against station fits, and quantile mapping of raw series.

pub mod calib;
pub mod correct;
pub mod idw;
pub mod pipeline;
pub mod spline;

pub use calib::{
    fit_shape_calibration, leave_one_out_calibration, CalibModel, CalibRow, FittedCalibration, LooScore,
    ShapeCalibration,
};
pub use correct::{
    correct_series, empirical_percentiles, validate_calibrated_distributions, CorrectedSeries, MetricSummary,
    StationMoments, ValidationTable,
};
pub use idw::{idw_interpolate, GridParamField, GridPoint};
pub use pipeline::{run_bias_correction, BiasConfig, BiasCorrection, CalibratedSite, Calibrator, MetCovariate};
pub use spline::{fit_scale_calibration, fit_scale_calibration_with, ScaleCalibration};
