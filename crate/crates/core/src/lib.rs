//! Split conformal prediction bands for functional data.
//!
//! Curves live on a shared uniform [`Grid`]. A band is fitted by splitting
//! the sample, building a point predictor and a modulation function on the
//! training half, and ranking modulated sup-norm scores on the calibration
//! half. See [`split::fit_band`] for the entry point, [`efficiency`] for
//! band size, and [`simulation`] for the Monte Carlo harness.
//!
//! All numerical code is generic over [`Scalar`] (`f32`, `f64`); quantile
//! ranks accept any [`LevelScalar`], including exact rationals.

pub mod cli;
pub mod efficiency;
pub mod error;
pub mod grid;
pub mod io;
pub mod modulation;
pub mod scalar;
pub mod simulation;
pub mod split;

pub use efficiency::{band_size, envelope_identity, theorem3_check, theorem4_check, SizeMetric};
pub use error::{Error, Result};
pub use grid::{integrate, make_uniform_grid, mean_curve, std_curve, sup_abs_diff, Curve, FunctionalSample, Grid};
pub use modulation::{
    normalize, s_bar_calibration, s_bar_training, s_sigma, s_zero, ModulationCurve, ModulationKind, TrimmedIndexSet,
};
pub use scalar::{LevelScalar, Scalar};
pub use split::{
    contains, fit_band, fit_band_smoothed, naive_band, pointwise_band, quantile_index, scores, split, truncate,
    BandMethod, Calibration, MeanPredictor, ModulationRule, PointPredictor, PredictionBand, QuantileIndex,
    SplitIndices,
};

pub type Grid64 = Grid<f64>;
pub type Curve64 = Curve<f64>;
pub type Sample64 = FunctionalSample<f64>;
pub type Band64 = PredictionBand<f64>;
pub type Modulation64 = ModulationCurve<f64>;

pub type Grid32 = Grid<f32>;
pub type Curve32 = Curve<f32>;
pub type Sample32 = FunctionalSample<f32>;
pub type Band32 = PredictionBand<f32>;
