//! Regional PET quantification on a shared anatomical atlas, with
//! Centiloid and CenTauR scaling and A/T₂/N staging.
//!
//! The numeric core is generic over [`num::Real`] (`f32` or `f64`). The
//! aliases below fix it to `f64`, which is what the pipeline uses.

// NaN must fail every range check, so comparisons are written as `!(a < b)`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod geometry;
pub mod maskderive;
pub mod nifti;
pub mod num;
pub mod phantom;
pub mod pipeline;
pub mod report;
pub mod roi;
pub mod scales;
pub mod staging;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};

pub type Affine = geometry::AffineTransform<f64>;
pub type Line = scales::CalibrationLine<f64>;
pub type CalibrationRegistry = scales::Registry<f64>;
pub type Fit = stats::FitResult<f64>;
pub type Thresholds = staging::StagingThresholds<f64>;
pub type Profile = staging::AtnProfile<f64>;
pub type Havas = staging::HavasModel<f64>;
