//! Feature-sparse neural additive survival models with discrete-time
//! predictions.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`; the `F32` variants are provided
//! for memory-constrained use.

pub mod data;
pub mod error;
pub mod interpret;
pub mod metrics;
pub mod model;
pub mod numeric;
mod scalar;
pub mod selection;
pub mod synthgen;

pub use error::{DysError, Result};
pub use model::{EffectId, HeadMode, TrainConfig};
pub use scalar::Scalar;

pub type DySModel = model::DySModel<f64>;
pub type DySModelF32 = model::DySModel<f32>;
pub type SurvivalDataset = data::SurvivalDataset<f64>;
pub type SurvivalDatasetF32 = data::SurvivalDataset<f32>;
pub type TimeGrid = data::TimeGrid<f64>;
pub type TimeGridF32 = data::TimeGrid<f32>;
