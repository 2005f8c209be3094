//! Importances, impact curves and plot-data export for fitted models.
//!
//! Because logits are a plain sum of gated shape functions, the curves are
//! not approximations: summing every curve at an input on the curve
//! abscissae reproduces the model logit exactly.

mod curve;
mod export;
mod importance;
mod svg;

pub use curve::{impact_curve, ImpactCurve, DEFAULT_MAIN_RESOLUTION, DEFAULT_PAIR_RESOLUTION};
pub use export::{export_report, Manifest};
pub use importance::{feature_importance, ImportanceTable};
