//! Kaplan–Meier estimation and censoring-weighted time-dependent AUC.

mod auc;
mod km;

pub use auc::{
    cumulative_dynamic_auc, cumulative_dynamic_auc_parts, evaluate, evaluation_columns, mean_auc, AucReport,
};
pub use km::{kaplan_meier, KmCurve};
