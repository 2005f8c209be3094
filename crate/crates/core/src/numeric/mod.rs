//! Small dense networks, the Adam optimizer, the smooth-step gate function
//! and a central-difference gradient oracle.

mod adam;
mod gradcheck;
mod mlp;
mod smooth_step;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, GradCheckReport};
pub use mlp::{Activation, Dense, Mlp, MlpTrace};
pub use smooth_step::{smooth_step, smooth_step_grad};

pub(crate) use smooth_step::{smooth_step_grad_unchecked, smooth_step_unchecked};
