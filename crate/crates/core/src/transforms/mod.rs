//! Forward photography transforms, their exact-transpose duals, a
//! pixel-driven back projector, and the Radon transforms they are compared
//! against.

mod backproject;
mod bar;
mod photo;
mod projector;
mod radon;

pub use backproject::backproject;
pub use bar::{dual_pbar, forward_pbar};
pub use photo::{dual_p, dual_p_weighted, dual_weight, forward_p, forward_slice, xbar_grid_for};
pub use projector::LineProjector;
pub use radon::{classic_radon_2d, coupled_radon};

pub(crate) use photo::{check_beta, mean_step};
