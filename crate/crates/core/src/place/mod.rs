//! Gradient-based placement: orientation projection, projected wirelength
//! and bell-shaped density, hinge penalties through the compact models, and
//! the conjugate-gradient loop.

mod cgd;
mod density;
mod objective;
mod orient;
mod wirelength;

pub use cgd::{
    initial_density_weight, minimize_blockwise, run_cgd, trajectory_csv, CgdConfig, CgdOutcome, CgdStepper,
    TrajectoryRow,
};
pub use density::{bin_capacity, density_vjp, overflow, projected_density, BinGrid};
pub use objective::{objective, CompactModels, Evaluation, Objective, PenaltyConfig};
pub use orient::{angular_deviation, bz, bz_with_grad, rz, rz_with_grad, snap_index, snap_orientations};
pub use wirelength::projected_wirelength;
