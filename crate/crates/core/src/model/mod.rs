//! Problem representation: chiplets, bumps, nets, placements and exact metrics.

mod bench;
mod design;
mod geometry;
mod io;
mod metrics;

pub use bench::{synthesize_benchmark, InterfaceKind, InterfaceSpec};
pub use design::{BumpPin, ChipletSpec, DesignInstance, InterposerSpec, Net, PinRef};
pub use geometry::{
    bump_abs_position, orientation_index, rotate_offset, rotated_dims, snap_angle, ORIENTATIONS,
};
pub use io::{
    design_from_json, design_to_json, load_design, load_placement, placement_from_json,
    placement_to_json, save_design, save_placement, write_text,
};
pub use metrics::{check_legal, exact_wirelength, warpage_metric, LegalityReport};

use serde::{Deserialize, Serialize};

/// Center position and orientation of one chiplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Degrees; continuous during optimization, one of [`ORIENTATIONS`] otherwise.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }
}

/// One pose per chiplet, indexed like [`DesignInstance::chiplets`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Placement {
    pub poses: Vec<Pose>,
}

impl Placement {
    pub fn new(poses: Vec<Pose>) -> Self {
        Placement { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Orientation indices, failing on any non-snapped angle.
    pub fn orientation_indices(&self) -> crate::Result<Vec<usize>> {
        self.poses.iter().map(|p| orientation_index(p.theta)).collect()
    }

    pub fn is_snapped(&self) -> bool {
        self.poses.iter().all(|p| orientation_index(p.theta).is_ok())
    }
}
