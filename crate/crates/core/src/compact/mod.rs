//! Closed-form thermal and warpage surrogates, their gradients, and fitting
//! against oracle fields.

mod aux;
mod fit;
mod thermal;
mod warpage;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use aux::{aux_f, aux_f_grad};
pub use fit::{fit_thermal, fit_warpage, FitConfig, FitReport};
pub use thermal::{eval_tc, grad_tc, thermal_vjp, CompactThermalParams, LengthScale};
pub use warpage::{
    eval_w, eval_w_local, eval_w_with_thermal, grad_w, smooth_peak_to_valley, warpage_vjp, CompactWarpageParams,
    LocalWarp,
};

use crate::field::FieldGrid;
use crate::model::{rotated_dims, write_text, DesignInstance, Placement};
use crate::{Error, Result};

/// A chiplet as seen by the compact models: centre, effective dims (mm) and
/// power density (W/m²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub power: f64,
}

/// Footprints of a placement with snapped orientations (rotated dims).
pub fn snapped_footprints(design: &DesignInstance, placement: &Placement) -> Result<Vec<Footprint>> {
    if placement.len() != design.num_chiplets() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} poses", design.num_chiplets()),
            found: placement.len().to_string(),
        });
    }
    design
        .chiplets
        .iter()
        .zip(&placement.poses)
        .map(|(c, p)| {
            let (w, h) = rotated_dims(c.w, c.h, p.theta)?;
            Ok(Footprint {
                x: p.x,
                y: p.y,
                w,
                h,
                power: c.power_density,
            })
        })
        .collect()
}

/// Cell-centred evaluation grid over `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, width: f64, height: f64) -> Self {
        GridSpec { nx, ny, width, height }
    }

    /// The interposer's `M x M` grid.
    pub fn from_design(design: &DesignInstance) -> Self {
        let ip = &design.interposer;
        GridSpec::new(ip.grid, ip.grid, ip.width, ip.height)
    }

    pub fn of_field(f: &FieldGrid) -> Self {
        GridSpec::new(f.nx, f.ny, f.width(), f.height())
    }

    pub fn dx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn center_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn center_y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy()
    }

    pub(crate) fn field(&self, values: Vec<f64>) -> FieldGrid {
        FieldGrid::from_values(self.nx, self.ny, self.dx(), self.dy(), values)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.cells() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} grid values", self.cells()),
                found: len.to_string(),
            });
        }
        Ok(())
    }
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("parameters serialize");
    write_text(path, &(text + "\n"))
}

pub fn load_thermal_params(path: &Path) -> Result<CompactThermalParams> {
    load_json(path)
}

pub fn save_thermal_params(path: &Path, params: &CompactThermalParams) -> Result<()> {
    save_json(path, params)
}

pub fn load_warpage_params(path: &Path) -> Result<CompactWarpageParams> {
    load_json(path)
}

pub fn save_warpage_params(path: &Path, params: &CompactWarpageParams) -> Result<()> {
    save_json(path, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_json_round_trip() {
        let p = CompactThermalParams {
            amp: 1.234567890123e-5,
            a: 0.41,
            bias: 25.0,
            per_chiplet: vec![LengthScale { lx: 1.5, ly: 2.25 }],
        };
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"A\"") && text.contains("\"B\"") && text.contains("\"lx\""));
        assert_eq!(serde_json::from_str::<CompactThermalParams>(&text).unwrap(), p);
        let w = CompactWarpageParams {
            alpha: 0.1,
            b: -2.0,
            per_chiplet: vec![LocalWarp {
                kx: 0.1,
                ky: 0.2,
                lambda: 0.3,
                c: -1.0,
                t_ref: 40.0,
            }],
        };
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.contains("\"lambda\"") && text.contains("\"t_ref\""));
        assert_eq!(serde_json::from_str::<CompactWarpageParams>(&text).unwrap(), w);
    }
}
