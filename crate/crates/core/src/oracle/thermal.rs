use serde::{Deserialize, Serialize};

use super::sor::{Boundary, Operator};
use super::{rasterize_power, restrict};
use crate::field::FieldGrid;
use crate::model::{DesignInstance, Placement};
use crate::{Error, Result};

/// Quasi-2D heat spreading model:
/// `kappa_eff * h_stack * lap(T) - h_sink * (T - T_amb) = -P` with adiabatic
/// sides and `h_sink = 1 / (R_conv * interposer area)`.
///
/// Material values are stand-ins of typical magnitude, not measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalOracleConfig {
    /// Effective lateral conductivity, W/(m K).
    pub kappa_eff: f64,
    /// Thickness of the conducting stack, mm.
    pub stack_thickness_mm: f64,
    /// Heatsink convective resistance, K/W.
    pub convective_resistance: f64,
    pub t_ambient: f64,
    /// Relative residual at which SOR stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// The solve runs on a grid `refine` times finer per side and is block
    /// averaged back to the requested grid.
    pub refine: usize,
}

impl Default for ThermalOracleConfig {
    fn default() -> Self {
        ThermalOracleConfig {
            kappa_eff: 120.0,
            stack_thickness_mm: 2.0,
            convective_resistance: 0.1,
            t_ambient: 25.0,
            tolerance: 1e-8,
            max_iterations: 200_000,
            refine: 8,
        }
    }
}

impl ThermalOracleConfig {
    /// Vertical sink coefficient for an interposer of `area_mm2`, W/(m² K).
    pub fn h_sink(&self, area_mm2: f64) -> f64 {
        1.0 / (self.convective_resistance * area_mm2 * 1e-6)
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa_eff > 0.0
            && self.stack_thickness_mm > 0.0
            && self.convective_resistance > 0.0
            && self.tolerance > 0.0
            && self.refine >= 1)
        {
            return Err(Error::Precondition(format!("invalid thermal oracle config {self:?}")));
        }
        Ok(())
    }
}

/// Temperature (°C) for a power density field (W/m²) on the field's own grid.
pub fn solve_thermal_field(power: &FieldGrid, cfg: &ThermalOracleConfig) -> Result<FieldGrid> {
    cfg.validate()?;
    let area = power.width() * power.height();
    let conductance = cfg.kappa_eff * cfg.stack_thickness_mm * 1e-3;
    let (dx, dy) = (power.dx * 1e-3, power.dy * 1e-3);
    let op = Operator {
        nx: power.nx,
        ny: power.ny,
        cx: conductance / (dx * dx),
        cy: conductance / (dy * dy),
        sigma: cfg.h_sink(area),
        boundary: &Boundary::Neumann,
    };
    let mut rise = vec![0.0; power.values.len()];
    let report = op.solve(&power.values, &mut rise, cfg.tolerance, cfg.max_iterations, 0.0)?;
    log::debug!(
        "thermal SOR {}x{}: {} iterations, residual {:.2e}",
        power.nx,
        power.ny,
        report.iterations,
        report.residual
    );
    Ok(FieldGrid::from_values(
        power.nx,
        power.ny,
        power.dx,
        power.dy,
        rise.into_iter().map(|u| u + cfg.t_ambient).collect(),
    ))
}

/// Temperature field on the design's `grid x grid` mesh.
pub fn solve_thermal(design: &DesignInstance, placement: &Placement, cfg: &ThermalOracleConfig) -> Result<FieldGrid> {
    let m = design.interposer.grid;
    let r = cfg.refine.max(1);
    let power = rasterize_power(design, placement, m * r, m * r)?;
    let fine = solve_thermal_field(&power, cfg)?;
    Ok(restrict(&fine, r))
}
