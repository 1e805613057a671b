use serde::{Deserialize, Serialize};

use super::sor::{Boundary, Operator};
use super::{prolong, restrict};
use crate::field::FieldGrid;
use crate::{Error, Result};

/// Simply supported thin plate under a thermal load:
/// `lap^2 w = K lap(dT)` with `K = (1 - nu) alpha / (E h^2)`, split into
/// two Poisson solves. Lengths are in mm and `E` in GPa, so `K` is in
/// 1/(mm K); the output displacement is reported in µm.
///
/// Material values are stand-ins of typical magnitude, not measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateOracleConfig {
    pub youngs_gpa: f64,
    pub poisson: f64,
    pub cte: f64,
    pub thickness_mm: f64,
    /// Stress-free temperature, °C.
    pub t_ref: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Internal refinement factor, as for the thermal oracle.
    pub refine: usize,
}

impl Default for PlateOracleConfig {
    fn default() -> Self {
        PlateOracleConfig {
            youngs_gpa: 130.0,
            poisson: 0.28,
            cte: 2.8e-6,
            thickness_mm: 0.1,
            t_ref: 25.0,
            tolerance: 1e-8,
            max_iterations: 200_000,
            refine: 4,
        }
    }
}

impl PlateOracleConfig {
    /// Load coefficient `K`, 1/(mm K).
    pub fn load_coefficient(&self) -> f64 {
        (1.0 - self.poisson) * self.cte / (self.youngs_gpa * self.thickness_mm * self.thickness_mm)
    }

    fn validate(&self) -> Result<()> {
        if !(self.poisson > 0.0
            && self.poisson < 0.5
            && self.youngs_gpa > 0.0
            && self.cte > 0.0
            && self.thickness_mm > 0.0
            && self.tolerance > 0.0
            && self.refine >= 1)
        {
            return Err(Error::Precondition(format!("invalid plate oracle config {self:?}")));
        }
        Ok(())
    }
}

/// Displacement (µm) for a temperature excursion field `dT` on its own grid.
pub fn solve_plate_field(delta_t: &FieldGrid, cfg: &PlateOracleConfig) -> Result<FieldGrid> {
    cfg.validate()?;
    let (nx, ny) = (delta_t.nx, delta_t.ny);
    let k = cfg.load_coefficient();
    let load: Vec<f64> = delta_t.values.iter().map(|t| k * t).collect();
    // face values of K dT by cubic extrapolation from the four nearest cells
    // (linear from two on very small grids); psi takes the negated value
    let at = |i: usize, j: usize| load[j * nx + i];
    let face = |line: &dyn Fn(usize) -> f64, len: usize| -> f64 {
        if len >= 4 {
            -(35.0 * line(0) - 35.0 * line(1) + 21.0 * line(2) - 5.0 * line(3)) / 16.0
        } else if len >= 2 {
            -0.5 * (3.0 * line(0) - line(1))
        } else {
            -line(0)
        }
    };
    let boundary = Boundary::Dirichlet {
        west: (0..ny).map(|j| face(&|k| at(k, j), nx)).collect(),
        east: (0..ny).map(|j| face(&|k| at(nx - 1 - k, j), nx)).collect(),
        south: (0..nx).map(|i| face(&|k| at(i, k), ny)).collect(),
        north: (0..nx).map(|i| face(&|k| at(i, ny - 1 - k), ny)).collect(),
    };
    let (dx, dy) = (delta_t.dx, delta_t.dy);
    let laplace = |bc| Operator {
        nx,
        ny,
        cx: 1.0 / (dx * dx),
        cy: 1.0 / (dy * dy),
        sigma: 0.0,
        boundary: bc,
    };
    // psi = lap(w) - K dT is harmonic, with psi = -K dT on the edges
    let load_norm = load.iter().map(|v| v * v).sum::<f64>().sqrt();
    let floor = load_norm * 2.0 / (dx * dx).min(dy * dy);
    let mut psi = vec![0.0; nx * ny];
    laplace(&boundary).solve(&vec![0.0; nx * ny], &mut psi, cfg.tolerance, cfg.max_iterations, floor)?;
    // lap(w) = psi + K dT, w = 0 on the edges; the operator is -lap
    let rhs: Vec<f64> = psi.iter().zip(&load).map(|(p, l)| -(p + l)).collect();
    let mut w = vec![0.0; nx * ny];
    let zero = Boundary::zero_dirichlet(nx, ny);
    laplace(&zero).solve(&rhs, &mut w, cfg.tolerance, cfg.max_iterations, 0.0)?;
    Ok(FieldGrid::from_values(
        nx,
        ny,
        dx,
        dy,
        w.into_iter().map(|v| v * 1e3).collect(),
    ))
}

/// Displacement field (µm) for a temperature field (°C) on the same grid.
pub fn solve_warpage(thermal: &FieldGrid, cfg: &PlateOracleConfig) -> Result<FieldGrid> {
    let r = cfg.refine.max(1);
    let delta = thermal.map(|t| t - cfg.t_ref);
    let fine = solve_plate_field(&prolong(&delta, r), cfg)?;
    Ok(restrict(&fine, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PlateOracleConfig {
        PlateOracleConfig {
            refine: 1,
            tolerance: 1e-10,
            ..Default::default()
        }
    }

    #[test]
    fn zero_load_gives_flat_plate() {
        let t = FieldGrid::from_fn(16, 16, 10.0, 10.0, |_, _| 25.0);
        let w = solve_warpage(&t, &cfg()).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_in_load() {
        let a = FieldGrid::from_fn(16, 12, 10.0, 8.0, |x, y| (x * 0.7).sin() + y * 0.1);
        let b = FieldGrid::from_fn(16, 12, 10.0, 8.0, |x, y| (x - 5.0).abs() * (y * 0.3).cos());
        let sum = FieldGrid::from_values(16, 12, a.dx, a.dy, a.values.iter().zip(&b.values).map(|(p, q)| p + q).collect());
        let c = cfg();
        let (wa, wb, ws) = (
            solve_plate_field(&a, &c).unwrap(),
            solve_plate_field(&b, &c).unwrap(),
            solve_plate_field(&sum, &c).unwrap(),
        );
        let scale = ws.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..ws.values.len() {
            assert!((ws.values[k] - wa.values[k] - wb.values[k]).abs() < 1e-7 * scale);
        }
    }
}
