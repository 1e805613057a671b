//! Finite-difference field solvers used as ground truth for the compact models.
//!
//! Heat flow is reduced to a quasi-2D screened Poisson equation on the
//! interposer and warpage to a simply supported thin plate, both solved with
//! red-black SOR on cell-centered grids. Each solver can run on an internally
//! refined grid and report block averages on the requested grid.

mod plate;
mod raster;
mod sor;
mod thermal;

pub use plate::{solve_plate_field, solve_warpage, PlateOracleConfig};
pub use raster::rasterize_power;
pub use sor::{Boundary, SorReport};
pub use thermal::{solve_thermal, solve_thermal_field, ThermalOracleConfig};

use crate::field::FieldGrid;

/// Block average of a grid refined by `factor` in each direction.
pub(crate) fn restrict(fine: &FieldGrid, factor: usize) -> FieldGrid {
    if factor == 1 {
        return fine.clone();
    }
    let (nx, ny) = (fine.nx / factor, fine.ny / factor);
    let mut out = vec![0.0; nx * ny];
    let inv = 1.0 / (factor * factor) as f64;
    for j in 0..ny {
        for i in 0..nx {
            let mut s = 0.0;
            for b in 0..factor {
                let row = (j * factor + b) * fine.nx + i * factor;
                s += fine.values[row..row + factor].iter().sum::<f64>();
            }
            out[j * nx + i] = s * inv;
        }
    }
    FieldGrid::from_values(nx, ny, fine.dx * factor as f64, fine.dy * factor as f64, out)
}

/// Bilinear interpolation of a cell-centered grid onto a grid refined by
/// `factor`, holding values constant beyond the outermost centers.
pub(crate) fn prolong(coarse: &FieldGrid, factor: usize) -> FieldGrid {
    if factor == 1 {
        return coarse.clone();
    }
    let (nx, ny) = (coarse.nx * factor, coarse.ny * factor);
    let (dx, dy) = (coarse.dx / factor as f64, coarse.dy / factor as f64);
    let locate = |pos: f64, h: f64, n: usize| -> (usize, usize, f64) {
        let s = (pos / h - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = (s.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        let (j0, j1, ty) = locate((j as f64 + 0.5) * dy, coarse.dy, coarse.ny);
        for i in 0..nx {
            let (i0, i1, tx) = locate((i as f64 + 0.5) * dx, coarse.dx, coarse.nx);
            let a = coarse.get(i0, j0) * (1.0 - tx) + coarse.get(i1, j0) * tx;
            let b = coarse.get(i0, j1) * (1.0 - tx) + coarse.get(i1, j1) * tx;
            out[j * nx + i] = a * (1.0 - ty) + b * ty;
        }
    }
    FieldGrid::from_values(nx, ny, dx, dy, out)
}
