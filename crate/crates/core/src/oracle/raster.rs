use crate::field::FieldGrid;
use crate::model::{rotated_dims, DesignInstance, Placement};
use crate::Result;

/// Power density per cell (W/m²), using exact area fractions of partially
/// covered cells so the integrated power is conserved.
pub fn rasterize_power(design: &DesignInstance, placement: &Placement, nx: usize, ny: usize) -> Result<FieldGrid> {
    let ip = &design.interposer;
    let mut g = FieldGrid::zeros(nx, ny, ip.width, ip.height);
    let cell_area = g.dx * g.dy;
    for (c, p) in design.chiplets.iter().zip(&placement.poses) {
        let (w, h) = rotated_dims(c.w, c.h, p.theta)?;
        let (x0, x1) = (p.x - w / 2.0, p.x + w / 2.0);
        let (y0, y1) = (p.y - h / 2.0, p.y + h / 2.0);
        let i_lo = ((x0 / g.dx).floor().max(0.0)) as usize;
        let i_hi = ((x1 / g.dx).ceil().max(0.0) as usize).min(nx);
        let j_lo = ((y0 / g.dy).floor().max(0.0)) as usize;
        let j_hi = ((y1 / g.dy).ceil().max(0.0) as usize).min(ny);
        for j in j_lo..j_hi {
            let oy = (y1.min((j + 1) as f64 * g.dy) - y0.max(j as f64 * g.dy)).max(0.0);
            if oy == 0.0 {
                continue;
            }
            for i in i_lo..i_hi {
                let ox = (x1.min((i + 1) as f64 * g.dx) - x0.max(i as f64 * g.dx)).max(0.0);
                g.values[j * nx + i] += c.power_density * ox * oy / cell_area;
            }
        }
    }
    Ok(g)
}
