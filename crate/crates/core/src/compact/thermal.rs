use std::f64::consts::FRAC_2_SQRT_PI;

use serde::{Deserialize, Serialize};

use super::{Footprint, GridSpec};
use crate::field::FieldGrid;
use crate::model::DesignInstance;
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthScale {
    pub lx: f64,
    pub ly: f64,
}

/// `T(x, y) = B + A Σ_i P_i Σ± F(a, (w_i/2 ± (x - x_i))/lx_i, (h_i/2 ± (y - y_i))/ly_i)`
/// with `P_i` the chiplet power density in W/m².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactThermalParams {
    #[serde(rename = "A")]
    pub amp: f64,
    pub a: f64,
    #[serde(rename = "B")]
    pub bias: f64,
    pub per_chiplet: Vec<LengthScale>,
}

/// Number of entries in a thermal Jacobian row for `n` chiplets, ordered
/// `[ln a, A, B, ln lx_0, ln ly_0, ln lx_1, ...]`.
pub(crate) fn thermal_param_count(n: usize) -> usize {
    2 * n + 3
}

impl CompactThermalParams {
    /// Untrained starting point: `a` = mean chiplet thickness, `l` = chiplet
    /// half-dims, `B` = `ambient`, and `A` scaled so the hottest chiplet rises
    /// by about `rise` over its footprint.
    pub fn initial(design: &DesignInstance, ambient: f64, rise: f64) -> Self {
        let n = design.num_chiplets();
        let a = if n == 0 {
            0.5
        } else {
            design.chiplets.iter().map(|c| c.t).sum::<f64>() / n as f64
        };
        let pmax = design.chiplets.iter().map(|c| c.power_density).fold(0.0, f64::max);
        // a chiplet's own centre sees S ≈ 4 F(a, 1, 1) ≈ 2.7
        let amp = if pmax > 0.0 { rise / (2.7 * pmax) } else { 0.0 };
        CompactThermalParams {
            amp,
            a,
            bias: ambient,
            per_chiplet: design
                .chiplets
                .iter()
                .map(|c| LengthScale { lx: c.w / 2.0, ly: c.h / 2.0 })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        thermal_param_count(self.per_chiplet.len())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.per_chiplet.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} chiplet length scales"),
                found: self.per_chiplet.len().to_string(),
            });
        }
        let ok = self.a > 0.0
            && self.amp.is_finite()
            && self.bias.is_finite()
            && self.per_chiplet.iter().all(|l| l.lx > 0.0 && l.ly > 0.0 && l.lx.is_finite() && l.ly.is_finite());
        if !ok {
            return Err(Error::Domain("thermal parameters need a > 0, lx > 0, ly > 0".into()));
        }
        Ok(())
    }
}

/// One axis of one chiplet at one grid line: the two normalised half-widths
/// `v = [(half - (x - x_i)) / l, (half + (x - x_i)) / l]`, with `a² + v²`
/// and `1 / sqrt(a² + v²)`.
#[derive(Clone, Copy, Default)]
struct Side {
    v: [f64; 2],
    r2: [f64; 2],
    inv_r: [f64; 2],
}

struct Prepared {
    cols: Vec<Side>,
    rows: Vec<Side>,
}

fn side(a2: f64, half: f64, offset: f64, l: f64) -> Side {
    let v = [(half - offset) / l, (half + offset) / l];
    let r2 = [a2 + v[0] * v[0], a2 + v[1] * v[1]];
    Side {
        v,
        r2,
        inv_r: [1.0 / r2[0].sqrt(), 1.0 / r2[1].sqrt()],
    }
}

fn prepare(params: &CompactThermalParams, fps: &[Footprint], grid: &GridSpec) -> Result<Vec<Prepared>> {
    params.validate(fps.len())?;
    let a2 = params.a * params.a;
    let (dx, dy) = (grid.dx(), grid.dy());
    Ok(fps
        .iter()
        .zip(&params.per_chiplet)
        .map(|(f, l)| Prepared {
            cols: (0..grid.nx)
                .map(|i| side(a2, f.w / 2.0, (i as f64 + 0.5) * dx - f.x, l.lx))
                .collect(),
            rows: (0..grid.ny)
                .map(|j| side(a2, f.h / 2.0, (j as f64 + 0.5) * dy - f.y, l.ly))
                .collect(),
        })
        .collect())
}

/// `sgn(u0) ln((|u0| + d0) / r) + sgn(u1) ln((|u1| + d1) / r)` with a single
/// logarithm.
#[inline(always)]
fn pair_log(u0: f64, d0: f64, u1: f64, d1: f64, inv_r: f64) -> f64 {
    let r0 = (u0.abs() + d0) * inv_r;
    let r1 = (u1.abs() + d1) * inv_r;
    match (u0 < 0.0, u1 < 0.0) {
        (false, false) => (r0 * r1).ln(),
        (true, true) => -(r0 * r1).ln(),
        (false, true) => (r0 / r1).ln(),
        (true, false) => -(r0 / r1).ln(),
    }
}

/// The four-term sum `S = Σ_{s,t} F(a, b_s, c_t)` of one chiplet at one cell
/// (without the `2/√π` factor) and the pieces its derivatives are built from.
struct Cell {
    s: f64,
    /// `Σ F_a`.
    sa: f64,
    /// `fb[s] = Σ_t F_b(b_s, c_t)`.
    fb: [f64; 2],
    /// `fc[t] = Σ_s F_c(b_s, c_t)`.
    fc: [f64; 2],
}

#[inline(always)]
fn cell(a: f64, col: &Side, row: &Side, with_value: bool) -> Cell {
    let (b, c) = (col.v, row.v);
    let d = [
        [(col.r2[0] + c[0] * c[0]).sqrt(), (col.r2[0] + c[1] * c[1]).sqrt()],
        [(col.r2[1] + c[0] * c[0]).sqrt(), (col.r2[1] + c[1] * c[1]).sqrt()],
    ];
    let fb = [
        pair_log(c[0], d[0][0], c[1], d[0][1], col.inv_r[0]),
        pair_log(c[0], d[1][0], c[1], d[1][1], col.inv_r[1]),
    ];
    let fc = [
        pair_log(b[0], d[0][0], b[1], d[1][0], row.inv_r[0]),
        pair_log(b[0], d[0][1], b[1], d[1][1], row.inv_r[1]),
    ];
    if !with_value {
        return Cell { s: 0.0, sa: 0.0, fb, fc };
    }
    // atan(x0) + atan(x1) = atan2(x0 + x1, 1 - x0 x1) for each pair
    let mut at = 0.0;
    for s in 0..2 {
        let x0 = b[s] * c[0] / (a * d[s][0]);
        let x1 = b[s] * c[1] / (a * d[s][1]);
        at += (x0 + x1).atan2(1.0 - x0 * x1);
    }
    Cell {
        s: b[0] * fb[0] + b[1] * fb[1] + c[0] * fc[0] + c[1] * fc[1] - a * at,
        sa: -at,
        fb,
        fc,
    }
}

/// Derivatives of `S` with respect to `(x_i, y_i, w_i, h_i)`.
#[inline(always)]
fn sum_geometry_grad(q: &Cell, l: &LengthScale) -> [f64; 4] {
    [
        (q.fb[0] - q.fb[1]) / l.lx,
        (q.fc[0] - q.fc[1]) / l.ly,
        (q.fb[0] + q.fb[1]) / (2.0 * l.lx),
        (q.fc[0] + q.fc[1]) / (2.0 * l.ly),
    ]
}

/// Full-grid evaluation of the compact thermal model.
pub fn eval_tc(params: &CompactThermalParams, fps: &[Footprint], grid: &GridSpec) -> Result<FieldGrid> {
    let prep = prepare(params, fps, grid)?;
    let nx = grid.nx;
    let scale: Vec<f64> = fps.iter().map(|f| params.amp * FRAC_2_SQRT_PI * f.power).collect();
    let rows = par::map(grid.ny, |j| {
        let mut row = vec![params.bias; nx];
        for (p, s) in prep.iter().zip(&scale) {
            let r = &p.rows[j];
            for (i, out) in row.iter_mut().enumerate() {
                *out += s * cell(params.a, &p.cols[i], r, true).s;
            }
        }
        row
    });
    Ok(grid.field(rows.concat()))
}

/// Gradient of `Σ_r weights_r T_r` with respect to each chiplet's
/// `(x_i, y_i, w_i, h_i)`.
pub fn thermal_vjp(
    params: &CompactThermalParams,
    fps: &[Footprint],
    grid: &GridSpec,
    weights: &[f64],
) -> Result<Vec<[f64; 4]>> {
    grid.check_len(weights.len())?;
    let prep = prepare(params, fps, grid)?;
    let nx = grid.nx;
    let parts = par::map(grid.ny, |j| {
        let wrow = &weights[j * nx..(j + 1) * nx];
        prep.iter()
            .zip(fps)
            .zip(&params.per_chiplet)
            .map(|((p, f), l)| {
                let mut acc = [0.0; 4];
                let r = &p.rows[j];
                for (i, &w) in wrow.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let g = sum_geometry_grad(&cell(params.a, &p.cols[i], r, false), l);
                    for k in 0..4 {
                        acc[k] += w * g[k];
                    }
                }
                let s = params.amp * FRAC_2_SQRT_PI * f.power;
                acc.map(|v| v * s)
            })
            .collect::<Vec<_>>()
    });
    let mut out = vec![[0.0; 4]; fps.len()];
    for row in parts {
        for (o, r) in out.iter_mut().zip(row) {
            for k in 0..4 {
                o[k] += r[k];
            }
        }
    }
    Ok(out)
}

/// Per-chiplet derivative fields `∂T/∂x_i, ∂T/∂y_i, ∂T/∂w_i, ∂T/∂h_i`.
pub fn grad_tc(params: &CompactThermalParams, fps: &[Footprint], grid: &GridSpec) -> Result<Vec<[FieldGrid; 4]>> {
    let prep = prepare(params, fps, grid)?;
    let nx = grid.nx;
    let mut out = Vec::with_capacity(fps.len());
    for ((p, f), l) in prep.iter().zip(fps).zip(&params.per_chiplet) {
        let s = params.amp * FRAC_2_SQRT_PI * f.power;
        let rows = par::map(grid.ny, |j| {
            (0..nx)
                .map(|i| sum_geometry_grad(&cell(params.a, &p.cols[i], &p.rows[j], false), l).map(|v| v * s))
                .collect::<Vec<_>>()
        });
        let cells: Vec<[f64; 4]> = rows.concat();
        out.push([0, 1, 2, 3].map(|k| grid.field(cells.iter().map(|c| c[k]).collect())));
    }
    Ok(out)
}

/// Calls `f(j, values, jac)` for every grid row `j`, where `values` holds the
/// model on that row and `jac` the row-major `nx x P` Jacobian with respect
/// to the parameters in [`thermal_param_count`] order. Results come back in
/// row order.
pub(crate) fn thermal_rows_with_jacobian<R, F>(
    params: &CompactThermalParams,
    fps: &[Footprint],
    grid: &GridSpec,
    f: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, &[f64], &[f64]) -> R + Sync + Send,
{
    let prep = prepare(params, fps, grid)?;
    let nx = grid.nx;
    let np = params.num_params();
    Ok(par::map(grid.ny, |j| {
        let mut values = vec![params.bias; nx];
        let mut jac = vec![0.0; nx * np];
        for i in 0..nx {
            let row = &mut jac[i * np..(i + 1) * np];
            row[2] = 1.0;
            let mut green = 0.0;
            let mut depth = 0.0;
            for (c, (p, fp)) in prep.iter().zip(fps).enumerate() {
                let (col, rw) = (&p.cols[i], &p.rows[j]);
                let q = cell(params.a, col, rw, true);
                let (s, sa) = (q.s, q.sa);
                let slx = -(col.v[0] * q.fb[0] + col.v[1] * q.fb[1]);
                let sly = -(rw.v[0] * q.fc[0] + rw.v[1] * q.fc[1]);
                let pk = FRAC_2_SQRT_PI * fp.power;
                green += pk * s;
                depth += pk * sa;
                row[3 + 2 * c] = params.amp * pk * slx;
                row[4 + 2 * c] = params.amp * pk * sly;
            }
            values[i] += params.amp * green;
            row[0] = params.amp * depth * params.a;
            row[1] = green;
        }
        f(j, &values, &jac)
    }))
}
