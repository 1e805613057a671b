use serde::{Deserialize, Serialize};

use super::thermal::{eval_tc, thermal_vjp, CompactThermalParams};
use super::{Footprint, GridSpec};
use crate::field::FieldGrid;
use crate::model::DesignInstance;
use crate::{par, Error, Result};

/// Per-chiplet local field parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalWarp {
    pub kx: f64,
    pub ky: f64,
    pub lambda: f64,
    pub c: f64,
    pub t_ref: f64,
}

/// `W(x, y) = alpha Σ_i (T(x, y) - t_ref_i) w_i(x, y) + b` with the local
/// quadratic fields `w_i` of [`eval_w_local`]. Displacement in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactWarpageParams {
    pub alpha: f64,
    pub b: f64,
    pub per_chiplet: Vec<LocalWarp>,
}

/// Entries in a warpage Jacobian row, ordered
/// `[alpha, b, (ln kx, ln ky, lambda, c, t_ref) per chiplet]`.
pub(crate) fn warpage_param_count(n: usize) -> usize {
    5 * n + 2
}

impl CompactWarpageParams {
    /// Untrained starting point: curvature scale `2 / W`, no tilt, bowls
    /// with offset -1 referenced to `t_ref`, and `alpha = 0`.
    pub fn initial(design: &DesignInstance, t_ref: f64) -> Self {
        let span = design.interposer.width.max(design.interposer.height);
        let k = 2.0 / span;
        CompactWarpageParams {
            alpha: 0.0,
            b: 0.0,
            per_chiplet: vec![
                LocalWarp {
                    kx: k,
                    ky: k,
                    lambda: 0.0,
                    c: -1.0,
                    t_ref,
                };
                design.num_chiplets()
            ],
        }
    }

    pub fn num_params(&self) -> usize {
        warpage_param_count(self.per_chiplet.len())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.per_chiplet.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} local warpage parameter sets"),
                found: self.per_chiplet.len().to_string(),
            });
        }
        let ok = self.alpha.is_finite()
            && self.b.is_finite()
            && self.per_chiplet.iter().all(|p| {
                p.kx > 0.0 && p.ky > 0.0 && p.lambda.is_finite() && p.c.is_finite() && p.t_ref.is_finite()
            });
        if !ok {
            return Err(Error::Domain("warpage parameters need kx > 0, ky > 0 and finite values".into()));
        }
        Ok(())
    }
}

/// `k_x²(x-x_i)² + k_y²(y-y_i)² + λ (k_x (x-x_i) + k_y (y-y_i)) + c`.
pub fn eval_w_local(p: &LocalWarp, xi: f64, yi: f64, x: f64, y: f64) -> f64 {
    let (u, v) = (p.kx * (x - xi), p.ky * (y - yi));
    u * u + v * v + p.lambda * (u + v) + p.c
}

/// `(∂w_i/∂x_i, ∂w_i/∂y_i)`.
fn local_grad(p: &LocalWarp, xi: f64, yi: f64, x: f64, y: f64) -> (f64, f64) {
    let (u, v) = (p.kx * (x - xi), p.ky * (y - yi));
    (-p.kx * (2.0 * u + p.lambda), -p.ky * (2.0 * v + p.lambda))
}

/// Warpage field from an already evaluated temperature field.
pub fn eval_w_with_thermal(params: &CompactWarpageParams, fps: &[Footprint], thermal: &FieldGrid) -> Result<FieldGrid> {
    params.validate(fps.len())?;
    let grid = GridSpec::of_field(thermal);
    let nx = grid.nx;
    let rows = par::map(grid.ny, |j| {
        let y = grid.center_y(j);
        (0..nx)
            .map(|i| {
                let x = grid.center_x(i);
                let t = thermal.values[j * nx + i];
                let s: f64 = params
                    .per_chiplet
                    .iter()
                    .zip(fps)
                    .map(|(p, f)| (t - p.t_ref) * eval_w_local(p, f.x, f.y, x, y))
                    .sum();
                params.alpha * s + params.b
            })
            .collect::<Vec<_>>()
    });
    Ok(grid.field(rows.concat()))
}

/// Full-grid warpage with the temperature taken from the compact thermal model.
pub fn eval_w(
    params: &CompactWarpageParams,
    thermal_params: &CompactThermalParams,
    fps: &[Footprint],
    grid: &GridSpec,
) -> Result<FieldGrid> {
    let t = eval_tc(thermal_params, fps, grid)?;
    eval_w_with_thermal(params, fps, &t)
}

/// Gradient of `Σ_r weights_r W_r` with respect to each chiplet's
/// `(x_i, y_i, w_i, h_i)`, through both the local fields and the temperature.
/// `extra_thermal`, when given, is added to the temperature weights so a
/// caller can fold a direct temperature penalty into the same pass.
pub fn warpage_vjp(
    params: &CompactWarpageParams,
    thermal_params: &CompactThermalParams,
    fps: &[Footprint],
    thermal: &FieldGrid,
    weights: &[f64],
    extra_thermal: Option<&[f64]>,
) -> Result<Vec<[f64; 4]>> {
    params.validate(fps.len())?;
    let grid = GridSpec::of_field(thermal);
    grid.check_len(weights.len())?;
    let nx = grid.nx;
    let n = fps.len();
    // direct part through w_i and the temperature weights alpha g Σ_i w_i
    let parts = par::map(grid.ny, |j| {
        let y = grid.center_y(j);
        let mut direct = vec![[0.0; 2]; n];
        let mut tw = vec![0.0; nx];
        for i in 0..nx {
            let g = weights[j * nx + i];
            if g == 0.0 {
                continue;
            }
            let x = grid.center_x(i);
            let t = thermal.values[j * nx + i];
            let mut sum_w = 0.0;
            for (k, (p, f)) in params.per_chiplet.iter().zip(fps).enumerate() {
                sum_w += eval_w_local(p, f.x, f.y, x, y);
                let (gx, gy) = local_grad(p, f.x, f.y, x, y);
                let s = g * params.alpha * (t - p.t_ref);
                direct[k][0] += s * gx;
                direct[k][1] += s * gy;
            }
            tw[i] = g * params.alpha * sum_w;
        }
        (direct, tw)
    });
    let mut out = vec![[0.0; 4]; n];
    let mut tweights = Vec::with_capacity(nx * grid.ny);
    for (direct, tw) in parts {
        for (o, d) in out.iter_mut().zip(direct) {
            o[0] += d[0];
            o[1] += d[1];
        }
        tweights.extend(tw);
    }
    if let Some(extra) = extra_thermal {
        grid.check_len(extra.len())?;
        for (t, e) in tweights.iter_mut().zip(extra) {
            *t += e;
        }
    }
    let through_t = thermal_vjp(thermal_params, fps, &grid, &tweights)?;
    for (o, t) in out.iter_mut().zip(through_t) {
        for k in 0..4 {
            o[k] += t[k];
        }
    }
    Ok(out)
}

/// Per-chiplet derivative fields of `W` with respect to `(x_i, y_i, w_i, h_i)`.
pub fn grad_w(
    params: &CompactWarpageParams,
    thermal_params: &CompactThermalParams,
    fps: &[Footprint],
    grid: &GridSpec,
) -> Result<Vec<[FieldGrid; 4]>> {
    params.validate(fps.len())?;
    let t = eval_tc(thermal_params, fps, grid)?;
    let dt = super::thermal::grad_tc(thermal_params, fps, grid)?;
    let nx = grid.nx;
    let sum_w: Vec<f64> = (0..grid.cells())
        .map(|r| {
            let (x, y) = (grid.center_x(r % nx), grid.center_y(r / nx));
            params.per_chiplet.iter().zip(fps).map(|(p, f)| eval_w_local(p, f.x, f.y, x, y)).sum()
        })
        .collect();
    Ok(dt
        .into_iter()
        .enumerate()
        .map(|(k, fields)| {
            let (p, f) = (&params.per_chiplet[k], &fps[k]);
            let mut idx = 0;
            fields.map(|field| {
                let comp = idx;
                idx += 1;
                let values = (0..grid.cells())
                    .map(|r| {
                        let mut v = params.alpha * sum_w[r] * field.values[r];
                        if comp < 2 {
                            let (x, y) = (grid.center_x(r % nx), grid.center_y(r / nx));
                            let g = local_grad(p, f.x, f.y, x, y);
                            let gl = if comp == 0 { g.0 } else { g.1 };
                            v += params.alpha * (t.values[r] - p.t_ref) * gl;
                        }
                        v
                    })
                    .collect();
                grid.field(values)
            })
        })
        .collect())
}

/// Calls `f(j, values, jac)` per grid row with the warpage values and the
/// row-major `nx x P` Jacobian in [`warpage_param_count`] order, given the
/// temperature field (held fixed).
pub(crate) fn warpage_rows_with_jacobian<R, F>(
    params: &CompactWarpageParams,
    fps: &[Footprint],
    thermal: &FieldGrid,
    f: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, &[f64], &[f64]) -> R + Sync + Send,
{
    params.validate(fps.len())?;
    let grid = GridSpec::of_field(thermal);
    let nx = grid.nx;
    let np = params.num_params();
    Ok(par::map(grid.ny, |j| {
        let y = grid.center_y(j);
        let mut values = vec![0.0; nx];
        let mut jac = vec![0.0; nx * np];
        for i in 0..nx {
            let x = grid.center_x(i);
            let t = thermal.values[j * nx + i];
            let row = &mut jac[i * np..(i + 1) * np];
            let mut s = 0.0;
            for (k, (p, fp)) in params.per_chiplet.iter().zip(fps).enumerate() {
                let (u, v) = (p.kx * (x - fp.x), p.ky * (y - fp.y));
                let w = u * u + v * v + p.lambda * (u + v) + p.c;
                let dt = t - p.t_ref;
                s += dt * w;
                let o = 2 + 5 * k;
                let at = params.alpha * dt;
                row[o] = at * (2.0 * u * u + p.lambda * u);
                row[o + 1] = at * (2.0 * v * v + p.lambda * v);
                row[o + 2] = at * (u + v);
                row[o + 3] = at;
                row[o + 4] = -params.alpha * w;
            }
            row[0] = s;
            row[1] = 1.0;
            values[i] = params.alpha * s + params.b;
        }
        f(j, &values, &jac)
    }))
}

/// Smooth peak-to-valley `smax - smin` with log-sum-exp at sharpness `tau`,
/// and its gradient with respect to each value. Tends to `max - min` as
/// `tau` grows.
pub fn smooth_peak_to_valley(values: &[f64], tau: f64) -> (f64, Vec<f64>) {
    if values.is_empty() {
        return (0.0, vec![]);
    }
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ep: Vec<f64> = values.iter().map(|v| (tau * (v - hi)).exp()).collect();
    let em: Vec<f64> = values.iter().map(|v| (-tau * (v - lo)).exp()).collect();
    let (sp, sm) = (ep.iter().sum::<f64>(), em.iter().sum::<f64>());
    let smax = hi + sp.ln() / tau;
    let smin = lo - sm.ln() / tau;
    let grad = ep.iter().zip(&em).map(|(p, m)| p / sp - m / sm).collect();
    (smax - smin, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_field_examples() {
        let p = LocalWarp {
            kx: 1.0,
            ky: 1.0,
            lambda: 0.0,
            c: 0.0,
            t_ref: 25.0,
        };
        assert_eq!(eval_w_local(&p, 0.0, 0.0, 3.0, 4.0), 25.0);
        let q = LocalWarp { c: 1.5, lambda: 0.7, ..p };
        assert_eq!(eval_w_local(&q, 2.0, 3.0, 2.0, 3.0), 1.5);
        let e = LocalWarp { kx: 0.3, ky: 1.7, ..q };
        let (a, b) = (eval_w_local(&e, 1.0, 1.0, 3.0, 2.0), eval_w_local(&e, 1.0, 1.0, -1.0, 2.0));
        assert!((a - b - 2.0 * e.lambda * e.kx * 2.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_range_approaches_exact() {
        let v = [0.0, 1.0, -2.0, 0.5];
        let (s, g) = smooth_peak_to_valley(&v, 200.0);
        assert!((s - 3.0).abs() < 0.02);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.0).collect();
        assert!((smooth_peak_to_valley(&shifted, 200.0).0 - s).abs() < 1e-12);
    }
}
