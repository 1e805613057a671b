use serde::{Deserialize, Serialize};

use super::thermal::{eval_tc, thermal_rows_with_jacobian, CompactThermalParams, LengthScale};
use super::warpage::{eval_w_with_thermal, warpage_rows_with_jacobian, CompactWarpageParams, LocalWarp};
use super::{snapped_footprints, Footprint, GridSpec};
use crate::field::{field_mae, field_pearson, FieldGrid};
use crate::model::{DesignInstance, Placement};
use crate::{Error, Result};

/// Optimiser settings shared by both fits. Adam runs first on internally
/// rescaled parameters, then damped Gauss-Newton steps polish the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub adam_iterations: usize,
    pub step: f64,
    /// Adam stops early when the loss changes by less than this fraction
    /// over `window` iterations.
    pub tolerance: f64,
    pub window: usize,
    pub lm_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            adam_iterations: 300,
            step: 0.05,
            tolerance: 1e-6,
            window: 50,
            lm_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean squared error per cell at the end of the fit.
    pub final_mse: f64,
    pub adam_iterations: usize,
    pub lm_iterations: usize,
    pub train_mae: Vec<f64>,
    pub train_pearson: Vec<f64>,
    /// Mean squared error after each iteration.
    pub trace: Vec<f64>,
}

/// A least-squares problem in internal coordinates `z`.
trait Problem: Sync {
    fn dim(&self) -> usize;
    /// Half the sum of squared residuals, its gradient, and `JᵀJ` (row-major)
    /// when `normal` is set.
    fn evaluate(&self, z: &[f64], normal: bool) -> Result<(f64, Vec<f64>, Vec<f64>)>;
    fn cells(&self) -> usize;
}

/// Accumulates loss, gradient and `JᵀJ` from residuals and Jacobian rows
/// (already in internal coordinates) of one grid row.
fn accumulate_row(res: &[f64], jac: &[f64], np: usize, normal: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let mut loss = 0.0;
    let mut g = vec![0.0; np];
    let mut h = if normal { vec![0.0; np * np] } else { vec![] };
    for (c, &r) in res.iter().enumerate() {
        let row = &jac[c * np..(c + 1) * np];
        loss += 0.5 * r * r;
        for p in 0..np {
            g[p] += r * row[p];
        }
        if normal {
            for p in 0..np {
                let rp = row[p];
                if rp == 0.0 {
                    continue;
                }
                for q in p..np {
                    h[p * np + q] += rp * row[q];
                }
            }
        }
    }
    (loss, g, h)
}

fn merge(parts: impl IntoIterator<Item = (f64, Vec<f64>, Vec<f64>)>, np: usize, normal: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let mut loss = 0.0;
    let mut g = vec![0.0; np];
    let mut h = if normal { vec![0.0; np * np] } else { vec![] };
    for (l, gp, hp) in parts {
        loss += l;
        for (a, b) in g.iter_mut().zip(&gp) {
            *a += b;
        }
        for (a, b) in h.iter_mut().zip(&hp) {
            *a += b;
        }
    }
    if normal {
        for p in 0..np {
            for q in 0..p {
                h[p * np + q] = h[q * np + p];
            }
        }
    }
    (loss, g, h)
}

/// Solves the symmetric positive definite system `m x = rhs` in place by
/// Cholesky factorisation; `None` if `m` is not positive definite.
fn cholesky_solve(m: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}

fn diverged(iteration: usize, trace: &[f64]) -> Error {
    Error::FitDiverged {
        iteration,
        trace: trace.iter().rev().take(10).rev().cloned().collect(),
    }
}

/// Returns the final `z`, the per-iteration MSE trace, and the iteration
/// counts of both phases.
fn minimize(problem: &dyn Problem, mut z: Vec<f64>, cfg: &FitConfig) -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
    let np = problem.dim();
    let cells = problem.cells().max(1) as f64;
    let mut trace = Vec::new();
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut adam_done = 0;
    for it in 0..cfg.adam_iterations {
        let (loss, g, _) = problem.evaluate(&z, false)?;
        if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(diverged(it, &trace));
        }
        trace.push(2.0 * loss / cells);
        let t = (it + 1) as i32;
        for p in 0..np {
            m[p] = b1 * m[p] + (1.0 - b1) * g[p];
            v[p] = b2 * v[p] + (1.0 - b2) * g[p] * g[p];
            let mh = m[p] / (1.0 - b1.powi(t));
            let vh = v[p] / (1.0 - b2.powi(t));
            z[p] -= cfg.step * mh / (vh.sqrt() + eps);
        }
        adam_done = it + 1;
        let w = cfg.window.max(1);
        if trace.len() > w {
            let (old, new) = (trace[trace.len() - 1 - w], trace[trace.len() - 1]);
            if (old - new).abs() <= cfg.tolerance * old.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }

    let (mut loss, mut g, mut h) = problem.evaluate(&z, true)?;
    if !loss.is_finite() {
        return Err(diverged(adam_done, &trace));
    }
    let mut mu = 1e-3;
    let mut lm_done = 0;
    for _ in 0..cfg.lm_iterations {
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = h.clone();
            for p in 0..np {
                let d = h[p * np + p];
                a[p * np + p] = d + mu * d.max(1e-12 * (1.0 + d));
            }
            let neg: Vec<f64> = g.iter().map(|x| -x).collect();
            let Some(step) = cholesky_solve(&a, &neg) else {
                mu *= 4.0;
                continue;
            };
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + b).collect();
            match problem.evaluate(&trial, true) {
                Ok((l2, g2, h2)) if l2.is_finite() && l2 < loss => {
                    let gain = (loss - l2) / loss.max(f64::MIN_POSITIVE);
                    z = trial;
                    loss = l2;
                    g = g2;
                    h = h2;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = gain > 1e-12;
                    break;
                }
                _ => mu *= 4.0,
            }
        }
        lm_done += 1;
        trace.push(2.0 * loss / cells);
        if !accepted {
            break;
        }
    }
    Ok((z, trace, adam_done, lm_done))
}

struct ThermalProblem<'a> {
    base: CompactThermalParams,
    samples: Vec<(Vec<Footprint>, &'a FieldGrid)>,
    grid: GridSpec,
    /// `A = amp0 z[1]`, `B = bias0 + tscale z[2]`.
    amp0: f64,
    bias0: f64,
    tscale: f64,
}

impl ThermalProblem<'_> {
    fn params(&self, z: &[f64]) -> CompactThermalParams {
        CompactThermalParams {
            amp: self.amp0 * z[1],
            a: z[0].exp(),
            bias: self.bias0 + self.tscale * z[2],
            per_chiplet: (0..self.base.per_chiplet.len())
                .map(|i| LengthScale {
                    lx: z[3 + 2 * i].exp(),
                    ly: z[4 + 2 * i].exp(),
                })
                .collect(),
        }
    }

    fn start(&self) -> Vec<f64> {
        let mut z = vec![self.base.a.ln(), self.base.amp / self.amp0, (self.base.bias - self.bias0) / self.tscale];
        for l in &self.base.per_chiplet {
            z.push(l.lx.ln());
            z.push(l.ly.ln());
        }
        z
    }
}

impl Problem for ThermalProblem<'_> {
    fn dim(&self) -> usize {
        self.base.num_params()
    }

    fn cells(&self) -> usize {
        self.samples.len() * self.grid.cells()
    }

    fn evaluate(&self, z: &[f64], normal: bool) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let params = self.params(z);
        let np = self.dim();
        let nx = self.grid.nx;
        let mut parts = Vec::new();
        for (fps, label) in &self.samples {
            let rows = thermal_rows_with_jacobian(&params, fps, &self.grid, |j, values, jac| {
                let res: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - label.values[j * nx + i])
                    .collect();
                let mut jz = jac.to_vec();
                for c in 0..nx {
                    jz[c * np + 1] *= self.amp0;
                    jz[c * np + 2] *= self.tscale;
                }
                accumulate_row(&res, &jz, np, normal)
            })?;
            parts.extend(rows);
        }
        Ok(merge(parts, np, normal))
    }
}

fn check_samples<T>(design: &DesignInstance, samples: &[T], grid_of: impl Fn(&T) -> &FieldGrid) -> Result<GridSpec> {
    if samples.len() < 2 {
        return Err(Error::Precondition(format!(
            "fitting needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let grid = GridSpec::of_field(grid_of(&samples[0]));
    let expect = GridSpec::from_design(design);
    for s in samples {
        let g = GridSpec::of_field(grid_of(s));
        if g.nx != expect.nx || g.ny != expect.ny || (g.width - expect.width).abs() > 1e-9 || (g.height - expect.height).abs() > 1e-9 {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} grid over {}x{} mm", expect.nx, expect.ny, expect.width, expect.height),
                found: format!("{}x{} grid over {}x{} mm", g.nx, g.ny, g.width, g.height),
            });
        }
    }
    Ok(grid)
}

/// Least-squares `(A, B)` for fixed nonlinear parameters: `T = B + A G`.
fn linear_amp_bias(params: &CompactThermalParams, samples: &[(Vec<Footprint>, &FieldGrid)], grid: &GridSpec) -> Result<(f64, f64)> {
    let unit = CompactThermalParams {
        amp: 1.0,
        bias: 0.0,
        ..params.clone()
    };
    let (mut sg, mut sgg, mut st, mut sgt, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (fps, label) in samples {
        let g = eval_tc(&unit, fps, grid)?;
        for (gv, tv) in g.values.iter().zip(&label.values) {
            sg += gv;
            sgg += gv * gv;
            st += tv;
            sgt += gv * tv;
            n += 1.0;
        }
    }
    let det = n * sgg - sg * sg;
    if det.abs() <= 1e-300 {
        return Ok((params.amp, st / n));
    }
    let amp = (n * sgt - sg * st) / det;
    Ok((amp, (st - amp * sg) / n))
}

fn report(fits: Vec<FieldGrid>, labels: &[&FieldGrid], trace: Vec<f64>, adam: usize, lm: usize) -> Result<FitReport> {
    let mut mae = Vec::new();
    let mut pear = Vec::new();
    for (f, l) in fits.iter().zip(labels) {
        mae.push(field_mae(f, l)?);
        pear.push(field_pearson(f, l).unwrap_or(f64::NAN));
    }
    Ok(FitReport {
        final_mse: trace.last().cloned().unwrap_or(f64::NAN),
        adam_iterations: adam,
        lm_iterations: lm,
        train_mae: mae,
        train_pearson: pear,
        trace,
    })
}

/// Fits the compact thermal model to oracle temperature fields of legal,
/// snapped placements. Starts from [`CompactThermalParams::initial`] with
/// `A` and `B` set by linear least squares.
pub fn fit_thermal(
    design: &DesignInstance,
    samples: &[(Placement, FieldGrid)],
    cfg: &FitConfig,
) -> Result<(CompactThermalParams, FitReport)> {
    let grid = check_samples(design, samples, |s| &s.1)?;
    let prepared = samples
        .iter()
        .map(|(p, t)| Ok((snapped_footprints(design, p)?, t)))
        .collect::<Result<Vec<_>>>()?;
    let lo = samples.iter().map(|s| s.1.min()).fold(f64::INFINITY, f64::min);
    let spread = samples.iter().map(|s| s.1.max() - s.1.min()).sum::<f64>() / samples.len() as f64;
    let mut base = CompactThermalParams::initial(design, lo, spread.max(1e-6));
    let (amp, bias) = linear_amp_bias(&base, &prepared, &grid)?;
    if amp > 0.0 {
        base.amp = amp;
        base.bias = bias;
    }
    let problem = ThermalProblem {
        amp0: base.amp.abs().max(f64::MIN_POSITIVE),
        bias0: base.bias,
        tscale: spread.max(1e-6),
        base,
        samples: prepared,
        grid,
    };
    let (z, trace, adam, lm) = minimize(&problem, problem.start(), cfg)?;
    let params = problem.params(&z);
    let fits = problem
        .samples
        .iter()
        .map(|(fps, _)| eval_tc(&params, fps, &grid))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<&FieldGrid> = problem.samples.iter().map(|s| s.1).collect();
    let rep = report(fits, &labels, trace, adam, lm)?;
    log::info!(
        "thermal fit: mse {:.4e} after {} adam + {} lm iterations",
        rep.final_mse,
        adam,
        lm
    );
    Ok((params, rep))
}

struct WarpageProblem<'a> {
    base: CompactWarpageParams,
    /// Footprints, compact temperature field, label.
    samples: Vec<(Vec<Footprint>, FieldGrid, &'a FieldGrid)>,
    alpha0: f64,
    wscale: f64,
    tscale: f64,
    t0: f64,
}

impl WarpageProblem<'_> {
    fn params(&self, z: &[f64]) -> CompactWarpageParams {
        CompactWarpageParams {
            alpha: self.alpha0 * z[0],
            b: self.wscale * z[1],
            per_chiplet: (0..self.base.per_chiplet.len())
                .map(|i| {
                    let o = 2 + 5 * i;
                    LocalWarp {
                        kx: z[o].exp(),
                        ky: z[o + 1].exp(),
                        lambda: z[o + 2],
                        c: z[o + 3],
                        t_ref: self.t0 + self.tscale * z[o + 4],
                    }
                })
                .collect(),
        }
    }

    fn start(&self) -> Vec<f64> {
        let mut z = vec![self.base.alpha / self.alpha0, self.base.b / self.wscale];
        for p in &self.base.per_chiplet {
            z.extend([p.kx.ln(), p.ky.ln(), p.lambda, p.c, (p.t_ref - self.t0) / self.tscale]);
        }
        z
    }
}

impl Problem for WarpageProblem<'_> {
    fn dim(&self) -> usize {
        self.base.num_params()
    }

    fn cells(&self) -> usize {
        self.samples.iter().map(|s| s.2.values.len()).sum()
    }

    fn evaluate(&self, z: &[f64], normal: bool) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let params = self.params(z);
        let np = self.dim();
        let mut parts = Vec::new();
        for (fps, thermal, label) in &self.samples {
            let nx = thermal.nx;
            let rows = warpage_rows_with_jacobian(&params, fps, thermal, |j, values, jac| {
                let res: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - label.values[j * nx + i])
                    .collect();
                let mut jz = jac.to_vec();
                for c in 0..nx {
                    let row = &mut jz[c * np..(c + 1) * np];
                    row[0] *= self.alpha0;
                    row[1] *= self.wscale;
                    for k in 0..params.per_chiplet.len() {
                        row[6 + 5 * k] *= self.tscale;
                    }
                }
                accumulate_row(&res, &jz, np, normal)
            })?;
            parts.extend(rows);
        }
        Ok(merge(parts, np, normal))
    }
}

/// Fits the compact warpage model to oracle displacement fields with the
/// temperature supplied by the (frozen) compact thermal model, the same
/// composition used during placement.
pub fn fit_warpage(
    design: &DesignInstance,
    thermal_params: &CompactThermalParams,
    samples: &[(Placement, FieldGrid)],
    cfg: &FitConfig,
) -> Result<(CompactWarpageParams, FitReport)> {
    let grid = check_samples(design, samples, |s| &s.1)?;
    let prepared = samples
        .iter()
        .map(|(p, w)| {
            let fps = snapped_footprints(design, p)?;
            let t = eval_tc(thermal_params, &fps, &grid)?;
            Ok((fps, t, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let t0 = prepared.iter().map(|s| s.1.min()).fold(f64::INFINITY, f64::min);
    let tscale = prepared.iter().map(|s| s.1.max() - s.1.min()).sum::<f64>() / prepared.len() as f64;
    let wscale = samples.iter().map(|s| s.1.max() - s.1.min()).sum::<f64>() / samples.len() as f64;
    let mut base = CompactWarpageParams::initial(design, t0);
    // alpha and b by linear least squares with the local fields fixed
    let unit = CompactWarpageParams {
        alpha: 1.0,
        b: 0.0,
        ..base.clone()
    };
    let (mut sg, mut sgg, mut sw, mut sgw, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (fps, t, w) in &prepared {
        let g = eval_w_with_thermal(&unit, fps, t)?;
        for (gv, wv) in g.values.iter().zip(&w.values) {
            sg += gv;
            sgg += gv * gv;
            sw += wv;
            sgw += gv * wv;
            n += 1.0;
        }
    }
    let det = n * sgg - sg * sg;
    if det.abs() > 1e-300 {
        base.alpha = (n * sgw - sg * sw) / det;
        base.b = (sw - base.alpha * sg) / n;
    }
    let alpha0 = if base.alpha != 0.0 { base.alpha.abs() } else { wscale.max(1e-9) / (tscale.max(1e-9) * design.num_chiplets().max(1) as f64) };
    let problem = WarpageProblem {
        base,
        samples: prepared,
        alpha0,
        wscale: wscale.max(1e-9),
        tscale: tscale.max(1e-6),
        t0,
    };
    let (z, trace, adam, lm) = minimize(&problem, problem.start(), cfg)?;
    let params = problem.params(&z);
    let fits = problem
        .samples
        .iter()
        .map(|(fps, t, _)| eval_w_with_thermal(&params, fps, t))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<&FieldGrid> = problem.samples.iter().map(|s| s.2).collect();
    let rep = report(fits, &labels, trace, adam, lm)?;
    log::info!(
        "warpage fit: mse {:.4e} after {} adam + {} lm iterations",
        rep.final_mse,
        adam,
        lm
    );
    Ok((params, rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        let m = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&m, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(cholesky_solve(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }
}
