use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{CompactModels, Evaluation, Objective, PenaltyConfig};
use super::orient::{bz_with_grad, parity_mix};
use crate::model::{DesignInstance, Placement, Pose};
use crate::{Error, Result};

/// Nonlinear conjugate gradient with Polak–Ribière directions (clamped at
/// zero) and a fixed step length per variable block. Step lengths halve
/// whenever the objective increases.
#[derive(Debug, Clone)]
pub struct CgdStepper {
    blocks: Vec<Range<usize>>,
    initial: Vec<f64>,
    steps: Vec<f64>,
    g_prev: Option<Vec<f64>>,
    d_prev: Vec<f64>,
}

impl CgdStepper {
    pub fn new(blocks: Vec<Range<usize>>, steps: Vec<f64>) -> Self {
        assert_eq!(blocks.len(), steps.len(), "one step length per block");
        let n = blocks.iter().map(|b| b.end).max().unwrap_or(0);
        CgdStepper {
            blocks,
            initial: steps.clone(),
            steps,
            g_prev: None,
            d_prev: vec![0.0; n],
        }
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Forgets the previous direction so the next step is steepest descent.
    pub fn reset_direction(&mut self) {
        self.g_prev = None;
        self.d_prev.iter_mut().for_each(|d| *d = 0.0);
    }

    pub fn restore_steps(&mut self) {
        self.steps.clone_from(&self.initial);
    }

    /// True once every step length fell below `ratio` times its initial value.
    pub fn converged(&self, ratio: f64) -> bool {
        self.steps.iter().zip(&self.initial).all(|(s, i)| *s < ratio * i)
    }

    /// Moves `x` along the next conjugate direction, given the gradient at
    /// `x` and whether the objective went up since the previous step.
    /// Returns `β`.
    pub fn step(&mut self, x: &mut [f64], g: &[f64], worsened: bool) -> f64 {
        if worsened {
            self.steps.iter_mut().for_each(|s| *s *= 0.5);
            self.reset_direction();
        }
        let beta = match &self.g_prev {
            None => 0.0,
            Some(gp) => {
                let num: f64 = g.iter().zip(gp).map(|(a, b)| a * (a - b)).sum();
                let den: f64 = gp.iter().map(|v| v * v).sum::<f64>() + 1e-12;
                (num / den).max(0.0)
            }
        };
        let d: Vec<f64> = g.iter().zip(&self.d_prev).map(|(g, d)| -g + beta * d).collect();
        for (block, &step) in self.blocks.iter().zip(&self.steps) {
            let norm = d[block.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                let alpha = step / norm;
                for k in block.clone() {
                    x[k] += alpha * d[k];
                }
            }
        }
        self.g_prev = Some(g.to_vec());
        self.d_prev = d;
        beta
    }
}

/// Minimizes `f` (value and gradient) from `x0` with [`CgdStepper`].
/// Returns the final point and the number of gradient evaluations.
pub fn minimize_blockwise<F>(
    mut f: F,
    x0: Vec<f64>,
    blocks: Vec<Range<usize>>,
    steps: Vec<f64>,
    max_iter: usize,
    min_step_ratio: f64,
) -> (Vec<f64>, usize)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let mut stepper = CgdStepper::new(blocks, steps);
    let mut prev = f64::INFINITY;
    for it in 0..max_iter {
        let (v, g) = f(&x);
        stepper.step(&mut x, &g, v > prev);
        prev = v;
        if stepper.converged(min_step_ratio) {
            return (x, it + 1);
        }
    }
    (x, max_iter)
}

/// Settings of the placement optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgdConfig {
    pub max_iter: usize,
    /// Orientation sharpness, annealed linearly from start to end.
    pub eta_start: f64,
    pub eta_end: f64,
    /// Position step per iteration as a fraction of the interposer width.
    pub step_pos: f64,
    /// Angle step per iteration, degrees.
    pub step_theta: f64,
    /// The run stops once all steps shrank below this fraction of their start.
    pub min_step_ratio: f64,
    pub eps_wl: f64,
    /// Start from the gradient-norm ratio instead of `penalty.lambda_dens`.
    pub adaptive_lambda: bool,
    pub noise_window: usize,
    pub noise_rel_change: f64,
    /// Overflow above which a stalled run receives noise.
    pub noise_overflow: f64,
    /// Noise amplitude in bin widths.
    pub zeta: f64,
    pub seed: u64,
    pub penalty: PenaltyConfig,
}

impl Default for CgdConfig {
    fn default() -> Self {
        CgdConfig {
            max_iter: 1000,
            eta_start: 0.5,
            eta_end: 0.05,
            step_pos: 0.02,
            step_theta: 5.0,
            min_step_ratio: 1e-3,
            eps_wl: 1e-3,
            adaptive_lambda: true,
            noise_window: 50,
            noise_rel_change: 0.01,
            noise_overflow: 0.05,
            zeta: 0.5,
            seed: 0,
            penalty: PenaltyConfig::default(),
        }
    }
}

impl CgdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter >= 1
            && self.eta_start > 0.0
            && self.eta_end > 0.0
            && self.step_pos > 0.0
            && self.step_theta >= 0.0
            && self.min_step_ratio > 0.0
            && self.eps_wl > 0.0
            && self.noise_window >= 1
            && self.zeta >= 0.0;
        if !ok {
            return Err(Error::Precondition(format!("invalid optimizer configuration {self:?}")));
        }
        self.penalty.validate()
    }

    fn eta(&self, k: usize) -> f64 {
        if self.max_iter <= 1 {
            return self.eta_start;
        }
        let f = k as f64 / (self.max_iter - 1) as f64;
        self.eta_start + (self.eta_end - self.eta_start) * f
    }
}

/// One optimizer iteration as logged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "WL")]
    pub wl: f64,
    #[serde(rename = "OVFL")]
    pub ovfl: f64,
    #[serde(rename = "Tmax")]
    pub t_max: Option<f64>,
    pub warpage: Option<f64>,
    pub lambda_dens: f64,
    pub noise_injected: bool,
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("iter,J,WL,OVFL,Tmax,warpage,lambda_dens,noise_injected\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iter,
            r.j,
            r.wl,
            r.ovfl,
            opt(r.t_max),
            opt(r.warpage),
            r.lambda_dens,
            u8::from(r.noise_injected)
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct CgdOutcome {
    /// Final state with continuous angles.
    pub placement: Placement,
    pub trajectory: Vec<TrajectoryRow>,
    /// Density weight used at iteration 0.
    pub lambda_dens0: f64,
    /// Orientation sharpness at the last iteration.
    pub final_eta: f64,
    pub warp_tau: f64,
    pub iterations: usize,
    pub converged: bool,
    pub noise_events: usize,
}

fn l1_xy(g: &[[f64; 3]]) -> f64 {
    g.iter().map(|v| v[0].abs() + v[1].abs()).sum()
}

/// `Σ|∇_xy WL'| / Σ|∇_xy D|`. When no bin overflows the hinged density has
/// no gradient, and the ratio is taken against the unhinged penalty
/// `Σ_b (D_b - M_b)²` instead.
pub fn initial_density_weight(obj: &Objective, placement: &Placement, eta: f64, ev: &Evaluation) -> Result<f64> {
    let wl = l1_xy(&ev.grad_wirelength);
    let mut dens = l1_xy(&ev.grad_density);
    if dens <= 1e-12 * wl.max(1.0) {
        let d = super::density::projected_density(obj.design, placement, &obj.bins, eta)?;
        let cap = super::density::bin_capacity(&obj.bins, obj.penalty.t_max);
        let w: Vec<f64> = d.iter().map(|v| 2.0 * (v - cap)).collect();
        dens = l1_xy(&super::density::density_vjp(obj.design, placement, &obj.bins, eta, &w)?);
    }
    Ok(if dens > 0.0 && wl > 0.0 { wl / dens } else { obj.penalty.lambda_dens })
}

fn flatten(p: &Placement) -> Vec<f64> {
    let n = p.len();
    let mut x = vec![0.0; 3 * n];
    for (i, pose) in p.poses.iter().enumerate() {
        x[i] = pose.x;
        x[n + i] = pose.y;
        x[2 * n + i] = pose.theta;
    }
    x
}

fn unflatten(x: &[f64]) -> Placement {
    let n = x.len() / 3;
    Placement::new((0..n).map(|i| Pose::new(x[i], x[n + i], x[2 * n + i])).collect())
}

/// Keeps every centre inside the interposer, shrunk by half the expected dims.
fn clamp_to_interposer(design: &DesignInstance, x: &mut [f64], eta: f64) {
    let n = design.num_chiplets();
    let ip = &design.interposer;
    for (i, c) in design.chiplets.iter().enumerate() {
        let (b, db) = bz_with_grad(x[2 * n + i], eta);
        let (_, po, _) = parity_mix(&b, &db);
        let w = c.w + po * (c.h - c.w);
        let h = c.h + po * (c.w - c.h);
        let clamp = |v: f64, half: f64, len: f64| {
            if 2.0 * half >= len {
                len / 2.0
            } else {
                v.clamp(half, len - half)
            }
        };
        x[i] = clamp(x[i], w / 2.0, ip.width);
        x[n + i] = clamp(x[n + i], h / 2.0, ip.height);
        x[2 * n + i] = x[2 * n + i].rem_euclid(360.0);
    }
}

fn finite_or_dump(g: &[f64], iter: usize, x: &[f64]) -> Result<()> {
    if let Some(k) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient {
            iteration: iter,
            detail: format!("component {k} is {}; state {:?}", g[k], x),
        });
    }
    Ok(())
}

/// Runs the penalized conjugate-gradient placement from `init`.
///
/// Each iteration evaluates the objective at the current sharpness, grows
/// the density weight by `1 + ρ OVFL`, and injects uniform position noise
/// when the overflow has stalled above `noise_overflow` for a full window.
pub fn run_cgd(
    design: &DesignInstance,
    init: &Placement,
    models: Option<CompactModels>,
    cfg: &CgdConfig,
) -> Result<CgdOutcome> {
    cfg.validate()?;
    let n = design.num_chiplets();
    if init.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} poses"),
            found: init.len().to_string(),
        });
    }
    let mut obj = Objective::new(design, models, cfg.penalty.clone(), cfg.eps_wl)?;
    let mut x = flatten(init);
    clamp_to_interposer(design, &mut x, cfg.eta(0));
    let warp_tau = match cfg.penalty.warp_tau {
        Some(t) => t,
        None => obj.default_warp_tau(&unflatten(&x), cfg.eta(0))?,
    };
    obj.penalty.warp_tau = Some(warp_tau);

    let step = cfg.step_pos * design.interposer.width;
    let mut stepper = CgdStepper::new(vec![0..n, n..2 * n, 2 * n..3 * n], vec![step, step, cfg.step_theta]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise_amp = cfg.zeta * obj.bins.bin_w().max(obj.bins.bin_h());

    let mut lambda = cfg.penalty.lambda_dens;
    let mut lambda0 = lambda;
    let mut prev: Option<(Evaluation, f64)> = None;
    let mut trajectory = Vec::with_capacity(cfg.max_iter);
    let mut ovfl_hist: Vec<f64> = Vec::with_capacity(cfg.max_iter);
    let mut last_noise = 0usize;
    let mut noise_events = 0;
    let mut converged = false;
    let mut eta = cfg.eta(0);
    for k in 0..cfg.max_iter {
        eta = cfg.eta(k);
        let state = unflatten(&x);
        let ev = obj.evaluate(&state, eta)?;
        if k == 0 && cfg.adaptive_lambda {
            lambda = initial_density_weight(&obj, &state, eta, &ev)?;
        }
        if k == 0 {
            lambda0 = lambda;
        }
        let grad = ev.gradient(lambda);
        let mut g = vec![0.0; 3 * n];
        for (i, v) in grad.iter().enumerate() {
            g[i] = v[0];
            g[n + i] = v[1];
            g[2 * n + i] = v[2];
        }
        finite_or_dump(&g, k, &x)?;
        let worsened = prev
            .as_ref()
            .is_some_and(|(p, l)| ev.objective(*l) > p.objective(*l));

        ovfl_hist.push(ev.overflow);
        let stalled = k >= last_noise + cfg.noise_window && {
            let past = ovfl_hist[k - cfg.noise_window];
            (ev.overflow - past).abs() < cfg.noise_rel_change * past.max(1e-12)
        };
        let inject = stalled && ev.overflow > cfg.noise_overflow && noise_amp > 0.0;
        trajectory.push(TrajectoryRow {
            iter: k,
            j: ev.objective(lambda),
            wl: ev.wirelength,
            ovfl: ev.overflow,
            t_max: ev.t_max,
            warpage: ev.warpage,
            lambda_dens: lambda,
            noise_injected: inject,
        });
        if inject {
            for v in x[..2 * n].iter_mut() {
                *v += rng.gen_range(-noise_amp..=noise_amp);
            }
            stepper.reset_direction();
            stepper.restore_steps();
            last_noise = k;
            noise_events += 1;
            prev = None;
        } else {
            stepper.step(&mut x, &g, worsened);
            prev = Some((ev.clone(), lambda));
        }
        clamp_to_interposer(design, &mut x, eta);
        lambda *= 1.0 + cfg.penalty.rho * ev.overflow;
        if stepper.converged(cfg.min_step_ratio) {
            converged = true;
            break;
        }
    }
    log::debug!(
        "cgd finished after {} iterations (converged: {converged}, noise events: {noise_events})",
        trajectory.len()
    );
    Ok(CgdOutcome {
        placement: unflatten(&x),
        iterations: trajectory.len(),
        trajectory,
        lambda_dens0: lambda0,
        final_eta: eta,
        warp_tau,
        converged,
        noise_events,
    })
}
