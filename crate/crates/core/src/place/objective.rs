use serde::{Deserialize, Serialize};

use super::density::{bin_capacity, density_vjp, overflow_of, projected_density, BinGrid};
use super::orient::{bz_with_grad, parity_mix};
use super::wirelength::{check_len, projected_wirelength};
use crate::compact::{
    eval_tc, eval_w_with_thermal, smooth_peak_to_valley, thermal_vjp, warpage_vjp, CompactThermalParams,
    CompactWarpageParams, Footprint, GridSpec,
};
use crate::model::{warpage_metric, DesignInstance, Placement};
use crate::{Error, Result};

/// Weights, thresholds and density settings of the penalized objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Starting density weight; replaced by the gradient-norm ratio when
    /// the optimizer runs with adaptive scaling.
    pub lambda_dens: f64,
    pub lambda_t: f64,
    pub lambda_w: f64,
    /// °C
    pub t_th: f64,
    /// µm
    pub w_th: f64,
    pub gamma: u32,
    /// Density weight growth per unit overflow.
    pub rho: f64,
    pub t_max: f64,
    /// Density bins per side; sized from the chiplets when absent.
    pub bins: Option<[usize; 2]>,
    /// Sharpness of the smooth warpage range; `50 / range` of the starting
    /// layout when absent.
    pub warp_tau: Option<f64>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda_dens: 1.0,
            lambda_t: 0.0,
            lambda_w: 0.0,
            t_th: 85.0,
            w_th: 50.0,
            gamma: 2,
            rho: 1.0,
            t_max: 1.0,
            bins: None,
            warp_tau: None,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_dens >= 0.0
            && self.lambda_t >= 0.0
            && self.lambda_w >= 0.0
            && self.gamma >= 1
            && self.rho > 0.0
            && self.t_max > 0.0
            && self.t_max <= 1.0
            && self.t_th.is_finite()
            && self.w_th.is_finite()
            && self.warp_tau.is_none_or(|t| t > 0.0)
            && self.bins.is_none_or(|[a, b]| a > 0 && b > 0);
        if !ok {
            return Err(Error::Precondition(format!("invalid penalty configuration {self:?}")));
        }
        Ok(())
    }

    pub fn bin_grid(&self, design: &DesignInstance) -> BinGrid {
        match self.bins {
            Some([nx, ny]) => BinGrid::new(nx, ny, design.interposer.width, design.interposer.height),
            None => BinGrid::auto(design),
        }
    }

    fn physics_active(&self) -> bool {
        self.lambda_t > 0.0 || self.lambda_w > 0.0
    }
}

/// Fitted compact models used by the physics penalties.
#[derive(Debug, Clone, Copy)]
pub struct CompactModels<'a> {
    pub thermal: &'a CompactThermalParams,
    pub warpage: &'a CompactWarpageParams,
}

/// Objective terms and gradients at one state. Gradients are per chiplet
/// `(x, y, θ)`, the angle component per degree.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub wirelength: f64,
    /// `Σ_b max(0, D_b - M_b)²` before weighting.
    pub density_penalty: f64,
    pub overflow: f64,
    /// `λ_T Σ_r max(0, T_r - T_th)^γ`
    pub thermal_penalty: f64,
    /// `λ_W max(0, smooth range(W) - W_th)^γ`
    pub warpage_penalty: f64,
    /// Peak compact temperature, when the models were evaluated.
    pub t_max: Option<f64>,
    /// Exact range of the compact warpage field, when evaluated.
    pub warpage: Option<f64>,
    pub grad_wirelength: Vec<[f64; 3]>,
    pub grad_density: Vec<[f64; 3]>,
    /// Weighted gradient of both physics penalties.
    pub grad_physics: Vec<[f64; 3]>,
}

impl Evaluation {
    pub fn objective(&self, lambda_dens: f64) -> f64 {
        self.wirelength + lambda_dens * self.density_penalty + self.thermal_penalty + self.warpage_penalty
    }

    pub fn gradient(&self, lambda_dens: f64) -> Vec<[f64; 3]> {
        self.grad_wirelength
            .iter()
            .zip(&self.grad_density)
            .zip(&self.grad_physics)
            .map(|((w, d), p)| [0, 1, 2].map(|k| w[k] + lambda_dens * d[k] + p[k]))
            .collect()
    }
}

/// The penalized placement objective for one design.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub design: &'a DesignInstance,
    pub models: Option<CompactModels<'a>>,
    pub penalty: PenaltyConfig,
    pub bins: BinGrid,
    /// Grid of the physics penalties.
    pub grid: GridSpec,
    pub eps_wl: f64,
}

/// `γ max(0, e)^(γ-1)` and `max(0, e)^γ`.
fn hinge(e: f64, gamma: u32) -> (f64, f64) {
    if e <= 0.0 {
        return (0.0, 0.0);
    }
    (e.powi(gamma as i32), gamma as f64 * e.powi(gamma as i32 - 1))
}

impl<'a> Objective<'a> {
    pub fn new(
        design: &'a DesignInstance,
        models: Option<CompactModels<'a>>,
        penalty: PenaltyConfig,
        eps_wl: f64,
    ) -> Result<Self> {
        penalty.validate()?;
        if penalty.physics_active() && models.is_none() {
            return Err(Error::Precondition(
                "thermal or warpage penalties need fitted compact models".into(),
            ));
        }
        if let Some(m) = models {
            m.thermal.validate(design.num_chiplets())?;
            m.warpage.validate(design.num_chiplets())?;
        }
        Ok(Objective {
            design,
            models,
            bins: penalty.bin_grid(design),
            penalty,
            grid: GridSpec::from_design(design),
            eps_wl,
        })
    }

    /// Footprints with the probability-weighted dims of each chiplet, and
    /// the derivative of the odd-orientation probability.
    pub fn expected_footprints(&self, placement: &Placement, eta: f64) -> (Vec<Footprint>, Vec<f64>) {
        self.design
            .chiplets
            .iter()
            .zip(&placement.poses)
            .map(|(c, p)| {
                let (b, db) = bz_with_grad(p.theta, eta);
                let (_, po, dpo) = parity_mix(&b, &db);
                let fp = Footprint {
                    x: p.x,
                    y: p.y,
                    w: c.w + po * (c.h - c.w),
                    h: c.h + po * (c.w - c.h),
                    power: c.power_density,
                };
                (fp, dpo)
            })
            .unzip()
    }

    /// `50 / range` of the compact warpage field at `placement`.
    pub fn default_warp_tau(&self, placement: &Placement, eta: f64) -> Result<f64> {
        let Some(m) = self.models else { return Ok(1.0) };
        let (fps, _) = self.expected_footprints(placement, eta);
        let t = eval_tc(m.thermal, &fps, &self.grid)?;
        let range = warpage_metric(&eval_w_with_thermal(m.warpage, &fps, &t)?)?;
        Ok(if range > 0.0 { 50.0 / range } else { 50.0 })
    }

    pub fn evaluate(&self, placement: &Placement, eta: f64) -> Result<Evaluation> {
        check_len(self.design, placement)?;
        let n = placement.len();
        let (wl, grad_wl) = projected_wirelength(self.design, placement, eta, self.eps_wl)?;

        let density = projected_density(self.design, placement, &self.bins, eta)?;
        let cap = bin_capacity(&self.bins, self.penalty.t_max);
        let excess: Vec<f64> = density.iter().map(|d| (d - cap).max(0.0)).collect();
        let density_penalty = excess.iter().map(|e| e * e).sum();
        let overflow = overflow_of(&density, self.design.total_chiplet_area(), cap)?;
        let weights: Vec<f64> = excess.iter().map(|e| 2.0 * e).collect();
        let grad_density = density_vjp(self.design, placement, &self.bins, eta, &weights)?;

        let mut out = Evaluation {
            wirelength: wl,
            density_penalty,
            overflow,
            thermal_penalty: 0.0,
            warpage_penalty: 0.0,
            t_max: None,
            warpage: None,
            grad_wirelength: grad_wl,
            grad_density,
            grad_physics: vec![[0.0; 3]; n],
        };
        if let Some(m) = self.models {
            self.add_physics(&mut out, m, placement, eta)?;
        }
        Ok(out)
    }

    fn add_physics(&self, out: &mut Evaluation, m: CompactModels, placement: &Placement, eta: f64) -> Result<()> {
        let p = &self.penalty;
        let (fps, dpo) = self.expected_footprints(placement, eta);
        let temp = eval_tc(m.thermal, &fps, &self.grid)?;
        out.t_max = Some(temp.max());
        let mut t_weights = vec![0.0; temp.values.len()];
        if p.lambda_t > 0.0 {
            for (w, &t) in t_weights.iter_mut().zip(&temp.values) {
                let (v, dv) = hinge(t - p.t_th, p.gamma);
                out.thermal_penalty += p.lambda_t * v;
                *w = p.lambda_t * dv;
            }
        }
        let warp = eval_w_with_thermal(m.warpage, &fps, &temp)?;
        out.warpage = Some(warpage_metric(&warp)?);
        let mut w_weights = None;
        if p.lambda_w > 0.0 {
            let tau = match p.warp_tau {
                Some(t) => t,
                None => {
                    let r = out.warpage.unwrap_or(0.0);
                    if r > 0.0 { 50.0 / r } else { 50.0 }
                }
            };
            let (range, g) = smooth_peak_to_valley(&warp.values, tau);
            let (v, dv) = hinge(range - p.w_th, p.gamma);
            out.warpage_penalty = p.lambda_w * v;
            if dv > 0.0 {
                w_weights = Some(g.into_iter().map(|x| p.lambda_w * dv * x).collect::<Vec<_>>());
            }
        }
        let any_t = t_weights.iter().any(|&w| w != 0.0);
        let geo = match (w_weights, any_t) {
            (Some(ww), _) => warpage_vjp(m.warpage, m.thermal, &fps, &temp, &ww, any_t.then_some(&t_weights[..]))?,
            (None, true) => thermal_vjp(m.thermal, &fps, &self.grid, &t_weights)?,
            (None, false) => return Ok(()),
        };
        for (k, (g, c)) in geo.iter().zip(&self.design.chiplets).enumerate() {
            out.grad_physics[k] = [g[0], g[1], dpo[k] * (c.h - c.w) * (g[2] - g[3])];
        }
        Ok(())
    }
}

/// `J = WL' + λ_dens Σ_b max(0, D_b - M_b)² + thermal + warpage penalties`
/// at `penalty.lambda_dens`, and its gradient.
pub fn objective(
    design: &DesignInstance,
    placement: &Placement,
    models: Option<CompactModels>,
    penalty: &PenaltyConfig,
    eta: f64,
    eps_wl: f64,
) -> Result<(f64, Vec<[f64; 3]>)> {
    let obj = Objective::new(design, models, penalty.clone(), eps_wl)?;
    let ev = obj.evaluate(placement, eta)?;
    Ok((ev.objective(penalty.lambda_dens), ev.gradient(penalty.lambda_dens)))
}
