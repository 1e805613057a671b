use serde::{Deserialize, Serialize};

use super::orient::{bz_with_grad, parity_mix};
use super::wirelength::check_len;
use crate::model::{DesignInstance, Placement};
use crate::{Error, Result};

/// Uniform density bins over the interposer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl BinGrid {
    pub fn new(nx: usize, ny: usize, width: f64, height: f64) -> Self {
        BinGrid { nx, ny, width, height }
    }

    /// Bins one fifth of the longest chiplet side, between 4 and the
    /// analysis grid resolution per side. At that size the bell peak of the
    /// largest chiplet alone stays below the bin area, while stacked
    /// chiplets overflow.
    pub fn auto(design: &DesignInstance) -> Self {
        let ip = &design.interposer;
        let longest = design.chiplets.iter().map(|c| c.w.max(c.h)).fold(0.0, f64::max);
        let side = (longest / 5.0).max(1e-9);
        let hi = ip.grid.max(4);
        let count = |len: f64| ((len / side).round() as usize).clamp(4, hi);
        BinGrid::new(count(ip.width), count(ip.height), ip.width, ip.height)
    }

    pub fn bin_w(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn bin_h(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Precondition(format!(
                "bin grid must be non-empty, got {} x {} over {} x {} mm",
                self.nx, self.ny, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Bell-shaped spread of an object of length `w` centred at `x` over bins of
/// width `wb`: the first covered bin, `(P, dP/dx)` for each covered bin,
/// and their sums.
struct Profile {
    first: usize,
    p: Vec<f64>,
    dp: Vec<f64>,
    sum: f64,
    dsum: f64,
}

fn bell(x: f64, w: f64, wb: f64, n: usize) -> Profile {
    let inner = w / 2.0 + wb;
    let reach = w / 2.0 + 2.0 * wb;
    let a = 4.0 / ((w + 2.0 * wb) * (w + 4.0 * wb));
    let b = 2.0 / (wb * (w + 4.0 * wb));
    let lo = (((x - reach) / wb - 0.5).floor().max(0.0)) as usize;
    let hi = ((((x + reach) / wb - 0.5).ceil()).max(-1.0) as i64).min(n as i64 - 1);
    let mut out = Profile {
        first: lo,
        p: Vec::new(),
        dp: Vec::new(),
        sum: 0.0,
        dsum: 0.0,
    };
    if (lo as i64) > hi {
        return out;
    }
    for k in lo..=hi as usize {
        let c = (k as f64 + 0.5) * wb;
        let d = (x - c).abs();
        let s = if x >= c { 1.0 } else { -1.0 };
        let (p, dp) = if d <= inner {
            (1.0 - a * d * d, -2.0 * a * d * s)
        } else if d < reach {
            let e = d - reach;
            (b * e * e, 2.0 * b * e * s)
        } else {
            (0.0, 0.0)
        };
        out.p.push(p);
        out.dp.push(dp);
        out.sum += p;
        out.dsum += dp;
    }
    out
}

/// One orientation parity of one chiplet: both axis profiles and the
/// normalization `area / (Sx Sy)`.
struct Spread {
    px: Profile,
    py: Profile,
    norm: f64,
}

fn spread(x: f64, y: f64, w: f64, h: f64, area: f64, bins: &BinGrid) -> Option<Spread> {
    let px = bell(x, w, bins.bin_w(), bins.nx);
    let py = bell(y, h, bins.bin_h(), bins.ny);
    let s = px.sum * py.sum;
    (s > 0.0).then(|| Spread { norm: area / s, px, py })
}

/// Both parity spreads with their probability weights and the derivative
/// of the odd weight with respect to the angle.
fn chiplet_spreads(
    design: &DesignInstance,
    placement: &Placement,
    bins: &BinGrid,
    eta: f64,
) -> Vec<[(f64, Option<Spread>); 2]> {
    design
        .chiplets
        .iter()
        .zip(&placement.poses)
        .map(|(c, p)| {
            let (b, db) = bz_with_grad(p.theta, eta);
            let (pe, po, _) = parity_mix(&b, &db);
            [
                (pe, spread(p.x, p.y, c.w, c.h, c.area(), bins)),
                (po, spread(p.x, p.y, c.h, c.w, c.area(), bins)),
            ]
        })
        .collect()
}

/// Per-bin projected density (mm² of chiplet area per bin), row-major with
/// x fastest. Each chiplet contributes its whole area, split over the bins by
/// the bell profiles of its two orientation parities.
pub fn projected_density(design: &DesignInstance, placement: &Placement, bins: &BinGrid, eta: f64) -> Result<Vec<f64>> {
    check_len(design, placement)?;
    bins.validate()?;
    let mut d = vec![0.0; bins.len()];
    for parts in chiplet_spreads(design, placement, bins, eta) {
        for (weight, s) in parts {
            let Some(s) = s else { continue };
            for (jy, &py) in s.py.p.iter().enumerate() {
                let row = (s.py.first + jy) * bins.nx + s.px.first;
                let f = weight * s.norm * py;
                for (ix, &px) in s.px.p.iter().enumerate() {
                    d[row + ix] += f * px;
                }
            }
        }
    }
    Ok(d)
}

/// Gradient of `Σ_b weights_b D_b` with respect to each chiplet's
/// `(x, y, θ)`, the angle derivative per degree.
pub fn density_vjp(
    design: &DesignInstance,
    placement: &Placement,
    bins: &BinGrid,
    eta: f64,
    weights: &[f64],
) -> Result<Vec<[f64; 3]>> {
    check_len(design, placement)?;
    bins.validate()?;
    if weights.len() != bins.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bin weights", bins.len()),
            found: weights.len().to_string(),
        });
    }
    let dpo: Vec<f64> = placement
        .poses
        .iter()
        .map(|p| {
            let (b, db) = bz_with_grad(p.theta, eta);
            parity_mix(&b, &db).2
        })
        .collect();
    let spreads = chiplet_spreads(design, placement, bins, eta);
    Ok(spreads
        .into_iter()
        .zip(dpo)
        .map(|(parts, dpo)| {
            let mut g = [0.0; 3];
            for (parity, (weight, s)) in parts.into_iter().enumerate() {
                let Some(s) = s else { continue };
                // G = Σ w Px Py and its partials over the covered bins
                let (mut v, mut vx, mut vy) = (0.0, 0.0, 0.0);
                for jy in 0..s.py.p.len() {
                    let row = (s.py.first + jy) * bins.nx + s.px.first;
                    let (mut a, mut ax) = (0.0, 0.0);
                    for ix in 0..s.px.p.len() {
                        let wb = weights[row + ix];
                        a += wb * s.px.p[ix];
                        ax += wb * s.px.dp[ix];
                    }
                    v += a * s.py.p[jy];
                    vx += ax * s.py.p[jy];
                    vy += a * s.py.dp[jy];
                }
                let f = weight * s.norm;
                g[0] += f * (vx - v * s.px.dsum / s.px.sum);
                g[1] += f * (vy - v * s.py.dsum / s.py.sum);
                let dweight = if parity == 0 { -dpo } else { dpo };
                g[2] += dweight * s.norm * v;
            }
            g
        })
        .collect())
}

/// Bin capacity `t_max` times the bin area.
pub fn bin_capacity(bins: &BinGrid, t_max: f64) -> f64 {
    t_max * bins.bin_w() * bins.bin_h()
}

/// Total density in excess of the bin capacities, relative to the total
/// chiplet area.
pub fn overflow(design: &DesignInstance, placement: &Placement, bins: &BinGrid, eta: f64, t_max: f64) -> Result<f64> {
    let d = projected_density(design, placement, bins, eta)?;
    overflow_of(&d, design.total_chiplet_area(), bin_capacity(bins, t_max))
}

pub(crate) fn overflow_of(density: &[f64], total_area: f64, capacity: f64) -> Result<f64> {
    if total_area <= 0.0 {
        return Err(Error::Domain("overflow needs a positive total chiplet area".into()));
    }
    Ok(density.iter().map(|d| (d - capacity).max(0.0)).sum::<f64>() / total_area)
}
