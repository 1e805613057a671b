use super::orient::bz_with_grad;
use crate::model::{rotate_offset, DesignInstance, Placement};
use crate::{Error, Result};

pub(crate) fn check_len(design: &DesignInstance, placement: &Placement) -> Result<()> {
    if placement.len() != design.num_chiplets() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} poses", design.num_chiplets()),
            found: placement.len().to_string(),
        });
    }
    Ok(())
}

/// `sqrt(d² + eps²) - eps` and its derivative.
#[inline]
fn smooth_abs(d: f64, eps: f64) -> (f64, f64) {
    let r = (d * d + eps * eps).sqrt();
    (r - eps, if r > 0.0 { d / r } else { 0.0 })
}

/// Orientation-projected wirelength: for every two-pin net the smoothed
/// Manhattan distance of the pins under each pair of legal orientations,
/// weighted by the orientation probabilities of both chiplets.
///
/// Returns the value and `(∂/∂x_i, ∂/∂y_i, ∂/∂θ_i)` per chiplet, the angle
/// derivative per degree.
pub fn projected_wirelength(
    design: &DesignInstance,
    placement: &Placement,
    eta: f64,
    eps_wl: f64,
) -> Result<(f64, Vec<[f64; 3]>)> {
    check_len(design, placement)?;
    if !(eta > 0.0 && eps_wl > 0.0) {
        return Err(Error::Precondition(format!(
            "projected wirelength needs eta > 0 and eps_wl > 0, got {eta} and {eps_wl}"
        )));
    }
    let proj: Vec<_> = placement.poses.iter().map(|p| bz_with_grad(p.theta, eta)).collect();
    let mut grad = vec![[0.0; 3]; placement.len()];
    let mut total = 0.0;
    for net in design.resolved_nets() {
        let (pa, pb) = (placement.poses[net.i], placement.poses[net.j]);
        let (ba, dba) = &proj[net.i];
        let (bb, dbb) = &proj[net.j];
        let oa = [0, 1, 2, 3].map(|k| rotate_offset(net.pi.0, net.pi.1, k));
        let ob = [0, 1, 2, 3].map(|k| rotate_offset(net.pj.0, net.pj.1, k));
        let (mut gx, mut gy, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..4 {
            for l in 0..4 {
                let (sx, dsx) = smooth_abs(pb.x + ob[l].0 - pa.x - oa[k].0, eps_wl);
                let (sy, dsy) = smooth_abs(pb.y + ob[l].1 - pa.y - oa[k].1, eps_wl);
                let w = ba[k] * bb[l];
                let len = sx + sy;
                total += w * len;
                gx += w * dsx;
                gy += w * dsy;
                ga += dba[k] * bb[l] * len;
                gb += ba[k] * dbb[l] * len;
            }
        }
        grad[net.i][0] -= gx;
        grad[net.i][1] -= gy;
        grad[net.i][2] += ga;
        grad[net.j][0] += gx;
        grad[net.j][1] += gy;
        grad[net.j][2] += gb;
    }
    Ok((total, grad))
}
