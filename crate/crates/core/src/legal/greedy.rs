use super::MARGIN;
use crate::model::{rotated_dims, DesignInstance, Placement, Pose};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Legalizes a snapped placement without a solver: chiplets are placed by
/// decreasing area, each at the nearest free lattice point to its target,
/// scanning square rings on a `min_spacing / 2` lattice.
///
/// When the scan runs out of room it is repeated with the targets spread over
/// the interposer, then with every target at the lower-left corner.
pub fn greedy_place(design: &DesignInstance, targets: &Placement) -> Result<Placement> {
    let g = design.interposer.min_spacing;
    ring_place_retrying(design, targets, |_, _| (g, g))
}

/// Targets with their bounding box stretched over 15% to 85% of each side.
fn spread(design: &DesignInstance, targets: &Placement) -> Option<Placement> {
    let ip = &design.interposer;
    let span = |v: &mut dyn Iterator<Item = f64>| v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x0, x1) = span(&mut targets.poses.iter().map(|p| p.x));
    let (y0, y1) = span(&mut targets.poses.iter().map(|p| p.y));
    if !(x1 - x0 > 1e-9 && y1 - y0 > 1e-9) {
        return None;
    }
    let map = |v: f64, lo: f64, hi: f64, len: f64| len * (0.15 + 0.7 * (v - lo) / (hi - lo));
    Some(Placement::new(
        targets
            .poses
            .iter()
            .map(|p| Pose::new(map(p.x, x0, x1, ip.width), map(p.y, y0, y1, ip.height), p.theta))
            .collect(),
    ))
}

pub(crate) fn ring_place_retrying<F>(design: &DesignInstance, targets: &Placement, edge_gap: F) -> Result<Placement>
where
    F: Fn(&Rect, &Rect) -> (f64, f64),
{
    let first = ring_place(design, targets, &edge_gap);
    if !matches!(first, Err(Error::InfeasibleLegalization(_))) {
        return first;
    }
    if let Some(s) = spread(design, targets) {
        if let Ok(p) = ring_place(design, &s, &edge_gap) {
            return Ok(p);
        }
    }
    let corner = Placement::new(targets.poses.iter().map(|p| Pose::new(0.0, 0.0, p.theta)).collect());
    ring_place(design, &corner, &edge_gap).or(first)
}

/// Ring-scan placement with a per-pair required edge gap `(gap_x, gap_y)`; a
/// pair is separated when either axis clears its gap.
pub(crate) fn ring_place<F>(design: &DesignInstance, targets: &Placement, edge_gap: F) -> Result<Placement>
where
    F: Fn(&Rect, &Rect) -> (f64, f64),
{
    let ip = &design.interposer;
    let n = design.num_chiplets();
    if targets.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} poses"),
            found: targets.len().to_string(),
        });
    }
    let step = if ip.min_spacing > 0.0 { ip.min_spacing / 2.0 } else { 0.05 };
    let mut dims = Vec::with_capacity(n);
    for (c, p) in design.chiplets.iter().zip(&targets.poses) {
        dims.push(rotated_dims(c.w, c.h, p.theta)?);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (dims[a].0 * dims[a].1, dims[b].0 * dims[b].1);
        db.total_cmp(&da).then(a.cmp(&b))
    });

    let mut placed: Vec<Rect> = Vec::with_capacity(n);
    let mut out = targets.poses.clone();
    let max_ring = (ip.width.max(ip.height) / step).ceil() as i64 + 1;
    for &k in &order {
        let (w, h) = dims[k];
        let (lo_x, hi_x) = (w / 2.0, ip.width - w / 2.0);
        let (lo_y, hi_y) = (h / 2.0, ip.height - h / 2.0);
        if lo_x > hi_x || lo_y > hi_y {
            return Err(Error::InfeasibleLegalization(format!(
                "chiplet {k} ({w} x {h} mm) does not fit on the interposer"
            )));
        }
        let t = targets.poses[k];
        let (cx, cy) = (t.x.clamp(lo_x, hi_x), t.y.clamp(lo_y, hi_y));
        let free = |x: f64, y: f64| {
            let me = Rect { x, y, w, h };
            placed.iter().all(|o| {
                let (gx, gy) = edge_gap(&me, o);
                let sx = (w + o.w) / 2.0 + gx + MARGIN;
                let sy = (h + o.h) / 2.0 + gy + MARGIN;
                (x - o.x).abs() >= sx || (y - o.y).abs() >= sy
            })
        };
        let mut found = None;
        for r in 0..=max_ring {
            let mut best: Option<(f64, f64, f64)> = None;
            let mut consider = |a: i64, b: i64| {
                let (x, y) = (cx + a as f64 * step, cy + b as f64 * step);
                if x < lo_x || x > hi_x || y < lo_y || y > hi_y || !free(x, y) {
                    return;
                }
                let d = (x - t.x).powi(2) + (y - t.y).powi(2);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, x, y));
                }
            };
            if r == 0 {
                consider(0, 0);
            } else {
                for a in -r..=r {
                    consider(a, -r);
                    consider(a, r);
                }
                for b in -r + 1..r {
                    consider(-r, b);
                    consider(r, b);
                }
            }
            if let Some((_, x, y)) = best {
                found = Some((x, y));
                break;
            }
        }
        let Some((x, y)) = found else {
            return Err(Error::InfeasibleLegalization(format!(
                "no free position left for chiplet {k}"
            )));
        };
        placed.push(Rect { x, y, w, h });
        out[k] = Pose::new(x, y, t.theta);
    }
    Ok(Placement::new(out))
}
