use serde::Serialize;

use super::{bump_abs_position, rotated_dims, DesignInstance, Placement};
use crate::field::FieldGrid;
use crate::{Error, Result};

const GEOM_TOL: f64 = 1e-6;

fn check_len(design: &DesignInstance, placement: &Placement) -> Result<()> {
    if design.num_chiplets() != placement.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} poses", design.num_chiplets()),
            found: format!("{} poses", placement.len()),
        });
    }
    Ok(())
}

/// Sum over nets of the Manhattan distance between the two bumps.
pub fn exact_wirelength(design: &DesignInstance, placement: &Placement) -> Result<f64> {
    check_len(design, placement)?;
    let mut total = 0.0;
    for n in design.resolved_nets() {
        let a = placement.poses[n.i];
        let b = placement.poses[n.j];
        let (xa, ya) = bump_abs_position(a.x, a.y, a.theta, n.pi.0, n.pi.1)?;
        let (xb, yb) = bump_abs_position(b.x, b.y, b.theta, n.pj.0, n.pj.1)?;
        total += (xa - xb).abs() + (ya - yb).abs();
    }
    Ok(total)
}

/// Peak-to-valley of a displacement field.
pub fn warpage_metric(field: &FieldGrid) -> Result<f64> {
    if field.values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(field.max() - field.min())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegalityReport {
    pub containment_ok: bool,
    /// Chiplets sticking out of the interposer.
    pub outside: Vec<usize>,
    /// Smallest edge-to-edge separation over all pairs (infinite for N < 2).
    pub min_pairwise_gap: f64,
    /// Pairs closer than the minimum spacing.
    pub overlap_pairs: Vec<(usize, usize)>,
}

impl LegalityReport {
    pub fn is_legal(&self) -> bool {
        self.containment_ok && self.overlap_pairs.is_empty()
    }
}

/// Edge-to-edge separation of two axis-aligned rectangles; negative when they
/// overlap on both axes.
pub(crate) fn rect_gap(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let gx = (a.0 - b.0).abs() - (a.2 + b.2) / 2.0;
    let gy = (a.1 - b.1).abs() - (a.3 + b.3) / 2.0;
    gx.max(gy)
}

/// Rectangles `(x, y, w', h')` of a snapped placement.
pub(crate) fn footprints(design: &DesignInstance, placement: &Placement) -> Result<Vec<(f64, f64, f64, f64)>> {
    check_len(design, placement)?;
    design
        .chiplets
        .iter()
        .zip(&placement.poses)
        .map(|(c, p)| {
            let (w, h) = rotated_dims(c.w, c.h, p.theta)?;
            Ok((p.x, p.y, w, h))
        })
        .collect()
}

pub fn check_legal(design: &DesignInstance, placement: &Placement) -> Result<LegalityReport> {
    let rects = footprints(design, placement)?;
    let ip = &design.interposer;
    let mut outside = Vec::new();
    for (k, r) in rects.iter().enumerate() {
        let ok = r.0 - r.2 / 2.0 >= -GEOM_TOL
            && r.0 + r.2 / 2.0 <= ip.width + GEOM_TOL
            && r.1 - r.3 / 2.0 >= -GEOM_TOL
            && r.1 + r.3 / 2.0 <= ip.height + GEOM_TOL;
        if !ok {
            outside.push(k);
        }
    }
    let mut min_gap = f64::INFINITY;
    let mut overlap_pairs = Vec::new();
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            let g = rect_gap(rects[i], rects[j]);
            min_gap = min_gap.min(g);
            if g < ip.min_spacing - GEOM_TOL {
                overlap_pairs.push((i, j));
            }
        }
    }
    Ok(LegalityReport {
        containment_ok: outside.is_empty(),
        outside,
        min_pairwise_gap: min_gap,
        overlap_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChipletSpec, InterposerSpec, Pose};

    fn unit_design(n: usize, width: f64) -> DesignInstance {
        let chiplets = (0..n)
            .map(|id| ChipletSpec {
                id,
                w: 1.0,
                h: 1.0,
                t: 0.5,
                power_density: 1e5,
                bumps: vec![],
            })
            .collect();
        DesignInstance::new(InterposerSpec::new(width, 10.0, 16), chiplets, vec![]).unwrap()
    }

    #[test]
    fn legality_examples() {
        let d = unit_design(2, 10.0);
        let p = Placement::new(vec![Pose::new(0.5, 0.5, 0.0), Pose::new(2.0, 0.5, 0.0)]);
        let r = check_legal(&d, &p).unwrap();
        assert!(r.is_legal());
        assert!((r.min_pairwise_gap - 0.5).abs() < 1e-12);

        let p = Placement::new(vec![Pose::new(0.5, 0.5, 0.0), Pose::new(1.4, 0.5, 0.0)]);
        assert_eq!(check_legal(&d, &p).unwrap().overlap_pairs, vec![(0, 1)]);

        let p = Placement::new(vec![Pose::new(0.4, 0.5, 0.0), Pose::new(5.0, 5.0, 0.0)]);
        let r = check_legal(&d, &p).unwrap();
        assert!(!r.containment_ok);
        assert_eq!(r.outside, vec![0]);
    }

    #[test]
    fn warpage_metric_examples() {
        let f = FieldGrid::from_values(3, 1, 1.0, 1.0, vec![-2.0, 0.0, 3.0]);
        assert_eq!(warpage_metric(&f).unwrap(), 5.0);
        let c = FieldGrid::from_values(2, 1, 1.0, 1.0, vec![5.0, 5.0]);
        assert_eq!(warpage_metric(&c).unwrap(), 0.0);
        let e = FieldGrid::from_values(0, 0, 1.0, 1.0, vec![]);
        assert!(warpage_metric(&e).is_err());
    }
}
