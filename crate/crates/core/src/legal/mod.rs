//! MILP seeding and legalization, with a greedy ring-scan fallback.
//!
//! Both formulations share the disjunctive non-overlap encoding: for every
//! unordered pair four binaries select which side of the other chiplet each
//! one may sit on, with at least one side enforced.

mod greedy;
mod init;
mod legalize;

pub use greedy::greedy_place;
pub use init::{build_init_milp, decode_orientation, initial_placement, InitConfig, InitFormulation, InitOutcome};
pub use legalize::{
    build_legalize_milp, legalize, LegalizeConfig, LegalizeFormulation, LegalizeOutcome, LegalizePath,
};

use atmplace_milp::{LinExpr, MilpProblem, Sense, VarId};

/// Slack added to every pair separation so that decoded solutions clear
/// `check_legal` despite simplex round-off.
pub(crate) const MARGIN: f64 = 1e-5;

/// `t >= Σ_k |d + c_k|` through the affine pieces of the convex piecewise
/// linear sum: one variable and one row per distinct breakpoint plus one.
pub(crate) fn add_abs_sum(problem: &mut MilpProblem, name: &str, d: &LinExpr, consts: &[f64]) -> VarId {
    let t = problem.add_continuous(name, 0.0, f64::INFINITY);
    let mut c = consts.to_vec();
    c.sort_by(f64::total_cmp);
    let k = c.len();
    let total: f64 = c.iter().sum();
    let mut below = 0.0;
    for r in 0..=k {
        // the r smallest constants take the negative sign
        if r > 0 {
            below += c[r - 1];
            if r < k && c[r] == c[r - 1] {
                continue;
            }
        }
        let slope = k as f64 - 2.0 * r as f64;
        let intercept = total - 2.0 * below;
        let mut row = LinExpr::var(t);
        row.add_expr(d, -slope);
        problem.add_constraint(format!("{name}_p{r}"), row, Sense::Ge, intercept);
    }
    t
}

/// Four-way disjunctive separation between chiplets `i` and `j`:
/// `x_i + sx <= x_j + Mx δ1`, `x_j + sx <= x_i + Mx δ2`, same in y, Σδ <= 3.
#[allow(clippy::too_many_arguments)]
pub(crate) fn add_disjunction(
    problem: &mut MilpProblem,
    (i, j): (usize, usize),
    (xi, yi): (VarId, VarId),
    (xj, yj): (VarId, VarId),
    sx: &LinExpr,
    sy: &LinExpr,
    (mx, my): (f64, f64),
) -> [VarId; 4] {
    let d = [0, 1, 2, 3].map(|k| problem.add_binary(format!("d{k}_{i}_{j}")));
    let rows = [(xi, xj, sx, mx, d[0]), (xj, xi, sx, mx, d[1]), (yi, yj, sy, my, d[2]), (yj, yi, sy, my, d[3])];
    for (k, (a, b, s, m, delta)) in rows.into_iter().enumerate() {
        let mut e = LinExpr::var(a).term(b, -1.0).term(delta, -m);
        e.add_expr(s, 1.0);
        problem.add_constraint(format!("sep{k}_{i}_{j}"), e, Sense::Le, 0.0);
    }
    let sum = d.iter().fold(LinExpr::new(), |e, &v| e.term(v, 1.0));
    problem.add_constraint(format!("any_{i}_{j}"), sum, Sense::Le, 3.0);
    d
}

/// Binary values of a disjunction that a concrete layout satisfies, given
/// centre offsets and required separations. `None` when no side holds.
pub(crate) fn disjunction_start(dx: f64, dy: f64, sx: f64, sy: f64) -> Option<[f64; 4]> {
    // dx = x_j - x_i
    let (sx, sy) = (sx - 1e-9, sy - 1e-9);
    let sides = [dx >= sx, -dx >= sx, dy >= sy, -dy >= sy];
    let k = sides.iter().position(|&s| s)?;
    let mut d = [1.0; 4];
    d[k] = 0.0;
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use atmplace_milp::{solve, MilpStatus};

    #[test]
    fn abs_sum_matches_direct_sum() {
        let consts = [0.5, -1.0, 0.5, 2.0, -0.25];
        for target in [-4.0, -1.1, 0.0, 0.3, 0.5, 1.7, 5.0] {
            let mut p = MilpProblem::new("abs_sum");
            let d = p.add_continuous("d", target, target);
            let t = add_abs_sum(&mut p, "t", &LinExpr::var(d), &consts);
            p.set_objective(LinExpr::var(t));
            let s = solve(&p).unwrap();
            assert_eq!(s.status, MilpStatus::Optimal);
            let direct: f64 = consts.iter().map(|c| (target + c).abs()).sum();
            assert!((s.objective - direct).abs() < 1e-9, "{target}: {} vs {direct}", s.objective);
        }
    }

    #[test]
    fn disjunction_start_picks_a_satisfied_side() {
        assert_eq!(disjunction_start(2.0, 0.0, 1.5, 1.5), Some([0.0, 1.0, 1.0, 1.0]));
        assert_eq!(disjunction_start(0.0, -2.0, 1.5, 1.5), Some([1.0, 1.0, 1.0, 0.0]));
        assert_eq!(disjunction_start(1.0, 1.0, 1.5, 1.5), None);
    }
}
