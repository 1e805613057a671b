use std::time::Duration;

use atmplace_milp::{solve_with, LinExpr, MilpProblem, MilpSolution, MilpStatus, Sense, SolveOptions, VarId};
use serde::{Deserialize, Serialize};

use super::greedy::ring_place_retrying;
use super::{add_disjunction, disjunction_start, MARGIN};
use crate::model::{check_legal, orientation_index, DesignInstance, Placement, Pose};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    /// Extra edge gap as a fraction of the summed dims of each pair.
    pub epsilon: f64,
    pub time_budget_s: f64,
    pub node_limit: Option<usize>,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            epsilon: 0.1,
            time_budget_s: 60.0,
            node_limit: Some(50_000),
            seed: 0,
        }
    }
}

/// `(u, v)` to degrees: (0,0) 0, (0,1) 90, (1,1) 180, (1,0) 270.
pub fn decode_orientation(u: f64, v: f64) -> f64 {
    match (u.round() as i64, v.round() as i64) {
        (0, 0) => 0.0,
        (0, 1) => 90.0,
        (1, 1) => 180.0,
        _ => 270.0,
    }
}

fn encode_orientation(theta: f64) -> Result<(f64, f64)> {
    Ok(match orientation_index(theta)? {
        0 => (0.0, 0.0),
        1 => (0.0, 1.0),
        2 => (1.0, 1.0),
        _ => (1.0, 0.0),
    })
}

/// The orientation-aware seeding MILP and the handles needed to decode it.
#[derive(Debug, Clone)]
pub struct InitFormulation {
    pub problem: MilpProblem,
    pub epsilon: f64,
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
    pub u: Vec<VarId>,
    pub v: Vec<VarId>,
    /// `z_i = u_i v_i`.
    pub z: Vec<VarId>,
    /// Disjunction binaries per unordered pair `(i, j)`, `i < j`.
    pub delta: Vec<((usize, usize), [VarId; 4])>,
    dims: Vec<(f64, f64)>,
    gap: f64,
}

impl InitFormulation {
    /// Linear expressions of the rotated width and height of chiplet `i`:
    /// `w' = |1-u-v| w + |v-u| h` with `|1-u-v| = 1-u-v+2z`, `|v-u| = u+v-2z`.
    pub fn rotated_dim_exprs(&self, i: usize) -> (LinExpr, LinExpr) {
        let (w, h) = self.dims[i];
        let swap = LinExpr::new().term(self.u[i], 1.0).term(self.v[i], 1.0).term(self.z[i], -2.0);
        let mut wr = LinExpr::constant(w);
        wr.add_expr(&swap, h - w);
        let mut hr = LinExpr::constant(h);
        hr.add_expr(&swap, w - h);
        (wr, hr)
    }

    pub fn decode(&self, sol: &MilpSolution) -> Placement {
        Placement::new(
            (0..self.x.len())
                .map(|i| {
                    Pose::new(
                        sol.value(self.x[i]),
                        sol.value(self.y[i]),
                        decode_orientation(sol.value(self.u[i]), sol.value(self.v[i])),
                    )
                })
                .collect(),
        )
    }

    /// A full assignment describing `placement`, usable as a warm start when
    /// the placement satisfies the seeding separations.
    pub fn assignment(&self, placement: &Placement) -> Result<Option<Vec<f64>>> {
        let mut vals = vec![0.0; self.problem.num_vars()];
        let mut rot = Vec::with_capacity(self.x.len());
        for (i, p) in placement.poses.iter().enumerate() {
            let (u, v) = encode_orientation(p.theta)?;
            vals[self.x[i].index()] = p.x;
            vals[self.y[i].index()] = p.y;
            vals[self.u[i].index()] = u;
            vals[self.v[i].index()] = v;
            vals[self.z[i].index()] = u * v;
            let (w, h) = self.dims[i];
            rot.push(if orientation_index(p.theta)? % 2 == 0 { (w, h) } else { (h, w) });
        }
        for &((i, j), d) in &self.delta {
            let (a, b) = (placement.poses[i], placement.poses[j]);
            let sx = (0.5 + self.epsilon) * (rot[i].0 + rot[j].0) + self.gap + MARGIN;
            let sy = (0.5 + self.epsilon) * (rot[i].1 + rot[j].1) + self.gap + MARGIN;
            let Some(s) = disjunction_start(b.x - a.x, b.y - a.y, sx, sy) else {
                return Ok(None);
            };
            for k in 0..4 {
                vals[d[k].index()] = s[k];
            }
        }
        Ok(Some(vals))
    }
}

/// Builds the seeding MILP: minimise the net-count weighted Manhattan
/// distance between interface clump centroids over positions and
/// orientations, subject to containment and ε-spaced non-overlap.
pub fn build_init_milp(design: &DesignInstance, epsilon: f64) -> Result<InitFormulation> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::Precondition(format!("epsilon must lie in [0, 0.5), got {epsilon}")));
    }
    let ip = &design.interposer;
    let (width, height, gap) = (ip.width, ip.height, ip.min_spacing);
    let n = design.num_chiplets();
    let mut p = MilpProblem::new("init");
    let dims: Vec<(f64, f64)> = design.chiplets.iter().map(|c| (c.w, c.h)).collect();
    let (mut xs, mut ys, mut us, mut vs, mut zs) = (vec![], vec![], vec![], vec![], vec![]);
    for (i, &(w, h)) in dims.iter().enumerate() {
        let fits = |a: f64, b: f64| a <= width && b <= height;
        if !fits(w, h) && !fits(h, w) {
            return Err(Error::InfeasibleLegalization(format!("chiplet {i} does not fit on the interposer")));
        }
        let half_min = w.min(h) / 2.0;
        xs.push(p.add_continuous(format!("x{i}"), half_min, width - half_min));
        ys.push(p.add_continuous(format!("y{i}"), half_min, height - half_min));
        let u = p.add_binary(format!("u{i}"));
        let v = p.add_binary(format!("v{i}"));
        zs.push(p.add_binary_product(format!("z{i}"), u, v));
        us.push(u);
        vs.push(v);
    }
    let mut f = InitFormulation {
        problem: p,
        epsilon,
        x: xs,
        y: ys,
        u: us,
        v: vs,
        z: zs,
        delta: Vec::new(),
        dims,
        gap,
    };
    let rot: Vec<(LinExpr, LinExpr)> = (0..n).map(|i| f.rotated_dim_exprs(i)).collect();

    for i in 0..n {
        let (wr, hr) = &rot[i];
        // x - w'/2 >= 0, x + w'/2 <= W
        for (c, r, span, tag) in [(f.x[i], wr, width, "x"), (f.y[i], hr, height, "y")] {
            let mut lo = LinExpr::var(c);
            lo.add_expr(r, -0.5);
            f.problem.add_constraint(format!("in_{tag}lo{i}"), lo, Sense::Ge, 0.0);
            let mut hi = LinExpr::var(c);
            hi.add_expr(r, 0.5);
            f.problem.add_constraint(format!("in_{tag}hi{i}"), hi, Sense::Le, span);
        }
    }

    let long: Vec<f64> = f.dims.iter().map(|&(w, h)| w.max(h)).collect();
    for i in 0..n {
        for j in i + 1..n {
            let sep = |a: &LinExpr, b: &LinExpr| {
                let mut s = LinExpr::constant(gap + MARGIN);
                s.add_expr(a, 0.5 + epsilon);
                s.add_expr(b, 0.5 + epsilon);
                s
            };
            let sx = sep(&rot[i].0, &rot[j].0);
            let sy = sep(&rot[i].1, &rot[j].1);
            let slack = epsilon * (long[i] + long[j]) + gap + MARGIN;
            let d = add_disjunction(
                &mut f.problem,
                (i, j),
                (f.x[i], f.y[i]),
                (f.x[j], f.y[j]),
                &sx,
                &sy,
                (width + slack, height + slack),
            );
            f.delta.push(((i, j), d));
        }
    }

    let mut objective = LinExpr::new();
    for (i, j) in design.connected_pairs() {
        let count = design.net_count(i, j) as f64;
        let (cx_i, cy_i) = clump_exprs(&f, i, design.clump_offset(i, j).unwrap_or((0.0, 0.0)));
        let (cx_j, cy_j) = clump_exprs(&f, j, design.clump_offset(j, i).unwrap_or((0.0, 0.0)));
        let tx = f.problem.add_abs(format!("wx_{i}_{j}"), &cx_i.sub(&cx_j));
        let ty = f.problem.add_abs(format!("wy_{i}_{j}"), &cy_i.sub(&cy_j));
        objective.add_term(tx, count);
        objective.add_term(ty, count);
    }
    f.problem.set_objective(objective);
    Ok(f)
}

/// Absolute clump position, linear in `(u, v)`:
/// `X = x + (1-u-v) Ox - (v-u) Oy`, `Y = y + (v-u) Ox + (1-u-v) Oy`.
fn clump_exprs(f: &InitFormulation, i: usize, (ox, oy): (f64, f64)) -> (LinExpr, LinExpr) {
    let (u, v) = (f.u[i], f.v[i]);
    let x = LinExpr::var(f.x[i]).plus(ox).term(u, oy - ox).term(v, -ox - oy);
    let y = LinExpr::var(f.y[i]).plus(oy).term(u, -ox - oy).term(v, ox - oy);
    (x, y)
}

#[derive(Debug, Clone, Serialize)]
pub struct InitOutcome {
    #[serde(skip)]
    pub placement: Placement,
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub epsilon: f64,
    pub warm_start: bool,
}

/// Solves the seeding MILP. A ring-scan packing around the interposer
/// centre serves as warm start; when the ε-spaced problem admits no solution
/// the solve is repeated with `ε = 0`.
pub fn initial_placement(design: &DesignInstance, cfg: &InitConfig) -> Result<InitOutcome> {
    match solve_init(design, cfg, cfg.epsilon) {
        Err(Error::InfeasibleLegalization(_)) if cfg.epsilon > 0.0 => {
            log::warn!("seeding infeasible at epsilon {}, retrying with 0", cfg.epsilon);
            solve_init(design, cfg, 0.0)
        }
        other => other,
    }
}

fn solve_init(design: &DesignInstance, cfg: &InitConfig, epsilon: f64) -> Result<InitOutcome> {
    let mut f = build_init_milp(design, epsilon)?;
    let ip = &design.interposer;
    let center = Placement::new(vec![Pose::new(ip.width / 2.0, ip.height / 2.0, 0.0); design.num_chiplets()]);
    let g = ip.min_spacing;
    let start = ring_place_retrying(design, &center, |a, b| (epsilon * (a.w + b.w) + g, epsilon * (a.h + b.h) + g))
        .ok()
        .map(|p| f.assignment(&p))
        .transpose()?
        .flatten();
    let warm_start = start.is_some();
    f.problem.start = start;
    f.problem.time_limit = Some(Duration::from_secs_f64(cfg.time_budget_s.max(0.0)));
    f.problem.node_limit = cfg.node_limit;
    let sol = solve_with(&f.problem, &SolveOptions { seed: cfg.seed })?;
    match sol.status {
        MilpStatus::Optimal | MilpStatus::FeasibleTimeout => {}
        MilpStatus::Infeasible => {
            return Err(Error::InfeasibleLegalization(format!(
                "seeding problem is infeasible at epsilon {epsilon}"
            )))
        }
        MilpStatus::Unbounded => return Err(Error::Precondition("seeding problem is unbounded".into())),
    }
    let placement = f.decode(&sol);
    let report = check_legal(design, &placement)?;
    if !report.is_legal() {
        return Err(Error::InfeasibleLegalization(format!(
            "seeding solution violates legality: {report:?}"
        )));
    }
    Ok(InitOutcome {
        placement,
        status: format!("{:?}", sol.status),
        objective: sol.objective,
        bound: sol.bound,
        nodes: sol.nodes,
        epsilon,
        warm_start,
    })
}
