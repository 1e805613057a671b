use std::collections::BTreeMap;
use std::time::Duration;

use atmplace_milp::{solve_with, LinExpr, MilpError, MilpProblem, MilpSolution, MilpStatus, SolveOptions, VarId};
use serde::{Deserialize, Serialize};

use super::{add_abs_sum, add_disjunction, disjunction_start, greedy_place, MARGIN};
use crate::model::{check_legal, rotate_offset, rotated_dims, orientation_index, DesignInstance, Placement, Pose};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LegalizeConfig {
    /// Weight of the wirelength term against total displacement.
    pub lambda_w: f64,
    /// Budget per MILP attempt.
    pub time_budget_s: f64,
    pub node_limit: Option<usize>,
    /// Above this many chiplets the greedy fallback is used directly.
    pub greedy_threshold: usize,
    pub seed: u64,
}

impl Default for LegalizeConfig {
    fn default() -> Self {
        LegalizeConfig {
            lambda_w: 0.05,
            time_budget_s: 120.0,
            node_limit: Some(20_000),
            greedy_threshold: 16,
            seed: 0,
        }
    }
}

/// The displacement-plus-wirelength MILP with orientations frozen.
#[derive(Debug, Clone)]
pub struct LegalizeFormulation {
    pub problem: MilpProblem,
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
    pub delta: Vec<((usize, usize), [VarId; 4])>,
    /// Displacement part of the objective.
    pub displacement: LinExpr,
    /// Wirelength part of the objective (unweighted).
    pub wirelength: LinExpr,
    thetas: Vec<f64>,
    dims: Vec<(f64, f64)>,
    gap: f64,
}

impl LegalizeFormulation {
    pub fn decode(&self, sol: &MilpSolution) -> Placement {
        Placement::new(
            (0..self.x.len())
                .map(|i| Pose::new(sol.value(self.x[i]), sol.value(self.y[i]), self.thetas[i]))
                .collect(),
        )
    }

    /// Full assignment of a placement with the same orientations; `None`
    /// when some pair is not separated.
    pub fn assignment(&self, placement: &Placement) -> Option<Vec<f64>> {
        let mut vals = vec![0.0; self.problem.num_vars()];
        for (i, p) in placement.poses.iter().enumerate() {
            vals[self.x[i].index()] = p.x;
            vals[self.y[i].index()] = p.y;
        }
        for &((i, j), d) in &self.delta {
            let (a, b) = (placement.poses[i], placement.poses[j]);
            let sx = (self.dims[i].0 + self.dims[j].0) / 2.0 + self.gap + MARGIN;
            let sy = (self.dims[i].1 + self.dims[j].1) / 2.0 + self.gap + MARGIN;
            let s = disjunction_start(b.x - a.x, b.y - a.y, sx, sy)?;
            for k in 0..4 {
                vals[d[k].index()] = s[k];
            }
        }
        Some(vals)
    }
}

/// Builds `min DSP + λ_w WL` over positions, with dims inflated by the
/// minimum spacing and orientations taken from `opt`.
pub fn build_legalize_milp(design: &DesignInstance, opt: &Placement, lambda_w: f64) -> Result<LegalizeFormulation> {
    if !(lambda_w >= 0.0) {
        return Err(Error::Precondition(format!("lambda_w must be non-negative, got {lambda_w}")));
    }
    let n = design.num_chiplets();
    if opt.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} poses"),
            found: opt.len().to_string(),
        });
    }
    let ip = &design.interposer;
    let (width, height, gap) = (ip.width, ip.height, ip.min_spacing);
    let thetas: Vec<f64> = opt.poses.iter().map(|p| p.theta).collect();
    let mut dims = Vec::with_capacity(n);
    for (c, p) in design.chiplets.iter().zip(&opt.poses) {
        dims.push(rotated_dims(c.w, c.h, p.theta)?);
    }

    let mut p = MilpProblem::new("legalize");
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (i, &(w, h)) in dims.iter().enumerate() {
        let (lx, ly) = (w / 2.0, h / 2.0);
        if 2.0 * lx > width || 2.0 * ly > height {
            return Err(Error::InfeasibleLegalization(format!(
                "chiplet {i} ({w} x {h} mm) does not fit on the interposer"
            )));
        }
        xs.push(p.add_continuous(format!("x{i}"), lx, width - lx));
        ys.push(p.add_continuous(format!("y{i}"), ly, height - ly));
    }

    let mut delta = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let sx = (dims[i].0 + dims[j].0) / 2.0 + gap + MARGIN;
            let sy = (dims[i].1 + dims[j].1) / 2.0 + gap + MARGIN;
            let d = add_disjunction(
                &mut p,
                (i, j),
                (xs[i], ys[i]),
                (xs[j], ys[j]),
                &LinExpr::constant(sx),
                &LinExpr::constant(sy),
                (width + gap + MARGIN, height + gap + MARGIN),
            );
            delta.push(((i, j), d));
        }
    }

    let mut displacement = LinExpr::new();
    for (i, q) in opt.poses.iter().enumerate() {
        let tx = p.add_abs(format!("dx{i}"), &LinExpr::var(xs[i]).plus(-q.x));
        let ty = p.add_abs(format!("dy{i}"), &LinExpr::var(ys[i]).plus(-q.y));
        displacement.add_term(tx, 1.0);
        displacement.add_term(ty, 1.0);
    }

    // per pair and axis: Σ_nets |x_i - x_j + (px_i - px_j)| as one epigraph
    let mut wirelength = LinExpr::new();
    if lambda_w > 0.0 {
        let mut groups: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for net in design.resolved_nets() {
            let (mut i, mut j, mut pi, mut pj) = (net.i, net.j, net.pi, net.pj);
            if i > j {
                std::mem::swap(&mut i, &mut j);
                std::mem::swap(&mut pi, &mut pj);
            }
            let ri = rotate_offset(pi.0, pi.1, orientation_index(thetas[i])?);
            let rj = rotate_offset(pj.0, pj.1, orientation_index(thetas[j])?);
            let e = groups.entry((i, j)).or_default();
            e.0.push(ri.0 - rj.0);
            e.1.push(ri.1 - rj.1);
        }
        for ((i, j), (cx, cy)) in groups {
            let dx = LinExpr::var(xs[i]).term(xs[j], -1.0);
            let dy = LinExpr::var(ys[i]).term(ys[j], -1.0);
            let tx = add_abs_sum(&mut p, &format!("wlx_{i}_{j}"), &dx, &cx);
            let ty = add_abs_sum(&mut p, &format!("wly_{i}_{j}"), &dy, &cy);
            wirelength.add_term(tx, 1.0);
            wirelength.add_term(ty, 1.0);
        }
    }
    let mut objective = displacement.clone();
    objective.add_expr(&wirelength, lambda_w);
    p.set_objective(objective);
    Ok(LegalizeFormulation {
        problem: p,
        x: xs,
        y: ys,
        delta,
        displacement,
        wirelength,
        thetas,
        dims,
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LegalizePath {
    /// Input was already legal and no wirelength term was requested.
    Identity,
    /// MILP with the requested wirelength weight.
    Milp,
    /// MILP retried with `λ_w = 0` after the first attempt ran out of budget.
    MilpNoWirelength,
    /// Greedy ring-scan fallback.
    Greedy,
}

#[derive(Debug, Clone, Serialize)]
pub struct LegalizeOutcome {
    #[serde(skip)]
    pub placement: Placement,
    pub path: LegalizePath,
    /// `Σ |x - x_opt| + |y - y_opt|`, mm.
    pub displacement: f64,
    pub status: Option<String>,
    pub nodes: usize,
}

fn total_displacement(a: &Placement, b: &Placement) -> f64 {
    a.poses
        .iter()
        .zip(&b.poses)
        .map(|(p, q)| (p.x - q.x).abs() + (p.y - q.y).abs())
        .sum()
}

enum Attempt {
    Solved(Placement, MilpSolution),
    OutOfBudget(Option<Placement>, usize),
}

fn attempt(design: &DesignInstance, opt: &Placement, lambda_w: f64, cfg: &LegalizeConfig, start: Option<&Placement>) -> Result<Attempt> {
    let mut f = build_legalize_milp(design, opt, lambda_w)?;
    f.problem.start = start.and_then(|s| f.assignment(s));
    f.problem.time_limit = Some(Duration::from_secs_f64(cfg.time_budget_s.max(0.0)));
    f.problem.node_limit = cfg.node_limit;
    let sol = match solve_with(&f.problem, &SolveOptions { seed: cfg.seed }) {
        Ok(s) => s,
        Err(MilpError::LimitWithoutIncumbent { nodes }) => return Ok(Attempt::OutOfBudget(None, nodes)),
        Err(e) => return Err(e.into()),
    };
    match sol.status {
        MilpStatus::Optimal => Ok(Attempt::Solved(f.decode(&sol), sol)),
        MilpStatus::FeasibleTimeout => Ok(Attempt::OutOfBudget(Some(f.decode(&sol)), sol.nodes)),
        MilpStatus::Infeasible => Err(Error::InfeasibleLegalization(
            "no non-overlapping arrangement exists at the given orientations".into(),
        )),
        MilpStatus::Unbounded => Err(Error::Precondition("legalization problem is unbounded".into())),
    }
}

/// Removes overlaps while keeping positions close to `opt` and, with
/// `λ_w > 0`, shortening nets. Orientations are never changed.
///
/// The MILP is tried with `λ_w`; when it runs out of budget it is retried
/// with `λ_w = 0`, and when that also runs out (or the design is larger than
/// `greedy_threshold`) the greedy ring scan is used.
pub fn legalize(design: &DesignInstance, opt: &Placement, cfg: &LegalizeConfig) -> Result<LegalizeOutcome> {
    if !opt.is_snapped() {
        return Err(Error::Precondition("legalization needs snapped orientations".into()));
    }
    let outcome = |placement: Placement, path, status: Option<&MilpSolution>| LegalizeOutcome {
        displacement: total_displacement(&placement, opt),
        placement,
        path,
        status: status.map(|s| format!("{:?}", s.status)),
        nodes: status.map_or(0, |s| s.nodes),
    };
    if cfg.lambda_w == 0.0 && check_legal(design, opt)?.is_legal() {
        return Ok(outcome(opt.clone(), LegalizePath::Identity, None));
    }
    let greedy = greedy_place(design, opt);
    if design.num_chiplets() > cfg.greedy_threshold {
        return Ok(outcome(greedy?, LegalizePath::Greedy, None));
    }
    let start = greedy.as_ref().ok();

    let mut schedule = vec![(cfg.lambda_w, LegalizePath::Milp)];
    if cfg.lambda_w > 0.0 {
        schedule.push((0.0, LegalizePath::MilpNoWirelength));
    }
    let mut fallback = None;
    for (lambda_w, path) in schedule {
        match attempt(design, opt, lambda_w, cfg, start)? {
            Attempt::Solved(p, sol) => {
                if check_legal(design, &p)?.is_legal() {
                    return Ok(outcome(p, path, Some(&sol)));
                }
                log::warn!("decoded legalization violates spacing; using greedy fallback");
                break;
            }
            Attempt::OutOfBudget(incumbent, nodes) => {
                log::info!("legalization with lambda_w {lambda_w} ran out of budget after {nodes} nodes");
                fallback = incumbent.or(fallback);
            }
        }
    }
    match greedy {
        Ok(p) => Ok(outcome(p, LegalizePath::Greedy, None)),
        Err(e) => match fallback {
            Some(p) if check_legal(design, &p)?.is_legal() => Ok(outcome(p, LegalizePath::MilpNoWirelength, None)),
            _ => Err(e),
        },
    }
}
