use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::{MilpProblem, VarKind};
use crate::simplex::{iteration_budget, Basis, LpData, LpStatus, Tableau};
use crate::{MilpError, MilpSolution, MilpStatus, FEAS_TOL, INT_TOL};

const DEFAULT_GAP: f64 = 1e-6;
const RANDOM_ROUNDINGS: usize = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// Seed of the randomized rounding heuristic.
    pub seed: u64,
}

/// Backend that can solve a [`MilpProblem`].
pub trait ExternalSolver {
    fn solve(&self, problem: &MilpProblem) -> Result<MilpSolution, MilpError>;
}

/// The in-crate branch-and-bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinSolver {
    pub options: SolveOptions,
}

impl ExternalSolver for BuiltinSolver {
    fn solve(&self, problem: &MilpProblem) -> Result<MilpSolution, MilpError> {
        solve_with(problem, &self.options)
    }
}

pub fn solve(problem: &MilpProblem) -> Result<MilpSolution, MilpError> {
    solve_with(problem, &SolveOptions::default())
}

struct Node {
    bound: f64,
    seq: u64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    basis: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then newest node
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.seq.cmp(&other.seq))
    }
}

struct Dive {
    bound: f64,
    var: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Search<'a> {
    problem: &'a MilpProblem,
    lp: LpData,
    binaries: Vec<usize>,
    incumbent: Option<(f64, Vec<f64>)>,
    gap: f64,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.gap * (1.0 + obj.abs()),
            None => f64::INFINITY,
        }
    }

    /// Cleans an LP point with integral binaries and keeps it if it improves
    /// the incumbent.
    fn offer(&mut self, raw: &[f64]) -> bool {
        let mut vals = raw.to_vec();
        for (v, x) in self.problem.vars.iter().zip(vals.iter_mut()) {
            if v.kind == VarKind::Binary {
                *x = x.round();
            }
            *x = x.clamp(v.lower, v.upper);
        }
        let scale = 1.0 + vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if self.problem.max_violation(&vals) > FEAS_TOL * scale {
            return false;
        }
        let obj = self.problem.objective.eval(&vals);
        let better = match &self.incumbent {
            Some((best, _)) => obj < *best - 1e-12 * (1.0 + best.abs()),
            None => true,
        };
        if better {
            self.incumbent = Some((obj, vals));
        }
        better
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best = None;
        let mut best_dist = f64::INFINITY;
        for &j in &self.binaries {
            let f = x[j] - x[j].floor();
            if f > INT_TOL && f < 1.0 - INT_TOL {
                let dist = (f - 0.5).abs();
                if dist < best_dist - 1e-12 {
                    best_dist = dist;
                    best = Some(j);
                }
            }
        }
        best
    }

    fn optimize(&self, tab: &mut Tableau) -> LpStatus {
        tab.dual_simplex(&self.lp, iteration_budget(&self.lp))
    }

    /// Solves the LP with the given binaries fixed, starting from `basis`.
    fn fixed_solve(&mut self, lo: &[f64], hi: &[f64], basis: &Basis, fixes: &[(usize, f64)]) {
        let mut lo = lo.to_vec();
        let mut hi = hi.to_vec();
        for &(j, v) in fixes {
            lo[j] = v;
            hi[j] = v;
        }
        let mut tab = match Tableau::from_basis(&self.lp, &lo, &hi, basis) {
            Some(t) => t,
            None => Tableau::slack_start(&self.lp, &lo, &hi),
        };
        if self.optimize(&mut tab) == LpStatus::Optimal {
            let vals = tab.values(self.lp.n);
            self.offer(&vals);
        }
    }
}

pub fn solve_with(problem: &MilpProblem, options: &SolveOptions) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    let start_time = Instant::now();
    let n = problem.vars.len();
    let lo0: Vec<f64> = problem.vars.iter().map(|v| v.lower).collect();
    let hi0: Vec<f64> = problem.vars.iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = (0..n)
        .filter(|&j| problem.vars[j].kind == VarKind::Binary)
        .collect();
    let mut s = Search {
        problem,
        lp: LpData::from_problem(problem),
        binaries,
        incumbent: None,
        gap: problem.mip_gap.unwrap_or(DEFAULT_GAP),
    };
    let empty = |status| MilpSolution {
        status,
        values: Vec::new(),
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        nodes: 0,
    };

    let mut root = Tableau::slack_start(&s.lp, &lo0, &hi0);
    match s.optimize(&mut root) {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(empty(MilpStatus::Infeasible)),
        LpStatus::Unbounded => {
            return Ok(MilpSolution {
                objective: f64::NEG_INFINITY,
                bound: f64::NEG_INFINITY,
                ..empty(MilpStatus::Unbounded)
            })
        }
        LpStatus::IterationLimit => {
            return Err(MilpError::External("LP iteration limit at the root".into()))
        }
    }
    let root_obj = root.objective(&s.lp);
    let root_x = root.values(n);
    let root_basis = root.basis();

    // primal heuristics: MIP start, plain rounding, randomized rounding
    if let Some(start) = &problem.start {
        if start.len() == n {
            let fixes: Vec<(usize, f64)> =
                s.binaries.iter().map(|&j| (j, start[j].round().clamp(0.0, 1.0))).collect();
            s.fixed_solve(&lo0, &hi0, &root_basis, &fixes);
        }
    }
    if s.binaries.is_empty() {
        s.offer(&root_x);
    } else {
        let fixes: Vec<(usize, f64)> = s.binaries.iter().map(|&j| (j, root_x[j].round())).collect();
        s.fixed_solve(&lo0, &hi0, &root_basis, &fixes);
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        for _ in 0..RANDOM_ROUNDINGS {
            let fixes: Vec<(usize, f64)> = s
                .binaries
                .iter()
                .map(|&j| {
                    let p = root_x[j].clamp(0.0, 1.0);
                    (j, if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
                })
                .collect();
            s.fixed_solve(&lo0, &hi0, &root_basis, &fixes);
        }
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut nodes = 0usize;
    let mut limited = false;
    let mut current = root;
    // the root is processed as the first dive step with no bound change
    let mut dive = Some(Dive {
        bound: root_obj,
        var: usize::MAX,
        lo: lo0.clone(),
        hi: hi0.clone(),
    });

    loop {
        if problem.node_limit.is_some_and(|lim| nodes >= lim)
            || problem.time_limit.is_some_and(|lim| start_time.elapsed() >= lim)
        {
            limited = true;
            if let Some(d) = dive.take() {
                heap.push(Node {
                    bound: d.bound,
                    seq,
                    lo: d.lo,
                    hi: d.hi,
                    basis: current.basis(),
                });
            }
            break;
        }
        let (bound, lo, hi) = if let Some(d) = dive.take() {
            if d.bound >= s.cutoff() {
                continue;
            }
            if d.var != usize::MAX {
                current.set_bounds(d.var, d.lo[d.var], d.hi[d.var]);
            }
            (d.bound, d.lo, d.hi)
        } else if let Some(node) = heap.pop() {
            if node.bound >= s.cutoff() {
                continue;
            }
            current = Tableau::from_basis(&s.lp, &node.lo, &node.hi, &node.basis)
                .unwrap_or_else(|| Tableau::slack_start(&s.lp, &node.lo, &node.hi));
            (node.bound, node.lo, node.hi)
        } else {
            break;
        };
        let _ = bound;
        nodes += 1;

        let mut status = s.optimize(&mut current);
        if status == LpStatus::IterationLimit {
            current = Tableau::slack_start(&s.lp, &lo, &hi);
            status = s.optimize(&mut current);
        }
        if status != LpStatus::Optimal {
            continue;
        }
        let obj = current.objective(&s.lp);
        if obj >= s.cutoff() {
            continue;
        }
        let x = current.values(n);
        let Some(j) = s.most_fractional(&x) else {
            s.offer(&x);
            continue;
        };
        let mut down_hi = hi.clone();
        down_hi[j] = 0.0;
        let mut up_lo = lo.clone();
        up_lo[j] = 1.0;
        let (first, second) = if x[j] >= 0.5 {
            ((up_lo, hi), (lo, down_hi))
        } else {
            ((lo, down_hi), (up_lo, hi))
        };
        seq += 1;
        heap.push(Node {
            bound: obj,
            seq,
            lo: second.0,
            hi: second.1,
            basis: current.basis(),
        });
        dive = Some(Dive {
            bound: obj,
            var: j,
            lo: first.0,
            hi: first.1,
        });
    }

    let open_bound = heap
        .iter()
        .map(|nd| nd.bound)
        .fold(f64::INFINITY, f64::min);
    match s.incumbent {
        Some((obj, values)) => {
            let bound = open_bound.min(obj).max(root_obj.min(obj));
            let closed = !limited || obj - bound <= s.gap * (1.0 + obj.abs());
            Ok(MilpSolution {
                status: if closed {
                    MilpStatus::Optimal
                } else {
                    MilpStatus::FeasibleTimeout
                },
                values,
                objective: obj,
                bound: if closed { obj.min(bound) } else { bound },
                nodes,
            })
        }
        None if limited => Err(MilpError::LimitWithoutIncumbent { nodes }),
        None => Ok(MilpSolution {
            nodes,
            ..empty(MilpStatus::Infeasible)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinExpr, Sense};

    #[test]
    fn tiny_knapsack() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 4
        let mut p = MilpProblem::new("k");
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        let c = p.add_binary("c");
        p.add_constraint(
            "cap",
            LinExpr::new().term(a, 2.0).term(b, 3.0).term(c, 1.0),
            Sense::Le,
            4.0,
        );
        p.set_objective(LinExpr::new().term(a, -5.0).term(b, -4.0).term(c, -3.0));
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective + 8.0).abs() < 1e-9);
        assert_eq!(sol.value(a), 1.0);
        assert_eq!(sol.value(c), 1.0);
    }

    #[test]
    fn infeasible_binary_system() {
        let mut p = MilpProblem::new("inf");
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.add_constraint("s", LinExpr::var(a).term(b, 1.0), Sense::Eq, 1.5);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_without_incumbent_is_an_error() {
        let mut p = MilpProblem::new("lim");
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.add_constraint("s", LinExpr::var(a).term(b, 1.0), Sense::Eq, 1.5);
        p.node_limit = Some(0);
        assert!(matches!(
            solve(&p),
            Err(MilpError::LimitWithoutIncumbent { .. })
        ));
    }
}
