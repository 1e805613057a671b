//! Mixed-integer linear programming for the placement formulations.
//!
//! Problems are built with [`MilpProblem`] (continuous and binary variables,
//! linear `<=`/`=`/`>=` rows, a minimization objective) and solved with
//! [`solve`], a best-first branch-and-bound over LP relaxations. The LP
//! relaxations use a dense bounded-variable dual simplex, which lets child
//! nodes re-optimize from their parent's basis after a bound change.
//!
//! The solver is sized for problems with a few hundred rows and a few dozen
//! binaries. Anything bigger should go through an [`ExternalSolver`].

mod bnb;
mod lpfile;
mod problem;
mod simplex;

pub use bnb::{solve, solve_with, BuiltinSolver, ExternalSolver, SolveOptions};
pub use lpfile::write_lp;
pub use problem::{LinExpr, MilpProblem, Sense, VarId, VarKind, Variable};

use thiserror::Error;

/// Feasibility tolerance on rows and bounds.
pub const FEAS_TOL: f64 = 1e-6;
/// Integrality tolerance for binaries.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// A node or time limit was hit; the assignment is the best incumbent.
    FeasibleTimeout,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Value per variable, indexed by [`VarId::index`].
    pub values: Vec<f64>,
    pub objective: f64,
    /// Proven lower bound on the optimum (minimization).
    pub bound: f64,
    pub nodes: usize,
}

impl MilpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }

    pub fn has_assignment(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::FeasibleTimeout)
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("constraint {row} references undeclared variable {var}")]
    UnknownVariable { row: String, var: usize },
    #[error("variable {name} has empty domain [{lower}, {upper}]")]
    EmptyDomain { name: String, lower: f64, upper: f64 },
    #[error("variable {0} has a non-finite coefficient or bound")]
    NonFinite(String),
    #[error("search limit reached after {nodes} nodes without a feasible solution")]
    LimitWithoutIncumbent { nodes: usize },
    #[error("external solver failed: {0}")]
    External(String),
}
