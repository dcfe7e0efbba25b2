//! LP and MILP solving behind one narrow contract.
//!
//! The reference backend is a dense two-phase simplex with Bland's rule plus
//! best-bound branch-and-bound. HiGHS can be swapped in through
//! [`SolverConfig`] when the `highs` feature is enabled.

mod branch_bound;
#[cfg(feature = "highs")]
mod highs;
mod lp_format;
mod simplex;

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PcisError, Result};

pub use branch_bound::{solve_milp, solve_milp_with, BranchBoundOptions};
pub use lp_format::to_lp_format;
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

/// Feasibility tolerance used when checking a returned point.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
/// Distance from 0/1 below which a binary counts as integral.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: String,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Linear program with per-variable bounds (use ±∞ for unbounded sides).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            names: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Declares a variable and returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
            name: name.into(),
        });
        self.constraints.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest bound or constraint violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = (0..self.num_variables())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Checks that the program is well formed.
    pub fn check(&self) -> Result<()> {
        let n = self.num_variables();
        if self.lower.len() != n || self.upper.len() != n || self.names.len() != n {
            return Err(PcisError::InvalidArgument("variable arrays differ in length".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(PcisError::InvalidArgument(format!(
                    "variable `{}` has bounds [{}, {}]",
                    self.names[j], self.lower[j], self.upper[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(PcisError::InvalidArgument(format!(
                    "variable `{}` has a non-finite cost",
                    self.names[j]
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(PcisError::InvalidArgument(format!("constraint {i} has a non-finite rhs")));
            }
            if let Some(&(j, a)) = c.coeffs.iter().find(|&&(j, a)| j >= n || !a.is_finite()) {
                return Err(PcisError::InvalidArgument(format!(
                    "constraint {i} has coefficient {a} on undeclared or invalid variable {j}"
                )));
            }
        }
        Ok(())
    }
}

/// A linear program with some variables restricted to {0, 1}.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedIntegerLinearProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<usize>,
}

impl MixedIntegerLinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            lp: LinearProgram::new(sense),
            binaries: Vec::new(),
        }
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        let j = self.lp.add_variable(name, 0.0, 1.0, cost);
        self.binaries.push(j);
        j
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.binaries.contains(&j)
    }

    pub fn check(&self) -> Result<()> {
        self.lp.check()?;
        for &j in &self.binaries {
            if j >= self.lp.num_variables() {
                return Err(PcisError::InvalidArgument(format!("binary index {j} is undeclared")));
            }
            if self.lp.lower[j] < 0.0 || self.lp.upper[j] > 1.0 {
                return Err(PcisError::InvalidArgument(format!(
                    "binary `{}` must have bounds within [0, 1]",
                    self.lp.names[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NodeLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::NodeLimit => "node-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Variable values; empty unless a feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Simplex pivots performed (summed over nodes for MILPs).
    pub pivots: usize,
    /// Branch-and-bound nodes explored (zero for LPs).
    pub nodes: usize,
}

impl SolveOutcome {
    pub(crate) fn without_point(status: SolveStatus, pivots: usize, nodes: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            pivots,
            nodes,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Returns the outcome if optimal, otherwise a solver error.
    pub fn into_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(PcisError::Solver(self.status))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Reference solver for small instances, HiGHS (when built) otherwise.
    #[default]
    Auto,
    Reference,
    Highs,
}

impl std::str::FromStr for Backend {
    type Err = PcisError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "reference" => Ok(Backend::Reference),
            "highs" => Ok(Backend::Highs),
            other => Err(PcisError::InvalidArgument(format!(
                "unknown solver backend `{other}` (expected auto, reference or highs)"
            ))),
        }
    }
}

/// Largest MILP the `Auto` backend hands to the reference branch-and-bound.
pub const AUTO_REFERENCE_MAX_BINARIES: usize = 24;
/// Largest LP/MILP variable count the `Auto` backend keeps on the reference path.
pub const AUTO_REFERENCE_MAX_VARIABLES: usize = 400;

/// Backend choice, limits and optional problem dumping.
#[derive(Clone, Debug, Default)]
pub struct SolverConfig {
    pub backend: Backend,
    pub simplex: SimplexOptions,
    pub branch_bound: BranchBoundOptions,
    /// When set, every problem is written here in LP-format text before solving.
    pub dump_dir: Option<PathBuf>,
    dump_counter: Arc<AtomicUsize>,
}

impl SolverConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Default::default()
        }
    }

    pub fn highs_available() -> bool {
        cfg!(feature = "highs")
    }

    fn dump(&self, label: &str, lp: &LinearProgram, binaries: &[usize]) -> Result<()> {
        if let Some(dir) = &self.dump_dir {
            std::fs::create_dir_all(dir)?;
            let n = self.dump_counter.fetch_add(1, Ordering::SeqCst);
            let path = dir.join(format!("{n:04}_{label}.lp"));
            std::fs::write(&path, to_lp_format(lp, binaries))?;
            log::debug!("wrote {}", path.display());
        }
        Ok(())
    }

    fn use_highs(&self, binaries: usize, variables: usize) -> Result<bool> {
        match self.backend {
            Backend::Reference => Ok(false),
            Backend::Highs if Self::highs_available() => Ok(true),
            Backend::Highs => Err(PcisError::BackendUnavailable("highs")),
            Backend::Auto => Ok(Self::highs_available()
                && (binaries > AUTO_REFERENCE_MAX_BINARIES
                    || variables > AUTO_REFERENCE_MAX_VARIABLES)),
        }
    }

    /// Solves an LP with the configured backend.
    pub fn solve_lp(&self, label: &str, lp: &LinearProgram) -> Result<SolveOutcome> {
        lp.check()?;
        self.dump(label, lp, &[])?;
        if self.use_highs(0, lp.num_variables())? {
            #[cfg(feature = "highs")]
            return Ok(highs::solve(lp, &[]));
        }
        Ok(solve_lp_with(lp, &self.simplex))
    }

    /// Solves a MILP with the configured backend.
    pub fn solve_milp(&self, label: &str, milp: &MixedIntegerLinearProgram) -> Result<SolveOutcome> {
        milp.check()?;
        self.dump(label, &milp.lp, &milp.binaries)?;
        if self.use_highs(milp.binaries.len(), milp.lp.num_variables())? {
            #[cfg(feature = "highs")]
            return Ok(highs::solve(&milp.lp, &milp.binaries));
        }
        Ok(solve_milp_with(milp, &self.simplex, &self.branch_bound))
    }
}
