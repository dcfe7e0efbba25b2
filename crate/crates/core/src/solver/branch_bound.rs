use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{solve_lp_with, SimplexOptions};
use super::{MixedIntegerLinearProgram, Sense, SolveOutcome, SolveStatus, INTEGRALITY_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
pub struct BranchBoundOptions {
    /// Nodes whose bound is within this absolute gap of the incumbent are pruned.
    pub absolute_gap: f64,
    pub integrality_tol: f64,
    pub max_nodes: usize,
}

impl Default for BranchBoundOptions {
    fn default() -> Self {
        Self {
            absolute_gap: 1e-6,
            integrality_tol: INTEGRALITY_TOLERANCE,
            max_nodes: 100_000,
        }
    }
}

/// Solves `milp` with the reference branch-and-bound and default options.
pub fn solve_milp(milp: &MixedIntegerLinearProgram) -> SolveOutcome {
    solve_milp_with(milp, &SimplexOptions::default(), &BranchBoundOptions::default())
}

struct Node {
    /// Relaxation bound, in minimization form.
    bound: f64,
    seq: usize,
    fixed: Vec<(usize, f64)>,
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
    // BinaryHeap pops the greatest: lowest bound first, then earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-bound branch-and-bound over LP relaxations, branching on the
/// lowest-index fractional binary.
pub fn solve_milp_with(
    milp: &MixedIntegerLinearProgram,
    simplex: &SimplexOptions,
    opts: &BranchBoundOptions,
) -> SolveOutcome {
    let sign = match milp.lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut binaries = milp.binaries.clone();
    binaries.sort_unstable();
    binaries.dedup();

    let mut relaxation = milp.lp.clone();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fixed: Vec::new(),
    });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut pivots = 0;
    let mut nodes = 0;
    let mut root_unbounded = false;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.absolute_gap {
                continue;
            }
        }
        if nodes >= opts.max_nodes {
            let mut out = match incumbent {
                Some((_, values)) => SolveOutcome {
                    status: SolveStatus::NodeLimit,
                    objective: milp.lp.objective_value(&values),
                    values,
                    pivots,
                    nodes,
                },
                None => SolveOutcome::without_point(SolveStatus::NodeLimit, pivots, nodes),
            };
            out.status = SolveStatus::NodeLimit;
            return out;
        }
        nodes += 1;

        relaxation.lower.clone_from(&milp.lp.lower);
        relaxation.upper.clone_from(&milp.lp.upper);
        for &(j, v) in &node.fixed {
            relaxation.lower[j] = v;
            relaxation.upper[j] = v;
        }
        let out = solve_lp_with(&relaxation, simplex);
        pivots += out.pivots;
        match out.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                if nodes == 1 {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            status => return SolveOutcome::without_point(status, pivots, nodes),
        }
        let bound = sign * out.objective;
        if let Some((best, _)) = &incumbent {
            if bound >= best - opts.absolute_gap {
                continue;
            }
        }
        let fractional = binaries.iter().copied().find(|&j| {
            let v = out.values[j];
            (v - v.round()).abs() > opts.integrality_tol
        });
        match fractional {
            None => {
                let mut values = out.values;
                for &j in &binaries {
                    values[j] = values[j].round();
                }
                incumbent = Some((bound, values));
            }
            Some(j) => {
                for v in [0.0, 1.0] {
                    seq += 1;
                    let mut fixed = node.fixed.clone();
                    fixed.push((j, v));
                    heap.push(Node { bound, seq, fixed });
                }
            }
        }
    }

    if root_unbounded {
        return SolveOutcome::without_point(SolveStatus::Unbounded, pivots, nodes);
    }
    match incumbent {
        Some((_, values)) => SolveOutcome {
            status: SolveStatus::Optimal,
            objective: milp.lp.objective_value(&values),
            values,
            pivots,
            nodes,
        },
        None => SolveOutcome::without_point(SolveStatus::Infeasible, pivots, nodes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_lp, Relation};

    #[test]
    fn big_m_pair_selects_the_tighter_cap() {
        // max g, g ≤ 0.9 + 2(1−κ), g ≤ 0.4 + 2κ
        let mut m = MixedIntegerLinearProgram::new(Sense::Maximize);
        let g = m.lp.add_variable("g", 0.0, 1.0, 1.0);
        let k = m.add_binary("k", 0.0);
        m.lp.add_constraint("a", vec![(g, 1.0), (k, 2.0)], Relation::Le, 2.9);
        m.lp.add_constraint("b", vec![(g, 1.0), (k, -2.0)], Relation::Le, 0.4);
        let out = solve_milp(&m);
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.values[g] - 0.9).abs() < 1e-9);
        assert_eq!(out.values[k], 1.0);
    }

    #[test]
    fn fixed_binaries_reduce_to_lp() {
        let mut m = MixedIntegerLinearProgram::new(Sense::Minimize);
        let x = m.lp.add_variable("x", 0.0, 10.0, 1.0);
        let k = m.add_binary("k", 1.0);
        m.lp.lower[k] = 1.0;
        m.lp.add_constraint("c", vec![(x, 1.0), (k, 1.0)], Relation::Ge, 2.5);
        let out = solve_milp(&m);
        let lp = solve_lp(&m.lp);
        assert_eq!(out.nodes, 1);
        assert_eq!(out.values, lp.values);
        assert_eq!(out.objective, lp.objective);
    }

    #[test]
    fn contradictory_forcing_is_infeasible() {
        let mut m = MixedIntegerLinearProgram::new(Sense::Maximize);
        let k = m.add_binary("k", 1.0);
        m.lp.add_constraint("lo", vec![(k, 1.0)], Relation::Ge, 0.3);
        m.lp.add_constraint("hi", vec![(k, 1.0)], Relation::Le, 0.7);
        assert_eq!(solve_milp(&m).status, SolveStatus::Infeasible);
    }

    #[test]
    fn node_limit_is_a_status() {
        let mut m = MixedIntegerLinearProgram::new(Sense::Maximize);
        let a = m.add_binary("a", 1.0);
        let b = m.add_binary("b", 1.0);
        m.lp.add_constraint("c", vec![(a, 2.0), (b, 2.0)], Relation::Le, 3.0);
        let opts = BranchBoundOptions {
            max_nodes: 1,
            ..Default::default()
        };
        let out = solve_milp_with(&m, &SimplexOptions::default(), &opts);
        assert_eq!(out.status, SolveStatus::NodeLimit);
    }
}
