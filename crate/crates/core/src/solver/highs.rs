use std::ops::Bound;

use highs::{HighsModelStatus, RowProblem};

use super::{LinearProgram, Relation, Sense, SolveOutcome, SolveStatus};

fn bound(v: f64) -> Bound<f64> {
    if v.is_finite() {
        Bound::Included(v)
    } else {
        Bound::Unbounded
    }
}

/// Solves an LP, or a MILP when `binaries` is nonempty, with HiGHS.
pub(super) fn solve(lp: &LinearProgram, binaries: &[usize]) -> SolveOutcome {
    let mut is_binary = vec![false; lp.num_variables()];
    for &j in binaries {
        is_binary[j] = true;
    }
    let mut pb = RowProblem::default();
    let cols: Vec<_> = (0..lp.num_variables())
        .map(|j| {
            let range = (bound(lp.lower[j]), bound(lp.upper[j]));
            if is_binary[j] {
                pb.add_integer_column(lp.objective[j], range)
            } else {
                pb.add_column(lp.objective[j], range)
            }
        })
        .collect();
    for c in &lp.constraints {
        let range = match c.relation {
            Relation::Le => (Bound::Unbounded, Bound::Included(c.rhs)),
            Relation::Ge => (Bound::Included(c.rhs), Bound::Unbounded),
            Relation::Eq => (Bound::Included(c.rhs), Bound::Included(c.rhs)),
        };
        pb.add_row(range, c.coeffs.iter().map(|&(j, a)| (cols[j], a)));
    }
    let sense = match lp.sense {
        Sense::Minimize => highs::Sense::Minimise,
        Sense::Maximize => highs::Sense::Maximise,
    };
    let mut model = pb.optimise(sense);
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("random_seed", 0);
    model.set_option("primal_feasibility_tolerance", 1e-9);
    model.set_option("dual_feasibility_tolerance", 1e-9);
    model.set_option("mip_feasibility_tolerance", 1e-9);
    model.set_option("mip_rel_gap", 0.0);
    model.set_option("mip_abs_gap", 1e-9);
    let solved = model.solve();
    let status = match solved.status() {
        HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
            SolveStatus::Unbounded
        }
        other => {
            log::warn!("HiGHS stopped with status {other:?}");
            SolveStatus::IterationLimit
        }
    };
    if status != SolveStatus::Optimal {
        return SolveOutcome::without_point(status, 0, 0);
    }
    let mut values = solved.get_solution().columns().to_vec();
    values.resize(lp.num_variables(), 0.0);
    for &j in binaries {
        values[j] = values[j].round();
    }
    SolveOutcome {
        status,
        objective: lp.objective_value(&values),
        values,
        pivots: 0,
        nodes: 0,
    }
}
