//! Independent reference computations.

use nalgebra::{DMatrix, DVector};

use pcis_core::model::{AxisBox, DiscreteModel, StateSet, TransitionDensity};
use pcis_core::solver::{
    solve_lp, LinearProgram, MixedIntegerLinearProgram, Relation, Sense, SolveStatus,
};

/// Best objective over all vertices of a box-bounded LP, `None` if no vertex
/// is feasible. Every vertex is the solution of n active hyperplanes (rows or
/// bounds), with all equality rows active.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_variables();
    assert!(
        lp.lower.iter().chain(&lp.upper).all(|b| b.is_finite()),
        "vertex enumeration needs finite bounds"
    );
    let dense = |coeffs: &[(usize, f64)]| {
        let mut row = vec![0.0; n];
        for &(j, a) in coeffs {
            row[j] += a;
        }
        row
    };
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let p = (dense(&c.coeffs), c.rhs);
        if c.relation == Relation::Eq {
            eqs.push(p);
        } else {
            planes.push(p);
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let (fixed, pool, pick): (Vec<_>, Vec<_>, usize) = if eqs.len() >= n {
        (Vec::new(), eqs.clone(), n)
    } else {
        let pick = n - eqs.len();
        (eqs.clone(), planes, pick)
    };
    let feasible = |x: &[f64]| {
        let scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;
        (0..n).all(|j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol)
            && lp.constraints.iter().all(|c| c.violation(x) <= tol * 10.0)
    };
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..pick).collect();
    if pick > pool.len() {
        return None;
    }
    loop {
        let rows: Vec<&(Vec<f64>, f64)> = fixed.iter().chain(idx.iter().map(|&i| &pool[i])).collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(n, rows.iter().map(|r| r.1));
        let lu = a.clone().lu();
        if lu.determinant().abs() > 1e-10 {
            if let Some(x) = lu.solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if feasible(&x) {
                    let obj = lp.objective_value(&x);
                    best = Some(match (best, lp.sense) {
                        (None, _) => obj,
                        (Some(v), Sense::Minimize) => v.min(obj),
                        (Some(v), Sense::Maximize) => v.max(obj),
                    });
                }
            }
        }
        // Next combination in lexicographic order.
        let mut k = pick;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < pool.len() - pick + k {
                break;
            }
        }
        idx[k] += 1;
        for t in k + 1..pick {
            idx[t] = idx[t - 1] + 1;
        }
        if pick == 0 {
            return best;
        }
    }
}

/// Best objective over all 0/1 assignments of the binaries, each completed by
/// `solve_lp` with the binaries fixed. `None` when every assignment is
/// infeasible.
pub fn assignment_enumeration(milp: &MixedIntegerLinearProgram) -> Option<f64> {
    let nb = milp.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << nb) {
        let mut lp = milp.lp.clone();
        for (bit, &j) in milp.binaries.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        let out = solve_lp(&lp);
        if out.status == SolveStatus::Optimal {
            best = Some(match (best, lp.sense) {
                (None, _) => out.objective,
                (Some(v), Sense::Minimize) => v.min(out.objective),
                (Some(v), Sense::Maximize) => v.max(out.objective),
            });
        }
    }
    best
}

/// max over every deterministic time-varying Markov policy of the N-step
/// stay probability in `q`, computed as M_{π_0}···M_{π_{N−1}}·1 with the
/// substochastic matrices M_π[x][y] = T(y|x,π(x)), x, y ∈ q. One entry per
/// member of `q`.
pub fn exhaustive_v0(model: &DiscreteModel, q: &StateSet, n: usize) -> Vec<f64> {
    let members: Vec<usize> = q.iter().collect();
    let s = members.len();
    let choices: Vec<usize> = members.iter().map(|&x| model.actions_of(x).len()).collect();
    let per_step: usize = choices.iter().product();
    let total = per_step.pow(n as u32);
    // Substochastic matrix of each (state, action slot) row, restricted to q.
    let matrix_row = |i: usize, k: usize| -> Vec<f64> {
        let row = model.row(members[i], k);
        members.iter().map(|&y| row.prob_of(y)).collect()
    };
    let rows: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|i| (0..choices[i]).map(|k| matrix_row(i, k)).collect())
        .collect();
    let mut best = vec![0.0f64; s];
    for code in 0..total {
        let mut c = code;
        let mut policy = vec![vec![0usize; s]; n];
        for step in policy.iter_mut() {
            let mut d = c % per_step;
            c /= per_step;
            for (i, slot) in step.iter_mut().enumerate() {
                *slot = d % choices[i];
                d /= choices[i];
            }
        }
        // Product M_{π_0} (M_{π_1} (... (M_{π_{N-1}} 1))).
        let mut v = DVector::from_element(s, 1.0);
        for step in policy.iter().rev() {
            let m = DMatrix::from_fn(s, s, |i, j| rows[i][step[i]][j]);
            v = m * v;
        }
        for i in 0..s {
            best[i] = best[i].max(v[i]);
        }
    }
    best
}

/// Density on y ∈ [0, 2] (independent of u):
/// t(y|x) = ½(1 + γ(x − ½)(y − 1)), |γ| ≤ 2.
///
/// On Q = [0, 1], ∂t/∂x is bounded by |γ|/2, and values stay affine:
/// if V_{k+1}(y) = α + β(y − ½) then
/// V_k(x) = ½α + ½γ(x − ½)(β/12 − α/2).
#[derive(Debug, Clone, Copy)]
pub struct TiltedUniform {
    pub gamma: f64,
}

impl TransitionDensity for TiltedUniform {
    fn density(&self, y: &[f64], x: &[f64], _u: &[f64]) -> f64 {
        if (0.0..=2.0).contains(&y[0]) {
            0.5 * (1.0 + self.gamma * (x[0] - 0.5) * (y[0] - 1.0))
        } else {
            0.0
        }
    }

    fn support(&self, _x: &[f64], _u: &[f64]) -> Option<AxisBox> {
        AxisBox::new(vec![0.0], vec![2.0]).ok()
    }
}

impl TiltedUniform {
    pub fn lipschitz(&self) -> f64 {
        self.gamma.abs() / 2.0
    }

    /// Coefficients (α_k, β_k) of V_k(x) = α_k + β_k(x − ½) on Q = [0, 1],
    /// for k = 0..=n.
    pub fn exact_values(&self, n: usize) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); n + 1];
        out[n] = (1.0, 0.0);
        for k in (0..n).rev() {
            let (a, b) = out[k + 1];
            out[k] = (0.5 * a, 0.5 * self.gamma * (b / 12.0 - a / 2.0));
        }
        out
    }
}

/// Density uniform on the fixed box [0, 2]: T(Q|x,u) = ½ for Q = [0, 1], so
/// V_k = (½)^{N−k} exactly.
#[derive(Debug, Clone, Copy)]
pub struct Uniform;

impl TransitionDensity for Uniform {
    fn density(&self, y: &[f64], _x: &[f64], _u: &[f64]) -> f64 {
        if (0.0..=2.0).contains(&y[0]) {
            0.5
        } else {
            0.0
        }
    }
}
