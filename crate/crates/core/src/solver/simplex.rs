use nalgebra::DMatrix;

use super::{LinearProgram, Relation, Sense, SolveOutcome, SolveStatus};

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexOptions {
    /// Phase-one residual (relative to the rhs scale) treated as feasible.
    pub feasibility_tol: f64,
    /// Reduced-cost threshold (relative to the cost scale) for entering columns.
    pub optimality_tol: f64,
    /// Smallest pivot element accepted in the ratio test.
    pub pivot_tol: f64,
    pub max_pivots: usize,
    /// Pivots between rebuilds of the tableau from the original rows.
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_pivots: 1_000_000,
            refactor_every: 32,
        }
    }
}

/// Solves `lp` with the reference simplex and default options.
pub fn solve_lp(lp: &LinearProgram) -> SolveOutcome {
    solve_lp_with(lp, &SimplexOptions::default())
}

/// Original variable x_j = offset + Σ sign·column.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StandardForm {
    maps: Vec<VarMap>,
    structural: usize,
    rows: Vec<(Vec<(usize, f64)>, Relation, f64)>,
    cost: Vec<f64>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let mut maps = Vec::with_capacity(lp.num_variables());
    let mut bound_rows = Vec::new();
    let mut next = 0;
    for j in 0..lp.num_variables() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let map = if l.is_finite() {
            if u.is_finite() {
                bound_rows.push((vec![(next, 1.0)], Relation::Le, u - l));
            }
            VarMap {
                offset: l,
                cols: vec![(next, 1.0)],
            }
        } else if u.is_finite() {
            VarMap {
                offset: u,
                cols: vec![(next, -1.0)],
            }
        } else {
            next += 1;
            VarMap {
                offset: 0.0,
                cols: vec![(next - 1, 1.0), (next, -1.0)],
            }
        };
        next += 1;
        maps.push(map);
    }
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; next];
    for (j, map) in maps.iter().enumerate() {
        for &(c, s) in &map.cols {
            cost[c] += sign * lp.objective[j] * s;
        }
    }
    let mut rows = Vec::with_capacity(lp.num_constraints() + bound_rows.len());
    for con in &lp.constraints {
        let mut dense: Vec<(usize, f64)> = Vec::with_capacity(con.coeffs.len());
        let mut rhs = con.rhs;
        for &(j, a) in &con.coeffs {
            rhs -= a * maps[j].offset;
            for &(c, s) in &maps[j].cols {
                dense.push((c, a * s));
            }
        }
        rows.push((dense, con.relation, rhs));
    }
    rows.extend(bound_rows);
    StandardForm {
        maps,
        structural: next,
        rows,
        cost,
    }
}

struct Tableau {
    width: usize,
    data: Vec<f64>,
    /// The rows as first built, used to rebuild `data` for the current basis.
    original: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let w = self.width;
        let p = self.at(r, c);
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, &pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.original.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
    }

    /// Recomputes B⁻¹[A | b] for the current basis. Returns false (leaving the
    /// tableau as is) when the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let (m, w) = (self.rows(), self.width);
        if m == 0 {
            return true;
        }
        let b = DMatrix::from_fn(m, m, |i, k| self.original[i * w + self.basis[k]]);
        let lu = b.lu();
        if !lu.is_invertible() {
            return false;
        }
        let a = DMatrix::from_row_slice(m, w, &self.original);
        let Some(x) = lu.solve(&a) else {
            return false;
        };
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for i in 0..m {
            for j in 0..w {
                let v = x[(i, j)];
                self.data[i * w + j] = if v.abs() < 1e-13 { 0.0 } else { v };
            }
        }
        for (i, &c) in self.basis.iter().enumerate() {
            for k in 0..m {
                self.data[k * w + c] = if k == i { 1.0 } else { 0.0 };
            }
        }
        true
    }

    /// Reduced-cost row for `cost` given the current basis.
    fn reduced(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.width];
        obj[..cost.len()].copy_from_slice(cost);
        for i in 0..self.rows() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (v, &a) in obj.iter_mut().zip(self.row(i)) {
                    *v -= cb * a;
                }
            }
        }
        obj
    }
}

enum Phase {
    Optimal,
    Unbounded,
    Limit,
}

/// Primal simplex with Bland's rule on `cost`, restricted to columns
/// `< allowed`. With `bounded`, a column with no acceptable pivot is numerical
/// noise and is skipped until the next pivot. Returns the final reduced-cost
/// row.
#[allow(clippy::too_many_arguments)]
fn run(
    t: &mut Tableau,
    cost: &[f64],
    allowed: usize,
    cost_scale: f64,
    bounded: bool,
    opts: &SimplexOptions,
    pivots: &mut usize,
) -> (Phase, Vec<f64>) {
    let dj_tol = opts.optimality_tol * cost_scale;
    let mut skipped = vec![false; allowed];
    let mut since_refactor = 0;
    let mut obj = t.reduced(cost);
    loop {
        if since_refactor >= opts.refactor_every.max(1) {
            t.refactor();
            obj = t.reduced(cost);
            since_refactor = 0;
        }
        let Some(c) = (0..allowed).find(|&j| !skipped[j] && obj[j] < -dj_tol) else {
            if since_refactor > 0 {
                // Confirm optimality on a freshly rebuilt tableau.
                since_refactor = opts.refactor_every.max(1);
                skipped.fill(false);
                continue;
            }
            return (Phase::Optimal, obj);
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..t.rows() {
            let a = t.at(i, c);
            if a > opts.pivot_tol {
                let ratio = t.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                        if ratio < br && !tie || tie && t.basis[i] < t.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = best else {
            if bounded {
                skipped[c] = true;
                continue;
            }
            return (Phase::Unbounded, obj);
        };
        if *pivots >= opts.max_pivots {
            return (Phase::Limit, obj);
        }
        t.pivot(r, c, &mut obj);
        *pivots += 1;
        since_refactor += 1;
        skipped.fill(false);
    }
}

/// Dense two-phase simplex with Bland's anti-cycling rule.
pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> SolveOutcome {
    let sf = standardize(lp);
    let m = sf.rows.len();
    let mut slack_of = vec![None; m];
    let mut art_of = vec![None; m];
    let mut rows = sf.rows;
    for row in rows.iter_mut() {
        // Homogeneous ≥ rows become ≤ rows so their slack can start basic.
        if row.2 < 0.0 || row.2 == 0.0 && row.1 == Relation::Ge {
            for e in row.0.iter_mut() {
                e.1 = -e.1;
            }
            row.2 = -row.2 + 0.0;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let mut next = sf.structural;
    for (i, row) in rows.iter().enumerate() {
        if row.1 != Relation::Eq {
            slack_of[i] = Some(next);
            next += 1;
        }
    }
    let first_art = next;
    for (i, row) in rows.iter().enumerate() {
        if row.1 != Relation::Le {
            art_of[i] = Some(next);
            next += 1;
        }
    }
    let width = next + 1;
    let mut t = Tableau {
        width,
        data: vec![0.0; m * width],
        original: Vec::new(),
        basis: vec![0; m],
    };
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let base = i * width;
        for &(c, a) in coeffs {
            t.data[base + c] += a;
        }
        if let Some(s) = slack_of[i] {
            t.data[base + s] = if *rel == Relation::Le { 1.0 } else { -1.0 };
        }
        if let Some(a) = art_of[i] {
            t.data[base + a] = 1.0;
        }
        t.data[base + width - 1] = *rhs;
        t.basis[i] = art_of[i].or(slack_of[i]).expect("every row has a basic column");
    }
    t.original = t.data.clone();

    let mut pivots = 0;
    if first_art < next {
        let mut phase1_cost = vec![0.0; next];
        for c in phase1_cost.iter_mut().skip(first_art) {
            *c = 1.0;
        }
        let (phase, mut obj) = run(&mut t, &phase1_cost, next, 1.0, true, opts, &mut pivots);
        match phase {
            Phase::Optimal => {}
            Phase::Limit => return SolveOutcome::without_point(SolveStatus::IterationLimit, pivots, 0),
            Phase::Unbounded => unreachable!("phase one never reports unbounded"),
        }
        let rhs_scale = rows.iter().map(|r| r.2.abs()).fold(1.0, f64::max);
        if -obj[width - 1] > opts.feasibility_tol * rhs_scale {
            return SolveOutcome::without_point(SolveStatus::Infeasible, pivots, 0);
        }
        let mut i = 0;
        while i < t.rows() {
            if t.basis[i] >= first_art {
                match (0..first_art).find(|&j| t.at(i, j).abs() > opts.pivot_tol) {
                    Some(c) => {
                        t.pivot(i, c, &mut obj);
                        pivots += 1;
                    }
                    None => {
                        t.remove_row(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = sf.cost.clone();
    cost.resize(next, 0.0);
    let cost_scale = sf.cost.iter().map(|c| c.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (phase, _) = run(&mut t, &cost, first_art, cost_scale, false, opts, &mut pivots);
    match phase {
        Phase::Optimal => {}
        Phase::Unbounded => return SolveOutcome::without_point(SolveStatus::Unbounded, pivots, 0),
        Phase::Limit => return SolveOutcome::without_point(SolveStatus::IterationLimit, pivots, 0),
    }

    let mut col = vec![0.0; next];
    for i in 0..t.rows() {
        col[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let values: Vec<f64> = sf
        .maps
        .iter()
        .map(|m| m.offset + m.cols.iter().map(|&(c, s)| s * col[c]).sum::<f64>())
        .collect();
    let objective = lp.objective_value(&values);
    SolveOutcome {
        status: SolveStatus::Optimal,
        values,
        objective,
        pivots,
        nodes: 0,
    }
}
