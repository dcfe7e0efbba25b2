//! Grid abstraction of continuous models, the τ_k error bound and the
//! approximate N-step ε-PCIS loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PcisError, Result};
use crate::finite_horizon::{
    check_epsilon, dp_backward, shrink_loop, Certification, Horizon, Method, PcisResult,
    ResultPolicy, Round,
};
use crate::model::{AxisBox, ContinuousModel, DiscreteModel, Region, StateSet};

/// Default cap on the number of state cells.
pub const DEFAULT_MAX_CELLS: usize = 1_000_000;
/// Kernel entries below this value are routed to the sink instead of stored.
pub const DROP_THRESHOLD: f64 = 1e-13;
/// Name of the absorbing state collecting escaped mass.
pub const SINK_NAME: &str = "sink";

/// Cell counts per axis for an edge target, tolerant to rounding in `w / h`.
fn count_for(width: f64, edge: f64) -> usize {
    ((width / edge) - 1e-9).ceil().max(1.0) as usize
}

/// Uniform partition of one box, cells in row-major order (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Block {
    bounds: AxisBox,
    counts: Vec<usize>,
    edge: Vec<f64>,
    offset: usize,
}

impl Block {
    fn new(bounds: AxisBox, counts: Vec<usize>, offset: usize) -> Self {
        let edge = bounds
            .widths()
            .iter()
            .zip(&counts)
            .map(|(w, &c)| w / c as f64)
            .collect();
        Self {
            bounds,
            counts,
            edge,
            offset,
        }
    }

    fn len(&self) -> usize {
        self.counts.iter().product()
    }

    fn multi_index(&self, mut local: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for a in (0..self.counts.len()).rev() {
            idx[a] = local % self.counts[a];
            local /= self.counts[a];
        }
        idx
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    fn cell_box(&self, local: usize) -> AxisBox {
        let idx = self.multi_index(local);
        let lo: Vec<f64> = (0..idx.len())
            .map(|a| self.bounds.lo()[a] + idx[a] as f64 * self.edge[a])
            .collect();
        let hi: Vec<f64> = (0..idx.len())
            .map(|a| {
                if idx[a] + 1 == self.counts[a] {
                    self.bounds.hi()[a]
                } else {
                    self.bounds.lo()[a] + (idx[a] + 1) as f64 * self.edge[a]
                }
            })
            .collect();
        AxisBox::new(lo, hi).expect("grid cells have positive width")
    }

    fn center(&self, local: usize) -> Vec<f64> {
        let idx = self.multi_index(local);
        (0..idx.len())
            .map(|a| self.bounds.lo()[a] + (idx[a] as f64 + 0.5) * self.edge[a])
            .collect()
    }

    /// Axis index of `p` with upper faces excluded; `None` outside [lo, hi).
    fn axis_index(&self, a: usize, p: f64, closed: bool) -> Option<usize> {
        let lo = self.bounds.lo()[a];
        let hi = self.bounds.hi()[a];
        if p < lo || p > hi || (!closed && p == hi) {
            return None;
        }
        Some((((p - lo) / self.edge[a]).floor() as usize).min(self.counts[a] - 1))
    }

    fn locate(&self, p: &[f64], closed: bool) -> Option<usize> {
        let idx: Option<Vec<usize>> = (0..p.len())
            .map(|a| self.axis_index(a, p[a], closed))
            .collect();
        idx.map(|i| self.flat(&i))
    }

    /// Local indices of cells intersecting `b`.
    fn cells_touching(&self, b: &AxisBox, out: &mut Vec<usize>) {
        let dim = self.counts.len();
        let mut ranges = Vec::with_capacity(dim);
        for a in 0..dim {
            let lo = ((b.lo()[a] - self.bounds.lo()[a]) / self.edge[a]).floor();
            let hi = ((b.hi()[a] - self.bounds.lo()[a]) / self.edge[a]).floor() + 1.0;
            let lo = lo.clamp(0.0, self.counts[a] as f64) as usize;
            let hi = hi.clamp(0.0, self.counts[a] as f64) as usize;
            if lo >= hi {
                return;
            }
            ranges.push(lo..hi);
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        loop {
            out.push(self.offset + self.flat(&idx));
            let mut a = dim;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < ranges[a].end {
                    break;
                }
                idx[a] = ranges[a].start;
            }
        }
    }
}

/// Partition of a region into axis-aligned cells with center representatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    blocks: Vec<Block>,
    len: usize,
    /// Representatives packed with stride `dim`.
    reps: Vec<f64>,
}

impl StateGrid {
    fn new(blocks: Vec<Block>) -> Self {
        let len = blocks.iter().map(Block::len).sum();
        let mut reps = Vec::with_capacity(len * blocks[0].counts.len());
        for b in &blocks {
            for l in 0..b.len() {
                reps.extend(b.center(l));
            }
        }
        Self { blocks, len, reps }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].counts.len()
    }

    fn block_of(&self, cell: usize) -> &Block {
        let i = self.blocks.partition_point(|b| b.offset <= cell) - 1;
        &self.blocks[i]
    }

    pub fn cell_box(&self, cell: usize) -> AxisBox {
        let b = self.block_of(cell);
        b.cell_box(cell - b.offset)
    }

    /// Representative q_i (the cell center).
    pub fn representative(&self, cell: usize) -> &[f64] {
        let d = self.dim();
        &self.reps[cell * d..(cell + 1) * d]
    }

    pub fn representatives(&self) -> &[f64] {
        &self.reps
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.cell_box(cell).volume()
    }

    pub fn diameter(&self, cell: usize) -> f64 {
        self.cell_box(cell).diameter()
    }

    /// D_x, the largest cell diameter.
    pub fn grid_size(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.edge.iter().map(|e| e * e).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Cells per axis of each region box.
    pub fn counts(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.counts.clone()).collect()
    }

    /// Cell containing `p`: lower faces belong to a cell, upper faces only on
    /// the region boundary.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dim() {
            return None;
        }
        self.blocks
            .iter()
            .find_map(|b| b.locate(p, false).map(|l| b.offset + l))
            .or_else(|| {
                self.blocks
                    .iter()
                    .find_map(|b| b.locate(p, true).map(|l| b.offset + l))
            })
    }

    /// Cells whose box intersects `b`, in increasing order.
    pub fn cells_touching(&self, b: &AxisBox) -> Vec<usize> {
        let mut out = Vec::new();
        for block in &self.blocks {
            block.cells_touching(b, &mut out);
        }
        out
    }

    /// Total volume of the given cells.
    pub fn volume_of(&self, cells: &StateSet) -> f64 {
        cells.iter().map(|c| self.cell_volume(c)).sum()
    }
}

/// Partition of the control box with per-state admissible subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    block: Block,
    reps: Vec<Vec<f64>>,
    /// η, the admissibility radius.
    pub eta: f64,
    /// Û per state cell, as indices into the representatives.
    pub admissible: Vec<Vec<usize>>,
}

impl ControlGrid {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Representative û_i.
    pub fn representative(&self, i: usize) -> &[f64] {
        &self.reps[i]
    }

    pub fn cell_box(&self, i: usize) -> AxisBox {
        self.block.cell_box(i)
    }

    /// D_u, the largest cell diameter.
    pub fn grid_size(&self) -> f64 {
        self.block.edge.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn counts(&self) -> &[usize] {
        &self.block.counts
    }
}

/// How finely to grid the state and control spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpec {
    /// Uniform grid with every cell diameter at most δ.
    Delta(f64),
    /// Explicit cells per axis; δ becomes max(D_x, D_u).
    Counts { state: Vec<usize>, control: Vec<usize> },
}

impl GridSpec {
    /// Grid by δ in state space, with an explicit control count per axis.
    pub fn delta_with_controls(delta: f64, controls: Vec<usize>, region: &Region) -> Result<Self> {
        check_delta(delta)?;
        let bb = region.bounding_box();
        let edge = delta / (bb.dim() as f64).sqrt();
        Ok(GridSpec::Counts {
            state: bb.widths().iter().map(|&w| count_for(w, edge)).collect(),
            control: controls,
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(PcisError::InvalidArgument(format!("grid size δ must be positive, got {delta}")))
    }
}

/// Builds the state and control grids; η = δ.
pub fn build_grids(
    cont: &ContinuousModel,
    region: &Region,
    spec: &GridSpec,
    max_cells: usize,
) -> Result<(StateGrid, ControlGrid, f64)> {
    if region.dim() != cont.state_dim() {
        return Err(PcisError::InvalidArgument(format!(
            "region has dimension {}, model state dimension is {}",
            region.dim(),
            cont.state_dim()
        )));
    }
    let bb = region.bounding_box();
    let (state_edge, control_counts) = match spec {
        GridSpec::Delta(delta) => {
            check_delta(*delta)?;
            let e = delta / (cont.state_dim() as f64).sqrt();
            let ue = delta / (cont.control_dim() as f64).sqrt();
            let counts = cont.control_box().widths().iter().map(|&w| count_for(w, ue)).collect();
            (vec![e; cont.state_dim()], counts)
        }
        GridSpec::Counts { state, control } => {
            if state.len() != cont.state_dim() || control.len() != cont.control_dim() {
                return Err(PcisError::InvalidArgument(
                    "grid counts must match the state and control dimensions".into(),
                ));
            }
            if state.contains(&0) || control.contains(&0) {
                return Err(PcisError::InvalidArgument("grid counts must be positive".into()));
            }
            let edge = bb.widths().iter().zip(state).map(|(w, &c)| w / c as f64).collect();
            (edge, control.clone())
        }
    };
    let mut total: usize = 0;
    let mut blocks = Vec::with_capacity(region.boxes().len());
    for b in region.boxes() {
        let counts: Vec<usize> = b
            .widths()
            .iter()
            .zip(&state_edge)
            .map(|(&w, &e)| count_for(w, e))
            .collect();
        let cells = counts
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .unwrap_or(usize::MAX);
        let offset = total;
        total = total.saturating_add(cells);
        if total > max_cells {
            return Err(PcisError::GridTooFine {
                cells: total,
                cap: max_cells,
            });
        }
        blocks.push(Block::new(b.clone(), counts, offset));
    }
    let states = StateGrid::new(blocks);
    let cblock = Block::new(cont.control_box().clone(), control_counts, 0);
    let reps: Vec<Vec<f64>> = (0..cblock.len()).map(|i| cblock.center(i)).collect();
    let control_size = cblock.edge.iter().map(|e| e * e).sum::<f64>().sqrt();
    let delta = match spec {
        GridSpec::Delta(d) => *d,
        GridSpec::Counts { .. } => states.grid_size().max(control_size),
    };
    let eta = delta;
    let admissible = (0..states.len())
        .map(|i| {
            let sub = cont.admissible_box(states.representative(i));
            let adm: Vec<usize> = (0..reps.len())
                .filter(|&j| sub.distance_to(&reps[j]) <= eta)
                .collect();
            adm
        })
        .collect::<Vec<_>>();
    if let Some(i) = admissible.iter().position(Vec::is_empty) {
        return Err(PcisError::InvalidArgument(format!(
            "cell {i} has no admissible control within η = {eta}"
        )));
    }
    let controls = ControlGrid {
        block: cblock,
        reps,
        eta,
        admissible,
    };
    Ok((states, controls, delta))
}

/// Normalized kernel row of cell `i` under control `u`, as (cell, probability)
/// pairs over cells touched by the density support (all cells if unknown).
///
/// With m = Σ_k t(q_k|q_i,u)·vol(Q_k): entries are t·vol/m when m ≥ 1 and
/// t·vol otherwise.
pub fn normalized_density(
    cont: &ContinuousModel,
    grid: &StateGrid,
    i: usize,
    u: &[f64],
) -> Result<Vec<(usize, f64)>> {
    let x = grid.representative(i);
    let cells: Vec<usize> = match cont.support(x, u) {
        Some(b) => grid.cells_touching(&b),
        None => (0..grid.len()).collect(),
    };
    let d = grid.dim();
    let mut ys = Vec::with_capacity(cells.len() * d);
    for &c in &cells {
        ys.extend_from_slice(grid.representative(c));
    }
    let mut dens = vec![0.0; cells.len()];
    cont.density_batch(&ys, x, u, &mut dens);
    let mut row = Vec::with_capacity(cells.len());
    let mut m = 0.0;
    for (k, &c) in cells.iter().enumerate() {
        let t = dens[k];
        if !(t >= 0.0) || !t.is_finite() {
            return Err(PcisError::InvalidDensity {
                value: t,
                y: grid.representative(c).to_vec(),
            });
        }
        let p = t * grid.cell_volume(c);
        m += p;
        row.push((c, p));
    }
    if m >= 1.0 {
        for e in &mut row {
            e.1 /= m;
        }
    }
    Ok(row)
}

/// Bound data τ_k(Q) = 4φ(Q)L(N−k).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub volume: f64,
    pub lipschitz: f64,
    pub delta: f64,
    pub horizon: usize,
}

/// Target ε translated to the abstraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonMap {
    pub tau: f64,
    pub tau0_delta: f64,
    /// ε̂ = ε + τ₀δ.
    pub eps_hat: f64,
    /// (1 − ε)/τ₀; infinite when τ₀ = 0.
    pub max_delta: f64,
    pub feasible: bool,
}

impl ErrorModel {
    pub fn tau(&self, k: usize) -> f64 {
        4.0 * self.volume * self.lipschitz * self.horizon.saturating_sub(k) as f64
    }

    pub fn tau0(&self) -> f64 {
        self.tau(0)
    }

    pub fn with_volume(&self, volume: f64) -> Self {
        Self { volume, ..*self }
    }
}

/// τ_k together with ε̂ and the grid-size feasibility condition for `epsilon`.
pub fn error_bound(err: &ErrorModel, k: usize, epsilon: f64) -> EpsilonMap {
    let tau0 = err.tau0();
    let max_delta = if tau0 > 0.0 { (1.0 - epsilon) / tau0 } else { f64::INFINITY };
    EpsilonMap {
        tau: err.tau(k),
        tau0_delta: tau0 * err.delta,
        eps_hat: epsilon + tau0 * err.delta,
        max_delta,
        feasible: err.delta < max_delta,
    }
}

/// Finite MDP over grid representatives plus an absorbing sink.
#[derive(Clone, Debug)]
pub struct Abstraction {
    pub model: DiscreteModel,
    pub states: StateGrid,
    pub controls: ControlGrid,
    pub delta: f64,
    pub volume: f64,
    pub lipschitz: f64,
    /// Index of the sink state.
    pub sink: usize,
}

impl Abstraction {
    /// Every grid cell (the sink excluded).
    pub fn cells(&self) -> StateSet {
        StateSet::full(self.states.len())
    }

    pub fn error_model(&self, horizon: usize) -> ErrorModel {
        ErrorModel {
            volume: self.volume,
            lipschitz: self.lipschitz,
            delta: self.delta,
            horizon,
        }
    }

    /// Control representative of abstraction action `a`.
    pub fn control(&self, a: usize) -> &[f64] {
        self.controls.representative(a)
    }

    /// Union of the given cells as a region.
    pub fn region_of(&self, cells: &StateSet) -> Option<Region> {
        if cells.is_empty() {
            return None;
        }
        Region::new(cells.iter().map(|c| self.states.cell_box(c)).collect()).ok()
    }
}

/// Builds the abstraction with the default cell cap.
pub fn abstract_model(cont: &ContinuousModel, region: &Region, spec: &GridSpec) -> Result<Abstraction> {
    abstract_model_with(cont, region, spec, DEFAULT_MAX_CELLS)
}

/// Grids the spaces and assembles normalized rows, padding each with the
/// escaped mass on the sink.
pub fn abstract_model_with(
    cont: &ContinuousModel,
    region: &Region,
    spec: &GridSpec,
    max_cells: usize,
) -> Result<Abstraction> {
    let (states, controls, delta) = build_grids(cont, region, spec, max_cells)?;
    let n = states.len();
    let sink = n;
    let rows: Vec<Vec<(usize, Vec<(usize, f64)>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            controls.admissible[i]
                .iter()
                .map(|&a| {
                    let raw = normalized_density(cont, &states, i, controls.representative(a))?;
                    let mut row: Vec<(usize, f64)> =
                        raw.into_iter().filter(|&(_, p)| p >= DROP_THRESHOLD).collect();
                    let kept: f64 = row.iter().map(|e| e.1).sum();
                    let escaped = 1.0 - kept;
                    if escaped >= DROP_THRESHOLD {
                        row.push((sink, escaped));
                    }
                    Ok((a, row))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = rows;
    rows.push(vec![(0, vec![(sink, 1.0)])]);
    let mut names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    names.push(SINK_NAME.to_string());
    let actions = (0..controls.len()).map(|j| format!("u{j}")).collect();
    let model = DiscreteModel::from_rows(names, actions, rows)?.checked()?;
    log::info!(
        "abstraction: {n} cells, {} controls, {} nonzeros, δ = {delta}",
        controls.len(),
        model.num_nonzeros()
    );
    Ok(Abstraction {
        model,
        states,
        controls,
        delta,
        volume: region.volume(),
        lipschitz: cont.lipschitz(),
        sink,
    })
}

/// Approximate PCIS together with the abstraction it was computed on.
#[derive(Clone, Debug)]
pub struct ApproxResult {
    pub result: PcisResult,
    pub abstraction: Abstraction,
}

impl ApproxResult {
    /// The retained cells as a region of the original state space.
    pub fn region(&self) -> Option<Region> {
        self.abstraction.region_of(&self.result.set)
    }
}

/// Approximate N-step ε-PCIS: the shrink loop on the abstraction with per-round threshold
/// ε̂ = ε + τ₀(P_i)δ, or ε itself when `ignore_error` is set.
pub fn approx_finite_pcis(
    cont: &ContinuousModel,
    region: &Region,
    n: usize,
    epsilon: f64,
    spec: &GridSpec,
    ignore_error: bool,
) -> Result<ApproxResult> {
    let abstraction = abstract_model(cont, region, spec)?;
    approx_finite_pcis_on(abstraction, n, epsilon, ignore_error)
}

/// [`approx_finite_pcis`] on a prebuilt abstraction.
pub fn approx_finite_pcis_on(
    abstraction: Abstraction,
    n: usize,
    epsilon: f64,
    ignore_error: bool,
) -> Result<ApproxResult> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(PcisError::InvalidArgument("horizon must be at least 1".into()));
    }
    let err = abstraction.error_model(n);
    if !ignore_error {
        if epsilon >= 1.0 {
            return Err(PcisError::InvalidArgument(
                "a certified result needs ε < 1".into(),
            ));
        }
        let map = error_bound(&err, 0, epsilon);
        if !map.feasible {
            return Err(PcisError::InfeasibleGridSize {
                delta: err.delta,
                max_delta: map.max_delta,
            });
        }
    }
    let model = &abstraction.model;
    let grid = &abstraction.states;
    let mut last_tau0_delta = 0.0;
    let shrink = shrink_loop(model.num_states(), &abstraction.cells(), |p, _| {
        let (values, policy) = dp_backward(model, p, n)?;
        let tau0_delta = err.with_volume(grid.volume_of(p)).tau0() * err.delta;
        last_tau0_delta = tau0_delta;
        let threshold = if ignore_error { epsilon } else { epsilon + tau0_delta };
        Ok(Round {
            values: values.initial().to_vec(),
            slack: 0.0,
            policy: ResultPolicy::Markov(policy),
            threshold,
        })
    })?;
    let result = PcisResult {
        set: shrink.set,
        probabilities: shrink.probabilities,
        policy: shrink.policy,
        trace: shrink.trace,
        iterations: shrink.iterations,
        epsilon,
        threshold: if shrink.threshold.is_nan() { epsilon } else { shrink.threshold },
        horizon: Horizon::Finite(n),
        method: Method::Dp,
        certification: if ignore_error {
            Certification::Uncertified
        } else {
            Certification::Certified
        },
        tau0_delta: Some(last_tau0_delta),
        diagnostics: shrink.diagnostics,
    };
    Ok(ApproxResult {
        result,
        abstraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearDynamics, Noise, NoiseKind};

    fn thermal() -> (ContinuousModel, Region) {
        let dynamics = LinearDynamics {
            a: vec![vec![0.9]],
            b: vec![vec![1.0]],
            c: vec![1.5],
            noise: Noise {
                kind: NoiseKind::Gaussian,
                sigma: 0.5,
                truncation: None,
            },
        };
        let m = ContinuousModel::linear(dynamics, None, AxisBox::from_bounds(&[[-2.0, 2.0]]).unwrap())
            .unwrap();
        (m, Region::from_box(AxisBox::from_bounds(&[[23.0, 28.0]]).unwrap()))
    }

    #[test]
    fn one_dimensional_split() {
        let (m, q) = thermal();
        let (g, _, _) = build_grids(&m, &q, &GridSpec::Delta(0.05), DEFAULT_MAX_CELLS).unwrap();
        assert_eq!(g.len(), 100);
        assert!((g.representative(0)[0] - 23.025).abs() < 1e-12);
        assert!((g.representative(1)[0] - 23.075).abs() < 1e-12);
        assert!(g.grid_size() <= 0.05 + 1e-15);
    }

    #[test]
    fn square_grid_diameters() {
        let dynamics = LinearDynamics {
            a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            b: vec![vec![1.0], vec![1.0]],
            c: vec![],
            noise: Noise {
                kind: NoiseKind::Gaussian,
                sigma: 0.1,
                truncation: None,
            },
        };
        let m = ContinuousModel::linear(dynamics, None, AxisBox::from_bounds(&[[-0.25, 0.25]]).unwrap())
            .unwrap();
        let q = Region::from_box(AxisBox::from_bounds(&[[-0.5, 0.5], [-0.5, 0.5]]).unwrap());
        let delta = 0.02 * 2f64.sqrt();
        let (g, _, _) = build_grids(&m, &q, &GridSpec::Delta(delta), DEFAULT_MAX_CELLS).unwrap();
        assert_eq!(g.len(), 2500);
        assert!((0..g.len()).all(|i| g.diameter(i) <= delta + 1e-12));
    }

    #[test]
    fn zero_delta_is_rejected() {
        let (m, q) = thermal();
        assert!(build_grids(&m, &q, &GridSpec::Delta(0.0), DEFAULT_MAX_CELLS).is_err());
    }

    #[test]
    fn cell_cap_is_enforced() {
        let (m, q) = thermal();
        let err = build_grids(&m, &q, &GridSpec::Delta(1e-3), 1000).unwrap_err();
        assert!(err.to_string().starts_with("grid too fine"));
    }

    #[test]
    fn half_open_location() {
        let (m, q) = thermal();
        let (g, _, _) = build_grids(&m, &q, &GridSpec::Delta(0.05), DEFAULT_MAX_CELLS).unwrap();
        assert_eq!(g.locate(&[23.0]), Some(0));
        assert_eq!(g.locate(&[23.05]), Some(1));
        assert_eq!(g.locate(&[28.0]), Some(99));
        assert_eq!(g.locate(&[28.01]), None);
    }

    #[test]
    fn error_bound_arithmetic() {
        let err = ErrorModel {
            volume: 1.0,
            lipschitz: 0.5,
            delta: 0.005,
            horizon: 10,
        };
        assert_eq!(err.tau(10), 0.0);
        assert_eq!(err.tau0(), 20.0);
        let map = error_bound(&err, 0, 0.8);
        assert!((map.eps_hat - 0.9).abs() < 1e-12);
        assert!((map.max_delta - 0.01).abs() < 1e-12);
        assert!(map.feasible);
    }

    #[test]
    fn thermal_rows_sum_to_one_with_sink() {
        let (m, q) = thermal();
        let spec = GridSpec::Counts {
            state: vec![100],
            control: vec![41],
        };
        let abs = abstract_model(&m, &q, &spec).unwrap();
        assert_eq!(abs.model.num_states(), 101);
        for x in 0..abs.model.num_states() {
            for (_, row) in abs.model.rows_of(x) {
                assert!((row.mass() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_delta_reports_maximum() {
        let (m, q) = thermal();
        let err = approx_finite_pcis(&m, &q, 50, 0.9, &GridSpec::Delta(0.05), false).unwrap_err();
        assert!(matches!(err, PcisError::InfeasibleGridSize { .. }), "{err}");
    }
}
