use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PcisError, Result};

/// Allowed drift of a kernel row sum away from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Sorted, duplicate-free set of state indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateSet(Vec<usize>);

impl StateSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    /// All indices `0..n`.
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.0.binary_search(&state).is_ok()
    }

    /// Position of `state` inside the sorted member list.
    pub fn position(&self, state: usize) -> Option<usize> {
        self.0.binary_search(&state).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.0.iter().all(|&s| other.contains(s))
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet::from_indices(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        StateSet(self.iter().filter(|&s| other.contains(s)).collect())
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        StateSet(self.iter().filter(|&s| !other.contains(s)).collect())
    }

    /// Membership bitmap over `0..n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &s in &self.0 {
            if s < n {
                mask[s] = true;
            }
        }
        mask
    }
}

impl FromIterator<usize> for StateSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        StateSet::from_indices(iter)
    }
}

/// One sparse kernel row T(·|x,u); targets are sorted and unique.
#[derive(Clone, Copy, Debug)]
pub struct KernelRow<'a> {
    pub targets: &'a [u32],
    pub probs: &'a [f64],
}

impl<'a> KernelRow<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.targets
            .iter()
            .zip(self.probs.iter())
            .map(|(&t, &p)| (t as usize, p))
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability of landing in the states flagged by `mask`.
    pub fn mass_in(&self, mask: &[bool]) -> f64 {
        self.iter().filter(|&(t, _)| mask[t]).map(|(_, p)| p).sum()
    }

    /// Σ_y values(y)·T(y|x,u).
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.iter().map(|(t, p)| values[t] * p).sum()
    }

    pub fn prob_of(&self, target: usize) -> f64 {
        match self.targets.binary_search(&(target as u32)) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }
}

/// Finite Markov controlled process with a sparse stochastic kernel.
///
/// Kernel rows live in one compressed array. Each state owns a contiguous
/// range of "slots", one per admissible action, in the order the actions
/// were declared.
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    states: Vec<String>,
    actions: Vec<String>,
    index: HashMap<String, usize>,
    action_index: HashMap<String, usize>,
    slot_start: Vec<usize>,
    slot_action: Vec<usize>,
    row_start: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

/// Row data for one (state, action) pair, indexed by state and action position.
pub type RawRow = (usize, Vec<(usize, f64)>);

impl DiscreteModel {
    /// Assembles a model from per-state lists of `(action, row)` pairs.
    ///
    /// Only structure is checked here (indices in range, no repeated action
    /// for a state); probabilities are left to [`validate`].
    pub fn from_rows(
        states: Vec<String>,
        actions: Vec<String>,
        rows: Vec<Vec<RawRow>>,
    ) -> Result<Self> {
        if rows.len() != states.len() {
            return Err(PcisError::InvalidArgument(format!(
                "{} states but {} row groups",
                states.len(),
                rows.len()
            )));
        }
        let n = states.len();
        let mut slot_start = Vec::with_capacity(n + 1);
        let mut slot_action = Vec::new();
        let mut row_start = vec![0];
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        for (x, group) in rows.into_iter().enumerate() {
            slot_start.push(slot_action.len());
            let mut seen = Vec::with_capacity(group.len());
            for (action, mut entries) in group {
                if action >= actions.len() {
                    return Err(PcisError::InvalidArgument(format!(
                        "action index {action} out of range at state `{}`",
                        states[x]
                    )));
                }
                if seen.contains(&action) {
                    return Err(PcisError::InvalidArgument(format!(
                        "action `{}` listed twice at state `{}`",
                        actions[action], states[x]
                    )));
                }
                seen.push(action);
                entries.sort_by_key(|&(t, _)| t);
                let mut last: Option<usize> = None;
                for (t, p) in entries {
                    if t >= n {
                        return Err(PcisError::StateOutOfRange(t));
                    }
                    if last == Some(t) {
                        *probs.last_mut().unwrap() += p;
                    } else {
                        targets.push(t as u32);
                        probs.push(p);
                        last = Some(t);
                    }
                }
                slot_action.push(action);
                row_start.push(targets.len());
            }
        }
        slot_start.push(slot_action.len());
        let mut index = HashMap::with_capacity(n);
        for (i, s) in states.iter().enumerate() {
            index.entry(s.clone()).or_insert(i);
        }
        let mut action_index = HashMap::with_capacity(actions.len());
        for (i, a) in actions.iter().enumerate() {
            action_index.entry(a.clone()).or_insert(i);
        }
        Ok(Self {
            states,
            actions,
            index,
            action_index,
            slot_start,
            slot_action,
            row_start,
            targets,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn state_name(&self, x: usize) -> &str {
        &self.states[x]
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.actions[a]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_index.get(name).copied()
    }

    /// Resolves state names into a [`StateSet`].
    pub fn state_set<S: AsRef<str>>(&self, names: &[S]) -> Result<StateSet> {
        names
            .iter()
            .map(|n| {
                self.state_index(n.as_ref())
                    .ok_or_else(|| PcisError::UnknownState(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(StateSet::from_indices)
    }

    pub fn all_states(&self) -> StateSet {
        StateSet::full(self.num_states())
    }

    /// The admissible action set U_x, in declaration order.
    pub fn actions_of(&self, x: usize) -> &[usize] {
        &self.slot_action[self.slot_start[x]..self.slot_start[x + 1]]
    }

    /// Kernel row of the `k`-th admissible action of `x`.
    pub fn row(&self, x: usize, k: usize) -> KernelRow<'_> {
        let slot = self.slot_start[x] + k;
        let (a, b) = (self.row_start[slot], self.row_start[slot + 1]);
        KernelRow {
            targets: &self.targets[a..b],
            probs: &self.probs[a..b],
        }
    }

    /// Kernel row of action `action` at `x`, if admissible.
    pub fn row_for(&self, x: usize, action: usize) -> Option<KernelRow<'_>> {
        self.actions_of(x)
            .iter()
            .position(|&a| a == action)
            .map(|k| self.row(x, k))
    }

    /// `(action, row)` pairs for every admissible action of `x`.
    pub fn rows_of(&self, x: usize) -> impl Iterator<Item = (usize, KernelRow<'_>)> + '_ {
        self.actions_of(x)
            .iter()
            .enumerate()
            .map(move |(k, &a)| (a, self.row(x, k)))
    }

    /// Total number of (state, admissible action) pairs.
    pub fn num_pairs(&self) -> usize {
        self.slot_action.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.targets.len()
    }

    /// Number of (state, action) pairs whose state lies in `set`.
    pub fn num_pairs_in(&self, set: &StateSet) -> usize {
        set.iter().map(|x| self.actions_of(x).len()).sum()
    }

    fn renormalize_rows(&mut self) {
        for slot in 0..self.slot_action.len() {
            let (a, b) = (self.row_start[slot], self.row_start[slot + 1]);
            let sum: f64 = self.probs[a..b].iter().sum();
            if sum > 0.0 && sum != 1.0 {
                for p in &mut self.probs[a..b] {
                    *p /= sum;
                }
            }
        }
    }

    /// Validates, renormalizes rows within [`ROW_SUM_TOLERANCE`] and rejects
    /// anything else.
    pub fn checked(mut self) -> Result<Self> {
        let report = validate(&self);
        if !report.is_valid() {
            return Err(PcisError::InvalidModel(
                report.violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        self.renormalize_rows();
        Ok(self)
    }
}

/// A single defect found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    RowSum {
        state: String,
        action: String,
        sum: f64,
    },
    NoAdmissibleAction {
        state: String,
    },
    BadProbability {
        state: String,
        action: String,
        target: String,
        p: f64,
    },
    DuplicateState(String),
    DuplicateAction(String),
}

pub(crate) fn fmt_num(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "row-sum {} ≠ 1 at ({state}, {action})", fmt_num(*sum))
            }
            Violation::NoAdmissibleAction { state } => {
                write!(f, "no admissible action at {state}")
            }
            Violation::BadProbability {
                state,
                action,
                target,
                p,
            } => write!(
                f,
                "bad probability {} for {target} at ({state}, {action})",
                fmt_num(*p)
            ),
            Violation::DuplicateState(s) => write!(f, "duplicate state identifier {s}"),
            Violation::DuplicateAction(a) => write!(f, "duplicate action identifier {a}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every kernel invariant; an empty report means the model is valid.
pub fn validate(model: &DiscreteModel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashMap::new();
    for s in &model.states {
        if seen.insert(s.as_str(), ()).is_some() {
            violations.push(Violation::DuplicateState(s.clone()));
        }
    }
    let mut seen = HashMap::new();
    for a in &model.actions {
        if seen.insert(a.as_str(), ()).is_some() {
            violations.push(Violation::DuplicateAction(a.clone()));
        }
    }
    for x in 0..model.num_states() {
        if model.actions_of(x).is_empty() {
            violations.push(Violation::NoAdmissibleAction {
                state: model.states[x].clone(),
            });
        }
        for (a, row) in model.rows_of(x) {
            for (t, p) in row.iter() {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    violations.push(Violation::BadProbability {
                        state: model.states[x].clone(),
                        action: model.actions[a].clone(),
                        target: model.states[t].clone(),
                        p,
                    });
                }
            }
            let sum = row.mass();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum {
                    state: model.states[x].clone(),
                    action: model.actions[a].clone(),
                    sum,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Name-based construction of a [`DiscreteModel`].
#[derive(Clone, Debug, Default)]
pub struct DiscreteModelBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    state_index: HashMap<String, usize>,
    action_index: HashMap<String, usize>,
    admissible: BTreeMap<usize, Vec<usize>>,
    entries: BTreeMap<(usize, usize), BTreeMap<usize, f64>>,
}

impl DiscreteModelBuilder {
    pub fn new<S: AsRef<str>, A: AsRef<str>>(states: &[S], actions: &[A]) -> Self {
        let states: Vec<String> = states.iter().map(|s| s.as_ref().to_string()).collect();
        let actions: Vec<String> = actions.iter().map(|a| a.as_ref().to_string()).collect();
        let mut state_index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            state_index.entry(s.clone()).or_insert(i);
        }
        let mut action_index = HashMap::new();
        for (i, a) in actions.iter().enumerate() {
            action_index.entry(a.clone()).or_insert(i);
        }
        Self {
            states,
            actions,
            state_index,
            action_index,
            ..Default::default()
        }
    }

    fn state(&self, name: &str) -> Result<usize> {
        self.state_index
            .get(name)
            .copied()
            .ok_or_else(|| PcisError::UnknownState(name.to_string()))
    }

    fn action(&self, name: &str) -> Result<usize> {
        self.action_index
            .get(name)
            .copied()
            .ok_or_else(|| PcisError::UnknownAction(name.to_string()))
    }

    /// Restricts U_x; by default every declared action is admissible.
    pub fn admissible<A: AsRef<str>>(&mut self, state: &str, actions: &[A]) -> Result<&mut Self> {
        let x = self.state(state)?;
        let mut list = Vec::with_capacity(actions.len());
        for a in actions {
            let a = self.action(a.as_ref())?;
            if !list.contains(&a) {
                list.push(a);
            }
        }
        list.sort_unstable();
        self.admissible.insert(x, list);
        Ok(self)
    }

    /// Adds `p` to T(y|x,u).
    pub fn transition(&mut self, x: &str, u: &str, y: &str, p: f64) -> Result<&mut Self> {
        let (x, u, y) = (self.state(x)?, self.action(u)?, self.state(y)?);
        *self.entries.entry((x, u)).or_default().entry(y).or_insert(0.0) += p;
        Ok(self)
    }

    fn admissible_of(&self, x: usize) -> Vec<usize> {
        self.admissible
            .get(&x)
            .cloned()
            .unwrap_or_else(|| (0..self.actions.len()).collect())
    }

    fn assemble(&self, strict: bool) -> Result<DiscreteModel> {
        let mut rows = Vec::with_capacity(self.states.len());
        for x in 0..self.states.len() {
            let mut group = Vec::new();
            for a in self.admissible_of(x) {
                match self.entries.get(&(x, a)) {
                    Some(row) => group.push((a, row.iter().map(|(&t, &p)| (t, p)).collect())),
                    None if strict => {
                        return Err(PcisError::MissingRow {
                            state: self.states[x].clone(),
                            action: self.actions[a].clone(),
                        })
                    }
                    None => group.push((a, Vec::new())),
                }
            }
            rows.push(group);
        }
        DiscreteModel::from_rows(self.states.clone(), self.actions.clone(), rows)
    }

    /// Builds, validates and renormalizes. Every admissible (state, action)
    /// pair needs at least one transition.
    pub fn build(&self) -> Result<DiscreteModel> {
        self.assemble(true)?.checked()
    }

    /// Builds without any probability checks; missing rows become empty.
    pub fn build_unchecked(&self) -> DiscreteModel {
        self.assemble(false)
            .expect("builder indices are always in range")
    }
}

/// Kernel rows of a model restricted to a subset of its states.
///
/// Rows keep only the entries whose target lies in the subset, re-indexed to
/// positions in the subset, so each row is substochastic.
#[derive(Clone, Debug)]
pub struct Restriction {
    members: StateSet,
    rows: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
}

impl Restriction {
    pub fn members(&self) -> &StateSet {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `(action, row)` pairs of the member at `local` position.
    pub fn rows(&self, local: usize) -> &[(usize, Vec<(usize, f64)>)] {
        &self.rows[local]
    }

    pub fn local_index(&self, state: usize) -> Option<usize> {
        self.members.position(state)
    }

    pub fn global_index(&self, local: usize) -> usize {
        self.members.as_slice()[local]
    }
}

/// Restricts the kernel of `model` to `subset`.
pub fn restrict(model: &DiscreteModel, subset: &StateSet) -> Result<Restriction> {
    if subset.is_empty() {
        return Err(PcisError::EmptyRestriction);
    }
    if let Some(bad) = subset.iter().find(|&s| s >= model.num_states()) {
        return Err(PcisError::StateOutOfRange(bad));
    }
    let rows = subset
        .iter()
        .map(|x| {
            model
                .rows_of(x)
                .map(|(a, row)| {
                    let kept = row
                        .iter()
                        .filter_map(|(t, p)| subset.position(t).map(|l| (l, p)))
                        .collect();
                    (a, kept)
                })
                .collect()
        })
        .collect();
    Ok(Restriction {
        members: subset.clone(),
        rows,
    })
}
