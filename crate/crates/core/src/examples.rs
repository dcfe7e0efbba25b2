//! Built-in example models: a robot on a grid, a room thermal model and a
//! two-dimensional linear system with Gaussian noise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretize::GridSpec;
use crate::error::{PcisError, Result};
use crate::model::{
    AxisBox, ContinuousModel, DiscreteModel, DiscreteModelBuilder, LinearDynamics, LoadedModel,
    Noise, NoiseKind, Region, StateSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleName {
    RobotGrid,
    Thermal,
    DoubleIntegratorLike,
}

impl ExampleName {
    pub const ALL: [ExampleName; 3] = [
        ExampleName::RobotGrid,
        ExampleName::Thermal,
        ExampleName::DoubleIntegratorLike,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleName::RobotGrid => "robot-grid",
            ExampleName::Thermal => "thermal",
            ExampleName::DoubleIntegratorLike => "double-integrator-like",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ExampleName::RobotGrid => {
                "robot on a 4x4 grid with orientation: 64 states, actions FR/BK/TRFR/TLFR"
            }
            ExampleName::Thermal => "room temperature x+ = 0.9x + u + 1.5 + w, sigma = 0.5, |u| <= 2, Q = [23, 28]",
            ExampleName::DoubleIntegratorLike => {
                "x+ = [[1.6, 1.1], [-0.7, 1.2]]x + [1; 1]u + w, sigma = 1/30, |u| <= 0.25, Q = [-0.5, 0.5]^2"
            }
        }
    }

    /// The model together with its safe set or region of interest.
    pub fn load(&self) -> Result<LoadedModel> {
        Ok(match self {
            ExampleName::RobotGrid => {
                let (model, safe) = robot_grid();
                LoadedModel::Discrete {
                    model,
                    safe_set: Some(safe),
                }
            }
            ExampleName::Thermal => {
                let (model, region) = thermal()?;
                LoadedModel::Continuous {
                    model,
                    region: Some(region),
                }
            }
            ExampleName::DoubleIntegratorLike => {
                let (model, region) = double_integrator_like(DEFAULT_U_BOUND)?;
                LoadedModel::Continuous {
                    model,
                    region: Some(region),
                }
            }
        })
    }

    /// Grid used when no grid flags are given.
    pub fn default_grid(&self) -> Option<GridSpec> {
        match self {
            ExampleName::RobotGrid => None,
            ExampleName::Thermal => Some(GridSpec::Counts {
                state: vec![100],
                control: vec![41],
            }),
            ExampleName::DoubleIntegratorLike => Some(GridSpec::Counts {
                state: vec![50, 50],
                control: vec![11],
            }),
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = PcisError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                PcisError::InvalidArgument(format!(
                    "unknown example `{s}` (expected one of robot-grid, thermal, double-integrator-like)"
                ))
            })
    }
}

pub const ROBOT_ACTIONS: [&str; 4] = ["FR", "BK", "TRFR", "TLFR"];
/// Counter-clockwise order.
const ORIENTATIONS: [char; 4] = ['E', 'N', 'W', 'S'];
pub const ROBOT_OBSTACLES: [(i32, i32); 2] = [(2, 2), (2, 3)];
pub const ROBOT_ABSORBING: (i32, i32) = (3, 3);

fn robot_state(x: i32, y: i32, o: usize) -> String {
    format!("x{x}y{y}{}", ORIENTATIONS[o])
}

fn heading(o: usize) -> (i32, i32) {
    [(1, 0), (0, 1), (-1, 0), (0, -1)][o]
}

/// Robot grid MDP and its safe set (every state off the obstacle cells).
///
/// Cells (x, y) ∈ {1..4}², orientation E/N/W/S. FR moves one cell ahead with
/// probability 0.8 and drifts diagonally left or right with 0.1 each; BK does
/// the same backwards. TRFR (TLFR) turns right (left) and moves with
/// probability 0.95, moves without turning with 0.025 and turns around and
/// moves with 0.025. Obstacle cells and the absorbing cell (3, 3) keep the
/// robot in place. Leaving the grid is a collision and lands on obstacle
/// cell (2, 2) with the resulting orientation.
pub fn robot_grid() -> (DiscreteModel, StateSet) {
    let mut states = Vec::with_capacity(64);
    for x in 1..=4 {
        for y in 1..=4 {
            for o in 0..4 {
                states.push(robot_state(x, y, o));
            }
        }
    }
    let mut b = DiscreteModelBuilder::new(&states, &ROBOT_ACTIONS);
    let left = |o: usize| (o + 1) % 4;
    let right = |o: usize| (o + 3) % 4;
    let back = |o: usize| (o + 2) % 4;
    // Target of moving in direction `d` (plus lateral `lat`), ending with orientation `o`.
    let mv = |x: i32, y: i32, o: usize, d: usize, lat: Option<usize>| {
        let (mut dx, mut dy) = heading(d);
        if let Some(l) = lat {
            dx += heading(l).0;
            dy += heading(l).1;
        }
        let (nx, ny) = (x + dx, y + dy);
        if (1..=4).contains(&nx) && (1..=4).contains(&ny) {
            robot_state(nx, ny, o)
        } else {
            robot_state(ROBOT_OBSTACLES[0].0, ROBOT_OBSTACLES[0].1, o)
        }
    };
    for x in 1..=4 {
        for y in 1..=4 {
            for o in 0..4 {
                let s = robot_state(x, y, o);
                let stuck = (x, y) == ROBOT_ABSORBING || ROBOT_OBSTACLES.contains(&(x, y));
                for a in ROBOT_ACTIONS {
                    let targets: Vec<(String, f64)> = if stuck {
                        vec![(s.clone(), 1.0)]
                    } else {
                        match a {
                            "FR" | "BK" => {
                                let d = if a == "FR" { o } else { back(o) };
                                vec![
                                    (mv(x, y, o, d, None), 0.8),
                                    (mv(x, y, o, d, Some(left(d))), 0.1),
                                    (mv(x, y, o, d, Some(right(d))), 0.1),
                                ]
                            }
                            _ => {
                                let t = if a == "TRFR" { right(o) } else { left(o) };
                                vec![
                                    (mv(x, y, t, t, None), 0.95),
                                    (mv(x, y, o, o, None), 0.025),
                                    (mv(x, y, back(o), back(o), None), 0.025),
                                ]
                            }
                        }
                    };
                    for (y_name, p) in targets {
                        b.transition(&s, a, &y_name, p).expect("robot states are valid");
                    }
                }
            }
        }
    }
    let model = b.build().expect("robot grid kernel is stochastic");
    let safe = StateSet::from_indices((0..model.num_states()).filter(|&i| {
        let name = model.state_name(i);
        let x = name[1..2].parse::<i32>().unwrap();
        let y = name[3..4].parse::<i32>().unwrap();
        !ROBOT_OBSTACLES.contains(&(x, y))
    }));
    (model, safe)
}

/// States of the absorbing cell, one per orientation.
pub fn robot_absorbing_states(model: &DiscreteModel) -> StateSet {
    StateSet::from_indices(
        (0..4).filter_map(|o| model.state_index(&robot_state(ROBOT_ABSORBING.0, ROBOT_ABSORBING.1, o))),
    )
}

/// States on obstacle cells.
pub fn robot_obstacle_states(model: &DiscreteModel) -> StateSet {
    StateSet::from_indices(ROBOT_OBSTACLES.iter().flat_map(|&(x, y)| {
        (0..4).filter_map(move |o| model.state_index(&robot_state(x, y, o)))
    }))
}

/// Room temperature x⁺ = A x + B u + C̃ y + w with A = 0.9, B = 1, C̃ = 0.1,
/// outside temperature y = 15, σ = 0.5, |u| ≤ 2, on Q = [23, 28].
///
/// L is the Gaussian gradient bound e^{-1/2}(2π)^{-1/2}σ^{-2}·max(|A|, |B|)
/// ≈ 0.9679.
pub fn thermal() -> Result<(ContinuousModel, Region)> {
    let dynamics = LinearDynamics {
        a: vec![vec![0.9]],
        b: vec![vec![1.0]],
        c: vec![0.1 * 15.0],
        noise: Noise {
            kind: NoiseKind::Gaussian,
            sigma: 0.5,
            truncation: None,
        },
    };
    let model = ContinuousModel::linear(dynamics, None, AxisBox::from_bounds(&[[-2.0, 2.0]])?)?;
    Ok((model, Region::from_box(AxisBox::from_bounds(&[[23.0, 28.0]])?)))
}

/// Control bound of [`double_integrator_like`]; the alternative reading of
/// the source bound is 0.1.
pub const DEFAULT_U_BOUND: f64 = 0.25;

/// x⁺ = A x + B u + w with A = [[1.6, 1.1], [−0.7, 1.2]], B = [1; 1],
/// w ~ N(0, σ²I), σ = 1/30, |u| ≤ `u_bound`, on Q = [−0.5, 0.5]².
///
/// L is the Gaussian gradient bound e^{-1/2}(2π)^{-1}σ^{-3}·max(‖A‖₂, ‖B‖₂),
/// large enough that certified grids are impractical.
pub fn double_integrator_like(u_bound: f64) -> Result<(ContinuousModel, Region)> {
    if !(u_bound > 0.0 && u_bound.is_finite()) {
        return Err(PcisError::InvalidArgument(format!(
            "control bound must be positive, got {u_bound}"
        )));
    }
    let dynamics = LinearDynamics {
        a: vec![vec![1.6, 1.1], vec![-0.7, 1.2]],
        b: vec![vec![1.0], vec![1.0]],
        c: vec![],
        noise: Noise {
            kind: NoiseKind::Gaussian,
            sigma: 1.0 / 30.0,
            truncation: None,
        },
    };
    let model = ContinuousModel::linear(dynamics, None, AxisBox::from_bounds(&[[-u_bound, u_bound]])?)?;
    Ok((model, Region::from_box(AxisBox::from_bounds(&[[-0.5, 0.5], [-0.5, 0.5]])?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robot_grid_shape() {
        let (m, safe) = robot_grid();
        assert_eq!(m.num_states(), 64);
        assert_eq!(m.num_actions(), 4);
        assert_eq!(safe.len(), 56);
        assert_eq!(robot_absorbing_states(&m).len(), 4);
        assert!(robot_obstacle_states(&m).intersection(&safe).is_empty());
    }

    #[test]
    fn robot_forward_probabilities() {
        let (m, _) = robot_grid();
        let fr = m.action_index("FR").unwrap();
        let row = m.row_for(m.state_index("x3y1N").unwrap(), fr).unwrap();
        assert_eq!(row.prob_of(m.state_index("x3y2N").unwrap()), 0.8);
        assert_eq!(row.prob_of(m.state_index("x4y2N").unwrap()), 0.1);
        assert_eq!(row.prob_of(m.state_index("x2y2N").unwrap()), 0.1);
        // One drift leaves the grid, the other hits the obstacle.
        let x = m.state_index("x1y1N").unwrap();
        let row = m.row_for(x, fr).unwrap();
        assert_eq!(row.prob_of(m.state_index("x2y2N").unwrap()), 0.2);
        let trfr = m.action_index("TRFR").unwrap();
        let row = m.row_for(x, trfr).unwrap();
        assert_eq!(row.prob_of(m.state_index("x2y1E").unwrap()), 0.95);
    }

    #[test]
    fn thermal_lipschitz_constant() {
        let (m, q) = thermal().unwrap();
        assert!((m.lipschitz() - 0.24197 / 0.25).abs() < 1e-4);
        assert_eq!(q.volume(), 5.0);
    }

    #[test]
    fn names_round_trip() {
        for e in ExampleName::ALL {
            assert_eq!(e.as_str().parse::<ExampleName>().unwrap(), e);
        }
        assert!("nope".parse::<ExampleName>().is_err());
    }
}
