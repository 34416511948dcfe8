//! Markov decision process around the swimmer: observations, the stacked
//! state window, reward and the episode lifecycle.

mod fish;
pub mod gridworld;

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use fish::{EnvConfig, FishEnv, WarmStart};

/// Length of one observation.
pub const OBS_DIM: usize = 6;
/// Observations kept in the window.
pub const WINDOW: usize = 9;
/// Flattened window plus the previous-action entry.
pub const STATE_DIM: usize = OBS_DIM * WINDOW + 1;
/// Reward for leaving the allowed region.
pub const BOUNDARY_PENALTY: f64 = -100.0;

/// What the agent sees after each half cycle. Lengths are in body lengths,
/// rates per half period.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Observation {
    /// Head tip minus target.
    pub x: f64,
    pub y: f64,
    /// Heading in `[0, 2 pi)`.
    pub theta: f64,
    pub u_bar: [f64; 2],
    pub omega_bar: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [self.x, self.y, self.theta, self.u_bar[0], self.u_bar[1], self.omega_bar]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = theta.rem_euclid(tau);
    // rem_euclid can round up to exactly 2 pi for tiny negative inputs
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Observation from the head tip and the displacement and rotation of the
/// body over a half cycle. `half_periods` is the elapsed time in half
/// periods (1 for a full step).
pub fn observe(
    tip: [f64; 2],
    target: [f64; 2],
    heading: f64,
    displacement: [f64; 2],
    rotation: f64,
    half_periods: f64,
) -> Observation {
    Observation {
        x: tip[0] - target[0],
        y: tip[1] - target[1],
        theta: wrap_angle(heading),
        u_bar: [displacement[0] / half_periods, displacement[1] / half_periods],
        omega_bar: rotation / half_periods,
    }
}

/// The nine most recent observations, newest first, and the previous
/// action scaled to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateWindow {
    slots: VecDeque<Observation>,
    prev_action: f64,
}

impl StateWindow {
    /// A window filled with copies of `obs`.
    pub fn filled(obs: Observation, prev_action: f64) -> Self {
        StateWindow {
            slots: std::iter::repeat(obs).take(WINDOW).collect(),
            prev_action,
        }
    }

    /// Drops the oldest observation and puts `obs` in slot 0.
    pub fn push(&mut self, obs: Observation, prev_action: f64) {
        self.slots.pop_back();
        self.slots.push_front(obs);
        self.prev_action = prev_action;
    }

    /// Slot `j` holds the observation from `j` steps ago.
    pub fn slot(&self, j: usize) -> &Observation {
        &self.slots[j]
    }

    pub fn prev_action(&self) -> f64 {
        self.prev_action
    }

    /// `[slot 0, ..., slot 8, previous action]`, 55 entries.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(STATE_DIM);
        for o in &self.slots {
            v.extend_from_slice(&o.to_array());
        }
        v.push(self.prev_action);
        v
    }
}

/// Distance of the tip from the target, in body lengths.
pub fn distance(tip: [f64; 2], target: [f64; 2]) -> f64 {
    (tip[0] - target[0]).hypot(tip[1] - target[1])
}

/// Axis-aligned region the tip must stay in, in body lengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }
}

/// Negated distance to the target, or the boundary penalty outside `omega`.
pub fn reward(tip: [f64; 2], target: [f64; 2], omega: &Region) -> f64 {
    if omega.contains(tip) {
        -distance(tip, target)
    } else {
        BOUNDARY_PENALTY
    }
}

/// Discrete action values, one signed maximum tail deflection per index.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    pub values: Vec<f64>,
}

impl Default for ActionSpec {
    fn default() -> Self {
        ActionSpec {
            values: vec![-0.5, -0.25, 0.0, 0.25, 0.5],
        }
    }
}

impl ActionSpec {
    pub fn new(values: Vec<f64>, cap: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config("need at least two actions".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= cap)) {
            return Err(Error::Config(format!("action {v} exceeds the amplitude cap {cap}")));
        }
        Ok(ActionSpec { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> Result<f64> {
        self.values.get(index).copied().ok_or(Error::ActionOutOfRange {
            index,
            count: self.values.len(),
        })
    }

    /// Index of the value closest to zero (lowest index on ties).
    pub fn zero_index(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if v.abs() < self.values[best].abs() {
                best = k;
            }
        }
        best
    }

    /// `index` mapped linearly onto `[-1, 1]`.
    pub fn normalized(&self, index: usize) -> f64 {
        2.0 * index as f64 / (self.values.len() - 1) as f64 - 1.0
    }
}

/// How an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Captured,
    /// Left the allowed region or the grid.
    WashedAway,
    /// Hit the cylinder.
    Collided,
    Timeout,
    Diverged,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Captured => "captured",
            Outcome::WashedAway => "washed_away",
            Outcome::Collided => "collided",
            Outcome::Timeout => "timeout",
            Outcome::Diverged => "diverged",
        }
    }

    /// Whether the episode ended in a true terminal state. A timeout is
    /// only a cut-off, so its last transition is still bootstrapped.
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Outcome::Timeout)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Set when `done`.
    pub outcome: Option<Outcome>,
}

impl Step {
    /// Whether the next state should not be bootstrapped.
    pub fn terminal(&self) -> bool {
        self.outcome.is_some_and(|o| o.is_terminal())
    }
}

/// Anything the agent can be trained on.
pub trait Environment {
    fn action_count(&self) -> usize;
    fn state_dim(&self) -> usize;
    /// Starts an episode. `start` overrides the random start where the
    /// environment has one (the x coordinate for the swimmer).
    fn reset_at(&mut self, seed: u64, start: Option<f64>) -> Result<Vec<f64>>;
    fn step(&mut self, action: usize) -> Result<Step>;
    /// Distance to the goal in environment units, for evaluation summaries.
    fn goal_distance(&self) -> f64;

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.reset_at(seed, None)
    }
}

/// One row of an episode trajectory log.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub control_step: usize,
    pub t_ticks: u64,
    pub x_tip: f64,
    pub y_tip: f64,
    pub theta: f64,
    pub u_bar: [f64; 2],
    pub omega_bar: f64,
    /// `None` on the reset row.
    pub action: Option<usize>,
    pub reward: f64,
    pub done: bool,
}

pub const TRAJECTORY_HEADER: &str =
    "control_step,t_ticks,x_tip,y_tip,theta,u_bar_x,u_bar_y,omega_bar,action_index,reward,done";

/// CSV with a header row; the reset row has action index -1.
pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let action = r.action.map_or(-1, |a| a as i64);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.control_step,
            r.t_ticks,
            r.x_tip,
            r.y_tip,
            r.theta,
            r.u_bar[0],
            r.u_bar[1],
            r.omega_bar,
            action,
            r.reward,
            r.done as u8
        );
    }
    out
}
