//! Deterministic 5×5 gridworld with a known optimal action-value function,
//! used to check the learning loop against value iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, Outcome, Step};
use crate::error::{Error, Result};

pub const SIZE: usize = 5;
pub const STATES: usize = SIZE * SIZE;
/// Up, down, left, right.
pub const ACTIONS: usize = 4;
const MOVES: [(i64, i64); ACTIONS] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

/// Every move costs 1; the episode ends on reaching the goal corner.
/// Moves into a wall leave the agent in place.
#[derive(Clone, Debug)]
pub struct GridWorld {
    pub goal: usize,
    pub max_steps: usize,
    pos: usize,
    steps: usize,
    active: bool,
}

impl Default for GridWorld {
    fn default() -> Self {
        GridWorld {
            goal: STATES - 1,
            max_steps: 50,
            pos: 0,
            steps: 0,
            active: false,
        }
    }
}

/// Cell reached from `s` by action `a`.
pub fn transition(s: usize, a: usize) -> usize {
    let (x, y) = ((s % SIZE) as i64, (s / SIZE) as i64);
    let (dx, dy) = MOVES[a];
    let nx = (x + dx).clamp(0, SIZE as i64 - 1);
    let ny = (y + dy).clamp(0, SIZE as i64 - 1);
    (ny as usize) * SIZE + nx as usize
}

pub fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; STATES];
    v[s] = 1.0;
    v
}

/// Optimal action values by value iteration, to convergence.
pub fn optimal_q(goal: usize, gamma: f64) -> Vec<[f64; ACTIONS]> {
    let mut v = vec![0.0; STATES];
    loop {
        let mut change: f64 = 0.0;
        for s in 0..STATES {
            if s == goal {
                continue;
            }
            let best = (0..ACTIONS)
                .map(|a| {
                    let n = transition(s, a);
                    -1.0 + if n == goal { 0.0 } else { gamma * v[n] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - v[s]).abs());
            v[s] = best;
        }
        if change < 1e-13 {
            break;
        }
    }
    (0..STATES)
        .map(|s| {
            let mut q = [0.0; ACTIONS];
            for (a, qa) in q.iter_mut().enumerate() {
                let n = transition(s, a);
                *qa = -1.0 + if n == goal { 0.0 } else { gamma * v[n] };
            }
            q
        })
        .collect()
}

/// Fraction of non-goal states where `policy` picks one of the optimal
/// actions (all actions within `1e-9` of the best count as optimal).
pub fn greedy_agreement(goal: usize, gamma: f64, policy: impl Fn(usize) -> usize) -> f64 {
    let q = optimal_q(goal, gamma);
    let mut hits = 0;
    for (s, qs) in q.iter().enumerate() {
        if s == goal {
            continue;
        }
        let best = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if qs[policy(s)] >= best - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (STATES - 1) as f64
}

impl GridWorld {
    pub fn position(&self) -> usize {
        self.pos
    }
}

impl Environment for GridWorld {
    fn action_count(&self) -> usize {
        ACTIONS
    }

    fn state_dim(&self) -> usize {
        STATES
    }

    /// Uniform random non-goal start, or cell `start` when given.
    fn reset_at(&mut self, seed: u64, start: Option<f64>) -> Result<Vec<f64>> {
        let pos = match start {
            Some(s) => s as usize,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = rng.gen_range(0..STATES - 1);
                if k >= self.goal {
                    k + 1
                } else {
                    k
                }
            }
        };
        if pos >= STATES || pos == self.goal {
            return Err(Error::Config(format!("start cell {pos} is not a valid non-goal cell")));
        }
        self.pos = pos;
        self.steps = 0;
        self.active = true;
        Ok(one_hot(pos))
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if !self.active {
            return Err(Error::EpisodeInactive);
        }
        if action >= ACTIONS {
            return Err(Error::ActionOutOfRange { index: action, count: ACTIONS });
        }
        self.pos = transition(self.pos, action);
        self.steps += 1;
        let outcome = if self.pos == self.goal {
            Some(Outcome::Captured)
        } else if self.steps >= self.max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        };
        self.active = outcome.is_none();
        Ok(Step {
            state: one_hot(self.pos),
            reward: -1.0,
            done: outcome.is_some(),
            outcome,
        })
    }

    fn goal_distance(&self) -> f64 {
        let (x, y) = (self.pos % SIZE, self.pos / SIZE);
        let (gx, gy) = (self.goal % SIZE, self.goal / SIZE);
        (x.abs_diff(gx) + y.abs_diff(gy)) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_values_follow_manhattan_distance() {
        let gamma = 0.9;
        let q = optimal_q(STATES - 1, gamma);
        for s in 0..STATES - 1 {
            let d = (4 - s % SIZE) + (4 - s / SIZE);
            let v = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exact = -(1.0 - gamma.powi(d as i32)) / (1.0 - gamma);
            assert!((v - exact).abs() < 1e-10, "state {s}: {v} vs {exact}");
        }
    }

    #[test]
    fn walls_hold_the_agent() {
        assert_eq!(transition(0, 1), 0);
        assert_eq!(transition(0, 2), 0);
        assert_eq!(transition(0, 3), 1);
        assert_eq!(transition(0, 0), 5);
    }

    #[test]
    fn reaching_the_goal_ends_the_episode() {
        let mut g = GridWorld::default();
        g.reset_at(0, Some(23.0)).unwrap();
        let st = g.step(3).unwrap();
        assert!(st.done && st.terminal());
        assert_eq!(g.goal_distance(), 0.0);
    }

    #[test]
    fn optimal_policy_agrees_fully() {
        let q = optimal_q(STATES - 1, 0.9);
        let greedy = |s: usize| (0..ACTIONS).max_by(|a, b| q[s][*a].total_cmp(&q[s][*b]).then(b.cmp(a))).unwrap();
        assert_eq!(greedy_agreement(STATES - 1, 0.9, greedy), 1.0);
        assert!(greedy_agreement(STATES - 1, 0.9, |_| 1) < 0.5);
    }
}
