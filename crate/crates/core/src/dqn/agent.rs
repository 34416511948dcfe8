use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::lstm::{NetShape, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};

/// Exploration, discounting and optimisation constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub eps_start: f64,
    pub eps_min: f64,
    /// Linear decrease of epsilon per environment step.
    pub eps_decay: f64,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub capacity: usize,
    /// Gradient steps between hard target copies.
    pub target_sync: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            eps_start: 1.0,
            eps_min: 0.05,
            eps_decay: 4.75e-5,
            gamma: 0.99,
            lr: 1e-3,
            batch: 100,
            capacity: 5000,
            target_sync: 100,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.eps_min)
            && (self.eps_min..=1.0).contains(&self.eps_start)
            && self.eps_decay >= 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && self.lr > 0.0
            && self.batch > 0
            && self.capacity >= self.batch
            && self.target_sync > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent agent schedule {self:?}")))
        }
    }

    /// `max(eps_min, eps_start - eps_decay * step)`, landing exactly on the
    /// floor once the line reaches it.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        let eps = self.eps_start - self.eps_decay * step as f64;
        if eps <= self.eps_min + 1e-12 {
            self.eps_min
        } else {
            eps
        }
    }
}

/// Lowest index among the largest values.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in q.iter().enumerate() {
        if *v > q[best] {
            best = k;
        }
    }
    best
}

/// Uniform random action with probability `eps`, else greedy.
pub fn select_action(q: &[f64], eps: f64, rng: &mut impl Rng) -> usize {
    if rng.gen::<f64>() < eps {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Anything that maps a state to action values.
pub trait QFunction {
    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>>;
}

impl QFunction for QNetwork {
    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        QNetwork::q_values(self, state)
    }
}

/// `r` for terminal transitions, else `r + gamma max_a Q(s', a)`.
pub fn td_targets(batch: &[&Transition], target: &impl QFunction, gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                Ok(t.r)
            } else {
                let q = target.q_values(&t.s_next)?;
                Ok(t.r + gamma * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            }
        })
        .collect()
}

/// `sum_k gamma^k r_k`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// Value and target networks with their optimiser, replay memory and
/// counters.
#[derive(Clone, Debug)]
pub struct Agent {
    pub value: QNetwork,
    pub target: QNetwork,
    pub adam: Adam,
    pub replay: ReplayBuffer,
    pub schedule: Schedule,
    pub(crate) rng: ChaCha8Rng,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub episodes: u64,
}

impl Agent {
    pub fn new(shape: NetShape, schedule: Schedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        let value = QNetwork::init(shape, seed)?;
        Ok(Self::from_network(value, schedule, seed))
    }

    /// Agent around given value weights, target synced to them.
    pub fn from_network(value: QNetwork, schedule: Schedule, seed: u64) -> Self {
        Agent {
            target: value.clone(),
            adam: Adam::new(value.params.len(), schedule.lr),
            replay: ReplayBuffer::new(schedule.capacity),
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15)),
            value,
            schedule,
            env_steps: 0,
            grad_steps: 0,
            episodes: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.epsilon_at(self.env_steps)
    }

    pub fn greedy(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.value.q_values(state)?))
    }

    /// Epsilon-greedy action at the current step count.
    pub fn act(&mut self, state: &[f64]) -> Result<usize> {
        let q = self.value.q_values(state)?;
        let eps = self.epsilon();
        Ok(select_action(&q, eps, &mut self.rng))
    }

    pub fn sync_target(&mut self) {
        self.target.params.copy_from_slice(&self.value.params);
    }

    /// One gradient step on a uniform batch; syncs the target every
    /// `target_sync` steps. Returns the loss.
    pub fn learn(&mut self) -> Result<f64> {
        let idx = self.replay.sample_indices(self.schedule.batch, &mut self.rng);
        let batch: Vec<&Transition> = idx.iter().map(|k| self.replay.get(*k)).collect();
        let y = td_targets(&batch, &self.target, self.schedule.gamma)?;
        let states: Vec<&[f64]> = batch.iter().map(|t| t.s.as_slice()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.a).collect();
        let (loss, grad) = self.value.loss_and_gradient(&states, &actions, &y)?;
        self.adam.step(&mut self.value.params, &grad)?;
        self.grad_steps += 1;
        if self.grad_steps % self.schedule.target_sync == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Stores `t` and learns once the memory holds a full batch.
    pub fn remember(&mut self, t: Transition) -> Result<Option<f64>> {
        self.replay.push(t);
        self.env_steps += 1;
        if self.replay.len() >= self.schedule.batch {
            self.learn().map(Some)
        } else {
            Ok(None)
        }
    }

    /// Seed for the next episode's reset.
    pub fn next_seed(&mut self) -> u64 {
        self.rng.gen()
    }
}

/// Summary of one training episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: u64,
    pub steps: usize,
    pub cumulative_reward: f64,
    pub outcome: Outcome,
    pub rewards: Vec<f64>,
    /// Mean loss over the episode's gradient steps, if any.
    pub mean_loss: Option<f64>,
}

pub const REWARD_LOG_HEADER: &str = "episode,steps,cumulative_reward,outcome";

pub fn reward_log_row(log: &EpisodeLog) -> String {
    format!("{},{},{},{}", log.episode, log.steps, log.cumulative_reward, log.outcome)
}

pub fn reward_log_csv(logs: &[EpisodeLog]) -> String {
    let mut out = String::from(REWARD_LOG_HEADER);
    out.push('\n');
    for l in logs {
        out.push_str(&reward_log_row(l));
        out.push('\n');
    }
    out
}

/// Runs one episode: act, step, store, learn, until the environment ends it.
pub fn run_episode<E: Environment>(env: &mut E, agent: &mut Agent) -> Result<EpisodeLog> {
    let seed = agent.next_seed();
    let mut s = env.reset(seed)?;
    let mut rewards = Vec::new();
    let (mut loss_sum, mut losses) = (0.0, 0usize);
    let outcome = loop {
        let a = agent.act(&s)?;
        let st = env.step(a)?;
        rewards.push(st.reward);
        let terminal = st.terminal();
        if let Some(l) = agent.remember(Transition {
            s,
            a,
            r: st.reward,
            s_next: st.state.clone(),
            done: terminal,
        })? {
            loss_sum += l;
            losses += 1;
        }
        if st.done {
            break st.outcome.unwrap_or(Outcome::Timeout);
        }
        s = st.state;
    };
    let log = EpisodeLog {
        episode: agent.episodes,
        steps: rewards.len(),
        cumulative_reward: rewards.iter().sum(),
        outcome,
        rewards,
        mean_loss: (losses > 0).then(|| loss_sum / losses as f64),
    };
    agent.episodes += 1;
    Ok(log)
}

/// Trains for `episodes` episodes, calling `on_episode` after each.
pub fn train<E: Environment>(
    env: &mut E,
    agent: &mut Agent,
    episodes: usize,
    mut on_episode: impl FnMut(&Agent, &EpisodeLog, &E) -> Result<()>,
) -> Result<Vec<EpisodeLog>> {
    if env.action_count() != agent.value.shape.actions || env.state_dim() != agent.value.shape.state_dim() {
        return Err(Error::Shape(format!(
            "environment has {} actions and {} state entries, network {} and {}",
            env.action_count(),
            env.state_dim(),
            agent.value.shape.actions,
            agent.value.shape.state_dim()
        )));
    }
    let mut logs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let log = run_episode(env, agent)?;
        on_episode(agent, &log, env)?;
        logs.push(log);
    }
    Ok(logs)
}

/// Result of one greedy rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub start: f64,
    pub outcome: Outcome,
    pub steps: usize,
    pub final_distance: f64,
    pub cumulative_reward: f64,
}

pub const EVAL_SUMMARY_HEADER: &str = "start_x,outcome,steps_to_outcome,final_distance";

pub fn eval_summary_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(EVAL_SUMMARY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.start, r.outcome, r.steps, r.final_distance));
    }
    out
}

/// Greedy rollouts from each start, calling `on_rollout` after each.
pub fn evaluate<E: Environment>(
    env: &mut E,
    agent: &Agent,
    starts: &[f64],
    seed: u64,
    mut on_rollout: impl FnMut(&EvalRecord, &E) -> Result<()>,
) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::with_capacity(starts.len());
    for &x in starts {
        let mut s = env.reset_at(seed, Some(x))?;
        let (mut steps, mut total) = (0, 0.0);
        let outcome = loop {
            let st = env.step(agent.greedy(&s)?)?;
            steps += 1;
            total += st.reward;
            if st.done {
                break st.outcome.unwrap_or(Outcome::Timeout);
            }
            s = st.state;
        };
        let rec = EvalRecord {
            start: x,
            outcome,
            steps,
            final_distance: env.goal_distance(),
            cumulative_reward: total,
        };
        on_rollout(&rec, env)?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::gridworld::{self, GridWorld};

    #[test]
    fn epsilon_line_and_floor() {
        let s = Schedule::default();
        assert_eq!(s.epsilon_at(0), 1.0);
        assert_eq!(s.epsilon_at(20_000), 0.05);
        assert_eq!(s.epsilon_at(19_999), 1.0 - 4.75e-5 * 19_999.0);
        assert_eq!(s.epsilon_at(1_000_000), 0.05);
    }

    #[test]
    fn greedy_choice_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[-1.0, 3.0, 2.0], 0.0, &mut rng), 1);
        assert_eq!(select_action(&[2.0, 2.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&[0.0, 5.0, 1.0, 2.0], 1.0, &mut rng)] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    struct Constant(f64);
    impl QFunction for Constant {
        fn q_values(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![self.0, self.0 - 1.0])
        }
    }

    fn tr(r: f64, done: bool) -> Transition {
        Transition {
            s: vec![],
            a: 0,
            r,
            s_next: vec![],
            done,
        }
    }

    #[test]
    fn td_target_cases() {
        let t = [tr(-100.0, true), tr(-1.0, false)];
        let refs: Vec<&Transition> = t.iter().collect();
        assert_eq!(td_targets(&refs, &Constant(5.0), 0.99).unwrap()[0], -100.0);
        assert_eq!(td_targets(&refs, &Constant(0.0), 0.99).unwrap()[1], -1.0);
        let y = td_targets(&refs, &Constant(-10.0), 0.99).unwrap()[1];
        assert!((y + 10.9).abs() < 1e-12);
    }

    #[test]
    fn discounted_return_by_direct_sum() {
        let r = [-1.0, -2.0, 0.5, -100.0];
        let g: f64 = 0.99;
        let direct: f64 = r.iter().enumerate().map(|(k, v)| g.powi(k as i32) * v).sum();
        assert!((discounted_return(&r, g) - direct).abs() < 1e-12);
    }

    #[test]
    fn log_csvs_have_headers() {
        let l = EpisodeLog {
            episode: 3,
            steps: 2,
            cumulative_reward: -1.5,
            outcome: Outcome::Captured,
            rewards: vec![],
            mean_loss: None,
        };
        assert_eq!(reward_log_csv(&[l]), "episode,steps,cumulative_reward,outcome\n3,2,-1.5,captured\n");
        let e = EvalRecord {
            start: 3.2,
            outcome: Outcome::Timeout,
            steps: 450,
            final_distance: 0.5,
            cumulative_reward: -1.0,
        };
        assert_eq!(eval_summary_csv(&[e]), "start_x,outcome,steps_to_outcome,final_distance\n3.2,timeout,450,0.5\n");
    }

    /// Q stored per one-hot state.
    struct Table(Vec<[f64; 2]>);
    impl QFunction for Table {
        fn q_values(&self, s: &[f64]) -> Result<Vec<f64>> {
            let k = s.iter().position(|v| *v == 1.0).unwrap();
            Ok(self.0[k].to_vec())
        }
    }

    #[test]
    fn repeated_targets_reach_the_bellman_fixed_point() {
        // two states; action 0 stays (r = -1), action 1 moves on: from state 0
        // to state 1 (r = -2), from state 1 to the terminal (r = 3)
        let gamma = 0.9;
        let one = |k: usize| {
            let mut v = vec![0.0; 2];
            v[k] = 1.0;
            v
        };
        let trs = vec![
            Transition { s: one(0), a: 0, r: -1.0, s_next: one(0), done: false },
            Transition { s: one(0), a: 1, r: -2.0, s_next: one(1), done: false },
            Transition { s: one(1), a: 0, r: -1.0, s_next: one(1), done: false },
            Transition { s: one(1), a: 1, r: 3.0, s_next: one(1), done: true },
        ];
        let refs: Vec<&Transition> = trs.iter().collect();
        let mut q = Table(vec![[0.0; 2]; 2]);
        for _ in 0..500 {
            let y = td_targets(&refs, &q, gamma).unwrap();
            for (t, y) in trs.iter().zip(y) {
                let k = t.s.iter().position(|v| *v == 1.0).unwrap();
                q.0[k][t.a] = y;
            }
        }
        let v1 = 3.0;
        let v0 = -2.0 + gamma * v1;
        let expect = [[-1.0 + gamma * v0, v0], [-1.0 + gamma * v1, v1]];
        for k in 0..2 {
            for a in 0..2 {
                assert!((q.0[k][a] - expect[k][a]).abs() < 1e-12, "{:?}", q.0);
            }
        }
    }

    fn small_agent(seed: u64) -> Agent {
        let shape = NetShape {
            seq_len: 1,
            step_inputs: gridworld::STATES,
            extra_inputs: 0,
            hidden: 8,
            layers: 1,
            actions: gridworld::ACTIONS,
        };
        let schedule = Schedule {
            batch: 4,
            capacity: 32,
            target_sync: 3,
            eps_decay: 0.01,
            gamma: 0.9,
            ..Schedule::default()
        };
        Agent::new(shape, schedule, seed).unwrap()
    }


    #[test]
    fn no_learning_before_a_full_batch_and_sync_on_schedule() {
        let mut a = small_agent(3);
        let before = a.value.params.clone();
        let t = Transition {
            s: gridworld::one_hot(0),
            a: 1,
            r: -1.0,
            s_next: gridworld::one_hot(5),
            done: false,
        };
        for _ in 0..3 {
            assert_eq!(a.remember(t.clone()).unwrap(), None);
        }
        assert_eq!(a.value.params, before);
        for k in 1..=7u64 {
            assert!(a.remember(t.clone()).unwrap().is_some());
            assert_eq!(a.grad_steps, k);
            assert_ne!(a.value.params, before);
            assert_eq!(a.value.params == a.target.params, k % 3 == 0, "grad step {k}");
        }
        assert_eq!(a.env_steps, 10);
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let run = |seed| {
            let mut env = GridWorld::default();
            let mut a = small_agent(seed);
            let logs = train(&mut env, &mut a, 6, |_, _, _| Ok(())).unwrap();
            (logs, a.value.params)
        };
        let (la, pa) = run(11);
        let (lb, pb) = run(11);
        assert_eq!(la, lb);
        assert_eq!(pa, pb);
        let (lc, _) = run(12);
        assert_ne!(la, lc);
    }

    #[test]
    fn mismatched_network_is_rejected() {
        let mut env = GridWorld::default();
        let mut a = small_agent(0);
        a.value.shape.actions = 5;
        assert!(train(&mut env, &mut a, 1, |_, _, _| Ok(())).is_err());
    }
}
