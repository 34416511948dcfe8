use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    distance, observe, reward, ActionSpec, Environment, Observation, Outcome, Region, StateWindow, Step,
    TrajectoryRow, BOUNDARY_PENALTY, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::fsi::{rotate, Kinematics, Swimmer};
use crate::kinematics::{BodyShape, Gait};
use crate::lbm::snapshot::read_populations;
use crate::lbm::{FlowConfig, FlowSolver};

/// Where the developed wake every episode starts from.
#[derive(Clone, Debug, PartialEq)]
pub enum WarmStart {
    /// Run the cylinder flow from uniform inflow for this many ticks.
    Spinup(usize),
    /// Populations written by a previous spin-up.
    File(PathBuf),
}

/// Everything the swimming task needs. Positions are in body lengths
/// from the grid origin.
#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub flow: FlowConfig,
    /// Body length in cells.
    pub body_length: f64,
    pub stations: usize,
    pub sub_iterations: usize,
    /// Undulation wavelength in body lengths.
    pub wavelength: f64,
    /// Ticks per control step (half an undulation period).
    pub half_period: usize,
    pub actions: ActionSpec,
    pub target: [f64; 2],
    /// Range of the random start, head tip x.
    pub init_x: [f64; 2],
    pub init_y: f64,
    pub capture_radius: f64,
    pub omega: Region,
    pub max_steps: usize,
    pub warm_start: WarmStart,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        let fail = |m: String| Err(Error::Config(m));
        if !(self.body_length >= 4.0) {
            return fail(format!("body length {} must be at least 4 cells", self.body_length));
        }
        if self.stations < 3 {
            return fail("need at least 3 body stations".into());
        }
        if self.sub_iterations == 0 || self.half_period == 0 || self.max_steps == 0 {
            return fail("sub-iterations, half period and max steps must be positive".into());
        }
        if !(self.wavelength > 0.0) {
            return fail(format!("wavelength {} must be positive", self.wavelength));
        }
        if !(self.capture_radius > 0.0) {
            return fail(format!("capture radius {} must be positive", self.capture_radius));
        }
        if !(self.init_x[0] <= self.init_x[1]) {
            return fail(format!("empty start range {:?}", self.init_x));
        }
        if !self.omega.contains(self.target) {
            return fail(format!("target {:?} lies outside the region", self.target));
        }
        for x in self.init_x {
            if !self.omega.contains([x, self.init_y]) {
                return fail(format!("start ({x}, {}) lies outside the region", self.init_y));
            }
        }
        let (w, h) = (self.flow.nx as f64 / self.body_length, self.flow.ny as f64 / self.body_length);
        if self.omega.x[0] < 0.0 || self.omega.x[1] > w || self.omega.y[0] < 0.0 || self.omega.y[1] > h {
            return fail(format!("region {:?} exceeds the {w} x {h} grid", self.omega));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_period as f64
    }
}

/// Developed cylinder wake, from a spin-up or a population file.
pub fn warm_flow(flow: &FlowConfig, warm: &WarmStart) -> Result<FlowSolver> {
    match warm {
        WarmStart::Spinup(ticks) => {
            let mut s = FlowSolver::cylinder(flow)?;
            for _ in 0..*ticks {
                s.step()?;
            }
            Ok(s)
        }
        WarmStart::File(path) => {
            let field = read_populations(path)?;
            if (field.nx, field.ny) != (flow.nx, flow.ny) {
                return Err(Error::format(
                    path,
                    format!("grid {}x{} does not match the configured {}x{}", field.nx, field.ny, flow.nx, flow.ny),
                ));
            }
            if (field.tau - flow.tau()).abs() > 1e-12 {
                return Err(Error::format(
                    path,
                    format!("relaxation time {} does not match the configured {}", field.tau, flow.tau()),
                ));
            }
            Ok(FlowSolver::new(field, flow.geometry()?))
        }
    }
}

/// The swimmer-in-a-wake navigation task.
pub struct FishEnv {
    cfg: EnvConfig,
    base: FlowSolver,
    swimmer: Option<Swimmer>,
    window: StateWindow,
    steps: usize,
    active: bool,
    trajectory: Vec<TrajectoryRow>,
}

impl FishEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let base = warm_flow(&cfg.flow, &cfg.warm_start)?;
        Ok(Self::with_flow(cfg, base))
    }

    /// Uses `base` as the warm start without re-running it.
    pub fn with_flow(cfg: EnvConfig, base: FlowSolver) -> Self {
        let prev = cfg.actions.normalized(cfg.actions.zero_index());
        FishEnv {
            cfg,
            base,
            swimmer: None,
            window: StateWindow::filled(Observation::default(), prev),
            steps: 0,
            active: false,
            trajectory: Vec::new(),
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn base_flow(&self) -> &FlowSolver {
        &self.base
    }

    pub fn swimmer(&self) -> Option<&Swimmer> {
        self.swimmer.as_ref()
    }

    pub fn window(&self) -> &StateWindow {
        &self.window
    }

    pub fn trajectory(&self) -> &[TrajectoryRow] {
        &self.trajectory
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn length(&self) -> f64 {
        self.cfg.body_length
    }

    fn tip(s: &Swimmer, len: f64) -> [f64; 2] {
        let h = s.head();
        [h[0] / len, h[1] / len]
    }

    fn heading(s: &Swimmer) -> f64 {
        s.body.theta + s.body.alpha
    }

    /// Head tip in body lengths.
    pub fn tip_position(&self) -> Option<[f64; 2]> {
        self.swimmer.as_ref().map(|s| Self::tip(s, self.length()))
    }

    fn row(&self, s: &Swimmer, obs: &Observation, action: Option<usize>, reward: f64, done: bool) -> TrajectoryRow {
        let tip = Self::tip(s, self.length());
        TrajectoryRow {
            control_step: self.steps,
            t_ticks: s.t as u64,
            x_tip: tip[0],
            y_tip: tip[1],
            theta: obs.theta,
            u_bar: obs.u_bar,
            omega_bar: obs.omega_bar,
            action,
            reward,
            done,
        }
    }

    /// Like [`Environment::step`], calling `observer` after every tick.
    pub fn step_observed(&mut self, action: usize, observer: &mut dyn FnMut(&Swimmer) -> Result<()>) -> Result<Step> {
        if !self.active {
            return Err(Error::EpisodeInactive);
        }
        let value = self.cfg.actions.value(action)?;
        let len = self.length();
        let target = self.cfg.target;
        let half = self.cfg.half_period;
        let omega = self.cfg.omega;
        let capture = self.cfg.capture_radius;
        let s = self.swimmer.as_mut().expect("active episode has a swimmer");

        let d0 = s.body.d;
        let h0 = Self::heading(s);
        let mut outcome = None;
        let mut ticks = 0;
        if distance(Self::tip(s, len), target) <= capture {
            outcome = Some(Outcome::Captured);
        } else {
            s.kinematics.gait.push(value)?;
            while ticks < half {
                match s.tick() {
                    Ok(_) => {}
                    Err(Error::Diverged { .. }) => outcome = Some(Outcome::Diverged),
                    Err(Error::MarkerEscape { .. }) => outcome = Some(Outcome::WashedAway),
                    Err(e) => return Err(e),
                }
                ticks += 1;
                if outcome.is_some() {
                    break;
                }
                observer(s)?;
                let tip = Self::tip(s, len);
                outcome = if !omega.contains(tip) {
                    Some(Outcome::WashedAway)
                } else {
                    match s.touches_solid() {
                        Ok(true) => Some(Outcome::Collided),
                        Err(Error::MarkerEscape { .. }) => Some(Outcome::WashedAway),
                        Err(e) => return Err(e),
                        Ok(false) if distance(tip, target) <= capture => Some(Outcome::Captured),
                        Ok(false) => None,
                    }
                };
                if outcome.is_some() {
                    break;
                }
            }
            let t = s.t;
            s.kinematics.gait.forget_before(t);
        }

        let tip = Self::tip(s, len);
        let elapsed = (ticks.max(1) as f64) / half as f64;
        let mut obs = observe(
            tip,
            target,
            Self::heading(s),
            [(s.body.d[0] - d0[0]) / len, (s.body.d[1] - d0[1]) / len],
            Self::heading(s) - h0,
            elapsed,
        );
        if !obs.is_finite() {
            obs = *self.window.slot(0);
        }
        self.steps += 1;
        if outcome.is_none() && self.steps >= self.cfg.max_steps {
            outcome = Some(Outcome::Timeout);
        }
        let r = match outcome {
            Some(Outcome::Collided | Outcome::Diverged | Outcome::WashedAway) => BOUNDARY_PENALTY,
            _ => reward(tip, target, &omega),
        };
        let done = outcome.is_some();
        self.window.push(obs, self.cfg.actions.normalized(action));
        let s = self.swimmer.as_ref().expect("active episode has a swimmer");
        let row = self.row(s, &obs, Some(action), r, done);
        self.trajectory.push(row);
        self.active = !done;
        Ok(Step {
            state: self.window.flatten(),
            reward: r,
            done,
            outcome,
        })
    }
}

impl Environment for FishEnv {
    fn action_count(&self) -> usize {
        self.cfg.actions.len()
    }

    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    /// Restores the warm wake and places the fish, facing upstream, with
    /// its head tip at `(x0, init_y)`.
    fn reset_at(&mut self, seed: u64, start: Option<f64>) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b] = self.cfg.init_x;
        let x0 = start.unwrap_or_else(|| if a < b { rng.gen_range(a..=b) } else { a });
        let tip = [x0, self.cfg.init_y];
        if !self.cfg.omega.contains(tip) {
            return Err(Error::Config(format!("start {tip:?} lies outside the region")));
        }
        let len = self.length();
        let shape = BodyShape::new(len, self.cfg.stations)?;
        let gait = Gait::new(self.cfg.wavelength, self.cfg.period())?;
        let kin = Kinematics::new(shape, gait);
        let head = kin.deformation(0.0).stations[0];
        let off = rotate(head, PI);
        let d = [tip[0] * len - off[0], tip[1] * len - off[1]];
        let s = Swimmer::new(self.base.clone(), kin, d, PI, self.cfg.sub_iterations)?;
        match s.touches_solid() {
            Ok(false) => {}
            Ok(true) => return Err(Error::Config(format!("start {tip:?} overlaps the cylinder"))),
            Err(e) => return Err(Error::Config(format!("start {tip:?} is too close to the grid edge: {e}"))),
        }
        let obs = observe(Self::tip(&s, len), self.cfg.target, PI, [0.0; 2], 0.0, 1.0);
        self.window = StateWindow::filled(obs, self.cfg.actions.normalized(self.cfg.actions.zero_index()));
        self.steps = 0;
        self.active = true;
        self.trajectory = vec![self.row(&s, &obs, None, 0.0, false)];
        self.swimmer = Some(s);
        Ok(self.window.flatten())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.step_observed(action, &mut |_| Ok(()))
    }

    fn goal_distance(&self) -> f64 {
        self.tip_position().map_or(f64::NAN, |t| distance(t, self.cfg.target))
    }
}
