//! Flat `section.key = value` run configuration.
//!
//! Every key has a default; a file only lists what it changes. Blank lines
//! and `#` comments are ignored. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dqn::{NetShape, Schedule};
use crate::env::{EnvConfig, WarmStart};
use crate::env::{ActionSpec, Region, OBS_DIM, WINDOW};
use crate::error::{Error, Result};
use crate::lbm::FlowConfig;
use crate::validate::SuiteConfig;

/// `(key, default, meaning)`. Lengths are in body lengths `L` unless noted.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("run.seed", "0", "master seed for weights, exploration and starts"),
    ("run.out", "runs/default", "run directory"),
    ("run.episodes", "3000", "training episodes"),
    ("run.checkpoint_every", "100", "episodes between checkpoints"),
    ("run.trajectory_every", "100", "episodes between saved training trajectories"),
    ("run.snapshot_cadence", "100", "ticks between field snapshots"),
    ("run.field_ticks", "1000", "ticks simulated by the fields command"),
    ("grid.cells_per_length", "40", "lattice cells per body length"),
    ("grid.length_x", "10", "domain length"),
    ("grid.length_y", "5", "domain height"),
    ("flow.u_in", "0.05", "inflow speed, lattice units"),
    ("flow.reynolds", "200", "Reynolds number on the cylinder diameter"),
    ("flow.diameter", "0.5", "cylinder diameter"),
    ("flow.center_x", "1.5", "cylinder centre x"),
    ("flow.center_y", "2.5", "cylinder centre y"),
    ("flow.tau", "auto", "relaxation time; auto derives it from the Reynolds number"),
    ("flow.spinup_ticks", "20000", "ticks from rest to a developed wake"),
    ("flow.warm_start", "", "population file from `fields --spinup`; empty spins up in process"),
    ("fish.stations", "41", "body stations (markers) along the midline"),
    ("fish.sub_iterations", "4", "direct-forcing passes per tick"),
    ("fish.wavelength", "1", "undulation wavelength"),
    ("fish.amplitude_cap", "0.5", "largest allowed action magnitude, rad"),
    ("env.actions", "-0.5,-0.25,0,0.25,0.5", "tail deflection per action, rad"),
    ("env.half_period", "auto", "ticks per control step; auto is 0.25 L / u_in"),
    ("env.target_x", "7", "target x"),
    ("env.target_y", "3", "target y"),
    ("env.init_x_min", "3", "random start range, head tip x"),
    ("env.init_x_max", "5", "random start range, head tip x"),
    ("env.init_y", "2.5", "start head tip y"),
    ("env.capture_radius", "0.1", "distance that counts as reaching the target"),
    ("env.omega_x_min", "0.5", "allowed region"),
    ("env.omega_x_max", "9.5", "allowed region"),
    ("env.omega_y_min", "0.5", "allowed region"),
    ("env.omega_y_max", "4.5", "allowed region"),
    ("env.max_steps", "450", "control steps per episode"),
    ("agent.hidden", "64", "LSTM units per layer"),
    ("agent.layers", "3", "stacked LSTM layers"),
    ("agent.gamma", "0.99", "discount"),
    ("agent.lr", "0.001", "Adam step size"),
    ("agent.batch", "100", "minibatch size"),
    ("agent.capacity", "5000", "replay capacity"),
    ("agent.target_sync", "100", "gradient steps between target copies"),
    ("agent.eps_start", "1", "initial exploration rate"),
    ("agent.eps_min", "0.05", "exploration floor"),
    ("agent.eps_decay", "0.0000475", "exploration decrease per environment step"),
    ("validate.strouhal", "true", "include the cylinder shedding suite"),
];

/// A complete, checked configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// The file as given, echoed into the run directory.
    pub source: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
            source: String::new(),
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: {what}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(first) = seen.insert(k.to_string(), n + 1) {
                return Err(Error::Config(format!("line {}: {k} already set on line {first}", n + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.source = text.to_string();
        cfg.typed()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Overrides one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no config key {key}"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(key, v, "expected a finite number"))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key);
        v.parse().map_err(|_| bad(key, v, "expected a non-negative integer"))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let v = self.get(key);
        v.parse().map_err(|_| bad(key, v, "expected a non-negative integer"))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(bad(key, v, "expected true or false")),
        }
    }

    /// Parses every value into its type, without cross-checks.
    fn typed(&self) -> Result<()> {
        self.env_config()?;
        self.net_shape()?;
        self.schedule()?;
        self.suite_config()?;
        self.seed()?;
        self.episodes()?;
        self.field_ticks()?;
        for k in ["run.checkpoint_every", "run.trajectory_every", "run.snapshot_cadence"] {
            self.usize(k)?;
        }
        Ok(())
    }

    /// Full consistency check, run before any simulation starts. The
    /// validation suites skip it so that they can report an unstable
    /// relaxation time themselves.
    pub fn check(&self) -> Result<()> {
        self.typed()?;
        self.env_config()?.validate()?;
        self.net_shape()?.validate()?;
        self.schedule()?.validate()?;
        for k in ["run.checkpoint_every", "run.trajectory_every", "run.snapshot_cadence"] {
            if self.usize(k)? == 0 {
                return Err(bad(k, self.get(k), "must be positive"));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("run.seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("run.out"))
    }

    pub fn episodes(&self) -> Result<usize> {
        self.usize("run.episodes")
    }

    pub fn checkpoint_every(&self) -> Result<usize> {
        self.usize("run.checkpoint_every")
    }

    pub fn trajectory_every(&self) -> Result<usize> {
        self.usize("run.trajectory_every")
    }

    pub fn snapshot_cadence(&self) -> Result<usize> {
        self.usize("run.snapshot_cadence")
    }

    pub fn field_ticks(&self) -> Result<usize> {
        self.usize("run.field_ticks")
    }

    pub fn spinup_ticks(&self) -> Result<usize> {
        self.usize("flow.spinup_ticks")
    }

    /// Body length in cells.
    pub fn body_length(&self) -> Result<f64> {
        self.f64("grid.cells_per_length")
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let l = self.body_length()?;
        let cells = |k: &str| -> Result<usize> {
            let n = (self.f64(k)? * l).round();
            if n < 8.0 {
                return Err(bad(k, self.get(k), "domain is smaller than 8 cells"));
            }
            Ok(n as usize)
        };
        let tau = match self.get("flow.tau") {
            "auto" => None,
            _ => Some(self.f64("flow.tau")?),
        };
        Ok(FlowConfig {
            nx: cells("grid.length_x")?,
            ny: cells("grid.length_y")?,
            u_in: self.f64("flow.u_in")?,
            diameter: self.f64("flow.diameter")? * l,
            center: [self.f64("flow.center_x")? * l, self.f64("flow.center_y")? * l],
            reynolds: self.f64("flow.reynolds")?,
            tau_override: tau,
        })
    }

    pub fn half_period(&self) -> Result<usize> {
        match self.get("env.half_period") {
            "auto" => {
                let t = (0.25 * self.body_length()? / self.f64("flow.u_in")?).round();
                if !(t >= 1.0) {
                    return Err(bad("env.half_period", "auto", "derived half period is below one tick"));
                }
                Ok(t as usize)
            }
            _ => self.usize("env.half_period"),
        }
    }

    pub fn actions(&self) -> Result<ActionSpec> {
        let raw = self.get("env.actions");
        let values = raw
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("env.actions", raw, "expected comma-separated numbers")))
            .collect::<Result<Vec<_>>>()?;
        ActionSpec::new(values, self.f64("fish.amplitude_cap")?)
    }

    pub fn warm_start(&self) -> Result<WarmStart> {
        Ok(match self.get("flow.warm_start") {
            "" => WarmStart::Spinup(self.spinup_ticks()?),
            p => WarmStart::File(PathBuf::from(p)),
        })
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let cfg = EnvConfig {
            flow: self.flow_config()?,
            body_length: self.body_length()?,
            stations: self.usize("fish.stations")?,
            sub_iterations: self.usize("fish.sub_iterations")?,
            wavelength: self.f64("fish.wavelength")?,
            half_period: self.half_period()?,
            actions: self.actions()?,
            target: [self.f64("env.target_x")?, self.f64("env.target_y")?],
            init_x: [self.f64("env.init_x_min")?, self.f64("env.init_x_max")?],
            init_y: self.f64("env.init_y")?,
            capture_radius: self.f64("env.capture_radius")?,
            omega: Region {
                x: [self.f64("env.omega_x_min")?, self.f64("env.omega_x_max")?],
                y: [self.f64("env.omega_y_min")?, self.f64("env.omega_y_max")?],
            },
            max_steps: self.usize("env.max_steps")?,
            warm_start: self.warm_start()?,
        };
        Ok(cfg)
    }

    pub fn net_shape(&self) -> Result<NetShape> {
        Ok(NetShape {
            seq_len: WINDOW,
            step_inputs: OBS_DIM,
            extra_inputs: 1,
            hidden: self.usize("agent.hidden")?,
            layers: self.usize("agent.layers")?,
            actions: self.actions()?.len(),
        })
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Ok(Schedule {
            eps_start: self.f64("agent.eps_start")?,
            eps_min: self.f64("agent.eps_min")?,
            eps_decay: self.f64("agent.eps_decay")?,
            gamma: self.f64("agent.gamma")?,
            lr: self.f64("agent.lr")?,
            batch: self.usize("agent.batch")?,
            capacity: self.usize("agent.capacity")?,
            target_sync: self.u64("agent.target_sync")?,
        })
    }

    pub fn suite_config(&self) -> Result<SuiteConfig> {
        let mut s = SuiteConfig {
            flow_tau: self.flow_config()?.tau(),
            seed: self.seed()?,
            ..SuiteConfig::default()
        };
        if !self.bool("validate.strouhal")? {
            s.strouhal = None;
        }
        Ok(s)
    }

    /// Every key with its effective value, one per line in key order.
    pub fn resolved(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`RunConfig::resolved`], hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.resolved().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
