use std::fs;
use std::path::{Path, PathBuf};

use super::{RunConfig, RunDir, RunManifest};
use crate::dqn::{
    checkpoint, evaluate, eval_summary_csv, reward_log_row, train, Agent, EvalRecord, ReplayBuffer,
    REWARD_LOG_HEADER,
};
use crate::env::FishEnv;
use crate::env::{trajectory_csv, Environment};
use crate::error::{Error, Result};
use crate::lbm::snapshot::{write_populations, Snapshot};
use crate::lbm::{FlowSolver, ForceField, MacroField};
use crate::validate::{report_csv, run_suites, Check};

/// Sink for progress lines.
pub type Log<'a> = &'a mut dyn FnMut(&str);

/// Rough throughput used for cost estimates, cell updates per second.
const EST_UPDATES_PER_SEC: f64 = 1.5e7;

/// `A:B:N`, N evenly spaced points from A to B inclusive.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("sweep {spec:?} is not A:B:N with N >= 1"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|k| {
            let x = a + (b - a) * k as f64 / (n - 1) as f64;
            (x * 1e9).round() / 1e9
        })
        .collect())
}

/// Upper bound on the training cost, with a warning for long runs.
pub fn cost_banner(cfg: &RunConfig) -> Result<String> {
    let env = cfg.env_config()?;
    let episodes = cfg.episodes()?;
    let cells = (env.flow.nx * env.flow.ny) as f64;
    let ticks = (episodes * env.max_steps * env.half_period) as f64;
    let updates = cells * ticks;
    let hours = updates / EST_UPDATES_PER_SEC / 3600.0;
    let mut s = format!(
        "training {episodes} episodes of at most {} control steps on a {}x{} grid: up to {updates:.2e} cell updates, about {hours:.1} h at {:.0} million updates/s",
        env.max_steps,
        env.flow.nx,
        env.flow.ny,
        EST_UPDATES_PER_SEC / 1e6
    );
    if hours > 1.0 {
        s.push_str("\nthis is a long-running job; checkpoints allow --resume");
    }
    Ok(s)
}

/// Highest-numbered `ep_NNNNNN.vswq` in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let Some(n) = name.strip_prefix("ep_").and_then(|r| r.strip_suffix(".vswq")) else {
            continue;
        };
        if let Ok(k) = n.parse::<u64>() {
            if best.as_ref().map_or(true, |(b, _)| k > *b) {
                best = Some((k, p));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Runs the solver benchmarks and writes `validate/report.csv`.
pub fn cmd_validate(cfg: &RunConfig, log: Log) -> Result<Vec<Check>> {
    let dir = RunDir::create(cfg.out_dir().join("validate"))?;
    dir.echo_config(cfg)?;
    let manifest = RunManifest::begin("validate", cfg)?;
    log("running validation suites");
    let checks = run_suites(&cfg.suite_config()?);
    for c in &checks {
        log(&format!(
            "{} {}: {} = {:.6e} (bound {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.test,
            c.metric,
            c.value,
            c.bound
        ));
    }
    dir.write("report.csv", report_csv(&checks).as_bytes())?;
    manifest.finish(&dir)?;
    Ok(checks)
}

fn checkpoint_name(episodes: u64) -> String {
    format!("checkpoints/ep_{episodes:06}.vswq")
}

const REPLAY_FILE: &str = "checkpoints/replay.vswr";

fn save_agent(dir: &RunDir, agent: &Agent) -> Result<()> {
    checkpoint::save(agent, &dir.path(&checkpoint_name(agent.episodes)))?;
    dir.write(REPLAY_FILE, &agent.replay.to_bytes(agent.episodes))
}

fn clear_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let p = entry.map_err(|e| Error::io(dir, e))?.path();
            if p.is_file() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    Ok(())
}

/// Restores the newest checkpoint, its replay memory and the reward log
/// rows it covers.
fn resume_state(dir: &RunDir, cfg: &RunConfig, log: Log) -> Result<Option<(Agent, Vec<String>)>> {
    let Some(path) = latest_checkpoint(&dir.path("checkpoints"))? else {
        return Ok(None);
    };
    let old = RunConfig::load(&dir.path("resolved.txt"))?;
    let mut same = old.clone();
    same.set("run.episodes", cfg.get("run.episodes"))?;
    if same.hash() != cfg.hash() {
        return Err(Error::Config(format!(
            "cannot resume in {}: configuration differs from the earlier run (only run.episodes may change)",
            dir.root().display()
        )));
    }
    let mut agent = checkpoint::load(&path, cfg.net_shape()?, cfg.schedule()?)?;
    let replay_path = dir.path(REPLAY_FILE);
    match fs::read(&replay_path) {
        Ok(bytes) => {
            let (tag, buf) = ReplayBuffer::from_bytes(&bytes, &replay_path)?;
            if tag == agent.episodes && buf.capacity() == agent.schedule.capacity {
                agent.replay = buf;
            } else {
                log("replay memory does not match the checkpoint; it will be refilled");
            }
        }
        Err(_) => log("no replay memory saved; it will be refilled"),
    }
    let rewards = dir.path("rewards.csv");
    let text = fs::read_to_string(&rewards).map_err(|e| Error::io(&rewards, e))?;
    let rows: Vec<String> = text.lines().skip(1).take(agent.episodes as usize).map(String::from).collect();
    if rows.len() != agent.episodes as usize {
        return Err(Error::format(&rewards, format!("holds {} rows, checkpoint has {} episodes", rows.len(), agent.episodes)));
    }
    log(&format!("resuming from {} after {} episodes", path.display(), agent.episodes));
    Ok(Some((agent, rows)))
}

/// Trains an agent and returns the command directory.
pub fn cmd_train(cfg: &RunConfig, resume: bool, log: Log) -> Result<PathBuf> {
    cfg.check()?;
    let dir = RunDir::create(cfg.out_dir().join("train"))?;
    let episodes = cfg.episodes()?;
    let (ck_every, traj_every) = (cfg.checkpoint_every()? as u64, cfg.trajectory_every()? as u64);
    log(&cost_banner(cfg)?);

    let restored = if resume { resume_state(&dir, cfg, log)? } else { None };
    let (mut agent, mut rows) = match restored {
        Some(state) => state,
        None => {
            clear_dir(&dir.path("checkpoints"))?;
            clear_dir(&dir.path("trajectories"))?;
            (Agent::new(cfg.net_shape()?, cfg.schedule()?, cfg.seed()?)?, Vec::new())
        }
    };
    dir.echo_config(cfg)?;
    dir.subdir("checkpoints")?;
    dir.subdir("trajectories")?;
    let manifest = RunManifest::begin("train", cfg)?;

    log("preparing the wake");
    let mut env = FishEnv::new(cfg.env_config()?)?;
    let remaining = episodes.saturating_sub(agent.episodes as usize);
    let write_rewards = |rows: &[String]| {
        let mut text = String::from(REWARD_LOG_HEADER);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        dir.write("rewards.csv", text.as_bytes())
    };
    write_rewards(&rows)?;
    if latest_checkpoint(&dir.path("checkpoints"))?.is_none() {
        save_agent(&dir, &agent)?;
    }
    let total = episodes as u64;
    train(&mut env, &mut agent, remaining, |agent, ep, env| {
        rows.push(reward_log_row(ep));
        write_rewards(&rows)?;
        let done = agent.episodes;
        if ep.episode % traj_every == 0 || done == total {
            dir.write(&format!("trajectories/ep_{:06}.csv", ep.episode), trajectory_csv(env.trajectory()).as_bytes())?;
        }
        if done % ck_every == 0 || done == total {
            save_agent(&dir, agent)?;
        }
        log(&format!(
            "episode {}/{total}: {} steps, reward {:.3}, {}, epsilon {:.3}",
            done,
            ep.steps,
            ep.cumulative_reward,
            ep.outcome,
            agent.epsilon()
        ));
        Ok(())
    })?;
    manifest.finish(&dir)?;
    Ok(dir.root().to_path_buf())
}

fn load_checkpoint(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Agent> {
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => latest_checkpoint(&cfg.out_dir().join("train").join("checkpoints"))?.ok_or_else(|| {
            Error::Config(format!("no checkpoint under {}; train first or pass one", cfg.out_dir().display()))
        })?,
    };
    checkpoint::load(&path, cfg.net_shape()?, cfg.schedule()?)
}

/// Greedy rollouts from each sweep start.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, sweep: &[f64], log: Log) -> Result<Vec<EvalRecord>> {
    cfg.check()?;
    let agent = load_checkpoint(cfg, checkpoint)?;
    let dir = RunDir::create(cfg.out_dir().join("eval"))?;
    dir.echo_config(cfg)?;
    let manifest = RunManifest::begin("eval", cfg)?;
    log("preparing the wake");
    let mut env = FishEnv::new(cfg.env_config()?)?;
    let records = evaluate(&mut env, &agent, sweep, cfg.seed()?, |rec, env| {
        dir.write(&format!("start_{:.2}.csv", rec.start), trajectory_csv(env.trajectory()).as_bytes())?;
        log(&format!(
            "start x = {:.2}: {} after {} steps, final distance {:.3}",
            rec.start, rec.outcome, rec.steps, rec.final_distance
        ));
        Ok(())
    })?;
    dir.write("summary.csv", eval_summary_csv(&records).as_bytes())?;
    manifest.finish(&dir)?;
    Ok(records)
}

#[derive(Clone, Debug, Default)]
pub struct FieldsOptions {
    /// Greedy policy to drive the fish; without one it holds the zero action.
    pub checkpoint: Option<PathBuf>,
    /// Spin the bare wake up from rest and store its populations instead.
    pub spinup: bool,
    /// Head tip start x; defaults to the middle of the start range.
    pub start: Option<f64>,
}

fn snapshot_of(flow: &FlowSolver, len: f64, outline: Option<Vec<[f64; 2]>>) -> Result<Snapshot> {
    let mut m = MacroField::new(flow.nx(), flow.ny());
    flow.field.macroscopics(&ForceField::zeros(flow.nx(), flow.ny()), &mut m)?;
    let mut s = Snapshot::from_macros(&m, 1.0 / len, flow.tick() as f64);
    s.polyline = outline.map(|o| o.into_iter().map(|[x, y]| [x / len, y / len]).collect());
    Ok(s)
}

fn snap_name(tick: u64) -> String {
    format!("snap_{tick:08}.vswm")
}

/// Writes field snapshots every `run.snapshot_cadence` ticks and returns
/// their paths.
pub fn cmd_fields(cfg: &RunConfig, opts: &FieldsOptions, log: Log) -> Result<Vec<PathBuf>> {
    cfg.check()?;
    let env_cfg = cfg.env_config()?;
    let cadence = cfg.snapshot_cadence()? as u64;
    let len = env_cfg.body_length;
    let dir = RunDir::create(cfg.out_dir().join("fields"))?;
    dir.echo_config(cfg)?;
    let manifest = RunManifest::begin("fields", cfg)?;
    let mut written = Vec::new();

    if opts.spinup {
        let ticks = cfg.spinup_ticks()?;
        log(&format!("spinning up the wake for {ticks} ticks"));
        let mut flow = FlowSolver::cylinder(&env_cfg.flow)?;
        for _ in 0..ticks {
            flow.step()?;
            if flow.tick() % cadence == 0 {
                let p = dir.path(&snap_name(flow.tick()));
                snapshot_of(&flow, len, None)?.write(&p)?;
                written.push(p);
            }
        }
        let p = dir.path("warm_start.vswf");
        write_populations(&flow.field, &p)?;
        log(&format!("wrote {}; set flow.warm_start to it", p.display()));
    } else {
        let agent = match &opts.checkpoint {
            Some(p) => Some(load_checkpoint(cfg, Some(p))?),
            None => None,
        };
        let limit = cfg.field_ticks()? as u64;
        let start = opts.start.unwrap_or(0.5 * (env_cfg.init_x[0] + env_cfg.init_x[1]));
        let zero = env_cfg.actions.zero_index();
        log("preparing the wake");
        let mut env = FishEnv::new(env_cfg)?;
        let mut state = env.reset_at(cfg.seed()?, Some(start))?;
        let t0 = env.swimmer().map_or(0, |s| s.flow.tick());
        let mut failure = None;
        loop {
            let action = match &agent {
                Some(a) => a.greedy(&state)?,
                None => zero,
            };
            let step = env.step_observed(action, &mut |s| {
                let k = s.flow.tick() - t0;
                if k % cadence == 0 && k <= limit {
                    let p = dir.path(&snap_name(s.flow.tick()));
                    if let Err(e) = snapshot_of(&s.flow, len, Some(s.markers())).and_then(|snap| snap.write(&p)) {
                        failure = Some(e);
                    } else {
                        written.push(p);
                    }
                }
                Ok(())
            })?;
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let k = env.swimmer().map_or(0, |s| s.flow.tick() - t0);
            if step.done || k >= limit {
                if step.done {
                    log(&format!("episode ended ({}) after {k} ticks", step.outcome.map_or("done", |o| o.as_str())));
                }
                break;
            }
            state = step.state;
        }
    }
    log(&format!("{} snapshots in {}", written.len(), dir.root().display()));
    manifest.finish(&dir)?;
    Ok(written)
}
