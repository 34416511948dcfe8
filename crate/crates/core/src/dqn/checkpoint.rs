//! `VSWQ1` agent checkpoint (little-endian):
//! magic, `u32` matrix count, `(u32 rows, u32 cols)` per matrix, value
//! parameters, Adam `m` and `v`, `u64` Adam step, target parameters,
//! `u64` environment steps, gradient steps and episodes, then the
//! generator state as a 32-byte seed, `u64` stream and `u128` word position.
//!
//! The replay memory is not stored; a resumed run refills it.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::adam::Adam;
use super::agent::{Agent, Schedule};
use super::lstm::{NetShape, QNetwork};
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};
use crate::lbm::snapshot::{write_atomic, Reader};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"VSWQ1";

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn to_bytes(agent: &Agent) -> Vec<u8> {
    let mats = agent.value.shape.matrices();
    let n = agent.value.params.len();
    let mut out = Vec::with_capacity(64 + 8 * mats.len() + 32 * n);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(mats.len() as u32).to_le_bytes());
    for (r, c) in &mats {
        out.extend_from_slice(&(*r as u32).to_le_bytes());
        out.extend_from_slice(&(*c as u32).to_le_bytes());
    }
    put_f64s(&mut out, &agent.value.params);
    put_f64s(&mut out, &agent.adam.m);
    put_f64s(&mut out, &agent.adam.v);
    out.extend_from_slice(&agent.adam.t.to_le_bytes());
    put_f64s(&mut out, &agent.target.params);
    for c in [agent.env_steps, agent.grad_steps, agent.episodes] {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&agent.rng.get_seed());
    out.extend_from_slice(&agent.rng.get_stream().to_le_bytes());
    out.extend_from_slice(&agent.rng.get_word_pos().to_le_bytes());
    out
}

/// Rebuilds an agent for `shape`; the file's matrix list must match it
/// exactly. Optimiser hyperparameters come from `schedule`.
pub fn from_bytes(bytes: &[u8], path: &Path, shape: NetShape, schedule: Schedule) -> Result<Agent> {
    shape.validate()?;
    schedule.validate()?;
    let mut r = Reader::new(bytes, path);
    r.magic(CHECKPOINT_MAGIC)?;
    let count = r.u32()? as usize;
    let expect = shape.matrices();
    if count != expect.len() {
        return Err(Error::format(
            path,
            format!("checkpoint holds {count} matrices, network needs {}", expect.len()),
        ));
    }
    for (k, (er, ec)) in expect.iter().enumerate() {
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        if (rows, cols) != (*er, *ec) {
            return Err(Error::format(
                path,
                format!("matrix {k} is {rows}x{cols} in the checkpoint, network needs {er}x{ec}"),
            ));
        }
    }
    let n = shape.param_count();
    let value = QNetwork::from_params(shape.clone(), r.f64s(n)?)?;
    let mut adam = Adam::new(n, schedule.lr);
    adam.m = r.f64s(n)?;
    adam.v = r.f64s(n)?;
    adam.t = r.u64()?;
    let target = QNetwork::from_params(shape, r.f64s(n)?)?;
    let (env_steps, grad_steps, episodes) = (r.u64()?, r.u64()?, r.u64()?);
    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
    if r.remaining() != 0 {
        return Err(Error::format(path, "trailing bytes after checkpoint"));
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    Ok(Agent {
        value,
        target,
        adam,
        replay: ReplayBuffer::new(schedule.capacity),
        schedule,
        rng,
        env_steps,
        grad_steps,
        episodes,
    })
}

pub fn save(agent: &Agent, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(agent))
}

pub fn load(path: &Path, shape: NetShape, schedule: Schedule) -> Result<Agent> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path, shape, schedule)
}
