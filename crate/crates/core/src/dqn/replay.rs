use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lbm::snapshot::Reader;

pub const REPLAY_MAGIC: &[u8; 5] = b"VSWR1";

/// One stored experience. `done` marks a true terminal state; an episode
/// cut off by the step cap is stored with `done = false`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with FIFO eviction.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, k: usize) -> &Transition {
        &self.items[k]
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `batch` distinct slot indices, uniformly at random.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        index::sample(rng, self.items.len(), batch.min(self.items.len())).into_vec()
    }
}

impl ReplayBuffer {
    /// `VSWR1` dump: magic, `u64 tag`, `u32` capacity, length, cursor and
    /// state width, then per slot `s`, `u32 a`, `f64 r`, `s_next`, `u8 done`.
    pub fn to_bytes(&self, tag: u64) -> Vec<u8> {
        let dim = self.items.first().map_or(0, |t| t.s.len());
        let mut out = Vec::with_capacity(29 + self.items.len() * (16 * dim + 13));
        out.extend_from_slice(REPLAY_MAGIC);
        out.extend_from_slice(&tag.to_le_bytes());
        for v in [self.capacity, self.items.len(), self.cursor, dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for t in &self.items {
            t.s.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
            out.extend_from_slice(&(t.a as u32).to_le_bytes());
            out.extend_from_slice(&t.r.to_le_bytes());
            t.s_next.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
            out.push(t.done as u8);
        }
        out
    }

    /// Inverse of [`ReplayBuffer::to_bytes`], returning the tag as well.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<(u64, Self)> {
        let mut r = Reader::new(bytes, path);
        r.magic(REPLAY_MAGIC)?;
        let tag = r.u64()?;
        let capacity = r.u32()? as usize;
        let len = r.u32()? as usize;
        let cursor = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if capacity == 0 || len > capacity || cursor >= capacity {
            return Err(Error::format(path, "inconsistent replay header"));
        }
        let mut items = Vec::with_capacity(len);
        for _ in 0..len {
            let s = r.f64s(dim)?;
            let a = r.u32()? as usize;
            let rew = r.f64()?;
            let s_next = r.f64s(dim)?;
            let done = match r.take(1)?[0] {
                0 => false,
                1 => true,
                _ => return Err(Error::format(path, "bad done flag")),
            };
            items.push(Transition { s, a, r: rew, s_next, done });
        }
        if r.remaining() != 0 {
            return Err(Error::format(path, "trailing bytes after replay memory"));
        }
        Ok((tag, ReplayBuffer { capacity, items, cursor }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(k: usize) -> Transition {
        Transition {
            s: vec![k as f64],
            a: 0,
            r: 0.0,
            s_next: vec![],
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(4);
        for k in 0..7 {
            b.push(t(k));
        }
        let kept: Vec<f64> = b.iter_oldest_first().map(|x| x.s[0]).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn dump_round_trips_after_wrapping() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            let mut x = t(k);
            x.s_next = vec![-(k as f64)];
            x.done = k % 2 == 0;
            b.push(x);
        }
        let (tag, c) = ReplayBuffer::from_bytes(&b.to_bytes(9), Path::new("m")).unwrap();
        assert_eq!(tag, 9);
        assert_eq!(c.iter_oldest_first().collect::<Vec<_>>(), b.iter_oldest_first().collect::<Vec<_>>());
        assert_eq!((c.cursor, c.capacity), (b.cursor, b.capacity));
    }

    #[test]
    fn batches_hold_distinct_slots() {
        let mut b = ReplayBuffer::new(50);
        for k in 0..50 {
            b.push(t(k));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let mut idx = b.sample_indices(20, &mut rng);
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), 20);
        }
    }
}
