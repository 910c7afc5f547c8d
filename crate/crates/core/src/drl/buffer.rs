use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One transition `(x_t, z_t, r_t, x_{t+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub reward: f64,
    pub x_next: Vec<f64>,
}

/// Fixed-capacity ring: the `l`-th insert lands in slot `l mod capacity`.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    storage: Vec<Experience>,
    capacity: usize,
    writes: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        Ok(Self {
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            writes: 0,
        })
    }

    pub fn insert(&mut self, e: Experience) {
        let slot = self.writes % self.capacity;
        if slot < self.storage.len() {
            self.storage[slot] = e;
        } else {
            self.storage.push(e);
        }
        self.writes += 1;
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total inserts so far, including overwritten ones.
    pub fn writes(&self) -> usize {
        self.writes
    }

    pub fn entries(&self) -> &[Experience] {
        &self.storage
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Experience>> {
        if self.storage.is_empty() || n == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok((0..n).map(|_| &self.storage[rng.random_range(0..self.storage.len())]).collect())
    }
}

/// Keeps the best-reward transition seen in the current window of `w`
/// offers and releases it when the window closes.
#[derive(Clone, Debug)]
pub struct SelectiveWindow {
    window: usize,
    seen: usize,
    best: Option<Experience>,
}

impl SelectiveWindow {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("selective window must be at least 1".into()));
        }
        Ok(Self {
            window,
            seen: 0,
            best: None,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Returns the window's best transition on every `w`-th call.
    pub fn offer(&mut self, e: Experience) -> Option<Experience> {
        if self.best.as_ref().is_none_or(|b| e.reward > b.reward) {
            self.best = Some(e);
        }
        self.seen += 1;
        if self.seen % self.window == 0 {
            self.best.take()
        } else {
            None
        }
    }
}

/// Offers each transition to `tracker` and buffers whatever it releases.
pub fn selective_insert(buffer: &mut ReplayBuffer, e: Experience, tracker: &mut SelectiveWindow) {
    if let Some(best) = tracker.offer(e) {
        buffer.insert(best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tuple(reward: f64) -> Experience {
        Experience {
            x: vec![0.5],
            z: vec![0.0],
            reward,
            x_next: vec![0.5],
        }
    }

    fn rewards(b: &ReplayBuffer) -> Vec<f64> {
        b.entries().iter().map(|e| e.reward).collect()
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2).unwrap();
        for r in [1.0, 2.0, 3.0] {
            b.insert(tuple(r));
            assert!(b.len() <= 2);
        }
        assert_eq!(rewards(&b), vec![3.0, 2.0]);
        assert_eq!(b.writes(), 3);
    }

    #[test]
    fn single_entry_is_always_sampled() {
        let mut b = ReplayBuffer::new(4).unwrap();
        b.insert(tuple(7.0));
        let mut rng = crate::seed::stream(0, "t");
        assert!(b.sample(16, &mut rng).unwrap().iter().all(|e| e.reward == 7.0));
        assert!(ReplayBuffer::new(4).unwrap().sample(1, &mut rng).is_err());
    }

    fn trace(w: usize, rs: &[f64]) -> Vec<f64> {
        let mut b = ReplayBuffer::new(100).unwrap();
        let mut tracker = SelectiveWindow::new(w).unwrap();
        for &r in rs {
            selective_insert(&mut b, tuple(r), &mut tracker);
        }
        rewards(&b)
    }

    #[test]
    fn window_traces() {
        assert_eq!(trace(1, &[3.0, -1.0, 2.0]), vec![3.0, -1.0, 2.0]);
        assert_eq!(trace(3, &[1.0, 5.0, 2.0]), vec![5.0]);
        assert_eq!(trace(3, &[-1.0, -2.0, -3.0]), vec![-1.0]);
        assert_eq!(trace(5, &[0.0, 4.0, 1.0, 9.0, 2.0, 3.0, 8.0, 1.0, 0.5, 0.2]), vec![9.0, 8.0]);
        // an unfinished window stays pending
        assert_eq!(trace(3, &[1.0, 2.0, 3.0, 4.0]), vec![3.0]);
    }

    proptest! {
        #[test]
        fn inserts_are_window_maxima(w in 1usize..7, rs in prop::collection::vec(-50.0f64..50.0, 0..60)) {
            let got = trace(w, &rs);
            let want: Vec<f64> = rs
                .chunks_exact(w)
                .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            prop_assert_eq!(got, want);
        }
    }
}
