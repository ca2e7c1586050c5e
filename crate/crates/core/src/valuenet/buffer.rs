use std::collections::VecDeque;
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;

/// One training pair: encoded PBS and the value vector of both players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f32>,
    pub target: Vec<f32>,
}

/// Fixed-capacity ring of training examples. Producers append through a
/// shared queue; the trainer moves queued examples into the ring.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Example>,
    pending: Mutex<Vec<Example>>,
    purged: bool,
    total: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            pending: Mutex::new(Vec::new()),
            purged: false,
            total: 0,
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

    /// Examples ever inserted into the ring.
    pub fn total_inserted(&self) -> u64 {
        self.total
    }

    /// Inserts, evicting the oldest example when full.
    pub fn add(&mut self, ex: Example) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(ex);
        self.total += 1;
    }

    /// Queues an example from a producer thread.
    pub fn enqueue(&self, ex: Example) {
        self.pending.lock().expect("replay queue poisoned").push(ex);
    }

    /// Moves queued examples into the ring. Returns how many were moved.
    pub fn drain_pending(&mut self) -> usize {
        let queued = std::mem::take(&mut *self.pending.lock().expect("replay queue poisoned"));
        let n = queued.len();
        for ex in queued {
            self.add(ex);
        }
        n
    }

    /// `n` examples drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Example>, NetError> {
        if self.items.is_empty() {
            return Err(NetError::EmptyBuffer);
        }
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }

    /// Drops the oldest half of the contents, at most once over the
    /// buffer's lifetime. Returns whether anything was dropped.
    pub fn purge_oldest_half(&mut self) -> bool {
        if self.purged {
            return false;
        }
        self.purged = true;
        let drop = self.items.len() / 2;
        self.items.drain(..drop);
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = &Example> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn ex(i: usize) -> Example {
        Example {
            features: vec![i as f32],
            target: vec![0.0],
        }
    }

    fn ids(buf: &ReplayBuffer) -> Vec<usize> {
        buf.iter().map(|e| e.features[0] as usize).collect()
    }

    #[test]
    fn ring_keeps_newest() {
        let mut buf = ReplayBuffer::new(4);
        for i in 1..=6 {
            buf.add(ex(i));
        }
        assert_eq!(ids(&buf), vec![3, 4, 5, 6]);
        assert_eq!(buf.total_inserted(), 6);
    }

    #[test]
    fn empty_sample_is_an_error() {
        let buf = ReplayBuffer::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap_err(), NetError::EmptyBuffer);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.add(ex(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for e in buf.sample(n, &mut rng).unwrap() {
            counts[e.features[0] as usize] += 1;
        }
        let (mean, sd) = (n as f64 / 10.0, (n as f64 * 0.1 * 0.9).sqrt());
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn purge_happens_once() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..6 {
            buf.add(ex(i));
        }
        assert!(buf.purge_oldest_half());
        assert_eq!(ids(&buf), vec![3, 4, 5]);
        assert!(!buf.purge_oldest_half());
        assert_eq!(buf.len(), 3);
    }

    #[test]
    fn queued_examples_arrive_in_order() {
        let mut buf = ReplayBuffer::new(3);
        std::thread::scope(|s| {
            let b = &buf;
            s.spawn(move || (0..5).for_each(|i| b.enqueue(ex(i))));
        });
        assert_eq!(buf.drain_pending(), 5);
        assert_eq!(ids(&buf), vec![2, 3, 4]);
    }
}
