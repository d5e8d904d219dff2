//! Fixed-capacity experience store with FIFO eviction and uniform sampling.

use rand::Rng;

use crate::env::Transition;

pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
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

    pub fn get(&self, index: usize) -> &Transition {
        &self.storage[index]
    }

    /// Uniform with-replacement sample of stored indices.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(tag: usize) -> Transition {
        Transition {
            agent_id: tag,
            obs: vec![tag as f64],
            action: 0.0,
            reward: 0.0,
            next_obs: vec![0.0],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..6 {
            buf.push(transition(i));
        }
        assert_eq!(buf.len(), 4);
        let held: Vec<usize> = (0..4).map(|i| buf.get(i).agent_id).collect();
        // Oldest two (0, 1) were overwritten in place.
        assert_eq!(held, vec![4, 5, 2, 3]);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(transition(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000usize;
        let mut counts = [0usize; 100];
        for idx in buf.sample_indices(draws, &mut rng) {
            counts[idx] += 1;
        }
        let expected = draws as f64 / 100.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 99 degrees of freedom; the 0.001 quantile is ~148.
        assert!(chi2 < 148.0, "chi2 = {chi2}");
    }
}
