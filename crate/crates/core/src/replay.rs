//! Fixed-capacity FIFO replay buffer with uniform sampling.

use rand::Rng as _;

use crate::error::check_dim;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl Transition {
    /// Checks the record invariants. Actions are accepted on the closed
    /// interval because `tanh` rounds to exactly +-1 for large inputs.
    pub fn validate(&self) -> Result<()> {
        check_dim("transition next_state", self.state.len(), self.next_state.len())?;
        if !self.reward.is_finite() {
            return Err(Error::NonFinite("transition reward"));
        }
        if self.state.iter().chain(&self.next_state).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transition state"));
        }
        if self.action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::Config(format!("action out of bounds: {:?}", self.action)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Slot the next push will write.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `n` uniform draws with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.storage.len() < n || (n > 0 && self.storage.is_empty()) {
            return Err(Error::InsufficientData {
                needed: n,
                available: self.storage.len(),
            });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.storage.len())).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }

    pub fn sample_batch(&self, n: usize, rng: &mut Rng) -> Result<Vec<Transition>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| self.storage[i].clone())
            .collect())
    }
}

/// A minibatch laid out row-major for the batched network passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a, I>(transitions: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Transition>,
    {
        let mut iter = transitions.into_iter().peekable();
        let first = iter.peek().ok_or(Error::InsufficientData { needed: 1, available: 0 })?;
        let (obs_dim, act_dim) = (first.state.len(), first.action.len());
        let mut batch = Batch {
            len: 0,
            obs_dim,
            act_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
        };
        for t in iter {
            check_dim("batch state", obs_dim, t.state.len())?;
            check_dim("batch next_state", obs_dim, t.next_state.len())?;
            check_dim("batch action", act_dim, t.action.len())?;
            batch.states.extend_from_slice(&t.state);
            batch.actions.extend_from_slice(&t.action);
            batch.rewards.push(t.reward);
            batch.next_states.extend_from_slice(&t.next_state);
            batch.dones.push(t.done);
            batch.len += 1;
        }
        Ok(batch)
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.obs_dim..(i + 1) * self.obs_dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn tr(id: f64) -> Transition {
        Transition {
            state: vec![id],
            action: vec![0.0],
            reward: id,
            next_state: vec![id + 1.0],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2).unwrap();
        for i in 0..3 {
            b.push(tr(i as f64));
        }
        let ids: Vec<f64> = b.iter_ordered().map(|t| t.reward).collect();
        assert_eq!(ids, vec![1.0, 2.0]);
    }

    #[test]
    fn single_push_and_wraparound() {
        let mut b = ReplayBuffer::new(4).unwrap();
        b.push(tr(0.0));
        assert_eq!(b.len(), 1);
        for i in 1..4 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 4);
        assert_eq!(b.cursor(), 0);
    }

    #[test]
    fn keeps_last_capacity_in_order() {
        let mut b = ReplayBuffer::new(7).unwrap();
        for i in 0..45 {
            b.push(tr(i as f64));
        }
        let ids: Vec<f64> = b.iter_ordered().map(|t| t.reward).collect();
        assert_eq!(ids, (38..45).map(|i| i as f64).collect::<Vec<_>>());
        let mut rng = seeded_rng(0);
        assert!(b.sample_batch(7, &mut rng).unwrap().iter().all(|t| t.reward >= 38.0));
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = seeded_rng(0);
        let mut b = ReplayBuffer::new(10).unwrap();
        assert!(b.sample_batch(0, &mut rng).unwrap().is_empty());
        b.push(tr(5.0));
        let batch = b.sample_batch(3, &mut rng);
        assert!(matches!(batch, Err(Error::InsufficientData { needed: 3, available: 1 })));
        b.push(tr(6.0));
        b.push(tr(7.0));
        assert_eq!(b.sample_batch(3, &mut rng).unwrap().len(), 3);
    }

    #[test]
    fn sampling_from_a_single_transition_repeats_it() {
        // Batches never exceed the buffer size, so a one-element buffer can
        // only serve n = 1; repeated draws always return the same record.
        let mut rng = seeded_rng(4);
        let mut b = ReplayBuffer::new(3).unwrap();
        b.push(tr(9.0));
        let draws: Vec<Transition> = (0..3).flat_map(|_| b.sample_batch(1, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|t| *t == tr(9.0)));
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn transition_validation() {
        assert!(tr(0.0).validate().is_ok());
        let mut bad = tr(0.0);
        bad.reward = f64::INFINITY;
        assert!(bad.validate().is_err());
        let mut bad = tr(0.0);
        bad.action = vec![1.5];
        assert!(bad.validate().is_err());
        let mut bad = tr(0.0);
        bad.next_state = vec![];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn batch_layout() {
        let ts = [tr(1.0), tr(2.0)];
        let b = Batch::from_transitions(&ts).unwrap();
        assert_eq!(b.len, 2);
        assert_eq!(b.states, vec![1.0, 2.0]);
        assert_eq!(b.next_states, vec![2.0, 3.0]);
        assert_eq!(b.state(1), &[2.0]);
        assert!(Batch::from_transitions(&[]).is_err());
    }
}
