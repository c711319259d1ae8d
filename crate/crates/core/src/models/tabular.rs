use std::collections::HashMap;

use rand::Rng as _;

use super::{ExpectedModel, ExpectedStep};
use crate::{Error, Result, Rng, Transition};

/// Pseudo-count each category receives before any data.
pub const PRIOR_CONCENTRATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `Pr(r, γ, s′ | s, a)`
    Forward,
    /// `Pr(s, a | r, γ, s′)`
    Backward,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Observed counts in first-seen order.
#[derive(Debug, Clone, Default)]
struct SparseCounts<K> {
    entries: Vec<(K, u64)>,
    total: u64,
}

impl<K: Copy + PartialEq> SparseCounts<K> {
    fn add(&mut self, key: K) {
        self.total += 1;
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 += 1,
            None => self.entries.push((key, 1)),
        }
    }

    fn count(&self, key: K) -> u64 {
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map_or(0, |e| e.1)
    }

    fn contains(&self, key: K) -> bool {
        self.entries.iter().any(|(k, _)| *k == key)
    }

    /// Observed category with cumulative count exceeding `u < total`.
    fn pick(&self, mut u: u64) -> K {
        for &(k, c) in &self.entries {
            if u < c {
                return k;
            }
            u -= c;
        }
        unreachable!("index beyond total count")
    }

    fn mode(&self) -> Option<K> {
        let mut best: Option<(K, u64)> = None;
        for &(k, c) in &self.entries {
            match best {
                Some((_, b)) if c <= b => {}
                _ => best = Some((k, c)),
            }
        }
        best.map(|(k, _)| k)
    }

    /// Draws from the Dirichlet(1) predictive over `categories` outcomes:
    /// with probability `n / (n + K)` an observed one proportionally to its
    /// count, otherwise a uniformly random category index.
    fn sample_with_prior(&self, categories: u64, rng: &mut Rng) -> Sampled<K> {
        let u = rng.random_range(0..self.total + categories);
        if u < self.total {
            Sampled::Observed(self.pick(u))
        } else {
            Sampled::Prior((u - self.total) as usize)
        }
    }
}

enum Sampled<K> {
    Observed(K),
    Prior(usize),
}

/// Counts under one forward key `(s, a)`. Rewards and discounts are keyed
/// by their bit patterns.
#[derive(Debug, Clone, Default)]
struct ForwardEntry {
    next: SparseCounts<usize>,
    rewards: SparseCounts<u64>,
    discounts: SparseCounts<u64>,
}

/// Backward conditioning key `(r, γ, s′)`.
type BackwardKey = (u64, u64, usize);

/// Tabular Dirichlet posterior over transitions, conditioned either forward
/// on `(s, a)` or backward on `(r, γ, s′)`.
///
/// Next-state and predecessor categories carry prior mass over the full
/// state (or state-action) set; reward and discount categories range over
/// the values observed under the key.
#[derive(Debug, Clone)]
pub struct DirichletTabularModel {
    direction: Direction,
    num_states: usize,
    num_actions: usize,
    forward: Vec<ForwardEntry>,
    backward: HashMap<BackwardKey, SparseCounts<usize>>,
    rewards_seen: Vec<u64>,
    discounts_seen: Vec<u64>,
    observations: u64,
}

impl DirichletTabularModel {
    pub fn new(direction: Direction, num_states: usize, num_actions: usize) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidArgument(
                "a tabular model needs at least one state and one action".into(),
            ));
        }
        let forward = match direction {
            Direction::Forward => vec![ForwardEntry::default(); num_states * num_actions],
            Direction::Backward => Vec::new(),
        };
        Ok(DirichletTabularModel {
            direction,
            num_states,
            num_actions,
            forward,
            backward: HashMap::new(),
            rewards_seen: Vec::new(),
            discounts_seen: Vec::new(),
            observations: 0,
        })
    }

    pub fn forward(num_states: usize, num_actions: usize) -> Result<Self> {
        Self::new(Direction::Forward, num_states, num_actions)
    }

    pub fn backward(num_states: usize, num_actions: usize) -> Result<Self> {
        Self::new(Direction::Backward, num_states, num_actions)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prior_concentration(&self) -> f64 {
        PRIOR_CONCENTRATION
    }

    /// Number of transitions absorbed so far.
    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Sum of observed (non-prior) counts over all keys and the outcome
    /// categories the model tracks (successors or predecessors).
    pub fn observed_count_mass(&self) -> u64 {
        match self.direction {
            Direction::Forward => self.forward.iter().map(|e| e.next.total).sum(),
            Direction::Backward => self.backward.values().map(|c| c.total).sum(),
        }
    }

    fn require(&self, direction: Direction) -> Result<()> {
        if self.direction != direction {
            return Err(Error::ModelDirection {
                expected: direction.as_str(),
                actual: self.direction.as_str(),
            });
        }
        Ok(())
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::InvalidState(s));
        }
        Ok(())
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<usize> {
        self.check_state(s)?;
        if a >= self.num_actions {
            return Err(Error::InvalidAction {
                action: a,
                num_actions: self.num_actions,
            });
        }
        Ok(s * self.num_actions + a)
    }

    /// Adds one observation of `t` to the counts under its key.
    pub fn update(&mut self, t: &Transition) -> Result<()> {
        let pair = self.check_pair(t.state, t.action)?;
        self.check_state(t.next_state)?;
        let (r, g) = (t.reward.to_bits(), t.discount.to_bits());
        match self.direction {
            Direction::Forward => {
                let e = &mut self.forward[pair];
                e.next.add(t.next_state);
                e.rewards.add(r);
                e.discounts.add(g);
            }
            Direction::Backward => {
                self.backward.entry((r, g, t.next_state)).or_default().add(pair);
            }
        }
        if !self.rewards_seen.contains(&r) {
            self.rewards_seen.push(r);
        }
        if !self.discounts_seen.contains(&g) {
            self.discounts_seen.push(g);
        }
        self.observations += 1;
        Ok(())
    }

    /// Observations of the forward key `(s, a)`.
    pub fn key_count(&self, s: usize, a: usize) -> Result<u64> {
        self.require(Direction::Forward)?;
        Ok(self.forward[self.check_pair(s, a)?].next.total)
    }

    /// Posterior predictive `(n(s′) + 1) / (n + |S|)`.
    pub fn next_state_probability(&self, s: usize, a: usize, next: usize) -> Result<f64> {
        self.require(Direction::Forward)?;
        self.check_state(next)?;
        let e = &self.forward[self.check_pair(s, a)?];
        Ok((e.next.count(next) as f64 + PRIOR_CONCENTRATION)
            / (e.next.total as f64 + PRIOR_CONCENTRATION * self.num_states as f64))
    }

    fn value_probability(counts: &SparseCounts<u64>, global: &[u64], value: f64) -> f64 {
        let bits = value.to_bits();
        if counts.total == 0 {
            return if global.contains(&bits) {
                1.0 / global.len() as f64
            } else {
                0.0
            };
        }
        if !counts.contains(bits) {
            return 0.0;
        }
        let k = counts.entries.len() as f64;
        (counts.count(bits) as f64 + PRIOR_CONCENTRATION)
            / (counts.total as f64 + PRIOR_CONCENTRATION * k)
    }

    pub fn reward_probability(&self, s: usize, a: usize, reward: f64) -> Result<f64> {
        self.require(Direction::Forward)?;
        let e = &self.forward[self.check_pair(s, a)?];
        Ok(Self::value_probability(&e.rewards, &self.rewards_seen, reward))
    }

    pub fn discount_probability(&self, s: usize, a: usize, discount: f64) -> Result<f64> {
        self.require(Direction::Forward)?;
        let e = &self.forward[self.check_pair(s, a)?];
        Ok(Self::value_probability(&e.discounts, &self.discounts_seen, discount))
    }

    /// Posterior predictive `(n(s, a) + 1) / (n + |S||A|)` under the key
    /// `(r, γ, s′)`.
    pub fn predecessor_probability(
        &self,
        reward: f64,
        discount: f64,
        next: usize,
        s: usize,
        a: usize,
    ) -> Result<f64> {
        self.require(Direction::Backward)?;
        let pair = self.check_pair(s, a)?;
        let k = (self.num_states * self.num_actions) as f64 * PRIOR_CONCENTRATION;
        Ok(
            match self.backward.get(&(reward.to_bits(), discount.to_bits(), next)) {
                Some(c) => (c.count(pair) as f64 + PRIOR_CONCENTRATION) / (c.total as f64 + k),
                None => PRIOR_CONCENTRATION / k,
            },
        )
    }

    fn sample_value(counts: &SparseCounts<u64>, global: &[u64], rng: &mut Rng) -> f64 {
        let bits = if counts.total > 0 {
            match counts.sample_with_prior(counts.entries.len() as u64, rng) {
                Sampled::Observed(b) => b,
                Sampled::Prior(i) => counts.entries[i].0,
            }
        } else if global.is_empty() {
            return 0.0;
        } else {
            global[rng.random_range(0..global.len())]
        };
        f64::from_bits(bits)
    }

    /// Imagined transition from `(s, a)`: successor, reward and discount are
    /// drawn independently from their posteriors.
    pub fn sample_forward(&self, s: usize, a: usize, rng: &mut Rng) -> Result<Transition> {
        self.require(Direction::Forward)?;
        let e = &self.forward[self.check_pair(s, a)?];
        let next = match e.next.sample_with_prior(self.num_states as u64, rng) {
            Sampled::Observed(n) => n,
            Sampled::Prior(n) => n,
        };
        let reward = Self::sample_value(&e.rewards, &self.rewards_seen, rng);
        let discount = Self::sample_value(&e.discounts, &self.discounts_seen, rng);
        Ok(Transition::new(s, a, reward, discount, next))
    }

    /// Imagined predecessor `(s, a)` of the anchor's `(r, γ, s′)`, which are
    /// carried over unchanged.
    pub fn sample_backward(&self, anchor: &Transition, rng: &mut Rng) -> Result<Transition> {
        self.require(Direction::Backward)?;
        self.check_state(anchor.next_state)?;
        let pairs = (self.num_states * self.num_actions) as u64;
        let key = (anchor.reward.to_bits(), anchor.discount.to_bits(), anchor.next_state);
        let pair = match self.backward.get(&key) {
            Some(c) => match c.sample_with_prior(pairs, rng) {
                Sampled::Observed(p) => p,
                Sampled::Prior(p) => p,
            },
            None => rng.random_range(0..pairs as usize),
        };
        Ok(Transition::new(
            pair / self.num_actions,
            pair % self.num_actions,
            anchor.reward,
            anchor.discount,
            anchor.next_state,
        ))
    }
}

impl ExpectedModel for DirichletTabularModel {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Posterior-mean reward and discount with the posterior-mode successor;
    /// `None` for keys never observed (and for backward models).
    fn expected_step(&self, s: usize, a: usize) -> Option<ExpectedStep> {
        if self.direction != Direction::Forward {
            return None;
        }
        let e = self.forward.get(self.check_pair(s, a).ok()?)?;
        let next_state = e.next.mode()?;
        let mean = |c: &SparseCounts<u64>| {
            let k = c.entries.len() as f64;
            let z = c.total as f64 + PRIOR_CONCENTRATION * k;
            c.entries
                .iter()
                .map(|&(b, n)| f64::from_bits(b) * (n as f64 + PRIOR_CONCENTRATION) / z)
                .sum::<f64>()
        };
        Some(ExpectedStep {
            reward: mean(&e.rewards),
            discount: mean(&e.discounts),
            next_state,
        })
    }
}
