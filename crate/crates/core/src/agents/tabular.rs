use rand::Rng as _;

use crate::{Error, Result, Rng, Transition};

pub const DEFAULT_STEP_SIZE: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Action-value table with its step size and exploration rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    values: Vec<f64>,
    num_states: usize,
    num_actions: usize,
    pub step_size: f64,
    pub epsilon: f64,
}

impl TabularQ {
    pub fn new(num_states: usize, num_actions: usize) -> TabularQ {
        TabularQ {
            values: vec![0.0; num_states * num_actions],
            num_states,
            num_actions,
            step_size: DEFAULT_STEP_SIZE,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn index(&self, s: usize, a: usize) -> Result<usize> {
        if s >= self.num_states {
            return Err(Error::InvalidState(s));
        }
        if a >= self.num_actions {
            return Err(Error::InvalidAction {
                action: a,
                num_actions: self.num_actions,
            });
        }
        Ok(s * self.num_actions + a)
    }

    /// `Q(s, ·)`; panics on an out-of-range state.
    pub fn values(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> Result<f64> {
        Ok(self.values[self.index(s, a)?])
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) -> Result<()> {
        let i = self.index(s, a)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.values(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn table(&self) -> &[f64] {
        &self.values
    }
}

/// `Q(s,a) ← Q(s,a) + α (r + γ max_a′ Q(s′,a′) − Q(s,a))`; returns the TD error.
pub fn q_learning_update(q: &mut TabularQ, t: &Transition) -> Result<f64> {
    let i = q.index(t.state, t.action)?;
    if t.next_state >= q.num_states {
        return Err(Error::InvalidState(t.next_state));
    }
    let bootstrap = if t.discount == 0.0 {
        0.0
    } else {
        t.discount * q.max_value(t.next_state)
    };
    let delta = t.reward + bootstrap - q.values[i];
    q.values[i] += q.step_size * delta;
    Ok(delta)
}

/// ε-greedy choice over `values`, breaking ties uniformly at random.
pub fn act(values: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    assert!(!values.is_empty(), "no actions to choose from");
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random_range(0..values.len());
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == max).count();
    if ties == 1 {
        return values.iter().position(|&v| v == max).unwrap();
    }
    let k = rng.random_range(0..ties);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == max)
        .nth(k)
        .map(|(i, _)| i)
        .unwrap()
}
