use crate::neural::{adam_step, AdamState, Mlp, QSample};
use crate::{Error, Result, Rng};

/// Deterministic expectation model over observation vectors: a next
/// observation head, a reward head and a logistic termination head, each a
/// separate `input → 20 → 20 → output` network on `[observation, one-hot(a)]`.
#[derive(Debug, Clone)]
pub struct NeuralModel {
    observation_len: usize,
    num_actions: usize,
    discount: f64,
    transition_net: Mlp,
    reward_net: Mlp,
    termination_net: Mlp,
    transition_adam: AdamState,
    reward_adam: AdamState,
    termination_adam: AdamState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralPrediction {
    pub reward: f64,
    /// `γ · (1 − Pr(terminal))`
    pub discount: f64,
    pub next_observation: Vec<f64>,
}

/// Mean losses of one training batch, before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelLoss {
    pub next_observation: f64,
    pub reward: f64,
    pub termination: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl NeuralModel {
    pub fn new(observation_len: usize, num_actions: usize, discount: f64, rng: &mut Rng) -> Self {
        let input = observation_len + num_actions;
        let transition_net = Mlp::new(input, observation_len, rng);
        let reward_net = Mlp::new(input, 1, rng);
        let termination_net = Mlp::new(input, 1, rng);
        NeuralModel {
            observation_len,
            num_actions,
            discount,
            transition_adam: AdamState::new(transition_net.params().len()),
            reward_adam: AdamState::new(reward_net.params().len()),
            termination_adam: AdamState::new(termination_net.params().len()),
            transition_net,
            reward_net,
            termination_net,
        }
    }

    pub fn transition_net(&self) -> &Mlp {
        &self.transition_net
    }

    pub fn reward_net(&self) -> &Mlp {
        &self.reward_net
    }

    pub fn termination_net(&self) -> &Mlp {
        &self.termination_net
    }

    fn input(&self, observation: &[f64], action: usize) -> Result<Vec<f64>> {
        if observation.len() != self.observation_len {
            return Err(Error::Shape(format!(
                "observation of length {} for a model expecting {}",
                observation.len(),
                self.observation_len
            )));
        }
        if action >= self.num_actions {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.num_actions,
            });
        }
        let mut x = Vec::with_capacity(self.observation_len + self.num_actions);
        x.extend_from_slice(observation);
        x.extend((0..self.num_actions).map(|a| if a == action { 1.0 } else { 0.0 }));
        Ok(x)
    }

    pub fn predict(&self, observation: &[f64], action: usize) -> Result<NeuralPrediction> {
        let x = self.input(observation, action)?;
        let termination = sigmoid(self.termination_net.forward(&x)?[0]);
        Ok(NeuralPrediction {
            reward: self.reward_net.forward(&x)?[0],
            discount: self.discount * (1.0 - termination),
            next_observation: self.transition_net.forward(&x)?,
        })
    }

    /// One Adam step per head: squared error for the next observation
    /// (summed over entries) and the reward, cross-entropy for termination
    /// (`discount == 0`). Losses are averaged over the batch.
    pub fn train_batch(&mut self, batch: &[QSample]) -> Result<ModelLoss> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut g_next = vec![0.0; self.transition_net.params().len()];
        let mut g_reward = vec![0.0; self.reward_net.params().len()];
        let mut g_term = vec![0.0; self.termination_net.params().len()];
        let mut loss = ModelLoss {
            next_observation: 0.0,
            reward: 0.0,
            termination: 0.0,
        };
        for s in batch {
            let x = self.input(s.observation, s.action)?;
            if s.next_observation.len() != self.observation_len {
                return Err(Error::Shape(format!(
                    "next observation of length {}",
                    s.next_observation.len()
                )));
            }

            let cache = self.transition_net.forward_cached(&x)?;
            let cot: Vec<f64> = cache
                .output()
                .iter()
                .zip(s.next_observation)
                .map(|(o, t)| {
                    loss.next_observation += (o - t) * (o - t) * scale;
                    2.0 * (o - t) * scale
                })
                .collect();
            self.transition_net.accumulate_gradients(&cache, &cot, &mut g_next)?;

            let cache = self.reward_net.forward_cached(&x)?;
            let err = cache.output()[0] - s.reward;
            loss.reward += err * err * scale;
            self.reward_net.accumulate_gradients(&cache, &[2.0 * err * scale], &mut g_reward)?;

            let cache = self.termination_net.forward_cached(&x)?;
            let z = cache.output()[0];
            let target = if s.discount == 0.0 { 1.0 } else { 0.0 };
            let p = sigmoid(z);
            // log(1 + e^z) - target·z, stable for large |z|
            loss.termination += (z.max(0.0) + (-z.abs()).exp().ln_1p() - target * z) * scale;
            self.termination_net
                .accumulate_gradients(&cache, &[(p - target) * scale], &mut g_term)?;
        }
        adam_step(&mut self.transition_adam, self.transition_net.params_mut(), &g_next)?;
        adam_step(&mut self.reward_adam, self.reward_net.params_mut(), &g_reward)?;
        adam_step(&mut self.termination_adam, self.termination_net.params_mut(), &g_term)?;
        Ok(loss)
    }
}

/// Expected `(r̂, γ̂, ô′)` for one observation and action.
pub fn neural_predict(
    model: &NeuralModel,
    observation: &[f64],
    action: usize,
) -> Result<NeuralPrediction> {
    model.predict(observation, action)
}
