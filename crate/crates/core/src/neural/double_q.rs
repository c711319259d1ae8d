use super::adam::{adam_step, AdamState};
use super::mlp::Mlp;
use crate::{Error, Result};

/// A transition over observation vectors, borrowed from wherever the caller
/// keeps them.
#[derive(Debug, Clone, Copy)]
pub struct QSample<'a> {
    pub observation: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub discount: f64,
    pub next_observation: &'a [f64],
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `y = r + γ · Q_target(s′, argmax_a Q_online(s′, a))`; terminal samples
/// give `y = r` without touching either network.
pub fn double_q_target(online: &Mlp, target: &Mlp, sample: &QSample) -> Result<f64> {
    if sample.discount == 0.0 {
        return Ok(sample.reward);
    }
    let greedy = argmax(&online.forward(sample.next_observation)?);
    Ok(sample.reward + sample.discount * target.forward(sample.next_observation)?[greedy])
}

/// One Adam step on the mean squared error `(Q(s, a) − y)²` over the batch.
/// Returns the loss before the step.
pub fn double_q_update(
    online: &mut Mlp,
    target: &Mlp,
    batch: &[QSample],
    adam: &mut AdamState,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_actions = online.output_width();
    let scale = 1.0 / batch.len() as f64;
    let mut grads = vec![0.0; online.params().len()];
    let mut loss = 0.0;
    let mut cotangent = vec![0.0; n_actions];
    for sample in batch {
        if sample.action >= n_actions {
            return Err(Error::InvalidAction {
                action: sample.action,
                num_actions: n_actions,
            });
        }
        let y = double_q_target(online, target, sample)?;
        let cache = online.forward_cached(sample.observation)?;
        let err = cache.output()[sample.action] - y;
        loss += err * err * scale;
        cotangent.fill(0.0);
        cotangent[sample.action] = 2.0 * err * scale;
        online.accumulate_gradients(&cache, &cotangent, &mut grads)?;
    }
    adam_step(adam, online.params_mut(), &grads)?;
    Ok(loss)
}
