//! Learnable transition models and the expectation-model interface used by
//! lookahead search.

mod neural;
mod tabular;

pub use neural::{neural_predict, ModelLoss, NeuralModel, NeuralPrediction};
pub use tabular::{Direction, DirichletTabularModel, PRIOR_CONCENTRATION};

use crate::envs::GridWorld;
use crate::Transition;

/// A single deterministic successor with its expected reward and discount.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedStep {
    pub reward: f64,
    pub discount: f64,
    pub next_state: usize,
}

/// Anything that can answer "what happens, on average, if I take `a` in `s`".
pub trait ExpectedModel {
    fn num_actions(&self) -> usize;

    /// `None` when the model has nothing to say about `(s, a)`.
    fn expected_step(&self, s: usize, a: usize) -> Option<ExpectedStep>;
}

/// The environment itself as an expectation model: mean reward and discount
/// under its true dynamics with the most likely successor.
impl ExpectedModel for GridWorld {
    fn num_actions(&self) -> usize {
        GridWorld::num_actions(self)
    }

    fn expected_step(&self, s: usize, a: usize) -> Option<ExpectedStep> {
        if self.is_terminal(s) {
            return None;
        }
        let dist = self.transition_distribution(s, a).ok()?;
        let mut step = ExpectedStep {
            reward: 0.0,
            discount: 0.0,
            next_state: dist[0].0,
        };
        let mut best = 0.0;
        for (next, p) in dist {
            let t = outcome(self, s, a, next);
            step.reward += p * t.reward;
            step.discount += p * t.discount;
            if p > best {
                best = p;
                step.next_state = next;
            }
        }
        Some(step)
    }
}

fn outcome(world: &GridWorld, s: usize, a: usize, next: usize) -> Transition {
    if world.is_terminal(next) {
        Transition::new(s, a, world.goal_reward(), 0.0, next)
    } else {
        Transition::new(s, a, 0.0, world.discount(), next)
    }
}
