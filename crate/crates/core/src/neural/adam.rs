use crate::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> AdamState {
        AdamState::with_learning_rate(num_params, DEFAULT_LEARNING_RATE)
    }

    pub fn with_learning_rate(num_params: usize, learning_rate: f64) -> AdamState {
        AdamState {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }
}

/// One Adam update of `params` along `-grads`.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    let n = state.first_moment.len();
    if params.len() != n || grads.len() != n {
        return Err(Error::Shape(format!(
            "Adam state for {n} parameters given {} parameters and {} gradients",
            params.len(),
            grads.len()
        )));
    }
    state.steps += 1;
    let t = state.steps as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..n {
        let g = grads[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..10 {
            adam_step(&mut s, &mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.steps(), 10);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [1e-3, 0.5, 3.0, -40.0] {
            let mut s = AdamState::new(1);
            let mut p = vec![0.0];
            adam_step(&mut s, &mut p, &[g]).unwrap();
            let expected = 1e-3 * g.abs() / (g.abs() + 1e-8);
            assert!((p[0].abs() - expected).abs() < 1e-15);
            assert_eq!(p[0].signum(), -g.signum());
        }
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        let mut s = AdamState::new(1);
        let mut p = vec![0.0];
        let mut last = p[0];
        for _ in 0..1000 {
            adam_step(&mut s, &mut p, &[2.0]).unwrap();
            assert!(p[0] < last);
            last = p[0];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2);
        assert!(adam_step(&mut s, &mut [0.0], &[1.0]).is_err());
        assert_eq!(s.steps(), 0);
    }
}
