use crate::linalg::Matrix;
use crate::{Error, Result};

/// The two-state Markov reward process used for the divergence analysis.
///
/// On every transition the next state is state 1 with probability `p` and
/// state 2 otherwise, whatever the current state. All rewards are zero and
/// the single feature of state `s` is `s` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrpSpec {
    pub transition_probability: f64,
    pub discount: f64,
}

/// Per-state features `x(1) = 1`, `x(2) = 2`.
pub const TWO_STATE_FEATURES: [f64; 2] = [1.0, 2.0];

impl MrpSpec {
    pub fn new(transition_probability: f64, discount: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transition_probability) {
            return Err(Error::InvalidArgument(format!(
                "transition probability {transition_probability} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::InvalidArgument(format!("discount {discount} outside [0, 1]")));
        }
        Ok(MrpSpec {
            transition_probability,
            discount,
        })
    }

    /// Stationary distribution of the chain, `(p, 1 − p)`.
    pub fn stationary_distribution(&self) -> [f64; 2] {
        [self.transition_probability, 1.0 - self.transition_probability]
    }
}

/// Column-stochastic dynamics `[P]ᵢⱼ = Pr(next = i | current = j)` and the
/// 2×1 feature matrix.
pub fn mrp_matrices(spec: &MrpSpec) -> (Matrix, Matrix) {
    let p = spec.transition_probability;
    let dynamics = Matrix::from_rows(&[vec![p, p], vec![1.0 - p, 1.0 - p]]).expect("2x2");
    let features = Matrix::column(&TWO_STATE_FEATURES);
    (dynamics, features)
}
