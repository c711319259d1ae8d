//! Small fully connected networks trained with Adam.

mod adam;
mod double_q;
mod mlp;

pub use adam::{
    adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON, DEFAULT_LEARNING_RATE,
};
pub use double_q::{double_q_target, double_q_update, QSample};
pub use mlp::{ForwardCache, Mlp, HIDDEN_WIDTH};
