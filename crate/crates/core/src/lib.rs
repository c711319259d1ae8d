//! Planning-with-models laboratory.
//!
//! Grid worlds and a two-state Markov reward process, experience replay,
//! tabular Dirichlet and neural transition models, Dyna-style agents, a
//! linear TD stability toolkit, and a seeded experiment harness that emits
//! CSV and SVG results.

pub mod agents;
pub mod envs;
mod error;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod neural;
pub mod replay;
pub mod stability;

pub use error::{Error, Result};

use rand::SeedableRng;

/// Random stream used throughout the crate. Every stochastic operation takes
/// one explicitly so runs are reproducible from a seed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// One experience tuple `(s, a, r, γ, s′)` over integer state indices.
///
/// `discount` is zero exactly when the transition is terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub discount: f64,
    pub next_state: usize,
}

impl Transition {
    pub fn new(state: usize, action: usize, reward: f64, discount: f64, next_state: usize) -> Self {
        Transition {
            state,
            action,
            reward,
            discount,
            next_state,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.discount == 0.0
    }
}

/// Builds the random stream for `seed`.
pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a base seed and a list of labels
/// (splitmix64 mixing), so that sibling experiment cells never share state.
pub fn derive_rng(seed: u64, labels: &[u64]) -> Rng {
    let mut h = splitmix64(seed);
    for &l in labels {
        h = splitmix64(h ^ splitmix64(l.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    Rng::seed_from_u64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit label for a string (FNV-1a), used with [`derive_rng`].
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
