//! Environments: the Dyna maze and four-rooms grid worlds, and the
//! two-state MRP of the divergence analysis.

mod grid;
mod mrp;

pub use grid::{
    GridState, GridWorld, Layout, MazeObservation, DOWN, LEFT, NOOP, RIGHT, UP, VIEW_LEN,
    VIEW_SIZE,
};
pub use mrp::{mrp_matrices, MrpSpec, TWO_STATE_FEATURES};
