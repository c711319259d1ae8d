//! Tabular and neural agents and the generic learn/plan loop.

mod bfs;
mod dyna;
mod neural;
mod tabular;

pub use bfs::{bfs_plan, PlanValues};
pub use dyna::{
    backward_plan_step, forward_plan_step, planning_phase, replay_plan_step, run_dyna_loop,
    EpisodeTrace, LoopConfig, PlannerKind,
};
pub use neural::{run_neural_maze_agent, NeuralAgentConfig, NeuralAgentKind, NeuralMazeAgent};
pub use tabular::{act, q_learning_update, TabularQ, DEFAULT_EPSILON, DEFAULT_STEP_SIZE};
