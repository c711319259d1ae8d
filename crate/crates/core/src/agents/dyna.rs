use super::bfs::bfs_plan;
use super::tabular::{act, q_learning_update, TabularQ};
use crate::envs::GridWorld;
use crate::models::{Direction, DirichletTabularModel};
use crate::replay::ReplayBuffer;
use crate::{Error, Result, Rng};

/// Source of the transitions used for planning updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerKind {
    None,
    /// Stored transitions; real experience only reaches the values this way.
    Replay,
    /// Stored `(s, a)` stepped forward through a forward model.
    ForwardDyna,
    /// Stored `(r, γ, s′)` with a predecessor drawn from a backward model.
    BackwardDyna,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::None => "none",
            PlannerKind::Replay => "replay",
            PlannerKind::ForwardDyna => "forward",
            PlannerKind::BackwardDyna => "backward",
        }
    }

    pub fn parse(s: &str) -> Result<PlannerKind> {
        match s {
            "none" => Ok(PlannerKind::None),
            "replay" => Ok(PlannerKind::Replay),
            "forward" | "forward-dyna" | "forward_dyna" => Ok(PlannerKind::ForwardDyna),
            "backward" | "backward-dyna" | "backward_dyna" => Ok(PlannerKind::BackwardDyna),
            _ => Err(Error::Parse(format!("unknown planner {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    /// K
    pub iterations: usize,
    /// M
    pub interactions: usize,
    /// P
    pub planning_steps: usize,
    pub planner: PlannerKind,
    /// Lookahead depth for behaviour; 0 acts on `Q` directly.
    pub search_depth: usize,
    pub epsilon: f64,
    pub step_size: f64,
    /// Stop once this many episodes have finished.
    pub episode_budget: Option<usize>,
    /// Truncate (and reset) episodes that reach this many steps.
    pub max_episode_steps: Option<usize>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            iterations: 1_000_000,
            interactions: 1,
            planning_steps: 0,
            planner: PlannerKind::None,
            search_depth: 0,
            epsilon: super::tabular::DEFAULT_EPSILON,
            step_size: super::tabular::DEFAULT_STEP_SIZE,
            episode_budget: None,
            max_episode_steps: None,
        }
    }
}

/// Per-episode statistics of one run. Only completed (or truncated) episodes
/// are recorded; `total_interactions` also counts an unfinished tail.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub episode_steps: Vec<usize>,
    pub episode_returns: Vec<f64>,
    pub truncated: Vec<bool>,
    pub total_interactions: usize,
}

impl EpisodeTrace {
    pub fn episodes(&self) -> usize {
        self.episode_steps.len()
    }

    /// Steps spent in the first `n` episodes.
    pub fn steps_for_first(&self, n: usize) -> usize {
        self.episode_steps.iter().take(n).sum()
    }

    fn record(&mut self, steps: usize, ret: f64, truncated: bool) {
        self.episode_steps.push(steps);
        self.episode_returns.push(ret);
        self.truncated.push(truncated);
    }
}

fn expect_direction(model: &DirichletTabularModel, direction: Direction) -> Result<()> {
    if model.direction() != direction {
        return Err(Error::ModelDirection {
            expected: direction.as_str(),
            actual: model.direction().as_str(),
        });
    }
    Ok(())
}

/// One planning update from a stored transition stepped forward by the model.
pub fn forward_plan_step(
    replay: &ReplayBuffer,
    model: &DirichletTabularModel,
    q: &mut TabularQ,
    rng: &mut Rng,
) -> Result<()> {
    expect_direction(model, Direction::Forward)?;
    let t = *replay.sample_one(rng)?;
    let imagined = model.sample_forward(t.state, t.action, rng)?;
    q_learning_update(q, &imagined)?;
    Ok(())
}

/// One planning update on an imagined predecessor of a stored transition.
pub fn backward_plan_step(
    replay: &ReplayBuffer,
    model: &DirichletTabularModel,
    q: &mut TabularQ,
    rng: &mut Rng,
) -> Result<()> {
    expect_direction(model, Direction::Backward)?;
    let t = *replay.sample_one(rng)?;
    let imagined = model.sample_backward(&t, rng)?;
    q_learning_update(q, &imagined)?;
    Ok(())
}

/// One planning update on a uniformly replayed transition.
pub fn replay_plan_step(replay: &ReplayBuffer, q: &mut TabularQ, rng: &mut Rng) -> Result<()> {
    let t = *replay.sample_one(rng)?;
    q_learning_update(q, &t)?;
    Ok(())
}

fn check_components(
    env: &GridWorld,
    model: Option<&DirichletTabularModel>,
    q: &TabularQ,
    config: &LoopConfig,
) -> Result<()> {
    if config.iterations == 0 || config.interactions == 0 {
        return Err(Error::InvalidArgument(
            "iterations and interactions must be at least 1".into(),
        ));
    }
    if q.num_states() != env.num_states() || q.num_actions() != env.num_actions() {
        return Err(Error::ComponentMismatch(format!(
            "value table is {}x{}, environment {}x{}",
            q.num_states(),
            q.num_actions(),
            env.num_states(),
            env.num_actions()
        )));
    }
    if let Some(m) = model {
        if m.num_states() != env.num_states() || m.num_actions() != env.num_actions() {
            return Err(Error::ComponentMismatch("model does not match the environment".into()));
        }
    }
    let needed = match config.planner {
        PlannerKind::ForwardDyna => Some(Direction::Forward),
        PlannerKind::BackwardDyna => Some(Direction::Backward),
        _ if config.search_depth > 0 => Some(Direction::Forward),
        _ => None,
    };
    if config.search_depth > 0 && config.planner == PlannerKind::BackwardDyna {
        return Err(Error::ComponentMismatch(
            "lookahead search needs a forward model but the planner uses a backward one".into(),
        ));
    }
    match (needed, model) {
        (Some(d), None) => Err(Error::ComponentMismatch(format!(
            "planner {} needs a {} model",
            config.planner.as_str(),
            d.as_str()
        ))),
        (Some(d), Some(m)) if m.direction() != d => Err(Error::ComponentMismatch(format!(
            "planner {} needs a {} model, got a {} one",
            config.planner.as_str(),
            d.as_str(),
            m.direction().as_str()
        ))),
        _ => Ok(()),
    }
}

/// `P` planning updates drawn from the configured source.
pub fn planning_phase(
    replay: &ReplayBuffer,
    model: Option<&DirichletTabularModel>,
    q: &mut TabularQ,
    config: &LoopConfig,
    rng: &mut Rng,
) -> Result<()> {
    if replay.is_empty() {
        return Ok(());
    }
    for _ in 0..config.planning_steps {
        match (config.planner, model) {
            (PlannerKind::None, _) => return Ok(()),
            (PlannerKind::Replay, _) => replay_plan_step(replay, q, rng)?,
            (PlannerKind::ForwardDyna, Some(m)) => forward_plan_step(replay, m, q, rng)?,
            (PlannerKind::BackwardDyna, Some(m)) => backward_plan_step(replay, m, q, rng)?,
            (p, None) => {
                return Err(Error::ComponentMismatch(format!(
                    "planner {} has no model",
                    p.as_str()
                )))
            }
        }
    }
    Ok(())
}

/// Learn/plan loop: `K` iterations of `M` real interactions, each updating
/// replay, model and (except for the replay planner) the values, followed by
/// `P` planning updates.
pub fn run_dyna_loop(
    env: &GridWorld,
    mut model: Option<&mut DirichletTabularModel>,
    replay: &mut ReplayBuffer,
    q: &mut TabularQ,
    config: &LoopConfig,
    rng: &mut Rng,
) -> Result<EpisodeTrace> {
    check_components(env, model.as_deref(), q, config)?;
    q.step_size = config.step_size;
    q.epsilon = config.epsilon;
    let mut trace = EpisodeTrace::default();
    let mut state = env.reset(rng);
    let mut steps = 0;
    let mut ret = 0.0;
    let done = |trace: &EpisodeTrace| {
        config
            .episode_budget
            .is_some_and(|budget| trace.episodes() >= budget)
    };
    'outer: for _ in 0..config.iterations {
        for _ in 0..config.interactions {
            let action = if config.search_depth > 0 {
                let m = model.as_deref().expect("checked above");
                let plan = bfs_plan(q, m, state, config.search_depth)?;
                act(&plan.values, config.epsilon, rng)
            } else {
                act(q.values(state), config.epsilon, rng)
            };
            let t = env.step(state, action, rng)?;
            replay.append(t);
            if let Some(m) = model.as_deref_mut() {
                m.update(&t)?;
            }
            if config.planner != PlannerKind::Replay {
                q_learning_update(q, &t)?;
            }
            steps += 1;
            ret += t.reward;
            trace.total_interactions += 1;
            state = t.next_state;
            let truncated = !t.is_terminal() && config.max_episode_steps == Some(steps);
            if t.is_terminal() || truncated {
                trace.record(steps, ret, truncated);
                if truncated {
                    replay.end_episode();
                }
                steps = 0;
                ret = 0.0;
                state = env.reset(rng);
                if done(&trace) {
                    break 'outer;
                }
            }
        }
        planning_phase(replay, model.as_deref(), q, config, rng)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rng_from_seed, Transition};

    fn config(planner: PlannerKind, p: usize) -> LoopConfig {
        LoopConfig {
            planning_steps: p,
            planner,
            episode_budget: Some(5),
            ..LoopConfig::default()
        }
    }

    #[test]
    fn planner_parse_round_trip() {
        for p in [
            PlannerKind::None,
            PlannerKind::Replay,
            PlannerKind::ForwardDyna,
            PlannerKind::BackwardDyna,
        ] {
            assert_eq!(PlannerKind::parse(p.as_str()).unwrap(), p);
        }
        assert!(PlannerKind::parse("sideways").is_err());
    }

    #[test]
    fn backward_planner_rejects_forward_model() {
        let env = GridWorld::four_rooms(0.0).unwrap();
        let mut model = DirichletTabularModel::forward(env.num_states(), 5).unwrap();
        let mut q = TabularQ::new(env.num_states(), 5);
        let mut replay = ReplayBuffer::unbounded();
        let err = run_dyna_loop(
            &env,
            Some(&mut model),
            &mut replay,
            &mut q,
            &config(PlannerKind::BackwardDyna, 5),
            &mut rng_from_seed(0),
        );
        assert!(matches!(err, Err(Error::ComponentMismatch(_))));
        let err = run_dyna_loop(
            &env,
            None,
            &mut replay,
            &mut q,
            &config(PlannerKind::ForwardDyna, 5),
            &mut rng_from_seed(0),
        );
        assert!(matches!(err, Err(Error::ComponentMismatch(_))));
    }

    #[test]
    fn plan_steps_reject_wrong_direction() {
        let mut replay = ReplayBuffer::unbounded();
        replay.append(Transition::new(0, 0, 1.0, 0.0, 1));
        let f = DirichletTabularModel::forward(2, 1).unwrap();
        let b = DirichletTabularModel::backward(2, 1).unwrap();
        let mut q = TabularQ::new(2, 1);
        let mut rng = rng_from_seed(0);
        assert!(backward_plan_step(&replay, &f, &mut q, &mut rng).is_err());
        assert!(forward_plan_step(&replay, &b, &mut q, &mut rng).is_err());
    }

    #[test]
    fn empty_replay_plan_step_errors() {
        let replay = ReplayBuffer::unbounded();
        let f = DirichletTabularModel::forward(2, 1).unwrap();
        let mut q = TabularQ::new(2, 1);
        let mut rng = rng_from_seed(0);
        assert!(forward_plan_step(&replay, &f, &mut q, &mut rng).is_err());
        assert!(replay_plan_step(&replay, &mut q, &mut rng).is_err());
    }

    #[test]
    fn episode_budget_is_respected() {
        let env = GridWorld::dyna_maze();
        let mut q = TabularQ::new(env.num_states(), 4);
        let mut replay = ReplayBuffer::unbounded();
        let trace = run_dyna_loop(
            &env,
            None,
            &mut replay,
            &mut q,
            &config(PlannerKind::Replay, 5),
            &mut rng_from_seed(3),
        )
        .unwrap();
        assert_eq!(trace.episodes(), 5);
        assert_eq!(trace.steps_for_first(5), trace.total_interactions);
        assert!(trace.episode_returns.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn truncation_resets_the_episode() {
        let env = GridWorld::dyna_maze();
        let mut q = TabularQ::new(env.num_states(), 4);
        let mut replay = ReplayBuffer::unbounded();
        let cfg = LoopConfig {
            iterations: 30,
            max_episode_steps: Some(10),
            epsilon: 1.0,
            ..LoopConfig::default()
        };
        let trace =
            run_dyna_loop(&env, None, &mut replay, &mut q, &cfg, &mut rng_from_seed(1)).unwrap();
        assert!(trace.episode_steps.iter().all(|&s| s <= 10));
        assert_eq!(trace.total_interactions, 30);
    }
}
