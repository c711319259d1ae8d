use super::dyna::EpisodeTrace;
use super::tabular::act;
use crate::envs::GridWorld;
use crate::models::NeuralModel;
use crate::neural::{double_q_update, AdamState, Mlp, QSample, DEFAULT_LEARNING_RATE};
use crate::replay::ReplayBuffer;
use crate::{Error, Result, Rng, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuralAgentKind {
    /// Double-Q on replayed real transitions.
    ReplayQ,
    /// Double-Q on replayed `(s, a)` with `(r, γ, s′)` predicted by a
    /// learnt expectation model.
    ForwardDyna,
}

impl NeuralAgentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NeuralAgentKind::ReplayQ => "replay",
            NeuralAgentKind::ForwardDyna => "forward",
        }
    }

    pub fn parse(s: &str) -> Result<NeuralAgentKind> {
        match s {
            "replay" | "replay-q" | "replay_q" => Ok(NeuralAgentKind::ReplayQ),
            "forward" | "forward-dyna" | "forward_dyna" => Ok(NeuralAgentKind::ForwardDyna),
            _ => Err(Error::Parse(format!("unknown neural agent {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralAgentConfig {
    pub kind: NeuralAgentKind,
    /// Update batches per real step.
    pub updates_per_step: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_period: usize,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub max_episode_steps: Option<usize>,
    /// Updates start once replay holds this many transitions.
    pub warmup: usize,
}

impl Default for NeuralAgentConfig {
    fn default() -> Self {
        NeuralAgentConfig {
            kind: NeuralAgentKind::ReplayQ,
            updates_per_step: 1,
            batch_size: 32,
            replay_capacity: 10_000,
            target_period: 100,
            epsilon: 0.1,
            learning_rate: DEFAULT_LEARNING_RATE,
            episodes: 25,
            max_episode_steps: None,
            warmup: 32,
        }
    }
}

/// Q-network agent on the local-view observations of `env`.
pub struct NeuralMazeAgent {
    config: NeuralAgentConfig,
    views: Vec<Vec<f64>>,
    online: Mlp,
    target: Mlp,
    adam: AdamState,
    model: Option<NeuralModel>,
    replay: ReplayBuffer,
    updates: usize,
}

impl NeuralMazeAgent {
    pub fn new(env: &GridWorld, config: NeuralAgentConfig, rng: &mut Rng) -> Result<Self> {
        if config.batch_size == 0 || config.target_period == 0 || config.replay_capacity == 0 {
            return Err(Error::InvalidArgument(
                "batch size, target period and replay capacity must be positive".into(),
            ));
        }
        let views = (0..env.num_states())
            .map(|s| env.local_view(s).map(|v| v.values().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let obs_len = views[0].len();
        let online = Mlp::new(obs_len, env.num_actions(), rng);
        let model = match config.kind {
            NeuralAgentKind::ReplayQ => None,
            NeuralAgentKind::ForwardDyna => {
                Some(NeuralModel::new(obs_len, env.num_actions(), env.discount(), rng))
            }
        };
        Ok(NeuralMazeAgent {
            adam: AdamState::with_learning_rate(online.params().len(), config.learning_rate),
            target: online.clone(),
            online,
            model,
            replay: ReplayBuffer::with_capacity(config.replay_capacity),
            views,
            updates: 0,
            config,
        })
    }

    pub fn q_values(&self, state: usize) -> Result<Vec<f64>> {
        self.online.forward(&self.views[state])
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn model(&self) -> Option<&NeuralModel> {
        self.model.as_ref()
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    /// Stores `t` and, once warmed up, runs the configured number of
    /// update batches.
    pub fn observe(&mut self, t: Transition, rng: &mut Rng) -> Result<()> {
        self.replay.append(t);
        if self.replay.len() < self.config.warmup.max(1) {
            return Ok(());
        }
        for _ in 0..self.config.updates_per_step {
            self.update_batch(rng)?;
        }
        Ok(())
    }

    fn update_batch(&mut self, rng: &mut Rng) -> Result<()> {
        let batch = self.replay.sample_uniform(rng, self.config.batch_size)?;
        let views = &self.views;
        let real: Vec<QSample> = batch
            .iter()
            .map(|t| QSample {
                observation: &views[t.state],
                action: t.action,
                reward: t.reward,
                discount: t.discount,
                next_observation: &views[t.next_state],
            })
            .collect();
        match self.model.as_mut() {
            None => {
                double_q_update(&mut self.online, &self.target, &real, &mut self.adam)?;
            }
            Some(model) => {
                model.train_batch(&real)?;
                let predictions = real
                    .iter()
                    .map(|s| model.predict(s.observation, s.action))
                    .collect::<Result<Vec<_>>>()?;
                let imagined: Vec<QSample> = real
                    .iter()
                    .zip(&predictions)
                    .map(|(s, p)| QSample {
                        observation: s.observation,
                        action: s.action,
                        reward: p.reward,
                        discount: p.discount,
                        next_observation: &p.next_observation,
                    })
                    .collect();
                double_q_update(&mut self.online, &self.target, &imagined, &mut self.adam)?;
            }
        }
        self.updates += 1;
        if self.updates % self.config.target_period == 0 {
            self.target = self.online.clone();
        }
        Ok(())
    }
}

/// Runs `config.episodes` episodes of the neural agent on `env`.
pub fn run_neural_maze_agent(
    env: &GridWorld,
    config: &NeuralAgentConfig,
    rng: &mut Rng,
) -> Result<EpisodeTrace> {
    let mut agent = NeuralMazeAgent::new(env, config.clone(), rng)?;
    let mut trace = EpisodeTrace::default();
    for _ in 0..config.episodes {
        let mut state = env.reset(rng);
        let mut steps = 0;
        let mut ret = 0.0;
        let truncated = loop {
            let action = act(&agent.q_values(state)?, config.epsilon, rng);
            let t = env.step(state, action, rng)?;
            agent.observe(t, rng)?;
            steps += 1;
            ret += t.reward;
            state = t.next_state;
            if t.is_terminal() {
                break false;
            }
            if config.max_episode_steps == Some(steps) {
                agent.replay.end_episode();
                break true;
            }
        };
        trace.episode_steps.push(steps);
        trace.episode_returns.push(ret);
        trace.truncated.push(truncated);
        trace.total_interactions += steps;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn fresh_agent_reads_the_online_network() {
        let env = GridWorld::dyna_maze();
        let mut rng = rng_from_seed(0);
        let agent = NeuralMazeAgent::new(&env, NeuralAgentConfig::default(), &mut rng).unwrap();
        let view = env.local_view(0).unwrap();
        assert_eq!(agent.q_values(0).unwrap(), agent.online().forward(view.values()).unwrap());
        assert_eq!(agent.q_values(0).unwrap().len(), 4);
    }

    #[test]
    fn kind_parse() {
        assert_eq!(NeuralAgentKind::parse("replay").unwrap(), NeuralAgentKind::ReplayQ);
        assert_eq!(NeuralAgentKind::parse("forward").unwrap(), NeuralAgentKind::ForwardDyna);
        assert!(NeuralAgentKind::parse("backward").is_err());
    }

    #[test]
    fn short_run_is_deterministic() {
        let env = GridWorld::dyna_maze();
        let config = NeuralAgentConfig {
            kind: NeuralAgentKind::ForwardDyna,
            episodes: 2,
            ..NeuralAgentConfig::default()
        };
        let a = run_neural_maze_agent(&env, &config, &mut rng_from_seed(9)).unwrap();
        let b = run_neural_maze_agent(&env, &config, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes(), 2);
    }
}
