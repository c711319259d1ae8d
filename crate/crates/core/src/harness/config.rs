use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::agents::{LoopConfig, NeuralAgentConfig, NeuralAgentKind, PlannerKind};
use crate::{Error, Result};

/// Every key the config grammar accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "kind",
    "description",
    "seeds",
    "budget.episodes",
    "output.dir",
    "env.name",
    "env.slip",
    "env.max_episode_steps",
    "agent.epsilon",
    "agent.step_size",
    "agent.planning_steps",
    "agent.interactions",
    "agent.iterations",
    "agent.planner",
    "agent.search_depth",
    "agent.kinds",
    "agent.updates_per_step",
    "agent.batch_size",
    "agent.replay_capacity",
    "agent.target_period",
    "agent.learning_rate",
    "agent.warmup",
    "sweep.variable",
    "sweep.values",
    "stability.discount",
    "stability.step_size",
    "stability.resolution",
    "stability.p",
    "stability.trials",
];

/// Raw `key = value` pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    /// Parses the flat grammar: one `key = value` per line, `#` starts a
    /// comment, blank lines are ignored, keys may not repeat.
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(config_error(line, format!("expected `key = value`, got {content:?}")));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(config_error(line, format!("unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(config_error(line, format!("key {key:?} has an empty value")));
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(config_error(
                    line,
                    format!("key {key:?} repeats the one on line {first}"),
                ));
            }
            entries.insert(key.to_string(), (value.to_string(), line));
        }
        Ok(RawConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(_, l)| *l)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| config_error(*line, format!("cannot parse {v:?} for {key:?}"))),
        }
    }

    fn parsed_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }
}

fn config_error(line: usize, message: String) -> Error {
    Error::Config { line, message }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DepthSweep,
    PlannerComparison,
    UpdatesSweep,
    StabilityRegion,
    DivergenceLikelihood,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::DepthSweep,
        ExperimentKind::PlannerComparison,
        ExperimentKind::UpdatesSweep,
        ExperimentKind::StabilityRegion,
        ExperimentKind::DivergenceLikelihood,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::DepthSweep => "depth_sweep",
            ExperimentKind::PlannerComparison => "planner_comparison",
            ExperimentKind::UpdatesSweep => "updates_sweep",
            ExperimentKind::StabilityRegion => "stability_region",
            ExperimentKind::DivergenceLikelihood => "divergence_likelihood",
        }
    }

    pub fn parse(s: &str) -> Option<ExperimentKind> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// The variable a sweep of this kind ranges over.
    pub fn sweep_variable(&self) -> &'static str {
        match self {
            ExperimentKind::DepthSweep => "search_depth",
            ExperimentKind::PlannerComparison => "planner",
            ExperimentKind::UpdatesSweep => "updates_per_step",
            ExperimentKind::StabilityRegion => "resolution",
            ExperimentKind::DivergenceLikelihood => "samples",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    /// A built-in layout name.
    pub name: String,
    pub slip_probability: f64,
    pub max_episode_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpec {
    pub discount: f64,
    pub step_size: f64,
    pub resolution: usize,
    pub transition_probability: f64,
    pub trials: usize,
}

/// Typed sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValues {
    Depths(Vec<usize>),
    Planners(Vec<PlannerKind>),
    UpdatesPerStep(Vec<usize>),
    SampleSizes(Vec<usize>),
    /// The region sweep has no axis beyond its grid.
    None,
}

impl SweepValues {
    pub fn len(&self) -> usize {
        match self {
            SweepValues::Depths(v) | SweepValues::UpdatesPerStep(v) | SweepValues::SampleSizes(v) => {
                v.len()
            }
            SweepValues::Planners(v) => v.len(),
            SweepValues::None => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    pub description: String,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub env: EnvSpec,
    /// Tabular agent settings; the sweep overrides its swept field.
    pub agent: LoopConfig,
    /// Neural agent settings for updates sweeps.
    pub neural: NeuralAgentConfig,
    pub neural_kinds: Vec<NeuralAgentKind>,
    pub sweep: SweepValues,
    pub stability: StabilitySpec,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
        let id = raw
            .get("experiment")
            .ok_or_else(|| config_error(0, "missing key \"experiment\"".into()))?
            .to_string();
        if !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(config_error(
                raw.line("experiment"),
                format!("experiment id {id:?} may only use letters, digits, '_' and '-'"),
            ));
        }
        let kind_text = raw
            .get("kind")
            .ok_or_else(|| config_error(0, "missing key \"kind\"".into()))?;
        let kind = ExperimentKind::parse(kind_text).ok_or_else(|| {
            config_error(raw.line("kind"), format!("unknown experiment kind {kind_text:?}"))
        })?;
        if let Some(var) = raw.get("sweep.variable") {
            if var != kind.sweep_variable() {
                return Err(config_error(
                    raw.line("sweep.variable"),
                    format!(
                        "a {} experiment sweeps {:?}, not {var:?}",
                        kind.as_str(),
                        kind.sweep_variable()
                    ),
                ));
            }
        }

        let seeds = parse_seeds(raw)?;
        let episodes: usize = raw.parsed_or("budget.episodes", 100)?;
        if episodes == 0 {
            return Err(config_error(raw.line("budget.episodes"), "episode budget must be positive".into()));
        }

        let env = EnvSpec {
            name: raw.get("env.name").unwrap_or("four_rooms").to_string(),
            slip_probability: raw.parsed_or("env.slip", 0.0)?,
            max_episode_steps: raw.parsed("env.max_episode_steps")?,
        };
        if crate::envs::GridWorld::builtin_layout_text(&env.name).is_none() {
            return Err(config_error(raw.line("env.name"), format!("unknown environment {:?}", env.name)));
        }
        if !(0.0..=1.0).contains(&env.slip_probability) {
            return Err(config_error(raw.line("env.slip"), "slip probability must lie in [0, 1]".into()));
        }

        let defaults = LoopConfig::default();
        let planner = match raw.get("agent.planner") {
            None => defaults.planner,
            Some(p) => PlannerKind::parse(p).map_err(|e| config_error(raw.line("agent.planner"), e.to_string()))?,
        };
        let agent = LoopConfig {
            iterations: raw.parsed_or("agent.iterations", defaults.iterations)?,
            interactions: raw.parsed_or("agent.interactions", defaults.interactions)?,
            planning_steps: raw.parsed_or("agent.planning_steps", defaults.planning_steps)?,
            planner,
            search_depth: raw.parsed_or("agent.search_depth", defaults.search_depth)?,
            epsilon: raw.parsed_or("agent.epsilon", defaults.epsilon)?,
            step_size: raw.parsed_or("agent.step_size", defaults.step_size)?,
            episode_budget: Some(episodes),
            max_episode_steps: env.max_episode_steps,
        };
        if !(0.0..=1.0).contains(&agent.epsilon) {
            return Err(config_error(raw.line("agent.epsilon"), "epsilon must lie in [0, 1]".into()));
        }

        let nd = NeuralAgentConfig::default();
        let neural = NeuralAgentConfig {
            kind: nd.kind,
            updates_per_step: raw.parsed_or("agent.updates_per_step", nd.updates_per_step)?,
            batch_size: raw.parsed_or("agent.batch_size", nd.batch_size)?,
            replay_capacity: raw.parsed_or("agent.replay_capacity", nd.replay_capacity)?,
            target_period: raw.parsed_or("agent.target_period", nd.target_period)?,
            epsilon: raw.parsed_or("agent.epsilon", nd.epsilon)?,
            learning_rate: raw.parsed_or("agent.learning_rate", nd.learning_rate)?,
            episodes,
            max_episode_steps: env.max_episode_steps,
            warmup: raw.parsed_or("agent.warmup", nd.warmup)?,
        };
        let neural_kinds = match raw.list("agent.kinds") {
            None => vec![NeuralAgentKind::ReplayQ, NeuralAgentKind::ForwardDyna],
            Some(list) => list
                .iter()
                .map(|k| NeuralAgentKind::parse(k))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| config_error(raw.line("agent.kinds"), e.to_string()))?,
        };
        if has_duplicates(&neural_kinds) {
            return Err(config_error(raw.line("agent.kinds"), "agent kinds repeat".into()));
        }

        let stability = StabilitySpec {
            discount: raw.parsed_or("stability.discount", 0.99)?,
            step_size: raw.parsed_or("stability.step_size", 0.01)?,
            resolution: raw.parsed_or("stability.resolution", 101)?,
            transition_probability: raw.parsed_or("stability.p", 0.5)?,
            trials: raw.parsed_or("stability.trials", 10_000)?,
        };

        let sweep = parse_sweep(raw, kind)?;
        Ok(ExperimentConfig {
            id,
            kind,
            description: raw.get("description").unwrap_or("").to_string(),
            seeds,
            episodes,
            env,
            agent,
            neural,
            neural_kinds,
            sweep,
            stability,
            output_dir: PathBuf::from(raw.get("output.dir").unwrap_or("results")),
        })
    }

    /// Number of independent (seed, series, sweep value) cells.
    pub fn cell_count(&self) -> usize {
        match self.kind {
            ExperimentKind::UpdatesSweep => self.seeds.len() * self.neural_kinds.len() * self.sweep.len(),
            ExperimentKind::StabilityRegion => 1,
            ExperimentKind::DivergenceLikelihood => self.seeds.len(),
            _ => self.seeds.len() * self.sweep.len(),
        }
    }
}

fn parse_seeds(raw: &RawConfig) -> Result<Vec<u64>> {
    let line = raw.line("seeds");
    let text = raw.get("seeds").unwrap_or("0");
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| config_error(line, format!("bad seed range {text:?}")))?;
        let b: u64 = b.trim().parse().map_err(|_| config_error(line, format!("bad seed range {text:?}")))?;
        (a..b).collect()
    } else {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| config_error(line, format!("bad seed {s:?}"))))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(config_error(line, "the seed list is empty".into()));
    }
    if has_duplicates(&seeds) {
        return Err(config_error(line, "seeds repeat".into()));
    }
    Ok(seeds)
}

fn parse_sweep(raw: &RawConfig, kind: ExperimentKind) -> Result<SweepValues> {
    let line = raw.line("sweep.values");
    if kind == ExperimentKind::StabilityRegion {
        if raw.get("sweep.values").is_some() {
            return Err(config_error(line, "a stability region has no sweep values".into()));
        }
        return Ok(SweepValues::None);
    }
    let values = raw
        .list("sweep.values")
        .filter(|v| !v.is_empty())
        .ok_or_else(|| config_error(line, "missing or empty \"sweep.values\"".into()))?;
    let numbers = || -> Result<Vec<usize>> {
        let v = values
            .iter()
            .map(|s| s.parse().map_err(|_| config_error(line, format!("bad sweep value {s:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        if has_duplicates(&v) {
            return Err(config_error(line, "sweep values repeat".into()));
        }
        Ok(v)
    };
    let positive = |v: Vec<usize>| -> Result<Vec<usize>> {
        if v.contains(&0) {
            return Err(config_error(line, "sweep values must be positive".into()));
        }
        Ok(v)
    };
    Ok(match kind {
        ExperimentKind::DepthSweep => SweepValues::Depths(numbers()?),
        ExperimentKind::UpdatesSweep => SweepValues::UpdatesPerStep(positive(numbers()?)?),
        ExperimentKind::DivergenceLikelihood => SweepValues::SampleSizes(positive(numbers()?)?),
        ExperimentKind::PlannerComparison => {
            let v = values
                .iter()
                .map(|s| PlannerKind::parse(s))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| config_error(line, e.to_string()))?;
            if has_duplicates(&v) {
                return Err(config_error(line, "sweep values repeat".into()));
            }
            SweepValues::Planners(v)
        }
        ExperimentKind::StabilityRegion => unreachable!(),
    })
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, x)| v[..i].contains(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEPTHS: &str = "experiment = d\nkind = depth_sweep\nseeds = 0..3\nsweep.values = 0, 2, 4\n";

    #[test]
    fn parses_comments_and_dotted_keys() {
        let raw = RawConfig::parse("# header\n\nagent.epsilon = 0.2  # inline\nkind=depth_sweep\n").unwrap();
        assert_eq!(raw.get("agent.epsilon"), Some("0.2"));
        assert_eq!(raw.line("kind"), 4);
    }

    #[test]
    fn unknown_key_names_the_line() {
        match RawConfig::parse("kind = depth_sweep\nagent.epsilom = 0.1\n") {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("agent.epsilom"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_and_malformed_lines_fail() {
        assert!(RawConfig::parse("kind = a\nkind = b\n").is_err());
        assert!(RawConfig::parse("just words\n").is_err());
        assert!(RawConfig::parse("kind =\n").is_err());
    }

    #[test]
    fn typed_depth_sweep() {
        let c = ExperimentConfig::parse(DEPTHS).unwrap();
        assert_eq!(c.kind, ExperimentKind::DepthSweep);
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.sweep, SweepValues::Depths(vec![0, 2, 4]));
        assert_eq!(c.cell_count(), 9);
        assert_eq!(c.agent.episode_budget, Some(100));
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = [
            DEPTHS.replace("0, 2, 4", "0, 2, 2"),
            DEPTHS.replace("0..3", "1, 1"),
            DEPTHS.replace("0..3", "3..3"),
            DEPTHS.replace("depth_sweep", "bogus"),
            format!("{DEPTHS}env.name = nowhere\n"),
            format!("{DEPTHS}sweep.variable = planner\n"),
            DEPTHS.replace("experiment = d", "experiment = a b"),
        ];
        for text in bad {
            assert!(ExperimentConfig::parse(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn planner_and_updates_sweeps() {
        let p = ExperimentConfig::parse(
            "experiment = p\nkind = planner_comparison\nsweep.values = replay, backward\nagent.planning_steps = 5\n",
        )
        .unwrap();
        assert_eq!(p.sweep, SweepValues::Planners(vec![PlannerKind::Replay, PlannerKind::BackwardDyna]));
        assert_eq!(p.agent.planning_steps, 5);
        let u = ExperimentConfig::parse(
            "experiment = u\nkind = updates_sweep\nenv.name = dyna_maze\nsweep.values = 1, 2\nbudget.episodes = 3\n",
        )
        .unwrap();
        assert_eq!(u.neural.episodes, 3);
        assert_eq!(u.cell_count(), 4);
        assert!(ExperimentConfig::parse(
            "experiment = u\nkind = updates_sweep\nsweep.values = 0, 2\n"
        )
        .is_err());
    }
}
