use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, SweepValues};
use super::svg::region_heatmap_svg;
use super::table::{fmt_float, write_atomic, Metadata, Table};
use crate::agents::{
    run_dyna_loop, run_neural_maze_agent, EpisodeTrace, NeuralAgentConfig, PlannerKind, TabularQ,
};
use crate::envs::GridWorld;
use crate::models::DirichletTabularModel;
use crate::replay::ReplayBuffer;
use crate::stability::{divergence_region_sweep, empirical_divergence_likelihood};
use crate::{derive_rng, label, Result, Rng};

/// Outcome of one (seed, series, sweep value) cell of an agent experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub seed: u64,
    /// Empty unless the experiment compares several agents per sweep value.
    pub series: String,
    pub sweep_value: String,
    pub episode_steps: Vec<usize>,
    pub episode_returns: Vec<f64>,
    pub total_steps: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub table: Table,
    /// Extra SVG written next to the CSV (the stability heatmap).
    pub figure: Option<String>,
}

/// Independent stream for one cell.
pub fn cell_rng(seed: u64, experiment: &str, series: &str, x: f64) -> Rng {
    derive_rng(seed, &[label(experiment), label(series), x.to_bits()])
}

#[derive(Debug, Clone)]
enum Cell {
    Tabular { seed: u64, depth: usize, planner: PlannerKind },
    Neural { seed: u64, config: NeuralAgentConfig },
}

/// Runs every cell of `config` (in parallel) and builds its table. Results
/// do not depend on thread scheduling.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    match config.kind {
        ExperimentKind::StabilityRegion => return run_region(config),
        ExperimentKind::DivergenceLikelihood => return run_likelihood(config),
        _ => {}
    }
    let env = GridWorld::builtin(&config.env.name, config.env.slip_probability)?;
    let cells = agent_cells(config);
    let records = cells
        .par_iter()
        .map(|cell| run_cell(config, &env, cell))
        .collect::<Result<Vec<_>>>()?;
    let table = agent_table(config, &records);
    Ok(ExperimentOutput {
        records,
        table,
        figure: None,
    })
}

fn agent_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &seed in &config.seeds {
        match &config.sweep {
            SweepValues::Depths(depths) => cells.extend(depths.iter().map(|&depth| Cell::Tabular {
                seed,
                depth,
                planner: config.agent.planner,
            })),
            SweepValues::Planners(planners) => {
                cells.extend(planners.iter().map(|&planner| Cell::Tabular {
                    seed,
                    depth: config.agent.search_depth,
                    planner,
                }))
            }
            SweepValues::UpdatesPerStep(us) => {
                for &kind in &config.neural_kinds {
                    cells.extend(us.iter().map(|&u| Cell::Neural {
                        seed,
                        config: NeuralAgentConfig {
                            kind,
                            updates_per_step: u,
                            ..config.neural.clone()
                        },
                    }));
                }
            }
            SweepValues::SampleSizes(_) | SweepValues::None => {}
        }
    }
    cells
}

fn run_cell(config: &ExperimentConfig, env: &GridWorld, cell: &Cell) -> Result<RunRecord> {
    let (seed, series, sweep_value, trace) = match cell {
        Cell::Tabular { seed, depth, planner } => {
            let (series, x, xf) = match config.kind {
                ExperimentKind::DepthSweep => (String::new(), depth.to_string(), *depth as f64),
                _ => (planner.as_str().to_string(), planner.as_str().to_string(), 0.0),
            };
            let mut rng = cell_rng(*seed, &config.id, &series, xf);
            let loop_config = crate::agents::LoopConfig {
                planner: *planner,
                search_depth: *depth,
                ..config.agent.clone()
            };
            let trace = run_tabular(env, &loop_config, &mut rng)?;
            (*seed, series, x, trace)
        }
        Cell::Neural { seed, config: nc } => {
            let series = nc.kind.as_str().to_string();
            let mut rng = cell_rng(*seed, &config.id, &series, nc.updates_per_step as f64);
            let trace = run_neural_maze_agent(env, nc, &mut rng)?;
            (*seed, series, nc.updates_per_step.to_string(), trace)
        }
    };
    Ok(RunRecord {
        experiment: config.id.clone(),
        seed,
        series,
        sweep_value,
        total_steps: trace.total_interactions,
        episode_steps: trace.episode_steps,
        episode_returns: trace.episode_returns,
    })
}

/// One tabular agent run with the model its planner (or search) needs.
pub fn run_tabular(
    env: &GridWorld,
    config: &crate::agents::LoopConfig,
    rng: &mut Rng,
) -> Result<EpisodeTrace> {
    let (s, a) = (env.num_states(), env.num_actions());
    let mut model = match config.planner {
        PlannerKind::BackwardDyna => Some(DirichletTabularModel::backward(s, a)?),
        PlannerKind::ForwardDyna => Some(DirichletTabularModel::forward(s, a)?),
        _ if config.search_depth > 0 => Some(DirichletTabularModel::forward(s, a)?),
        _ => None,
    };
    let mut q = TabularQ::new(s, a);
    q.step_size = config.step_size;
    q.epsilon = config.epsilon;
    let mut replay = ReplayBuffer::unbounded();
    run_dyna_loop(env, model.as_mut(), &mut replay, &mut q, config, rng)
}

fn agent_table(config: &ExperimentConfig, records: &[RunRecord]) -> Table {
    let n = config.episodes;
    match config.kind {
        ExperimentKind::DepthSweep => {
            let y = format!("total_steps_{n}_episodes");
            let mut t = Table::new(
                Metadata::new(&config.id, config.kind.as_str(), None, "depth", &y),
                &["seed", "depth", &y],
            );
            for r in records {
                t.push(vec![r.seed.to_string(), r.sweep_value.clone(), r.total_steps.to_string()]);
            }
            t
        }
        ExperimentKind::UpdatesSweep => {
            let y = format!("total_steps_{n}_episodes");
            let mut t = Table::new(
                Metadata::new(&config.id, config.kind.as_str(), Some("agent"), "updates_per_step", &y),
                &["seed", "agent", "updates_per_step", &y],
            );
            for r in records {
                t.push(vec![
                    r.seed.to_string(),
                    r.series.clone(),
                    r.sweep_value.clone(),
                    r.total_steps.to_string(),
                ]);
            }
            t
        }
        _ => {
            let mut t = Table::new(
                Metadata::new(&config.id, config.kind.as_str(), Some("planner"), "episode", "steps"),
                &["seed", "planner", "episode", "steps"],
            );
            for r in records {
                for (i, steps) in r.episode_steps.iter().enumerate() {
                    t.push(vec![
                        r.seed.to_string(),
                        r.series.clone(),
                        (i + 1).to_string(),
                        steps.to_string(),
                    ]);
                }
            }
            t
        }
    }
}

fn run_region(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = &config.stability;
    let sweep = divergence_region_sweep(s.discount, s.step_size, s.resolution, s.resolution)?;
    let meta = Metadata::new(&config.id, config.kind.as_str(), Some("verdict"), "p", "A")
        .with("discount", &fmt_float(s.discount))
        .with("step_size", &fmt_float(s.step_size));
    let mut table = Table::new(meta, &["d1", "p", "A", "verdict"]);
    for c in &sweep.cells {
        table.push(vec![
            fmt_float(c.d1),
            fmt_float(c.p),
            fmt_float(c.a),
            c.verdict.as_str().to_string(),
        ]);
    }
    Ok(ExperimentOutput {
        records: Vec::new(),
        table,
        figure: Some(region_heatmap_svg(&sweep)),
    })
}

fn run_likelihood(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = &config.stability;
    let SweepValues::SampleSizes(sizes) = &config.sweep else {
        unreachable!("validated by the config parser")
    };
    let per_seed = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = cell_rng(seed, &config.id, "", 0.0);
            empirical_divergence_likelihood(
                s.transition_probability,
                s.discount,
                s.step_size,
                sizes,
                s.trials,
                &mut rng,
            )
            .map(|points| (seed, points))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = Metadata::new(&config.id, config.kind.as_str(), None, "samples", "likelihood")
        .with("p", &fmt_float(s.transition_probability))
        .with("discount", &fmt_float(s.discount));
    let mut table = Table::new(
        meta,
        &["seed", "samples", "trials", "divergent", "likelihood", "std_error"],
    );
    for (seed, points) in per_seed {
        for p in points {
            table.push(vec![
                seed.to_string(),
                p.samples.to_string(),
                p.trials.to_string(),
                p.divergent_trials.to_string(),
                fmt_float(p.likelihood()),
                fmt_float(p.std_error()),
            ]);
        }
    }
    Ok(ExperimentOutput {
        records: Vec::new(),
        table,
        figure: None,
    })
}

/// Writes `<dir>/<id>.csv` (and `<dir>/<id>.svg` when there is a figure)
/// atomically, returning the paths.
pub fn write_output(config: &ExperimentConfig, output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{}.csv", config.id));
    output.table.write_atomic(&csv_path)?;
    let mut paths = vec![csv_path];
    if let Some(svg) = &output.figure {
        let svg_path = dir.join(format!("{}.svg", config.id));
        write_atomic(&svg_path, svg.as_bytes())?;
        paths.push(svg_path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!("experiment = t\nkind = {kind}\n{extra}")).unwrap()
    }

    #[test]
    fn depth_sweep_has_one_record_per_cell() {
        let c = small("depth_sweep", "seeds = 0..3\nsweep.values = 0, 1\nbudget.episodes = 2\n");
        let out = run(&c).unwrap();
        assert_eq!(out.records.len(), 6);
        assert_eq!(out.table.header, vec!["seed", "depth", "total_steps_2_episodes"]);
        assert!(out.records.iter().all(|r| r.episode_steps.len() == 2 && r.total_steps > 0));
    }

    #[test]
    fn planner_rows_are_per_episode() {
        let c = small(
            "planner_comparison",
            "seeds = 4\nsweep.values = replay, backward\nbudget.episodes = 3\nagent.planning_steps = 2\n",
        );
        let out = run(&c).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.table.rows.len(), 6);
        assert_eq!(out.table.rows[3][1], "backward");
    }

    #[test]
    fn runs_are_deterministic() {
        let c = small("depth_sweep", "seeds = 1, 2\nsweep.values = 2\nbudget.episodes = 3\n");
        let a = run(&c).unwrap().table.to_csv_string().unwrap();
        let b = run(&c).unwrap().table.to_csv_string().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_region_has_a_figure() {
        let c = small("stability_region", "stability.resolution = 3\n");
        let out = run(&c).unwrap();
        assert_eq!(out.table.rows.len(), 9);
        assert!(out.figure.unwrap().contains("<svg"));
    }

    #[test]
    fn likelihood_rows() {
        let c = small("divergence_likelihood", "sweep.values = 1, 10\nstability.trials = 50\n");
        let out = run(&c).unwrap();
        assert_eq!(out.table.rows.len(), 2);
        assert_eq!(out.table.rows[0][2], "50");
    }

    #[test]
    fn backward_search_is_a_mismatch() {
        let c = small(
            "planner_comparison",
            "sweep.values = backward\nagent.search_depth = 2\nagent.planning_steps = 1\nbudget.episodes = 1\n",
        );
        assert!(run(&c).is_err());
    }
}
