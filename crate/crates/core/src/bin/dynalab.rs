use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynalab::harness::{
    aggregate, emit_svg, load_config, run, write_atomic, write_output, Axes, ErrorBand, PlotData,
    Statistic, Table, AGGREGATE_KIND, BUILTIN_CONFIGS,
};

#[derive(Parser)]
#[command(name = "dynalab", version, about = "Run planning experiments and plot their results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a built-in name.
    Run {
        #[arg(long)]
        config: String,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a result CSV across seeds.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "median")]
        stat: String,
        /// `interquartile` or `standard-error`.
        #[arg(long, default_value = "interquartile")]
        error: String,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot an aggregate CSV (raw CSVs are aggregated by median first).
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        logx: bool,
        #[arg(long)]
        logy: bool,
    },
    /// List the built-in experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynalab: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> dynalab::Result<()> {
    match command {
        Command::Run { config, seed, out } => {
            let mut config = load_config(&config)?;
            if let Some(seed) = seed {
                config.seeds = vec![seed];
            }
            let dir = out.unwrap_or_else(|| config.output_dir.clone());
            let output = run(&config)?;
            for path in write_output(&config, &output, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Aggregate {
            input,
            stat,
            error,
            out,
        } => {
            let table = Table::read_path(&input)?;
            let summary = aggregate(&table, Statistic::parse(&stat)?, ErrorBand::parse(&error)?)?;
            match out {
                Some(path) => summary.write_atomic(&path)?,
                None => print!("{}", summary.to_csv_string()?),
            }
        }
        Command::Plot {
            input,
            out,
            logx,
            logy,
        } => {
            let mut table = Table::read_path(&input)?;
            if table.metadata.kind != AGGREGATE_KIND {
                table = aggregate(&table, Statistic::Median, ErrorBand::Interquartile)?;
            }
            let data = PlotData::from_aggregate(&table)?;
            let svg = emit_svg(&data, Axes { log_x: logx, log_y: logy })?;
            write_atomic(&out, svg.as_bytes())?;
        }
        Command::ListExperiments => {
            for (name, text) in BUILTIN_CONFIGS {
                let config = dynalab::harness::ExperimentConfig::parse(text)?;
                println!("{name}\t{}\t{}", config.kind.as_str(), config.description);
            }
        }
    }
    Ok(())
}
