//! Config-driven experiments with CSV and SVG output.
//!
//! Config files are plain text, one `key = value` per line with dotted keys
//! (`agent.epsilon = 0.1`); `#` starts a comment. See [`KNOWN_KEYS`].

mod config;
mod experiment;
mod svg;
mod table;

use std::path::Path;

pub use config::{
    EnvSpec, ExperimentConfig, ExperimentKind, RawConfig, StabilitySpec, SweepValues, KNOWN_KEYS,
};
pub use experiment::{cell_rng, run, run_tabular, write_output, ExperimentOutput, RunRecord};
pub use svg::{emit_svg, region_heatmap_svg, Axes, PlotData, Series, SeriesPoint};
pub use table::{
    aggregate, fmt_float, quantile, summarize, write_atomic, ErrorBand, Metadata, Statistic,
    Summary, Table, AGGREGATE_HEADER, AGGREGATE_KIND,
};

use crate::{Error, Result};

/// Shipped experiment configs as `(name, text)`.
pub const BUILTIN_CONFIGS: [(&str, &str); 6] = [
    ("fig1_updates_sweep", include_str!("../../configs/fig1_updates_sweep.conf")),
    ("fig2_depth_sweep", include_str!("../../configs/fig2_depth_sweep.conf")),
    ("fig2_planners_det", include_str!("../../configs/fig2_planners_det.conf")),
    ("fig2_planners_stoch", include_str!("../../configs/fig2_planners_stoch.conf")),
    ("appA_region", include_str!("../../configs/appA_region.conf")),
    ("appA_likelihood", include_str!("../../configs/appA_likelihood.conf")),
];

pub fn builtin_config(name: &str) -> Option<ExperimentConfig> {
    BUILTIN_CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ExperimentConfig::parse(text).expect("shipped configs parse"))
}

/// Loads a config from a file path, falling back to a built-in name.
pub fn load_config(name_or_path: &str) -> Result<ExperimentConfig> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        return ExperimentConfig::parse(&std::fs::read_to_string(path)?);
    }
    builtin_config(name_or_path).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "{name_or_path:?} is neither a config file nor a built-in experiment"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_match_their_names() {
        for (name, _) in BUILTIN_CONFIGS {
            let c = builtin_config(name).unwrap();
            assert_eq!(c.id, name);
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(load_config("no_such_experiment").is_err());
    }

    #[test]
    fn builtin_shapes() {
        let d = builtin_config("fig2_depth_sweep").unwrap();
        assert_eq!(d.seeds.len(), 20);
        assert_eq!(d.sweep, SweepValues::Depths((0..=10).collect()));
        let f = builtin_config("fig1_updates_sweep").unwrap();
        assert_eq!(f.seeds.len(), 5);
        assert_eq!(f.sweep, SweepValues::UpdatesPerStep(vec![1, 2, 4, 8, 16]));
    }
}
