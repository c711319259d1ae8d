use std::process::Command;

use dynalab::harness::{
    aggregate, builtin_config, emit_svg, fmt_float, run, write_output, Axes, ErrorBand,
    ExperimentConfig, Metadata, PlotData, Statistic, Table,
};
use dynalab::rng_from_seed;
use rand::Rng as _;

const TINY: &str = "\
experiment = tiny
kind = depth_sweep
seeds = 0..20
budget.episodes = 2
sweep.values = 0, 1, 2, 3, 4
";

#[test]
fn five_values_by_twenty_seeds_is_a_hundred_records() {
    let config = ExperimentConfig::parse(TINY).unwrap();
    let out = run(&config).unwrap();
    assert_eq!(out.records.len(), 100);
    assert_eq!(out.table.rows.len(), 100);
    assert!(out.records.iter().all(|r| r.episode_steps.len() <= 2 && r.total_steps > 0));
}

#[test]
fn repeated_runs_write_identical_files() {
    let config = ExperimentConfig::parse(&TINY.replace("0..20", "0..4")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = write_output(&config, &run(&config).unwrap(), a.path()).unwrap();
    let pb = write_output(&config, &run(&config).unwrap(), b.path()).unwrap();
    assert_eq!(std::fs::read(&pa[0]).unwrap(), std::fs::read(&pb[0]).unwrap());
}

#[test]
fn depth_sweep_schema() {
    let mut config = builtin_config("fig2_depth_sweep").unwrap();
    config.seeds = vec![0];
    let out = run(&config).unwrap();
    assert_eq!(out.table.header, vec!["seed", "depth", "total_steps_100_episodes"]);
    assert_eq!(out.table.rows.len(), 11);
    let text = out.table.to_csv_string().unwrap();
    assert!(text.starts_with("# experiment=fig2_depth_sweep kind=depth_sweep "));
}

#[test]
fn aggregate_matches_an_independent_summary() {
    let mut rng = rng_from_seed(21);
    let mut table = Table::new(Metadata::new("dummy", "dummy", None, "x", "y"), &["seed", "x", "y"]);
    let mut by_x: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for seed in 0..20 {
        for (x, col) in by_x.iter_mut().enumerate() {
            let y = (rng.random_range(0.0..100.0) * 1e3f64).round() / 1e3;
            col.push(y);
            table.push(vec![seed.to_string(), x.to_string(), fmt_float(y)]);
        }
    }
    let agg = aggregate(&table, Statistic::Median, ErrorBand::Interquartile).unwrap();
    let mean_se = aggregate(&table, Statistic::Mean, ErrorBand::StandardError).unwrap();
    for (x, col) in by_x.iter_mut().enumerate() {
        col.sort_by(f64::total_cmp);
        // 20 values: type-7 quartile positions 4.75, 9.5, 14.25
        let q = |h: f64| col[h as usize] + h.fract() * (col[h as usize + 1] - col[h as usize]);
        let expected = [q(4.75), q(9.5), q(14.25)];
        let row = &agg.rows[x];
        let got: Vec<f64> = [3, 4, 5].iter().map(|&i| row[i].parse().unwrap()).collect();
        assert_eq!(row[2], "20");
        assert!((got[0] - expected[1]).abs() < 1e-6 && (got[1] - expected[0]).abs() < 1e-6 && (got[2] - expected[2]).abs() < 1e-6);

        let mean = col.iter().sum::<f64>() / 20.0;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        let row = &mean_se.rows[x];
        let m: f64 = row[3].parse().unwrap();
        let lo: f64 = row[4].parse().unwrap();
        assert!((m - mean).abs() < 1e-6 && (m - lo - sd / 20f64.sqrt()).abs() < 1e-6);
    }
}

#[test]
fn two_series_plot_is_valid_svg_with_two_polylines() {
    let config = ExperimentConfig::parse(
        "experiment = p\nkind = planner_comparison\nseeds = 0..3\nbudget.episodes = 4\nagent.planning_steps = 1\nsweep.values = replay, forward\n",
    )
    .unwrap();
    let table = run(&config).unwrap().table;
    let agg = aggregate(&table, Statistic::Median, ErrorBand::Interquartile).unwrap();
    let svg = emit_svg(&PlotData::from_aggregate(&agg).unwrap(), Axes { log_x: true, log_y: true }).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("version"), Some("1.1"));
    let count = |tag: &str| doc.descendants().filter(|n| n.tag_name().name() == tag).count();
    assert_eq!(count("polyline"), 2);
    assert_eq!(count("polygon"), 2);
}

#[test]
fn region_heatmap_parses() {
    let mut config = builtin_config("appA_region").unwrap();
    config.stability.resolution = 11;
    let svg = run(&config).unwrap().figure.unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let cells = doc
        .descendants()
        .filter(|n| n.tag_name().name() == "rect" && n.attribute("fill") != Some("white") && n.attribute("fill") != Some("none"))
        .count();
    assert_eq!(cells, 121);
}

fn dynalab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dynalab")).args(args).output().unwrap()
}

#[test]
fn cli_run_aggregate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(
        &conf,
        "experiment = cli\nkind = planner_comparison\nseeds = 0..3\nbudget.episodes = 3\nagent.planning_steps = 1\nsweep.values = replay, backward\n",
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dynalab(&["run", "--config", conf.to_str().unwrap(), "--out", d, "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("cli.csv");
    let table = Table::read_path(&csv).unwrap();
    assert!(table.rows.iter().all(|r| r[0] == "7"));

    let agg_path = dir.path().join("agg.csv");
    let out = dynalab(&["aggregate", "--in", csv.to_str().unwrap(), "--stat", "median", "--out", agg_path.to_str().unwrap()]);
    assert!(out.status.success());
    let agg = Table::read_path(&agg_path).unwrap();
    assert_eq!(agg.metadata.get("statistic"), Some("median"));
    assert_eq!(agg.metadata.get("error"), Some("interquartile"));

    let svg = dir.path().join("p.svg");
    let out = dynalab(&["plot", "--in", agg_path.to_str().unwrap(), "--out", svg.to_str().unwrap(), "--logy"]);
    assert!(out.status.success());
    roxmltree::Document::parse(&std::fs::read_to_string(&svg).unwrap()).unwrap();
}

#[test]
fn cli_lists_builtins_and_reports_errors() {
    let out = dynalab(&["list-experiments"]);
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1_updates_sweep", "fig2_depth_sweep", "fig2_planners_det", "fig2_planners_stoch", "appA_region", "appA_likelihood"] {
        assert!(listing.contains(name), "{name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "experiment = x\nkind = depth_sweep\nagent.speed = 3\n").unwrap();
    let out = dynalab(&["run", "--config", conf.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = dynalab(&["aggregate", "--in", "/nonexistent.csv", "--stat", "median"]);
    assert!(!out.status.success());
    let out = dynalab(&["aggregate", "--in", conf.to_str().unwrap(), "--stat", "mode"]);
    assert!(!out.status.success());
}
