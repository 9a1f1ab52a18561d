//! Write a small benchmark run to a directory, then recompute its reports
//! from the logs alone.
//!
//! Usage: cargo run --release --example simulate_to_dir -- [out_dir] [episodes]

use std::path::PathBuf;

use crowdnav::run::{cmd_metrics, cmd_simulate};
use crowdnav::ScenarioConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let episodes: usize = args.next().map_or(10, |a| a.parse().expect("episodes"));

    let cfg = ScenarioConfig { n_episodes: episodes, ..ScenarioConfig::default() };
    let summary = cmd_simulate(&cfg, &out, 4).expect("simulate");
    print!("{}", summary.report_text);
    println!("{} episodes written to {}", summary.episodes, out.display());

    let (text, kv) = cmd_metrics(&out, cfg.theta).expect("metrics");
    let saved = std::fs::read_to_string(out.join("report.kv")).expect("report.kv");
    println!("recomputed report matches: {}", text == summary.report_text && kv == saved);
}
