//! Paired benchmark of both policies at 4 and 10 agents.
//!
//! Usage: cargo run --release --example benchmark -- [episodes] [seed]

use std::time::Instant;

use crowdnav::metrics::report_table;
use crowdnav::simulation::run_benchmark;
use crowdnav::{Policy, ScenarioConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(200, |a| a.parse().expect("episodes"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    for n_agents in [4, 10] {
        let cfg = ScenarioConfig { n_agents, n_episodes: episodes, rng_seed: seed, ..ScenarioConfig::default() };
        let started = Instant::now();
        let result = run_benchmark(&cfg, jobs).expect("benchmark");
        let topo = result.report(Policy::TopoGuided).unwrap();
        let orca = result.report(Policy::PlainOrca).unwrap();
        print!("{}", report_table(&[(Policy::TopoGuided, topo), (Policy::PlainOrca, orca)]));
        println!(
            "skipped {:?}, {:.1} s, topo better on all metrics: {}\n",
            result.skipped,
            started.elapsed().as_secs_f64(),
            topo.dominates(orca)
        );
    }
}
