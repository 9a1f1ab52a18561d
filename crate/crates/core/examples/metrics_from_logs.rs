//! Per-path breakdown of one episode under each policy: path lengths,
//! frozen frames and occupied paths.
//!
//! Usage: cargo run --release --example metrics_from_logs -- [episode] [agents]

use crowdnav::metrics::{classify_frames, compute_report, path_records};
use crowdnav::simulation::{episode_scenario, episode_seed, run_episode};
use crowdnav::{Policy, ScenarioConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let episode: usize = args.next().map_or(0, |a| a.parse().expect("episode"));
    let n_agents: usize = args.next().map_or(4, |a| a.parse().expect("agents"));

    let cfg = ScenarioConfig { n_agents, ..ScenarioConfig::default() };
    let scenario = episode_scenario(&cfg, episode).expect("scenario");
    let seed = episode_seed(cfg.rng_seed, episode);
    for policy in [Policy::TopoGuided, Policy::PlainOrca] {
        let log = run_episode(&cfg, &scenario, policy, episode, seed).expect("episode");
        let status = classify_frames(&log, cfg.theta);
        println!("{} ({} reach events)", policy.name(), log.reach_events.len());
        println!("  agent path  frames  done  dist(m)  m/frame  frozen  longest run");
        for p in path_records(&log, &status) {
            println!(
                "  {:>5} {:>4}  {:>6}  {:>4}  {:>7.2}  {:>7.4}  {:>6}  {:>11}{}",
                p.agent,
                p.path_index,
                p.frames(),
                if p.completed { "yes" } else { "no" },
                p.distance,
                p.velocity().unwrap_or(0.0),
                p.frozen_frames,
                p.longest_frozen_run,
                if p.is_occupied() { "  occupied" } else { "" }
            );
        }
        let r = compute_report(&[&log], cfg.theta);
        println!("  stuck agents {:.1}%, mutual frozen frames {:.1}%\n", r.pct_stuck_agents, r.pct_mutual_frozen_frames);
    }
}
