//! A single wall between start and goal: plain ORCA stalls against it while
//! the guided agent routes around.
//!
//! Usage: cargo run --release --example stall_case -- [seed] [out.svg]

use crowdnav::render::Scene;
use crowdnav::simulation::{run_to_goal, wall_case};
use crowdnav::{Policy, ScenarioConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let out = args.next();

    let cfg = ScenarioConfig::default();
    let (scenario, start, goal) = wall_case(&cfg, seed).expect("wall case");
    let mut scene = Scene::new(cfg.world_w, cfg.world_h);
    scene.obstacles = scenario.obstacles.clone();
    scene.graph = Some(scenario.topo.clone());
    scene.goals.push(goal);

    for policy in [Policy::PlainOrca, Policy::TopoGuided] {
        let run = run_to_goal(&cfg, &scenario, policy, start, goal, cfg.frames_per_episode).expect("plan");
        let last = *run.trajectory.last().unwrap();
        match run.reached_frame {
            Some(f) => println!("{:>5}: reached goal in frame {f}", policy.name()),
            None => println!(
                "{:>5}: stalled at ({:.2}, {:.2}), {:.2} m short, speed {:.4}",
                policy.name(),
                last.x,
                last.y,
                last.distance(goal),
                run.final_speed
            ),
        }
        if let Some(plan) = run.plan {
            scene.plans.push(plan.waypoints);
        }
        scene.agents.push((last, cfg.radius));
        scene.trajectories.push(run.trajectory);
    }
    if let Some(path) = out {
        std::fs::write(&path, scene.to_svg()).expect("write svg");
        println!("wrote {path}");
    }
}
