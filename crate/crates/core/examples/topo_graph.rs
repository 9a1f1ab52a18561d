//! Skeleton graph of a generated scenario and one guided plan across it,
//! written as two SVG figures.
//!
//! Usage: cargo run --release --example topo_graph -- [seed] [out_dir]

use std::path::PathBuf;

use crowdnav::geometry::raycast_free;
use crowdnav::guidance::plan_for;
use crowdnav::render::Scene;
use crowdnav::simulation::generate_scenario;
use crowdnav::{Agent, ScenarioConfig, Vec2};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));

    let cfg = ScenarioConfig::default();
    let scenario = generate_scenario(&cfg, seed).expect("scenario");
    let topo = &scenario.topo;
    println!(
        "{} obstacles, {} nodes, {} edges, cycle rank {}",
        scenario.obstacles.len(),
        topo.nodes.len(),
        topo.edges.len(),
        topo.cycle_rank()
    );

    let mut scene = Scene::new(cfg.world_w, cfg.world_h);
    scene.obstacles = scenario.obstacles.clone();
    scene.graph = Some(topo.clone());
    let graph_svg = out.join("graph.svg");
    std::fs::write(&graph_svg, scene.to_svg()).expect("write svg");

    // First pair of opposite border points whose straight line is blocked.
    let snap = |x: f64, y: f64| {
        let (ix, iy) = scenario.grid.nearest_free_cell(Vec2::new(x, y)).expect("free cell");
        scenario.grid.cell_center(ix, iy)
    };
    let (w, h) = (cfg.world_w, cfg.world_h);
    let pairs = [((0.0, h / 2.0), (w, h / 2.0)), ((w / 2.0, 0.0), (w / 2.0, h)), ((0.0, 0.0), (w, h)), ((0.0, h), (w, 0.0))];
    let (start, goal) = pairs
        .iter()
        .map(|&((ax, ay), (bx, by))| (snap(ax, ay), snap(bx, by)))
        .find(|&(s, g)| !raycast_free(&scenario.grid, s, g))
        .unwrap_or_else(|| (snap(0.0, 0.0), snap(w, h)));
    let plan = plan_for(&Agent::new(0, start, goal), topo, &scenario.grid).expect("plan");
    println!("plan: {} waypoints, {:.2} m (straight line {:.2} m)", plan.waypoints.len(), plan.length(), start.distance(goal));
    print!("{}", plan.to_text());

    scene.agents.push((start, cfg.radius));
    scene.goals.push(goal);
    scene.plans.push(plan.waypoints);
    let plan_svg = out.join("plan.svg");
    std::fs::write(&plan_svg, scene.to_svg()).expect("write svg");
    println!("wrote {} and {}", graph_svg.display(), plan_svg.display());
}
