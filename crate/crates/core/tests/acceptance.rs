//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdnav::config::parse_config;
use crowdnav::geometry::{free_components, label_components, OccupancyGrid, Vec2};
use crowdnav::guidance::{augment, shortest_path, AugmentedGraph, Endpoint, GuidanceError, Target};
use crowdnav::metrics::MetricsReport;
use crowdnav::orca::{solve_velocity, OrcaLine};
use crowdnav::run::cmd_simulate;
use crowdnav::simulation::{
    episode_seed, generate_scenario, run_benchmark, run_episode, run_to_goal, wall_case, Policy, ScenarioConfig,
};
use crowdnav::topology::{thin, Skeleton, TopoEdge, TopoGraph};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fmt_report(r: &MetricsReport) -> String {
    format!(
        "v={:.4} mutual={:.2} frozen/path={:.2} occupied={:.2}/{:.2} stuck={:.2}",
        r.avg_velocity_per_path,
        r.pct_mutual_frozen_frames,
        r.pct_frozen_frames_per_path,
        r.avg_occupied_paths,
        r.avg_total_paths,
        r.pct_stuck_agents
    )
}

/// Names of the metrics on which `better` is not strictly better than `worse`.
fn not_better(better: &MetricsReport, worse: &MetricsReport) -> Vec<&'static str> {
    let mut out = Vec::new();
    if better.avg_velocity_per_path <= worse.avg_velocity_per_path {
        out.push("velocity");
    }
    if better.pct_mutual_frozen_frames >= worse.pct_mutual_frozen_frames {
        out.push("mutual_frozen");
    }
    if better.pct_frozen_frames_per_path >= worse.pct_frozen_frames_per_path {
        out.push("frozen_per_path");
    }
    if better.avg_occupied_paths >= worse.avg_occupied_paths {
        out.push("occupied_paths");
    }
    if better.pct_stuck_agents >= worse.pct_stuck_agents {
        out.push("stuck");
    }
    out
}

fn benchmarks() -> (BTreeMap<usize, (MetricsReport, MetricsReport)>, f64) {
    let started = Instant::now();
    let mut out = BTreeMap::new();
    for n_agents in [4, 10] {
        let cfg = ScenarioConfig { n_agents, ..ScenarioConfig::default() };
        let result = run_benchmark(&cfg, jobs()).expect("benchmark run");
        let topo = result.report(Policy::TopoGuided).unwrap().clone();
        let orca = result.report(Policy::PlainOrca).unwrap().clone();
        out.insert(n_agents, (topo, orca));
    }
    (out, started.elapsed().as_secs_f64())
}

fn criterion_1(bench: &BTreeMap<usize, (MetricsReport, MetricsReport)>, secs: f64) -> Outcome {
    let mut pass = secs < 600.0;
    let mut detail = format!("{secs:.1} s for both runs;");
    for (n, (topo, orca)) in bench {
        let failing = not_better(topo, orca);
        // Total paths per episode must be higher for the guided policy too.
        let paths_ok = topo.avg_total_paths > orca.avg_total_paths;
        pass &= failing.is_empty() && paths_ok;
        detail += &format!(
            " [{n} agents] topo {} | orca {} | not better on {:?}{}",
            fmt_report(topo),
            fmt_report(orca),
            failing,
            if paths_ok { "" } else { " +total_paths" }
        );
    }
    let (topo4, orca4) = &bench[&4];
    let ratio_ok = if topo4.pct_stuck_agents > 0.0 {
        orca4.pct_stuck_agents / topo4.pct_stuck_agents >= 3.0
    } else {
        orca4.pct_stuck_agents > 0.0
    };
    pass &= ratio_ok;
    detail += &format!(" | stuck ratio orca/topo at 4 agents >= 3: {ratio_ok}");
    outcome(pass, detail)
}

fn criterion_2() -> Outcome {
    let cfg = ScenarioConfig::default();
    let mut ok = 0;
    let mut failures = Vec::new();
    for seed in 0..20 {
        let (scenario, start, goal) = wall_case(&cfg, seed).expect("wall case");
        let orca = run_to_goal(&cfg, &scenario, Policy::PlainOrca, start, goal, 196).expect("orca run");
        let topo = run_to_goal(&cfg, &scenario, Policy::TopoGuided, start, goal, 196).expect("topo run");
        if orca.reached_frame.is_none() && topo.reached_frame.is_some() {
            ok += 1;
        } else {
            failures.push(seed);
        }
    }
    outcome(ok == 20, format!("{ok}/20 wall placements: plain stalls, guided arrives; failing seeds {failures:?}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let max_speed = 1.0;
    let step = 2.0 * max_speed / 500.0;
    let mut worst_gap: f64 = 0.0;
    let mut worst_violation: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        // Lines through random points, oriented so an interior anchor is
        // permitted with margin.
        let anchor = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let n = rng.gen_range(1..=8);
        let lines: Vec<OrcaLine> = (0..n)
            .map(|_| {
                let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let direction = Vec2::new(angle.cos(), angle.sin());
                let offset = rng.gen_range(0.05..0.8);
                // Permitted side is left of the direction; push the line to the right of the anchor.
                let point = anchor - direction.perp() * offset;
                OrcaLine { point, direction }
            })
            .collect();
        let pref = Vec2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let v = solve_velocity(&lines, 0, max_speed, pref);
        let violation = lines.iter().map(|l| -l.signed_distance(v)).fold(0.0, f64::max).max(v.length() - max_speed);
        worst_violation = worst_violation.max(violation);
        let mut best = f64::INFINITY;
        let k = (2.0 * max_speed / step).round() as i32;
        for i in 0..=k {
            for j in 0..=k {
                let s = Vec2::new(-max_speed + i as f64 * step, -max_speed + j as f64 * step);
                if s.length() <= max_speed && lines.iter().all(|l| l.signed_distance(s) >= 0.0) {
                    best = best.min(s.distance(pref));
                }
            }
        }
        let gap = v.distance(pref) - best;
        worst_gap = worst_gap.max(gap.abs());
        if violation > 1e-9 || gap > 1e-9 || gap < -2.0 * step {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "1000 sets, {failures} failures; worst |objective gap| {worst_gap:.2e} (limit {:.2e}), worst violation {worst_violation:.2e}",
            2.0 * step
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = ScenarioConfig { n_agents: 10, ..ScenarioConfig::default() };
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut fallback_frames = 0;
    let mut checked_frames = 0;
    for e in 0..50 {
        let scenario = crowdnav::simulation::episode_scenario(&cfg, e).expect("scenario");
        for policy in Policy::ALL {
            let log = run_episode(&cfg, &scenario, policy, e, episode_seed(cfg.rng_seed, e)).expect("episode");
            for f in 0..log.n_frames {
                if (0..log.n_agents).any(|a| log.fallback[f * log.n_agents + a]) {
                    fallback_frames += 1;
                    continue;
                }
                checked_frames += 1;
                for a in 0..log.n_agents {
                    for b in a + 1..log.n_agents {
                        let d = log.record(f, a).position.distance(log.record(f, b).position);
                        let slack = d - 2.0 * log.radius;
                        worst = worst.min(slack);
                        if slack < -1e-6 {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{checked_frames} frames checked, {fallback_frames} fallback frames excluded, {violations} overlaps, worst clearance {worst:.2e} m"
        ),
    )
}

fn random_mask(rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let (w, h) = (rng.gen_range(12..48), rng.gen_range(12..48));
    let mut g = OccupancyGrid::new_free(w, h, 0.1, Vec2::ZERO);
    for _ in 0..rng.gen_range(0..8) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = ((x0 + rng.gen_range(1..10)).min(w), (y0 + rng.gen_range(1..10)).min(h));
        for y in y0..y1 {
            for x in x0..x1 {
                g.set_blocked(x, y, true);
            }
        }
    }
    let noise = rng.gen_range(0.0..0.15);
    for y in 0..h {
        for x in 0..w {
            if rng.gen_bool(noise) || x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                g.set_blocked(x, y, true);
            }
        }
    }
    g
}

fn skeleton_mask(s: &Skeleton) -> OccupancyGrid {
    let mut g = OccupancyGrid::new_free(s.width, s.height, 0.1, Vec2::ZERO);
    for y in 0..s.height {
        for x in 0..s.width {
            g.set_blocked(x, y, !s.get(x, y));
        }
    }
    g
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut not_idempotent = 0;
    let mut component_mismatch = 0;
    for _ in 0..500 {
        let mask = random_mask(&mut rng);
        let sk = thin(&mask);
        let (_, free) = label_components(mask.width, mask.height, |x, y| !mask.is_blocked(x, y));
        if sk.components() != free {
            component_mismatch += 1;
        }
        if thin(&skeleton_mask(&sk)) != sk {
            not_idempotent += 1;
        }
    }
    let mut rank_mismatch = Vec::new();
    for i in 0..100u64 {
        let n_obstacles = 1 + (i % 4) as usize;
        let cfg = ScenarioConfig { n_obstacles, ..ScenarioConfig::default() };
        let scenario = generate_scenario(&cfg, 1000 + i).expect("scenario");
        if scenario.topo.cycle_rank() != n_obstacles || free_components(&scenario.grid) != 1 {
            rank_mismatch.push((i, n_obstacles, scenario.topo.cycle_rank()));
        }
    }
    outcome(
        not_idempotent == 0 && component_mismatch == 0 && rank_mismatch.is_empty(),
        format!(
            "idempotence failures {not_idempotent}/500, component mismatches {component_mismatch}/500, cycle-rank mismatches {}/100 {:?}",
            rank_mismatch.len(),
            rank_mismatch
        ),
    )
}

/// Exhaustive search over simple paths; returns the minimal
/// (length, vertex sequence) pair, lengths summed along the path.
fn brute_force(ag: &AugmentedGraph) -> Option<(f64, Vec<usize>)> {
    let n = ag.vertex_count();
    let mut w = vec![vec![f64::INFINITY; n]; n];
    let mut relax = |u: usize, v: usize, len: f64| {
        if len < w[u][v] {
            w[u][v] = len;
            w[v][u] = len;
        }
    };
    for e in &ag.base.edges {
        if !e.is_self_loop() {
            relax(e.a, e.b, e.length);
        }
    }
    for e in &ag.extra_edges {
        let u = match e.from {
            Endpoint::Start => ag.start_id(),
            Endpoint::Goal => ag.goal_id(),
        };
        let v = match e.to {
            Target::Node(i) => i,
            Target::Goal => ag.goal_id(),
        };
        relax(u, v, e.length);
    }
    fn dfs(
        u: usize,
        goal: usize,
        dist: f64,
        path: &mut Vec<usize>,
        w: &[Vec<f64>],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if u == goal {
            let better = match best {
                None => true,
                Some((d, p)) => dist < *d || (dist == *d && path < p),
            };
            if better {
                *best = Some((dist, path.clone()));
            }
            return;
        }
        for v in 0..w.len() {
            if w[u][v].is_finite() && !path.contains(&v) {
                path.push(v);
                dfs(v, goal, dist + w[u][v], path, w, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    let mut path = vec![ag.start_id()];
    dfs(ag.start_id(), ag.goal_id(), 0.0, &mut path, &w, &mut best);
    best
}

fn random_point(rng: &mut ChaCha8Rng, mask: &OccupancyGrid) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(0.05..9.95), rng.gen_range(0.05..9.95));
        if mask.is_free_point(p) {
            return p;
        }
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut no_path = 0;
    for _ in 0..200 {
        let mut mask = OccupancyGrid::new_free(100, 100, 0.1, Vec2::ZERO);
        for _ in 0..rng.gen_range(0..4) {
            let (x0, y0) = (rng.gen_range(0..90), rng.gen_range(0..90));
            let (dx, dy) = if rng.gen_bool(0.5) { (rng.gen_range(2..6), rng.gen_range(20..60)) } else { (rng.gen_range(20..60), rng.gen_range(2..6)) };
            for y in y0..(y0 + dy).min(100) {
                for x in x0..(x0 + dx).min(100) {
                    mask.set_blocked(x, y, true);
                }
            }
        }
        let n_nodes = rng.gen_range(0..=8);
        let nodes: Vec<Vec2> = (0..n_nodes).map(|_| random_point(&mut rng, &mask)).collect();
        let mut edges = Vec::new();
        if n_nodes >= 2 {
            for _ in 0..rng.gen_range(0..=2 * n_nodes) {
                let a = rng.gen_range(0..n_nodes);
                let b = rng.gen_range(0..n_nodes);
                if a == b {
                    continue;
                }
                // Straight or bent polylines; bends make parallel edges differ.
                let mut poly = vec![nodes[a]];
                if rng.gen_bool(0.5) {
                    poly.push(random_point(&mut rng, &mask));
                }
                poly.push(nodes[b]);
                edges.push(TopoEdge::new(a, b, poly));
            }
        }
        let topo = TopoGraph { nodes, edges };
        let s = random_point(&mut rng, &mask);
        let g = random_point(&mut rng, &mask);
        let ag = augment(&topo, &mask, s, g).expect("free endpoints");
        let oracle = brute_force(&ag);
        match (shortest_path(&ag, &mask), oracle) {
            (Ok(plan), Some((len, path))) => {
                if plan.vertices != path || (plan.graph_length - len).abs() > 1e-9 {
                    mismatches += 1;
                }
            }
            (Err(GuidanceError::NoPath), None) => no_path += 1,
            _ => mismatches += 1,
        }
    }
    outcome(mismatches == 0, format!("200 graphs, {mismatches} mismatches ({no_path} agreed unreachable)"))
}

fn criterion_7() -> Outcome {
    let cfg = ScenarioConfig { n_obstacles: 0, ..ScenarioConfig::default() };
    let mut differing = Vec::new();
    for seed in 0..20u64 {
        let scenario = generate_scenario(&cfg, seed).expect("open scenario");
        let plain = run_episode(&cfg, &scenario, Policy::PlainOrca, 0, seed).expect("plain");
        let guided = run_episode(&cfg, &scenario, Policy::TopoGuided, 0, seed).expect("guided");
        let same = plain.records.iter().zip(&guided.records).all(|(a, b)| a.position == b.position && a.velocity == b.velocity);
        if !same {
            differing.push(seed);
        }
    }
    outcome(differing.is_empty(), format!("20 open-world seeds, differing {differing:?}"))
}

fn criterion_8(bench: &BTreeMap<usize, (MetricsReport, MetricsReport)>) -> Outcome {
    let (topo4, orca4) = &bench[&4];
    let (topo10, orca10) = &bench[&10];
    let mut pass = true;
    let mut detail = String::new();
    for (name, few, many) in [("topo", topo4, topo10), ("orca", orca4, orca10)] {
        // `not_better(few, many)` lists metrics where 4 agents is not strictly better than 10.
        let failing = not_better(few, many);
        pass &= failing.is_empty();
        detail += &format!("[{name}] 4: {} | 10: {} | not worse at 10 on {failing:?}; ", fmt_report(few), fmt_report(many));
    }
    outcome(pass, detail)
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["logs", "scenarios"] {
        for entry in fs::read_dir(dir.join(sub)).expect("output dir") {
            let path = entry.expect("entry").path();
            out.insert(format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()), fs::read(&path).unwrap());
        }
    }
    for f in ["report.txt", "report.kv"] {
        out.insert(f.to_string(), fs::read(dir.join(f)).unwrap());
    }
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let cfg = ScenarioConfig { n_episodes: 12, n_agents: 6, rng_seed: 99, ..ScenarioConfig::default() };
    cmd_simulate(&cfg, &first, 1).expect("first run");
    let manifest = fs::read_to_string(first.join("manifest.txt")).expect("manifest");
    let replay = parse_config(&manifest).expect("manifest parses as config");
    cmd_simulate(&replay, &second, 4).expect("second run");
    let a = read_tree(&first);
    let b = read_tree(&second);
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    outcome(
        replay == cfg && a.len() == b.len() && differing.is_empty(),
        format!("{} files compared between --jobs 1 and --jobs 4, differing {differing:?}", a.len()),
    )
}

fn main() -> ExitCode {
    let (bench, secs) = benchmarks();
    let results = [
        ("1 directional comparison", criterion_1(&bench, secs)),
        ("2 stall-case resolution", criterion_2()),
        ("3 LP oracle equivalence", criterion_3()),
        ("4 collision-freedom", criterion_4()),
        ("5 thinning properties", criterion_5()),
        ("6 shortest-path oracle", criterion_6()),
        ("7 reduction property", criterion_7()),
        ("8 crowding degradation", criterion_8(&bench)),
        ("9 determinism", criterion_9()),
    ];
    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
