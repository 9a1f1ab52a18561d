//! Command drivers behind the `crowdnav` binary.
//!
//! Output layout of `simulate`:
//!
//! ```text
//! OUT/manifest.txt              resolved config as `key = value`, metadata on `#` lines
//! OUT/scenarios/episode_NNNN.txt obstacles and skeleton graph
//! OUT/logs/episode_NNNN_POLICY.log
//! OUT/report.txt                comparison table
//! OUT/report.kv                 one `policy.metric = value` per line
//! ```
//!
//! The manifest is itself a valid config file, so `simulate --config
//! OUT/manifest.txt` replays a run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::{to_config_text, ConfigError};
use crate::geometry::{rasterize, GeometryError, OccupancyGrid, RectObstacle, Vec2};
use crate::guidance::{plan_for, GuidanceError};
use crate::metrics::{compute_report, report_table, MetricsReport};
use crate::render::Scene;
use crate::simulation::{run_benchmark, EpisodeLog, LogParseError, Policy, ScenarioConfig, SimError};
use crate::topology::{parse_graph, GraphParseError, TopoGraph};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogParseError },
    #[error("{path}: {message}")]
    Scenario { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("no episode logs found in {0}")]
    NoLogs(PathBuf),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// What `simulate` produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub episodes: usize,
    pub skipped: Vec<usize>,
    pub reports: Vec<(Policy, MetricsReport)>,
    pub report_text: String,
}

pub fn log_file_name(episode: usize, policy: Policy) -> String {
    format!("episode_{episode:04}_{}.log", policy.name())
}

/// Obstacles, grid parameters and skeleton graph of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub episode: usize,
    pub world: (f64, f64),
    pub cell_size: f64,
    pub inflation: f64,
    pub obstacles: Vec<RectObstacle>,
    pub graph: TopoGraph,
}

impl ScenarioFile {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# crowdnav scenario v1\n");
        out.push_str(&format!("episode {}\n", self.episode));
        out.push_str(&format!("world {:?} {:?}\n", self.world.0, self.world.1));
        out.push_str(&format!("cell_size {:?}\n", self.cell_size));
        out.push_str(&format!("inflation {:?}\n", self.inflation));
        for o in &self.obstacles {
            out.push_str(&format!(
                "obstacle {:?} {:?} {:?} {:?}\n",
                o.min_corner.x, o.min_corner.y, o.max_corner.x, o.max_corner.y
            ));
        }
        out.push_str("graph\n");
        out.push_str(&self.graph.to_text());
        out
    }

    pub fn from_text(text: &str) -> Result<ScenarioFile, String> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.starts_with("# crowdnav scenario") => {}
            _ => return Err("line 1: missing `# crowdnav scenario` header".into()),
        }
        let mut file = ScenarioFile {
            episode: 0,
            world: (0.0, 0.0),
            cell_size: 0.0,
            inflation: 0.0,
            obstacles: Vec::new(),
            graph: TopoGraph::default(),
        };
        let num = |ln: usize, t: Option<&str>| -> Result<f64, String> {
            t.and_then(|s| s.parse().ok()).ok_or_else(|| format!("line {ln}: expected a number"))
        };
        loop {
            let Some((ln, line)) = lines.next() else {
                return Err("missing `graph` section".into());
            };
            let mut t = line.split_whitespace();
            match t.next() {
                Some("episode") => file.episode = num(ln, t.next())? as usize,
                Some("world") => file.world = (num(ln, t.next())?, num(ln, t.next())?),
                Some("cell_size") => file.cell_size = num(ln, t.next())?,
                Some("inflation") => file.inflation = num(ln, t.next())?,
                Some("obstacle") => {
                    let v = [num(ln, t.next())?, num(ln, t.next())?, num(ln, t.next())?, num(ln, t.next())?];
                    let rect = RectObstacle::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]))
                        .map_err(|e| format!("line {ln}: {e}"))?;
                    file.obstacles.push(rect);
                }
                Some("graph") => break,
                None => continue,
                Some(other) => return Err(format!("line {ln}: unknown entry `{other}`")),
            }
        }
        file.graph = parse_graph(&mut lines).map_err(|GraphParseError::Malformed { line, message }| {
            format!("line {line}: {message}")
        })?;
        Ok(file)
    }

    pub fn grid(&self) -> Result<OccupancyGrid, GeometryError> {
        rasterize(self.world.0, self.world.1, self.cell_size, &self.obstacles, self.inflation)
    }
}

/// Run the benchmark and write manifest, scenarios, logs and reports.
///
/// Reports are computed from the re-parsed log text, so `metrics` on the
/// written logs reproduces them byte for byte.
pub fn cmd_simulate(cfg: &ScenarioConfig, out_dir: &Path, jobs: usize) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let logs_dir = out_dir.join("logs");
    let scen_dir = out_dir.join("scenarios");
    for d in [out_dir, &logs_dir, &scen_dir] {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let manifest_path = out_dir.join("manifest.txt");
    let manifest = manifest_text(cfg);
    write(&manifest_path, &manifest)?;

    let result = run_benchmark(cfg, jobs)?;

    let mut parsed: Vec<EpisodeLog> = Vec::new();
    for ep in &result.episodes {
        let scenario = crate::simulation::episode_scenario(cfg, ep.episode)?;
        let file = ScenarioFile {
            episode: ep.episode,
            world: (cfg.world_w, cfg.world_h),
            cell_size: cfg.cell_size,
            inflation: cfg.inflation(),
            obstacles: scenario.obstacles,
            graph: scenario.topo,
        };
        write(&scen_dir.join(format!("episode_{:04}.txt", ep.episode)), &file.to_text())?;
        for log in &ep.logs {
            let path = logs_dir.join(log_file_name(log.episode, log.policy));
            let text = log.to_text();
            write(&path, &text)?;
            parsed.push(EpisodeLog::from_text(&text).map_err(|source| RunError::Log { path, source })?);
        }
    }
    let policies = cfg.policy.policies();
    let (report_text, kv, reports) = render_reports(&parsed, &policies, cfg.theta);
    write(&out_dir.join("report.txt"), &report_text)?;
    write(&out_dir.join("report.kv"), &kv)?;

    let mut manifest = manifest;
    manifest.push_str(&format!("# skipped_episodes {:?}\n", result.skipped));
    manifest.push_str(&format!("# duration_s {:.3}\n", started.elapsed().as_secs_f64()));
    write(&manifest_path, &manifest)?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        episodes: result.episodes.len(),
        skipped: result.skipped,
        reports,
        report_text,
    })
}

fn manifest_text(cfg: &ScenarioConfig) -> String {
    let mut s = String::from("# crowdnav run manifest\n");
    s.push_str(&format!("# version {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# master_seed {}\n", cfg.rng_seed));
    s.push_str("# layout manifest.txt report.txt report.kv logs/episode_NNNN_POLICY.log scenarios/episode_NNNN.txt\n");
    s.push_str(&to_config_text(cfg));
    s
}

fn render_reports(
    logs: &[EpisodeLog],
    policies: &[Policy],
    theta: f64,
) -> (String, String, Vec<(Policy, MetricsReport)>) {
    let reports: Vec<(Policy, MetricsReport)> = policies
        .iter()
        .map(|&p| {
            let subset: Vec<&EpisodeLog> = logs.iter().filter(|l| l.policy == p).collect();
            (p, compute_report(&subset, theta))
        })
        .collect();
    let columns: Vec<(Policy, &MetricsReport)> = reports.iter().map(|(p, r)| (*p, r)).collect();
    let table = report_table(&columns);
    let kv: String = reports.iter().map(|(p, r)| r.to_kv(*p)).collect();
    (table, kv, reports)
}

/// Recompute the reports from a run directory or a directory of logs.
///
/// Returns `(report.txt, report.kv)` contents. Any unreadable log aborts
/// the whole computation.
pub fn cmd_metrics(dir: &Path, theta: f64) -> Result<(String, String), RunError> {
    let logs_dir = if dir.join("logs").is_dir() { dir.join("logs") } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&logs_dir)
        .map_err(io_err(&logs_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "log"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(RunError::NoLogs(logs_dir));
    }
    let mut logs = Vec::with_capacity(paths.len());
    let mut errors = Vec::new();
    for path in paths {
        match read(&path).and_then(|t| EpisodeLog::from_text(&t).map_err(|source| RunError::Log { path, source })) {
            Ok(l) => logs.push(l),
            Err(e) => errors.push(e),
        }
    }
    if let Some(first) = errors.into_iter().next() {
        return Err(first);
    }
    logs.sort_by_key(|l| (l.episode, l.policy));
    let policies: Vec<Policy> = Policy::ALL.into_iter().filter(|p| logs.iter().any(|l| l.policy == *p)).collect();
    let (text, kv, _) = render_reports(&logs, &policies, theta);
    Ok((text, kv))
}

/// Read `theta` from a run manifest if the directory has one.
pub fn manifest_theta(dir: &Path) -> Result<Option<f64>, RunError> {
    let path = dir.join("manifest.txt");
    if !path.is_file() {
        return Ok(None);
    }
    let text = read(&path)?;
    let cfg = crate::config::parse_config(&text).map_err(|source| RunError::Config { path, source })?;
    Ok(Some(cfg.theta))
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Scenario file providing the skeleton graph for a log input.
    pub scenario: Option<PathBuf>,
    /// Plan endpoints for a scenario input.
    pub plan: Option<(Vec2, Vec2)>,
    /// Frame whose agent positions are drawn; defaults to the last.
    pub frame: Option<usize>,
    /// Draw each agent's plan to its first goal (needs a graph).
    pub plans_from_log: bool,
    pub trajectories: bool,
}

/// Render a scenario file or an episode log to SVG.
pub fn cmd_render(input: &Path, out: &Path, opts: &RenderOptions) -> Result<(), RunError> {
    let text = read(input)?;
    let scenario_err = |path: &Path, message: String| RunError::Scenario { path: path.to_path_buf(), message };
    let scene = if text.starts_with("# crowdnav scenario") {
        let file = ScenarioFile::from_text(&text).map_err(|m| scenario_err(input, m))?;
        let mut scene = Scene::new(file.world.0, file.world.1);
        scene.obstacles = file.obstacles.clone();
        if let Some((s, g)) = opts.plan {
            let grid = file.grid().map_err(|e| scenario_err(input, e.to_string()))?;
            let agent = crate::orca::Agent::new(0, s, g);
            let plan = plan_for(&agent, &file.graph, &grid)?;
            scene.agents.push((s, agent.radius));
            scene.goals.push(g);
            scene.plans.push(plan.waypoints);
        }
        scene.graph = Some(file.graph);
        scene
    } else {
        let log = EpisodeLog::from_text(&text).map_err(|source| RunError::Log { path: input.to_path_buf(), source })?;
        let mut scene = Scene::new(log.world.0, log.world.1);
        scene.obstacles = log.obstacles.clone();
        let file = match &opts.scenario {
            Some(p) => Some(ScenarioFile::from_text(&read(p)?).map_err(|m| scenario_err(p, m))?),
            None => None,
        };
        if !log.records.is_empty() {
            let frame = opts.frame.unwrap_or(log.n_frames - 1).min(log.n_frames - 1);
            for a in 0..log.n_agents {
                let r = log.record(frame, a);
                scene.agents.push((r.position, log.radius));
                if let Some(g) = log.goal_position(r.goal_id) {
                    scene.goals.push(g);
                }
                if opts.trajectories {
                    let mut trace = vec![log.starts[a]];
                    trace.extend((0..=frame).map(|f| log.record(f, a).position));
                    scene.trajectories.push(trace);
                }
            }
        }
        if let Some(file) = file {
            if opts.plans_from_log {
                let grid = file.grid().map_err(|e| scenario_err(input, e.to_string()))?;
                for a in 0..log.n_agents {
                    let first = log.goals.iter().find(|g| g.agent == a);
                    if let Some(goal) = first {
                        let agent = crate::orca::Agent::new(a, log.starts[a], goal.position);
                        scene.plans.push(plan_for(&agent, &file.graph, &grid)?.waypoints);
                    }
                }
            }
            scene.graph = Some(file.graph);
        }
        scene
    };
    write(out, &scene.to_svg())
}
