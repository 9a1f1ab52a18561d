//! Scenario generation, episode execution and benchmark runs.
//!
//! Every random draw comes from a ChaCha stream seeded by [`mix_seed`] of the
//! master seed, the episode index and a stream id, so an episode's obstacles,
//! start positions and per-agent goal sequences do not depend on the policy,
//! on the number of agents (for obstacles) or on the worker count.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    free_components, obstacle_edges, rasterize, traversable_fraction, GeometryError, ObstacleEdge, OccupancyGrid,
    RectObstacle, Vec2,
};
use crate::guidance::{follow, plan_for, GuidanceError, WaypointPlan};
use crate::metrics::{compute_report, MetricsReport};
use crate::orca::{orca_step, Agent};
use crate::topology::{prune_spurs, skeleton_to_graph, thin, TopoGraph};

/// Rejection budget for obstacle layouts, start positions and goals.
pub const MAX_REJECTIONS: usize = 1000;

const STREAM_SCENARIO: u64 = 1;
const STREAM_STARTS: u64 = 2;
const STREAM_GOALS: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no valid obstacle layout after {0} attempts")]
    ScenarioInfeasible(usize),
    #[error("could not place {0} agents without overlap")]
    StartsInfeasible(usize),
    #[error("no admissible goal for agent {0}")]
    GoalInfeasible(usize),
    #[error("{skipped} of {total} episodes had infeasible scenarios (limit is under 1%)")]
    TooManySkipped { skipped: usize, total: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Motion policy of all agents in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Policy {
    /// Preferred velocity points straight at the goal.
    PlainOrca,
    /// Preferred velocity follows a waypoint plan over the skeleton graph.
    TopoGuided,
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::TopoGuided, Policy::PlainOrca];

    pub fn name(self) -> &'static str {
        match self {
            Policy::PlainOrca => "orca",
            Policy::TopoGuided => "topo",
        }
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orca" | "plain_orca" => Ok(Policy::PlainOrca),
            "topo" | "topo_guided" => Ok(Policy::TopoGuided),
            other => Err(format!("unknown policy `{other}` (expected orca or topo)")),
        }
    }
}

/// Which policies a benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyChoice {
    Single(Policy),
    Both,
}

impl PolicyChoice {
    pub fn policies(self) -> Vec<Policy> {
        match self {
            PolicyChoice::Single(p) => vec![p],
            PolicyChoice::Both => Policy::ALL.to_vec(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyChoice::Single(p) => p.name(),
            PolicyChoice::Both => "both",
        }
    }
}

impl FromStr for PolicyChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "both" {
            Ok(PolicyChoice::Both)
        } else {
            s.parse().map(PolicyChoice::Single)
        }
    }
}

/// Everything that defines a benchmark run. Defaults give the 4-agent,
/// 3-obstacle, 200 x 196-frame setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub world_w: f64,
    pub world_h: f64,
    pub n_agents: usize,
    pub n_obstacles: usize,
    pub obstacle_min_size: f64,
    pub obstacle_max_size: f64,
    pub radius: f64,
    /// Meters per frame.
    pub max_speed: f64,
    pub neighbor_dist: f64,
    pub time_horizon: f64,
    pub time_horizon_obst: f64,
    pub cell_size: f64,
    pub frames_per_episode: usize,
    pub n_episodes: usize,
    pub min_traversable: f64,
    pub rng_seed: u64,
    pub policy: PolicyChoice,
    /// Frozen-speed threshold as a fraction of `max_speed`.
    pub theta: f64,
    /// Minimum start-to-goal distance as a fraction of the world diagonal.
    pub goal_min_dist_frac: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            world_w: 20.0,
            world_h: 20.0,
            n_agents: 4,
            n_obstacles: 3,
            obstacle_min_size: 1.0,
            obstacle_max_size: 4.0,
            radius: 0.3,
            max_speed: 0.2,
            neighbor_dist: 3.0,
            time_horizon: 10.0,
            time_horizon_obst: 10.0,
            cell_size: 0.1,
            frames_per_episode: 196,
            n_episodes: 200,
            min_traversable: 0.8,
            rng_seed: 0,
            policy: PolicyChoice::Both,
            theta: 0.3,
            goal_min_dist_frac: 0.25,
        }
    }
}

impl ScenarioConfig {
    /// Obstacle margin on the planning grid: agent radius plus an equal margin.
    pub fn inflation(&self) -> f64 {
        2.0 * self.radius
    }

    /// Distance at which a goal or waypoint counts as reached.
    pub fn reach_radius(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn prune_length(&self) -> f64 {
        3.0 * self.radius
    }

    pub fn dt(&self) -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.world_w > 0.0 && self.world_h > 0.0) {
            return bad("world dimensions must be positive");
        }
        if self.n_agents < 1 {
            return bad("n_agents must be at least 1");
        }
        if self.frames_per_episode < 1 {
            return bad("frames_per_episode must be at least 1");
        }
        if !(self.min_traversable > 0.0 && self.min_traversable <= 1.0) {
            return bad("min_traversable must be in (0, 1]");
        }
        if !(self.radius > 0.0 && self.max_speed > 0.0) {
            return bad("radius and max_speed must be positive");
        }
        if !(self.time_horizon > 0.0 && self.time_horizon_obst > 0.0) {
            return bad("time horizons must be positive");
        }
        if !(self.neighbor_dist > 0.0) {
            return bad("neighbor_dist must be positive");
        }
        if !(self.obstacle_min_size > 0.0 && self.obstacle_min_size <= self.obstacle_max_size) {
            return bad("obstacle sizes must satisfy 0 < min <= max");
        }
        if !(self.cell_size > 0.0 && self.cell_size <= self.world_w.min(self.world_h)) {
            return bad("cell_size must be positive and no larger than the world");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must be in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.goal_min_dist_frac) {
            return bad("goal_min_dist_frac must be in [0, 1)");
        }
        Ok(())
    }

    pub fn agent_template(&self, id: usize, position: Vec2, goal: Vec2) -> Agent {
        Agent {
            id,
            position,
            velocity: Vec2::ZERO,
            radius: self.radius,
            max_speed: self.max_speed,
            pref_velocity: Vec2::ZERO,
            neighbor_dist: self.neighbor_dist,
            time_horizon: self.time_horizon,
            time_horizon_obst: self.time_horizon_obst,
            goal,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one random stream of one episode:
/// `splitmix64(splitmix64(splitmix64(master) ^ episode) ^ stream)`.
pub fn mix_seed(master: u64, episode: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ episode) ^ stream)
}

/// A static environment shared by both policies of an episode.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world_w: f64,
    pub world_h: f64,
    pub obstacles: Vec<RectObstacle>,
    /// Planning grid, inflated by [`ScenarioConfig::inflation`].
    pub grid: OccupancyGrid,
    pub topo: TopoGraph,
    /// Obstacle and world-boundary edges for ORCA.
    pub edges: Vec<ObstacleEdge>,
    /// Free cells of `grid` in raster order.
    pub free_cells: Vec<(usize, usize)>,
}

impl Scenario {
    /// Build the grid, skeleton graph and edges for a fixed obstacle set.
    pub fn from_obstacles(cfg: &ScenarioConfig, obstacles: Vec<RectObstacle>) -> Result<Scenario, SimError> {
        let grid = rasterize(cfg.world_w, cfg.world_h, cfg.cell_size, &obstacles, cfg.inflation())?;
        let topo = prune_spurs(&skeleton_to_graph(&thin(&grid), &grid), cfg.prune_length());
        let edges = obstacle_edges(&obstacles, Some((cfg.world_w, cfg.world_h)));
        let free_cells = grid.free_cells();
        Ok(Scenario { world_w: cfg.world_w, world_h: cfg.world_h, obstacles, grid, topo, edges, free_cells })
    }
}

/// Sample a random obstacle layout and build its graph.
///
/// Rectangles have uniform sizes in the configured range and uniform
/// centers. A layout is accepted when every inflated obstacle keeps at least
/// one free cell between itself, the other obstacles and the world boundary
/// band, when the traversable fraction reaches `min_traversable`, and when
/// the free space is one connected region.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inflation = cfg.inflation();
    let clearance = 2.0 * inflation + 2.0 * cfg.cell_size;
    for _ in 0..MAX_REJECTIONS {
        let mut obstacles = Vec::with_capacity(cfg.n_obstacles);
        let mut ok = true;
        for _ in 0..cfg.n_obstacles {
            let w = rng.gen_range(cfg.obstacle_min_size..=cfg.obstacle_max_size);
            let h = rng.gen_range(cfg.obstacle_min_size..=cfg.obstacle_max_size);
            let (lo_x, hi_x) = (clearance + w / 2.0, cfg.world_w - clearance - w / 2.0);
            let (lo_y, hi_y) = (clearance + h / 2.0, cfg.world_h - clearance - h / 2.0);
            if lo_x >= hi_x || lo_y >= hi_y {
                ok = false;
                break;
            }
            let c = Vec2::new(rng.gen_range(lo_x..hi_x), rng.gen_range(lo_y..hi_y));
            let rect = RectObstacle::from_center(c, w, h)?;
            if obstacles.iter().any(|o: &RectObstacle| o.distance_to_rect(&rect) <= clearance) {
                ok = false;
                break;
            }
            obstacles.push(rect);
        }
        if !ok {
            continue;
        }
        let grid = rasterize(cfg.world_w, cfg.world_h, cfg.cell_size, &obstacles, inflation)?;
        if traversable_fraction(&grid) < cfg.min_traversable || free_components(&grid) != 1 {
            continue;
        }
        return Scenario::from_obstacles(cfg, obstacles);
    }
    Err(SimError::ScenarioInfeasible(MAX_REJECTIONS))
}

/// Uniform free-cell sample for a new goal.
///
/// The goal keeps `2 * radius` from every goal in `other_goals` and at least
/// `min_dist` from `position`. If the budget runs out, the distance rule is
/// dropped and sampling retried once.
pub fn assign_goal(
    position: Vec2,
    radius: f64,
    other_goals: &[Vec2],
    scenario: &Scenario,
    min_dist: f64,
    rng: &mut impl Rng,
) -> Option<Vec2> {
    if scenario.free_cells.is_empty() {
        return None;
    }
    for min_dist in [min_dist, 0.0] {
        for _ in 0..MAX_REJECTIONS {
            let (ix, iy) = scenario.free_cells[rng.gen_range(0..scenario.free_cells.len())];
            let p = scenario.grid.cell_center(ix, iy);
            if p.distance(position) >= min_dist && other_goals.iter().all(|g| g.distance(p) >= 2.0 * radius) {
                return Some(p);
            }
        }
    }
    None
}

/// Non-overlapping start positions on free cells, at least `4 * radius` apart.
pub fn place_agents(cfg: &ScenarioConfig, scenario: &Scenario, rng: &mut impl Rng) -> Result<Vec<Vec2>, SimError> {
    let mut starts: Vec<Vec2> = Vec::with_capacity(cfg.n_agents);
    let spacing = 4.0 * cfg.radius;
    let mut budget = MAX_REJECTIONS * cfg.n_agents;
    while starts.len() < cfg.n_agents {
        if budget == 0 || scenario.free_cells.is_empty() {
            return Err(SimError::StartsInfeasible(cfg.n_agents));
        }
        budget -= 1;
        let (ix, iy) = scenario.free_cells[rng.gen_range(0..scenario.free_cells.len())];
        let p = scenario.grid.cell_center(ix, iy);
        if starts.iter().all(|s| s.distance(p) >= spacing) {
            starts.push(p);
        }
    }
    Ok(starts)
}

/// One agent in one frame, after that frame's step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub agent: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal_id: usize,
    pub path_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRecord {
    pub id: usize,
    pub agent: usize,
    pub position: Vec2,
}

/// Agent `agent` reached the goal of path `path_index` in frame `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReachEvent {
    pub agent: usize,
    pub frame: usize,
    pub path_index: usize,
}

/// Full trajectory record of one episode under one policy.
///
/// `records` is frame-major: record `frame * n_agents + agent`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub policy: Policy,
    pub seed: u64,
    pub n_agents: usize,
    pub n_frames: usize,
    pub world: (f64, f64),
    pub radius: f64,
    pub max_speed: f64,
    pub goal_radius: f64,
    pub obstacles: Vec<RectObstacle>,
    pub starts: Vec<Vec2>,
    pub goals: Vec<GoalRecord>,
    pub records: Vec<FrameRecord>,
    pub reach_events: Vec<ReachEvent>,
    /// Frame-major flags for steps where the solver used its fallback.
    /// Not part of the text format; empty for parsed logs.
    pub fallback: Vec<bool>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LogParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl EpisodeLog {
    pub fn record(&self, frame: usize, agent: usize) -> &FrameRecord {
        &self.records[frame * self.n_agents + agent]
    }

    pub fn goal_position(&self, goal_id: usize) -> Option<Vec2> {
        self.goals.iter().find(|g| g.id == goal_id).map(|g| g.position)
    }

    pub fn reached_goal(&self, agent: usize) -> bool {
        self.reach_events.iter().any(|e| e.agent == agent)
    }

    /// Line-delimited text: `#` header lines with the scenario snapshot,
    /// goals and reach events, then one
    /// `episode frame agent x y vx vy goal_id path_index` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 32));
        let _ = writeln!(out, "# crowdnav episode log v1");
        let _ = writeln!(out, "# episode {}", self.episode);
        let _ = writeln!(out, "# policy {}", self.policy.name());
        let _ = writeln!(out, "# seed {}", self.seed);
        let _ = writeln!(out, "# agents {}", self.n_agents);
        let _ = writeln!(out, "# frames {}", self.n_frames);
        let _ = writeln!(out, "# world {:.6} {:.6}", self.world.0, self.world.1);
        let _ = writeln!(out, "# radius {:.6}", self.radius);
        let _ = writeln!(out, "# max_speed {:.6}", self.max_speed);
        let _ = writeln!(out, "# goal_radius {:.6}", self.goal_radius);
        for o in &self.obstacles {
            let _ = writeln!(
                out,
                "# obstacle {:.6} {:.6} {:.6} {:.6}",
                o.min_corner.x, o.min_corner.y, o.max_corner.x, o.max_corner.y
            );
        }
        for (i, s) in self.starts.iter().enumerate() {
            let _ = writeln!(out, "# start {i} {:.6} {:.6}", s.x, s.y);
        }
        for g in &self.goals {
            let _ = writeln!(out, "# goal {} {} {:.6} {:.6}", g.id, g.agent, g.position.x, g.position.y);
        }
        for e in &self.reach_events {
            let _ = writeln!(out, "# reach {} {} {}", e.agent, e.frame, e.path_index);
        }
        for r in &self.records {
            let _ = writeln!(
                out,
                "{} {} {} {:.6} {:.6} {:.6} {:.6} {} {}",
                self.episode,
                r.frame,
                r.agent,
                r.position.x,
                r.position.y,
                r.velocity.x,
                r.velocity.y,
                r.goal_id,
                r.path_index
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<EpisodeLog, LogParseError> {
        fn bad(line: usize, message: impl Into<String>) -> LogParseError {
            LogParseError::Malformed { line, message: message.into() }
        }
        fn num<T: FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, LogParseError> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| bad(line, format!("bad or missing {what}")))
        }
        let mut log = EpisodeLog {
            episode: 0,
            policy: Policy::PlainOrca,
            seed: 0,
            n_agents: 0,
            n_frames: 0,
            world: (0.0, 0.0),
            radius: 0.0,
            max_speed: 0.0,
            goal_radius: 0.0,
            obstacles: Vec::new(),
            starts: Vec::new(),
            goals: Vec::new(),
            records: Vec::new(),
            reach_events: Vec::new(),
            fallback: Vec::new(),
        };
        let mut saw_magic = false;
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut t = rest.split_whitespace();
                let key = t.next().unwrap_or("");
                if key == "crowdnav" {
                    saw_magic = true;
                    continue;
                }
                seen.insert(key.to_string());
                match key {
                    "episode" => log.episode = num(ln, t.next(), "episode")?,
                    "policy" => {
                        log.policy = t.next().unwrap_or("").parse().map_err(|e: String| bad(ln, e))?;
                    }
                    "seed" => log.seed = num(ln, t.next(), "seed")?,
                    "agents" => log.n_agents = num(ln, t.next(), "agent count")?,
                    "frames" => log.n_frames = num(ln, t.next(), "frame count")?,
                    "world" => log.world = (num(ln, t.next(), "width")?, num(ln, t.next(), "height")?),
                    "radius" => log.radius = num(ln, t.next(), "radius")?,
                    "max_speed" => log.max_speed = num(ln, t.next(), "max_speed")?,
                    "goal_radius" => log.goal_radius = num(ln, t.next(), "goal_radius")?,
                    "obstacle" => {
                        let v: Vec<f64> = (0..4).map(|_| num(ln, t.next(), "corner")).collect::<Result<_, _>>()?;
                        let rect = RectObstacle::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]))
                            .map_err(|e| bad(ln, e.to_string()))?;
                        log.obstacles.push(rect);
                    }
                    "start" => {
                        let idx: usize = num(ln, t.next(), "agent")?;
                        if idx != log.starts.len() {
                            return Err(bad(ln, "start lines must be in agent order"));
                        }
                        log.starts.push(Vec2::new(num(ln, t.next(), "x")?, num(ln, t.next(), "y")?));
                    }
                    "goal" => log.goals.push(GoalRecord {
                        id: num(ln, t.next(), "goal id")?,
                        agent: num(ln, t.next(), "agent")?,
                        position: Vec2::new(num(ln, t.next(), "x")?, num(ln, t.next(), "y")?),
                    }),
                    "reach" => log.reach_events.push(ReachEvent {
                        agent: num(ln, t.next(), "agent")?,
                        frame: num(ln, t.next(), "frame")?,
                        path_index: num(ln, t.next(), "path index")?,
                    }),
                    other => return Err(bad(ln, format!("unknown header `{other}`"))),
                }
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 9 {
                return Err(bad(ln, format!("expected 9 fields, found {}", t.len())));
            }
            let episode: usize = num(ln, Some(t[0]), "episode")?;
            if episode != log.episode {
                return Err(bad(ln, "episode number does not match header"));
            }
            let rec = FrameRecord {
                frame: num(ln, Some(t[1]), "frame")?,
                agent: num(ln, Some(t[2]), "agent")?,
                position: Vec2::new(num(ln, Some(t[3]), "x")?, num(ln, Some(t[4]), "y")?),
                velocity: Vec2::new(num(ln, Some(t[5]), "vx")?, num(ln, Some(t[6]), "vy")?),
                goal_id: num(ln, Some(t[7]), "goal id")?,
                path_index: num(ln, Some(t[8]), "path index")?,
            };
            let expected = log.records.len();
            if log.n_agents == 0 || rec.frame * log.n_agents + rec.agent != expected {
                return Err(bad(ln, "records must be frame-major and complete"));
            }
            log.records.push(rec);
        }
        if !saw_magic {
            return Err(bad(1, "missing `# crowdnav episode log` header"));
        }
        for key in ["episode", "policy", "agents", "frames", "world", "radius", "max_speed", "goal_radius"] {
            if !seen.contains(key) {
                return Err(bad(0, format!("missing `# {key}` header")));
            }
        }
        if log.starts.len() != log.n_agents {
            return Err(bad(0, "one `# start` line per agent is required"));
        }
        if !log.records.is_empty() && log.records.len() != log.n_agents * log.n_frames {
            return Err(bad(0, format!("expected {} records, found {}", log.n_agents * log.n_frames, log.records.len())));
        }
        for r in &log.records {
            if log.goal_position(r.goal_id).is_none() {
                return Err(bad(0, format!("record refers to unknown goal {}", r.goal_id)));
            }
        }
        Ok(log)
    }
}

/// Per-agent mutable state during an episode.
struct AgentState {
    path_index: usize,
    goal_id: usize,
    rng: ChaCha8Rng,
    plan: Option<WaypointPlan>,
}

fn other_goals(agents: &[Agent], skip: usize) -> Vec<Vec2> {
    agents.iter().filter(|a| a.id != skip).map(|a| a.goal).collect()
}

/// Run one episode of `cfg.frames_per_episode` frames.
///
/// Each frame sets preferred velocities (straight at the goal, or along the
/// waypoint plan), advances all agents with one ORCA step, records the state
/// and hands a new goal to every agent within the reach radius of its goal.
pub fn run_episode(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    policy: Policy,
    episode: usize,
    episode_seed: u64,
) -> Result<EpisodeLog, SimError> {
    cfg.validate()?;
    let dt = cfg.dt();
    let reach = cfg.reach_radius();
    let min_goal_dist = cfg.goal_min_dist_frac * cfg.world_w.hypot(cfg.world_h);

    let mut start_rng = ChaCha8Rng::seed_from_u64(mix_seed(episode_seed, 0, STREAM_STARTS));
    let starts = place_agents(cfg, scenario, &mut start_rng)?;
    let mut agents: Vec<Agent> =
        starts.iter().enumerate().map(|(i, &p)| cfg.agent_template(i, p, p)).collect();
    let mut states: Vec<AgentState> = (0..cfg.n_agents)
        .map(|i| AgentState {
            path_index: 0,
            goal_id: 0,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(episode_seed, 0, STREAM_GOALS + i as u64)),
            plan: None,
        })
        .collect();

    let mut log = EpisodeLog {
        episode,
        policy,
        seed: episode_seed,
        n_agents: cfg.n_agents,
        n_frames: cfg.frames_per_episode,
        world: (cfg.world_w, cfg.world_h),
        radius: cfg.radius,
        max_speed: cfg.max_speed,
        goal_radius: reach,
        obstacles: scenario.obstacles.clone(),
        starts: starts.clone(),
        goals: Vec::new(),
        records: Vec::with_capacity(cfg.n_agents * cfg.frames_per_episode),
        reach_events: Vec::new(),
        fallback: Vec::with_capacity(cfg.n_agents * cfg.frames_per_episode),
    };

    let new_goal = |i: usize, agents: &mut [Agent], states: &mut [AgentState], log: &mut EpisodeLog| -> Result<(), SimError> {
        let others = other_goals(agents, i);
        let state = &mut states[i];
        let mut goal = None;
        let mut plan = None;
        for _ in 0..MAX_REJECTIONS {
            let Some(g) = assign_goal(agents[i].position, cfg.radius, &others, scenario, min_goal_dist, &mut state.rng)
            else {
                return Err(SimError::GoalInfeasible(i));
            };
            if policy == Policy::PlainOrca {
                goal = Some(g);
                break;
            }
            let mut probe = agents[i].clone();
            probe.goal = g;
            match plan_for(&probe, &scenario.topo, &scenario.grid) {
                Ok(p) => {
                    goal = Some(g);
                    plan = Some(p);
                    break;
                }
                Err(GuidanceError::NoPath | GuidanceError::BlockedEndpoint { .. }) => continue,
            }
        }
        let goal = goal.ok_or(SimError::GoalInfeasible(i))?;
        agents[i].goal = goal;
        state.plan = plan;
        state.goal_id = log.goals.len();
        log.goals.push(GoalRecord { id: state.goal_id, agent: i, position: goal });
        Ok(())
    };

    for i in 0..cfg.n_agents {
        new_goal(i, &mut agents, &mut states, &mut log)?;
    }

    let bounds = Some((cfg.world_w, cfg.world_h));
    for frame in 0..cfg.frames_per_episode {
        for (agent, state) in agents.iter_mut().zip(states.iter_mut()) {
            agent.pref_velocity = match (policy, state.plan.as_mut()) {
                (Policy::TopoGuided, Some(plan)) => follow(agent, plan, reach, dt),
                _ => agent.velocity_toward(agent.goal, dt),
            };
        }
        let infos = orca_step(&mut agents, &scenario.edges, dt, bounds);
        for (agent, (state, info)) in agents.iter().zip(states.iter().zip(&infos)) {
            log.records.push(FrameRecord {
                frame,
                agent: agent.id,
                position: agent.position,
                velocity: agent.velocity,
                goal_id: state.goal_id,
                path_index: state.path_index,
            });
            log.fallback.push(info.fallback);
        }
        for i in 0..cfg.n_agents {
            if agents[i].position.distance(agents[i].goal) < reach {
                log.reach_events.push(ReachEvent { agent: i, frame, path_index: states[i].path_index });
                states[i].path_index += 1;
                new_goal(i, &mut agents, &mut states, &mut log)?;
            }
        }
    }
    Ok(log)
}

/// Single-agent run toward one fixed goal (no reassignment).
#[derive(Debug, Clone)]
pub struct GoalRun {
    /// Position after each frame, starting with the start position.
    pub trajectory: Vec<Vec2>,
    /// First frame that ended within the reach radius.
    pub reached_frame: Option<usize>,
    /// Speed in the last simulated frame.
    pub final_speed: f64,
    pub plan: Option<WaypointPlan>,
}

/// Drive one agent from `start` toward `goal` for up to `frames` frames,
/// stopping once the goal is within the reach radius.
pub fn run_to_goal(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    policy: Policy,
    start: Vec2,
    goal: Vec2,
    frames: usize,
) -> Result<GoalRun, GuidanceError> {
    let dt = cfg.dt();
    let reach = cfg.reach_radius();
    let mut agents = vec![cfg.agent_template(0, start, goal)];
    let mut plan = match policy {
        Policy::PlainOrca => None,
        Policy::TopoGuided => Some(plan_for(&agents[0], &scenario.topo, &scenario.grid)?),
    };
    let initial_plan = plan.clone();
    let mut trajectory = vec![start];
    let mut reached_frame = None;
    let bounds = Some((scenario.world_w, scenario.world_h));
    for frame in 0..frames {
        let a = &mut agents[0];
        a.pref_velocity = match plan.as_mut() {
            Some(p) => follow(a, p, reach, dt),
            None => a.velocity_toward(goal, dt),
        };
        orca_step(&mut agents, &scenario.edges, dt, bounds);
        trajectory.push(agents[0].position);
        if agents[0].position.distance(goal) < reach {
            reached_frame = Some(frame);
            break;
        }
    }
    Ok(GoalRun { trajectory, reached_frame, final_speed: agents[0].velocity.length(), plan: initial_plan })
}

/// Canonical stall case: one 1 m x 8 m wall across the straight line from
/// start to goal, 12 m apart. The seed jitters the wall center and the
/// endpoint offsets along the wall.
pub fn wall_case(cfg: &ScenarioConfig, seed: u64) -> Result<(Scenario, Vec2, Vec2), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Vec2::new(rng.gen_range(9.0..11.0), rng.gen_range(8.0..12.0));
    let wall = RectObstacle::from_center(c, 1.0, 8.0)?;
    let start = Vec2::new(c.x - 6.0, c.y + rng.gen_range(-1.0..1.0));
    let goal = Vec2::new(c.x + 6.0, c.y + rng.gen_range(-1.0..1.0));
    Ok((Scenario::from_obstacles(cfg, vec![wall])?, start, goal))
}

/// Logs of one episode, one per policy run.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub episode: usize,
    pub obstacles: Vec<RectObstacle>,
    pub logs: Vec<EpisodeLog>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    /// Episodes in index order; skipped episodes are absent.
    pub episodes: Vec<EpisodeOutcome>,
    pub skipped: Vec<usize>,
    pub reports: Vec<(Policy, MetricsReport)>,
}

impl BenchmarkResult {
    pub fn report(&self, policy: Policy) -> Option<&MetricsReport> {
        self.reports.iter().find(|(p, _)| *p == policy).map(|(_, r)| r)
    }

    pub fn logs(&self, policy: Policy) -> Vec<&EpisodeLog> {
        self.episodes.iter().flat_map(|e| e.logs.iter().filter(|l| l.policy == policy)).collect()
    }
}

/// Seed of episode `e`; the per-stream seeds derive from it.
pub fn episode_seed(master: u64, episode: usize) -> u64 {
    mix_seed(master, episode as u64, 0)
}

/// Scenario for episode `e`. Depends only on the obstacle settings and the
/// master seed, so agent-count variants share obstacle layouts.
pub fn episode_scenario(cfg: &ScenarioConfig, episode: usize) -> Result<Scenario, SimError> {
    generate_scenario(cfg, mix_seed(episode_seed(cfg.rng_seed, episode), 0, STREAM_SCENARIO))
}

/// Run every episode under each selected policy on the same scenario and
/// start positions, then aggregate metrics per policy. Episodes run on a
/// pool of `jobs` workers; results do not depend on `jobs`.
pub fn run_benchmark(cfg: &ScenarioConfig, jobs: usize) -> Result<BenchmarkResult, SimError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let policies = cfg.policy.policies();
    let outcomes: Vec<Result<Option<EpisodeOutcome>, SimError>> = pool.install(|| {
        (0..cfg.n_episodes)
            .into_par_iter()
            .map(|e| {
                let scenario = match episode_scenario(cfg, e) {
                    Ok(s) => s,
                    Err(SimError::ScenarioInfeasible(_)) => return Ok(None),
                    Err(err) => return Err(err),
                };
                let seed = episode_seed(cfg.rng_seed, e);
                let logs = policies
                    .iter()
                    .map(|&p| run_episode(cfg, &scenario, p, e, seed))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Some(EpisodeOutcome { episode: e, obstacles: scenario.obstacles.clone(), logs }))
            })
            .collect()
    });
    let mut episodes = Vec::new();
    let mut skipped = Vec::new();
    for (e, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Some(o) => episodes.push(o),
            None => skipped.push(e),
        }
    }
    if !skipped.is_empty() && skipped.len() * 100 >= cfg.n_episodes {
        return Err(SimError::TooManySkipped { skipped: skipped.len(), total: cfg.n_episodes });
    }
    let reports = policies
        .iter()
        .map(|&p| {
            let logs: Vec<&EpisodeLog> =
                episodes.iter().flat_map(|e| e.logs.iter().filter(move |l| l.policy == p)).collect();
            (p, compute_report(&logs, cfg.theta))
        })
        .collect();
    Ok(BenchmarkResult { episodes, skipped, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig { n_episodes: 2, frames_per_episode: 30, ..ScenarioConfig::default() }
    }

    #[test]
    fn no_obstacles_gives_free_interior() {
        let cfg = ScenarioConfig { n_obstacles: 0, ..small_cfg() };
        let s = generate_scenario(&cfg, 1).unwrap();
        assert!(s.obstacles.is_empty());
        assert_eq!(free_components(&s.grid), 1);
        assert_eq!(s.topo.cycle_rank(), 0);
    }

    #[test]
    fn default_scenario_meets_traversable_floor() {
        let cfg = small_cfg();
        for seed in 0..5 {
            let s = generate_scenario(&cfg, seed).unwrap();
            assert_eq!(s.obstacles.len(), 3);
            assert!(traversable_fraction(&s.grid) >= 0.8);
        }
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = small_cfg();
        let a = generate_scenario(&cfg, 42).unwrap();
        let b = generate_scenario(&cfg, 42).unwrap();
        assert_eq!(a.obstacles, b.obstacles);
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.topo, b.topo);
    }

    #[test]
    fn impossible_layout_is_reported() {
        let cfg = ScenarioConfig { obstacle_min_size: 8.0, obstacle_max_size: 9.0, ..small_cfg() };
        assert!(matches!(generate_scenario(&cfg, 0), Err(SimError::ScenarioInfeasible(_))));
    }

    #[test]
    fn goals_are_free_and_reproducible() {
        let cfg = small_cfg();
        let s = generate_scenario(&cfg, 3).unwrap();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..20)
                .map(|_| assign_goal(Vec2::new(10.0, 10.0), 0.3, &[], &s, 7.0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        let goals = draw();
        assert_eq!(goals, draw());
        for g in goals {
            assert!(s.grid.is_free_point(g));
            assert!(g.distance(Vec2::new(10.0, 10.0)) >= 7.0);
        }
    }

    #[test]
    fn log_has_one_record_per_agent_frame() {
        let cfg = small_cfg();
        let s = episode_scenario(&cfg, 0).unwrap();
        let log = run_episode(&cfg, &s, Policy::TopoGuided, 0, 5).unwrap();
        assert_eq!(log.records.len(), cfg.frames_per_episode * cfg.n_agents);
        for a in 0..cfg.n_agents {
            let idx: Vec<usize> = (0..cfg.frames_per_episode).map(|f| log.record(f, a).path_index).collect();
            assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn log_text_round_trip() {
        let cfg = small_cfg();
        let s = episode_scenario(&cfg, 1).unwrap();
        let log = run_episode(&cfg, &s, Policy::PlainOrca, 1, 77).unwrap();
        let text = log.to_text();
        let parsed = EpisodeLog::from_text(&text).unwrap();
        assert_eq!(parsed.to_text(), text);
        assert_eq!(parsed.records.len(), log.records.len());
    }

    #[test]
    fn malformed_log_line_is_located() {
        let cfg = small_cfg();
        let s = episode_scenario(&cfg, 1).unwrap();
        let text = run_episode(&cfg, &s, Policy::PlainOrca, 1, 77).unwrap().to_text();
        let broken = text.replacen("\n1 0 0 ", "\n1 0 0 x ", 1);
        let header_lines = text.lines().take_while(|l| l.starts_with('#')).count();
        match EpisodeLog::from_text(&broken) {
            Err(LogParseError::Malformed { line, .. }) => assert_eq!(line, header_lines + 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wall_case_stalls_plain_orca_only() {
        let cfg = ScenarioConfig::default();
        let (scenario, start, goal) = wall_case(&cfg, 0).unwrap();
        let orca = run_to_goal(&cfg, &scenario, Policy::PlainOrca, start, goal, 196).unwrap();
        let topo = run_to_goal(&cfg, &scenario, Policy::TopoGuided, start, goal, 196).unwrap();
        assert!(orca.reached_frame.is_none());
        assert!(orca.final_speed < 0.1 * cfg.max_speed);
        assert!(topo.reached_frame.is_some());
    }

    #[test]
    fn policy_names_parse() {
        assert_eq!("topo".parse::<PolicyChoice>(), Ok(PolicyChoice::Single(Policy::TopoGuided)));
        assert_eq!("both".parse::<PolicyChoice>(), Ok(PolicyChoice::Both));
        assert!("rvo".parse::<Policy>().is_err());
    }
}
