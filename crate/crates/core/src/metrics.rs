//! Velocity filter and path-level crowd metrics computed from episode logs.
//!
//! Every function here is a pure function of the logs and `theta`, and
//! aggregates episodes in the order given, so recomputation is bit-stable.

use std::fmt::Write as _;

use crate::simulation::{EpisodeLog, Policy};

/// A path is occupied once it holds this many consecutive frozen frames.
pub const OCCUPIED_RUN: usize = 30;

/// Frozen flags of one episode, frame-major like [`EpisodeLog::records`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameStatus {
    pub n_frames: usize,
    pub n_agents: usize,
    pub frozen: Vec<bool>,
}

impl FrameStatus {
    pub fn is_frozen(&self, frame: usize, agent: usize) -> bool {
        self.frozen[frame * self.n_agents + agent]
    }

    pub fn set_frozen(&mut self, frame: usize, agent: usize, value: bool) {
        self.frozen[frame * self.n_agents + agent] = value;
    }
}

/// A frame is frozen when the speed is below `theta * max_speed` while the
/// agent is still farther than the goal radius from its current goal.
pub fn classify_frames(log: &EpisodeLog, theta: f64) -> FrameStatus {
    let limit = theta * log.max_speed;
    let frozen = log
        .records
        .iter()
        .map(|r| {
            let goal = log.goal_position(r.goal_id).unwrap_or(r.position);
            r.velocity.length() < limit && r.position.distance(goal) > log.goal_radius
        })
        .collect();
    FrameStatus { n_frames: log.n_frames, n_agents: log.n_agents, frozen }
}

/// One start-to-goal attempt of one agent over frames `start..end`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub agent: usize,
    pub path_index: usize,
    pub start: usize,
    /// One past the goal-reach frame, or the episode length if not reached.
    pub end: usize,
    pub completed: bool,
    pub distance: f64,
    pub frozen_frames: usize,
    pub longest_frozen_run: usize,
}

impl PathRecord {
    pub fn frames(&self) -> usize {
        self.end - self.start
    }

    pub fn velocity(&self) -> Option<f64> {
        (self.end > self.start).then(|| self.distance / self.frames() as f64)
    }

    pub fn is_occupied(&self) -> bool {
        self.longest_frozen_run >= OCCUPIED_RUN
    }
}

/// Split each agent's frames into paths by path index.
pub fn path_records(log: &EpisodeLog, status: &FrameStatus) -> Vec<PathRecord> {
    let mut out = Vec::new();
    for agent in 0..log.n_agents {
        let mut prev = log.starts[agent];
        let mut current: Option<PathRecord> = None;
        let mut run = 0usize;
        for frame in 0..log.n_frames {
            let r = log.record(frame, agent);
            if current.as_ref().is_some_and(|p| p.path_index != r.path_index) {
                out.push(current.take().unwrap());
            }
            let path = current.get_or_insert_with(|| {
                run = 0;
                PathRecord {
                    agent,
                    path_index: r.path_index,
                    start: frame,
                    end: frame,
                    completed: false,
                    distance: 0.0,
                    frozen_frames: 0,
                    longest_frozen_run: 0,
                }
            });
            path.end = frame + 1;
            path.distance += r.position.distance(prev);
            prev = r.position;
            if status.is_frozen(frame, agent) {
                path.frozen_frames += 1;
                run += 1;
                path.longest_frozen_run = path.longest_frozen_run.max(run);
            } else {
                run = 0;
            }
            if log.reach_events.iter().any(|e| e.agent == agent && e.frame == frame && e.path_index == r.path_index) {
                path.completed = true;
            }
        }
        out.extend(current);
    }
    out
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean over all paths of all episodes of distance over path frames.
pub fn avg_velocity_per_path(paths: &[Vec<PathRecord>]) -> f64 {
    mean(paths.iter().flatten().filter_map(PathRecord::velocity))
}

/// Mean over episodes of the percentage of frames in which every agent is frozen.
pub fn pct_mutual_frozen(statuses: &[FrameStatus]) -> f64 {
    mean(statuses.iter().map(|s| {
        if s.n_frames == 0 {
            return 0.0;
        }
        let mutual = (0..s.n_frames).filter(|&f| (0..s.n_agents).all(|a| s.is_frozen(f, a))).count();
        100.0 * mutual as f64 / s.n_frames as f64
    }))
}

/// Mean over all paths of the percentage of frozen frames in the path.
pub fn pct_frozen_per_path(paths: &[Vec<PathRecord>]) -> f64 {
    mean(
        paths
            .iter()
            .flatten()
            .filter(|p| p.frames() > 0)
            .map(|p| 100.0 * p.frozen_frames as f64 / p.frames() as f64),
    )
}

/// Episode averages of (occupied paths, total paths).
pub fn occupied_paths(paths: &[Vec<PathRecord>]) -> (f64, f64) {
    let occupied = mean(paths.iter().map(|ep| ep.iter().filter(|p| p.is_occupied()).count() as f64));
    let total = mean(paths.iter().map(|ep| ep.len() as f64));
    (occupied, total)
}

/// Percentage of (agent, episode) pairs with no goal reached and an
/// episode-long mean speed under a third of `avg_velocity`.
pub fn pct_stuck_agents(logs: &[&EpisodeLog], avg_velocity: f64) -> f64 {
    let mut stuck = 0usize;
    let mut total = 0usize;
    for log in logs {
        for agent in 0..log.n_agents {
            total += 1;
            if log.reached_goal(agent) || log.n_frames == 0 {
                continue;
            }
            let mut prev = log.starts[agent];
            let mut dist = 0.0;
            for frame in 0..log.n_frames {
                let p = log.record(frame, agent).position;
                dist += p.distance(prev);
                prev = p;
            }
            if dist / (log.n_frames as f64) < avg_velocity / 3.0 {
                stuck += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        100.0 * stuck as f64 / total as f64
    }
}

/// The five aggregate metrics for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub episodes: usize,
    pub n_agents: usize,
    pub avg_velocity_per_path: f64,
    pub pct_mutual_frozen_frames: f64,
    pub pct_frozen_frames_per_path: f64,
    pub avg_occupied_paths: f64,
    pub avg_total_paths: f64,
    pub pct_stuck_agents: f64,
}

pub fn compute_report(logs: &[&EpisodeLog], theta: f64) -> MetricsReport {
    let statuses: Vec<FrameStatus> = logs.iter().map(|l| classify_frames(l, theta)).collect();
    let paths: Vec<Vec<PathRecord>> = logs.iter().zip(&statuses).map(|(l, s)| path_records(l, s)).collect();
    let velocity = avg_velocity_per_path(&paths);
    let (occupied, total) = occupied_paths(&paths);
    MetricsReport {
        episodes: logs.len(),
        n_agents: logs.first().map_or(0, |l| l.n_agents),
        avg_velocity_per_path: velocity,
        pct_mutual_frozen_frames: pct_mutual_frozen(&statuses),
        pct_frozen_frames_per_path: pct_frozen_per_path(&paths),
        avg_occupied_paths: occupied,
        avg_total_paths: total,
        pct_stuck_agents: pct_stuck_agents(logs, velocity),
    }
}

impl MetricsReport {
    /// `key = value` lines, one metric per line.
    pub fn to_kv(&self, policy: Policy) -> String {
        let p = policy.name();
        let mut out = String::new();
        let _ = writeln!(out, "{p}.episodes = {}", self.episodes);
        let _ = writeln!(out, "{p}.agents = {}", self.n_agents);
        let _ = writeln!(out, "{p}.avg_velocity_per_path = {:.6}", self.avg_velocity_per_path);
        let _ = writeln!(out, "{p}.pct_mutual_frozen_frames = {:.6}", self.pct_mutual_frozen_frames);
        let _ = writeln!(out, "{p}.pct_frozen_frames_per_path = {:.6}", self.pct_frozen_frames_per_path);
        let _ = writeln!(out, "{p}.avg_occupied_paths = {:.6}", self.avg_occupied_paths);
        let _ = writeln!(out, "{p}.avg_total_paths = {:.6}", self.avg_total_paths);
        let _ = writeln!(out, "{p}.pct_stuck_agents = {:.6}", self.pct_stuck_agents);
        out
    }

    /// True when `self` is strictly better than `other` on all five metrics.
    pub fn dominates(&self, other: &MetricsReport) -> bool {
        self.avg_velocity_per_path > other.avg_velocity_per_path
            && self.pct_mutual_frozen_frames < other.pct_mutual_frozen_frames
            && self.pct_frozen_frames_per_path < other.pct_frozen_frames_per_path
            && self.avg_occupied_paths < other.avg_occupied_paths
            && self.avg_total_paths > other.avg_total_paths
            && self.pct_stuck_agents < other.pct_stuck_agents
    }
}

type Cell = fn(&MetricsReport) -> String;

/// Fixed-layout comparison table with one column per policy.
pub fn report_table(columns: &[(Policy, &MetricsReport)]) -> String {
    let mut out = String::new();
    let agents = columns.first().map_or(0, |(_, r)| r.n_agents);
    let episodes = columns.first().map_or(0, |(_, r)| r.episodes);
    let _ = writeln!(out, "{agents} agents, {episodes} episodes");
    let _ = write!(out, "{:<44}", "Metric");
    for (p, _) in columns {
        let _ = write!(out, "{:>16}", p.name());
    }
    out.push('\n');
    let rows: [(&str, Cell); 5] = [
        ("Agent velocity per path (m/frame, higher)", |r| format!("{:.4}", r.avg_velocity_per_path)),
        ("Mutual frozen frames per episode (%, lower)", |r| format!("{:.2}", r.pct_mutual_frozen_frames)),
        ("Frozen frames per path (%, lower)", |r| format!("{:.2}", r.pct_frozen_frames_per_path)),
        ("Occupied / total paths per episode", |r| {
            format!("{:.2}/{:.2}", r.avg_occupied_paths, r.avg_total_paths)
        }),
        ("Stuck agents (%, lower)", |r| format!("{:.2}", r.pct_stuck_agents)),
    ];
    for (label, cell) in rows {
        let _ = write!(out, "{label:<44}");
        for (_, r) in columns {
            let _ = write!(out, "{:>16}", cell(r));
        }
        out.push('\n');
    }
    out
}
