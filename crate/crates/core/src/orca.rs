//! Optimal reciprocal collision avoidance.
//!
//! Each agent's admissible velocities are the intersection of half-planes
//! ([`OrcaLine`]) induced by nearby agents and obstacle edges, intersected
//! with the disc of radius `max_speed`. The new velocity is the admissible
//! point closest to the preferred velocity, found with a randomized-free
//! incremental 2D linear program. When the agent constraints admit no
//! solution the solver minimizes the largest agent-constraint violation
//! while keeping obstacle constraints hard.
//!
//! Velocities are meters per frame and time horizons are in frames.

use rayon::prelude::*;

use crate::geometry::{ObstacleEdge, Vec2};

const LP_EPSILON: f64 = 1e-9;

/// Kinematic state of one disc agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub max_speed: f64,
    pub pref_velocity: Vec2,
    pub neighbor_dist: f64,
    /// Horizon for agent-agent constraints, frames.
    pub time_horizon: f64,
    /// Horizon for obstacle constraints, frames.
    pub time_horizon_obst: f64,
    pub goal: Vec2,
}

impl Agent {
    /// Agent at rest with the default parameters.
    pub fn new(id: usize, position: Vec2, goal: Vec2) -> Self {
        Agent {
            id,
            position,
            velocity: Vec2::ZERO,
            radius: 0.3,
            max_speed: 0.2,
            pref_velocity: Vec2::ZERO,
            neighbor_dist: 3.0,
            time_horizon: 10.0,
            time_horizon_obst: 10.0,
            goal,
        }
    }

    /// Velocity straight toward `target`, capped at `max_speed` and at the
    /// speed that would land exactly on it after `dt`.
    pub fn velocity_toward(&self, target: Vec2, dt: f64) -> Vec2 {
        let to = target - self.position;
        let dist = to.length();
        if dist <= 0.0 {
            return Vec2::ZERO;
        }
        to * (self.max_speed.min(dist / dt) / dist)
    }
}

/// Boundary of a half-plane in velocity space.
///
/// The permitted side is to the left of `direction`: velocity `v` satisfies
/// the constraint iff `direction.det(v - point) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrcaLine {
    pub point: Vec2,
    /// Unit vector.
    pub direction: Vec2,
}

impl OrcaLine {
    /// Signed distance of `v` from the line, positive on the permitted side.
    #[inline]
    pub fn signed_distance(&self, v: Vec2) -> f64 {
        self.direction.det(v - self.point)
    }

    #[inline]
    pub fn permits(&self, v: Vec2) -> bool {
        self.signed_distance(v) >= 0.0
    }
}

/// Neighbors of `agent` within `neighbor_dist`, sorted by (distance, id).
fn in_range_neighbors<'a>(agent: &Agent, neighbors: &'a [Agent]) -> Vec<&'a Agent> {
    let mut close: Vec<(f64, &Agent)> = neighbors
        .iter()
        .filter(|n| n.id != agent.id)
        .map(|n| (n.position.distance(agent.position), n))
        .filter(|(d, _)| *d < agent.neighbor_dist)
        .collect();
    close.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    close.into_iter().map(|(_, n)| n).collect()
}

/// Reciprocal half-plane constraints from neighboring agents.
///
/// For a non-colliding pair the line passes through `v + u / 2`, where `u` is
/// the smallest change of relative velocity that leaves the velocity obstacle
/// truncated at `time_horizon`. Overlapping pairs get a constraint that
/// resolves the overlap within one step of length `dt`.
pub fn agent_orca_lines(agent: &Agent, neighbors: &[Agent], dt: f64) -> Vec<OrcaLine> {
    let inv_horizon = 1.0 / agent.time_horizon;
    in_range_neighbors(agent, neighbors)
        .into_iter()
        .map(|other| {
            let rel_pos = other.position - agent.position;
            let rel_vel = agent.velocity - other.velocity;
            let dist_sq = rel_pos.length_squared();
            let combined = agent.radius + other.radius;
            let combined_sq = combined * combined;

            let (direction, u) = if dist_sq > combined_sq {
                // Vector from the cutoff circle center to the relative velocity.
                let w = rel_vel - rel_pos * inv_horizon;
                let w_len_sq = w.length_squared();
                let dot = w.dot(rel_pos);
                if dot < 0.0 && dot * dot > combined_sq * w_len_sq {
                    // Closest boundary point is on the cutoff circle.
                    let w_len = w_len_sq.sqrt();
                    let unit_w = w / w_len;
                    (Vec2::new(unit_w.y, -unit_w.x), unit_w * (combined * inv_horizon - w_len))
                } else {
                    // Closest boundary point is on one of the cone legs.
                    let leg = (dist_sq - combined_sq).sqrt();
                    let direction = if rel_pos.det(w) > 0.0 {
                        Vec2::new(
                            rel_pos.x * leg - rel_pos.y * combined,
                            rel_pos.x * combined + rel_pos.y * leg,
                        ) / dist_sq
                    } else {
                        -Vec2::new(
                            rel_pos.x * leg + rel_pos.y * combined,
                            -rel_pos.x * combined + rel_pos.y * leg,
                        ) / dist_sq
                    };
                    (direction, direction * rel_vel.dot(direction) - rel_vel)
                }
            } else {
                // Already overlapping: push apart within one step.
                let inv_dt = 1.0 / dt;
                let w = rel_vel - rel_pos * inv_dt;
                let w_len = w.length();
                let unit_w = if w_len > 0.0 {
                    w / w_len
                } else if dist_sq > 0.0 {
                    -rel_pos.normalize()
                } else {
                    // Coincident centers with equal velocities: separate by id.
                    if agent.id < other.id { Vec2::new(-1.0, 0.0) } else { Vec2::new(1.0, 0.0) }
                };
                (Vec2::new(unit_w.y, -unit_w.x), unit_w * (combined * inv_dt - w_len))
            };
            OrcaLine { point: agent.velocity + u * 0.5, direction }
        })
        .collect()
}

/// Half-plane constraints from static obstacle edges. The agent takes full
/// responsibility. Edges are considered when within `neighbor_dist` and when
/// the agent is on their free side; nearer edges are processed first, and an
/// edge already covered by earlier constraints adds nothing.
pub fn obstacle_orca_lines(agent: &Agent, edges: &[ObstacleEdge]) -> Vec<OrcaLine> {
    let mut candidates: Vec<(f64, usize)> = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.direction().det(agent.position - e.start) < 0.0)
        .map(|(i, e)| (e.distance_to(agent.position), i))
        .filter(|(d, _)| *d < agent.neighbor_dist)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut lines: Vec<OrcaLine> = Vec::new();
    for (_, i) in candidates {
        if let Some(line) = edge_line(agent, &edges[i], &lines) {
            lines.push(line);
        }
    }
    lines
}

fn edge_line(agent: &Agent, edge: &ObstacleEdge, existing: &[OrcaLine]) -> Option<OrcaLine> {
    let inv_horizon = 1.0 / agent.time_horizon_obst;
    let radius = agent.radius;
    let radius_sq = radius * radius;
    let unit_dir = edge.direction();

    let rel1 = edge.start - agent.position;
    let rel2 = edge.end - agent.position;

    let covered = existing.iter().any(|line| {
        (rel1 * inv_horizon - line.point).det(line.direction) - inv_horizon * radius >= -LP_EPSILON
            && (rel2 * inv_horizon - line.point).det(line.direction) - inv_horizon * radius
                >= -LP_EPSILON
    });
    if covered {
        return None;
    }

    let dist_sq1 = rel1.length_squared();
    let dist_sq2 = rel2.length_squared();
    let obstacle_vec = edge.end - edge.start;
    let s = (-rel1).dot(obstacle_vec) / obstacle_vec.length_squared();
    let dist_sq_line = (-rel1 - obstacle_vec * s).length_squared();

    let at_origin = |direction: Vec2| Some(OrcaLine { point: Vec2::ZERO, direction });

    if s < 0.0 && dist_sq1 <= radius_sq {
        // Touching the start vertex.
        return if edge.start_convex { at_origin(Vec2::new(-rel1.y, rel1.x).normalize()) } else { None };
    } else if s > 1.0 && dist_sq2 <= radius_sq {
        // Touching the end vertex; the next edge handles it unless it faces away.
        return if edge.end_convex && rel2.det(edge.next_dir) >= 0.0 {
            at_origin(Vec2::new(-rel2.y, rel2.x).normalize())
        } else {
            None
        };
    } else if (0.0..1.0).contains(&s) && dist_sq_line <= radius_sq {
        return at_origin(-unit_dir);
    }

    // No collision: the velocity obstacle is bounded by two legs and a cutoff.
    let mut v1 = (edge.start, edge.start_convex, rel1, dist_sq1);
    let mut v2 = (edge.end, edge.end_convex, rel2, dist_sq2);
    let single_vertex;
    let tangents = |rel: Vec2, dist_sq: f64| {
        let leg = (dist_sq - radius_sq).sqrt();
        let left = Vec2::new(rel.x * leg - rel.y * radius, rel.x * radius + rel.y * leg) / dist_sq;
        let right = Vec2::new(rel.x * leg + rel.y * radius, -rel.x * radius + rel.y * leg) / dist_sq;
        (left, right)
    };
    let (mut left_leg, mut right_leg);
    if s < 0.0 && dist_sq_line <= radius_sq {
        // Viewed obliquely: the start vertex defines both legs.
        if !edge.start_convex {
            return None;
        }
        v2 = v1;
        single_vertex = true;
        (left_leg, right_leg) = tangents(rel1, dist_sq1);
    } else if s > 1.0 && dist_sq_line <= radius_sq {
        if !edge.end_convex {
            return None;
        }
        v1 = v2;
        single_vertex = true;
        (left_leg, right_leg) = tangents(rel2, dist_sq2);
    } else {
        single_vertex = false;
        left_leg = if v1.1 { tangents(v1.2, v1.3).0 } else { -unit_dir };
        right_leg = if v2.1 { tangents(v2.2, v2.3).1 } else { unit_dir };
    }

    // A leg never points into the neighboring edge at a convex vertex; use that
    // edge's direction instead and skip the constraint if it would be chosen.
    let (left_neighbor_dir, right_neighbor_dir) = if single_vertex && v1.0 == edge.end {
        (unit_dir, edge.next_dir)
    } else if single_vertex {
        (edge.prev_dir, unit_dir)
    } else {
        (edge.prev_dir, edge.next_dir)
    };
    let mut left_foreign = false;
    let mut right_foreign = false;
    if v1.1 && left_leg.det(-left_neighbor_dir) >= 0.0 {
        left_leg = -left_neighbor_dir;
        left_foreign = true;
    }
    if v2.1 && right_leg.det(right_neighbor_dir) <= 0.0 {
        right_leg = right_neighbor_dir;
        right_foreign = true;
    }

    let left_cutoff = (v1.0 - agent.position) * inv_horizon;
    let right_cutoff = (v2.0 - agent.position) * inv_horizon;
    let cutoff_vec = right_cutoff - left_cutoff;
    let velocity = agent.velocity;

    let t = if single_vertex {
        0.5
    } else {
        (velocity - left_cutoff).dot(cutoff_vec) / cutoff_vec.length_squared()
    };
    let t_left = (velocity - left_cutoff).dot(left_leg);
    let t_right = (velocity - right_cutoff).dot(right_leg);

    let cutoff_circle = |center: Vec2| {
        let unit_w = (velocity - center).normalize();
        let unit_w = if unit_w == Vec2::ZERO { -unit_dir.perp() } else { unit_w };
        OrcaLine { point: center + unit_w * (radius * inv_horizon), direction: Vec2::new(unit_w.y, -unit_w.x) }
    };
    if (t < 0.0 && t_left < 0.0) || (single_vertex && t_left < 0.0 && t_right < 0.0) {
        return Some(cutoff_circle(left_cutoff));
    } else if t > 1.0 && t_right < 0.0 {
        return Some(cutoff_circle(right_cutoff));
    }

    let dist_cutoff = if !(0.0..=1.0).contains(&t) || single_vertex {
        f64::INFINITY
    } else {
        (velocity - (left_cutoff + cutoff_vec * t)).length_squared()
    };
    let dist_left =
        if t_left < 0.0 { f64::INFINITY } else { (velocity - (left_cutoff + left_leg * t_left)).length_squared() };
    let dist_right = if t_right < 0.0 {
        f64::INFINITY
    } else {
        (velocity - (right_cutoff + right_leg * t_right)).length_squared()
    };

    let offset_line = |base: Vec2, direction: Vec2| OrcaLine {
        point: base + Vec2::new(-direction.y, direction.x) * (radius * inv_horizon),
        direction,
    };
    if dist_cutoff <= dist_left && dist_cutoff <= dist_right {
        let direction = -unit_dir;
        Some(offset_line(left_cutoff, direction))
    } else if dist_left <= dist_right {
        if left_foreign {
            return None;
        }
        Some(offset_line(left_cutoff, left_leg))
    } else {
        if right_foreign {
            return None;
        }
        Some(offset_line(right_cutoff, -right_leg))
    }
}

/// Solver output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub velocity: Vec2,
    /// The constraints were infeasible and the minimax fallback ran.
    pub fallback: bool,
}

/// Velocity nearest `pref` satisfying every line and `|v| <= max_speed`.
///
/// `lines[..n_obstacle_lines]` are obstacle constraints and are never
/// relaxed; if the full set is infeasible, the largest violation of the
/// remaining lines is minimized instead.
pub fn solve_velocity(lines: &[OrcaLine], n_obstacle_lines: usize, max_speed: f64, pref: Vec2) -> Vec2 {
    solve_velocity_detailed(lines, n_obstacle_lines, max_speed, pref).velocity
}

pub fn solve_velocity_detailed(
    lines: &[OrcaLine],
    n_obstacle_lines: usize,
    max_speed: f64,
    pref: Vec2,
) -> Solution {
    let mut result = Vec2::ZERO;
    let failed = linear_program2(lines, max_speed, pref, false, &mut result);
    let fallback = failed < lines.len();
    if fallback {
        linear_program3(lines, n_obstacle_lines, failed, max_speed, &mut result);
    }
    // Guard the speed cap against round-off on the disc boundary.
    let speed = result.length();
    if speed > max_speed {
        result = result * (max_speed / speed);
    }
    Solution { velocity: result, fallback }
}

/// Optimize along `lines[line_no]` subject to `lines[..line_no]` and the disc.
fn linear_program1(
    lines: &[OrcaLine],
    line_no: usize,
    radius: f64,
    opt: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.length_squared();
    if discriminant < 0.0 {
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..line_no] {
        let denominator = line.direction.det(other.direction);
        let numerator = other.direction.det(line.point - other.point);
        if denominator.abs() <= LP_EPSILON {
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    let t = if direction_opt {
        if opt.dot(line.direction) > 0.0 { t_right } else { t_left }
    } else {
        line.direction.dot(opt - line.point).clamp(t_left, t_right)
    };
    *result = line.point + line.direction * t;
    true
}

/// Returns the index of the first line that made the program infeasible, or
/// `lines.len()` on success.
fn linear_program2(lines: &[OrcaLine], radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> usize {
    *result = if direction_opt {
        opt * radius
    } else if opt.length_squared() > radius * radius {
        opt.normalize() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if lines[i].direction.det(lines[i].point - *result) > 0.0 {
            let previous = *result;
            if !linear_program1(lines, i, radius, opt, direction_opt, result) {
                *result = previous;
                return i;
            }
        }
    }
    lines.len()
}

fn linear_program3(lines: &[OrcaLine], n_obstacle_lines: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if lines[i].direction.det(lines[i].point - *result) <= distance {
            continue;
        }
        let mut projected: Vec<OrcaLine> = lines[..n_obstacle_lines].to_vec();
        for j in n_obstacle_lines..i {
            let det = lines[i].direction.det(lines[j].direction);
            let point = if det.abs() <= LP_EPSILON {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction * (lines[j].direction.det(lines[i].point - lines[j].point) / det)
            };
            let direction = (lines[j].direction - lines[i].direction).normalize();
            projected.push(OrcaLine { point, direction });
        }
        let previous = *result;
        let opt = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        if linear_program2(&projected, radius, opt, true, result) < projected.len() {
            // Only possible through round-off; keep the previous answer.
            *result = previous;
        }
        distance = lines[i].direction.det(lines[i].point - *result);
    }
}

/// Per-agent result of one [`orca_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub fallback: bool,
}

/// Advance every agent by one step of length `dt`.
///
/// All constraints are built from the pre-step snapshot; new velocities are
/// committed together afterwards, so the outcome does not depend on how the
/// per-agent work is scheduled. Positions are clamped to `bounds` when given.
pub fn orca_step(
    agents: &mut [Agent],
    edges: &[ObstacleEdge],
    dt: f64,
    bounds: Option<(f64, f64)>,
) -> Vec<StepInfo> {
    let snapshot: &[Agent] = agents;
    let solutions: Vec<Solution> = snapshot
        .par_iter()
        .map(|agent| {
            let mut lines = obstacle_orca_lines(agent, edges);
            let n_obstacle = lines.len();
            lines.extend(agent_orca_lines(agent, snapshot, dt));
            solve_velocity_detailed(&lines, n_obstacle, agent.max_speed, agent.pref_velocity)
        })
        .collect();
    for (agent, solution) in agents.iter_mut().zip(&solutions) {
        agent.velocity = solution.velocity;
        let mut p = agent.position + solution.velocity * dt;
        if let Some((w, h)) = bounds {
            p = Vec2::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h));
        }
        agent.position = p;
    }
    solutions.iter().map(|s| StepInfo { fallback: s.fallback }).collect()
}
