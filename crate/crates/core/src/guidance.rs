//! Waypoint guidance over the skeleton graph.
//!
//! For every new goal an agent gets its own augmented graph: the shared
//! skeleton graph plus its start `s` and goal `g`, each linked by straight
//! edges to every node it can see. The shortest `s`-`g` path becomes a list
//! of waypoints that the agent hands to ORCA one at a time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{raycast_free, OccupancyGrid, Vec2};
use crate::orca::Agent;
use crate::topology::{TopoEdge, TopoGraph};

/// Longest skeleton edge kept whole in the routing graph, meters.
pub const ROUTE_SEGMENT: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("{which} point ({x:.3}, {y:.3}) is not in free space")]
    BlockedEndpoint { which: &'static str, x: f64, y: f64 },
    #[error("goal is unreachable from start")]
    NoPath,
}

/// Endpoint added to the topological graph for one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Start,
    Goal,
}

/// Far end of a visibility edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node(usize),
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraEdge {
    pub from: Endpoint,
    pub to: Target,
    pub length: f64,
}

/// Skeleton graph extended with one agent's start and goal.
#[derive(Debug, Clone)]
pub struct AugmentedGraph<'a> {
    pub base: &'a TopoGraph,
    pub s: Vec2,
    pub g: Vec2,
    pub extra_edges: Vec<ExtraEdge>,
}

impl AugmentedGraph<'_> {
    /// Vertex id of `s` in the augmented numbering (after all base nodes).
    pub fn start_id(&self) -> usize {
        self.base.nodes.len()
    }

    pub fn goal_id(&self) -> usize {
        self.base.nodes.len() + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.base.nodes.len() + 2
    }

    pub fn position(&self, v: usize) -> Vec2 {
        if v == self.start_id() {
            self.s
        } else if v == self.goal_id() {
            self.g
        } else {
            self.base.nodes[v]
        }
    }

    pub fn has_direct_edge(&self) -> bool {
        self.extra_edges.iter().any(|e| e.from == Endpoint::Start && e.to == Target::Goal)
    }

    /// Adjacency as `(neighbor, length, route)` for every vertex. Parallel
    /// skeleton edges all appear; `route` identifies the one taken.
    fn adjacency(&self) -> Vec<Vec<(usize, f64, Route)>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for (i, e) in self.base.edges.iter().enumerate() {
            if e.is_self_loop() {
                continue;
            }
            adj[e.a].push((e.b, e.length, Route::Skeleton(i)));
            adj[e.b].push((e.a, e.length, Route::Skeleton(i)));
        }
        for e in &self.extra_edges {
            let u = match e.from {
                Endpoint::Start => self.start_id(),
                Endpoint::Goal => self.goal_id(),
            };
            let v = match e.to {
                Target::Node(n) => n,
                Target::Goal => self.goal_id(),
            };
            adj[u].push((v, e.length, Route::Straight));
            adj[v].push((u, e.length, Route::Straight));
        }
        adj
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Route {
    Skeleton(usize),
    Straight,
}

/// Add `s` and `g` to `topo`, linking each to every node it can see on
/// `mask` and to each other when mutually visible.
pub fn augment<'a>(
    topo: &'a TopoGraph,
    mask: &OccupancyGrid,
    s: Vec2,
    g: Vec2,
) -> Result<AugmentedGraph<'a>, GuidanceError> {
    for (which, p) in [("start", s), ("goal", g)] {
        if !mask.is_free_point(p) {
            return Err(GuidanceError::BlockedEndpoint { which, x: p.x, y: p.y });
        }
    }
    let mut extra_edges = Vec::new();
    for (from, u) in [(Endpoint::Start, s), (Endpoint::Goal, g)] {
        for (i, &node) in topo.nodes.iter().enumerate() {
            if raycast_free(mask, u, node) {
                extra_edges.push(ExtraEdge { from, to: Target::Node(i), length: u.distance(node) });
            }
        }
    }
    if raycast_free(mask, s, g) {
        extra_edges.push(ExtraEdge { from: Endpoint::Start, to: Target::Goal, length: s.distance(g) });
    }
    Ok(AugmentedGraph { base: topo, s, g, extra_edges })
}

/// Ordered waypoints from start to goal.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPlan {
    pub waypoints: Vec<Vec2>,
    pub current_index: usize,
    /// Augmented-graph vertices of the shortest path (start id first).
    pub vertices: Vec<usize>,
    /// Total graph length of the path, meters.
    pub graph_length: f64,
}

impl WaypointPlan {
    pub fn current(&self) -> Vec2 {
        self.waypoints[self.current_index]
    }

    pub fn is_last(&self) -> bool {
        self.current_index + 1 >= self.waypoints.len()
    }

    pub fn length(&self) -> f64 {
        crate::topology::arc_length(&self.waypoints)
    }

    /// One `x y` line per waypoint.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.waypoints {
            let _ = writeln!(out, "{:.6} {:.6}", p.x, p.y);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    dist: f64,
    path: Vec<usize>,
}

impl Eq for Label {}

impl Ord for Label {
    // Reversed so BinaryHeap pops the smallest (distance, path) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `s` to `g`. Equal-length paths are ordered by their vertex
/// sequence, lexicographically. Skeleton edges on the path are expanded into
/// their polylines and then shortcut greedily: from each kept waypoint the
/// plan jumps to the farthest later point still visible on `mask`.
pub fn shortest_path(ag: &AugmentedGraph, mask: &OccupancyGrid) -> Result<WaypointPlan, GuidanceError> {
    if ag.s == ag.g {
        return Ok(WaypointPlan {
            waypoints: vec![ag.s],
            current_index: 0,
            vertices: vec![ag.start_id()],
            graph_length: 0.0,
        });
    }
    let adj = ag.adjacency();
    let (start, goal) = (ag.start_id(), ag.goal_id());
    let mut best: Vec<Option<Label>> = vec![None; ag.vertex_count()];
    let mut done = vec![false; ag.vertex_count()];
    let mut heap = BinaryHeap::new();
    let first = Label { dist: 0.0, path: vec![start] };
    best[start] = Some(first.clone());
    heap.push(first);
    while let Some(label) = heap.pop() {
        let u = *label.path.last().expect("paths are non-empty");
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == goal {
            break;
        }
        for &(v, w, _) in &adj[u] {
            if done[v] {
                continue;
            }
            let mut path = label.path.clone();
            path.push(v);
            let cand = Label { dist: label.dist + w, path };
            let better = match &best[v] {
                None => true,
                // `Ord` is reversed: greater means smaller (dist, path).
                Some(cur) => cand > *cur,
            };
            if better {
                best[v] = Some(cand.clone());
                heap.push(cand);
            }
        }
    }
    let Some(found) = best[goal].clone() else {
        return Err(GuidanceError::NoPath);
    };

    // Expand to geometry, picking the shortest parallel edge per hop.
    let mut points = vec![ag.s];
    for pair in found.path.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let hop = adj[u]
            .iter()
            .filter(|(n, _, _)| *n == v)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|&(_, _, r)| r)
            .expect("path hops follow edges");
        match hop {
            Route::Straight => points.push(ag.position(v)),
            Route::Skeleton(i) => points.extend(ag.base.edges[i].polyline_from(u).into_iter().skip(1)),
        }
    }
    let waypoints = shortcut(&points, mask);
    Ok(WaypointPlan { waypoints, current_index: 0, vertices: found.path, graph_length: found.dist })
}

/// Greedy visibility shortcutting; keeps the first and last points.
fn shortcut(points: &[Vec2], mask: &OccupancyGrid) -> Vec<Vec2> {
    let mut out = vec![points[0]];
    let mut i = 0;
    while i + 1 < points.len() {
        let mut j = i + 1;
        for k in (i + 2..points.len()).rev() {
            if raycast_free(mask, points[i], points[k]) {
                j = k;
                break;
            }
        }
        out.push(points[j]);
        i = j;
    }
    out
}

/// Preferred velocity toward the current waypoint.
///
/// Intermediate waypoints count as reached within `reach_radius`; the final
/// one is never skipped and the agent slows to land on it. The plan is never
/// recomputed here, even if the agent has been pushed off course.
pub fn follow(agent: &Agent, plan: &mut WaypointPlan, reach_radius: f64, dt: f64) -> Vec2 {
    while !plan.is_last() && agent.position.distance(plan.current()) < reach_radius {
        plan.current_index += 1;
    }
    agent.velocity_toward(plan.current(), dt)
}

/// Copy of `topo` for planning: every edge is cut at polyline points into
/// pieces of at most `max_len` meters, and every self-loop into at least
/// three pieces. The new nodes have degree 2, so cycle rank is unchanged,
/// but endpoints near a long edge or an isolated loop can see a node on it.
pub fn routing_graph(topo: &TopoGraph, max_len: f64) -> TopoGraph {
    let mut out = TopoGraph { nodes: topo.nodes.clone(), edges: Vec::with_capacity(topo.edges.len()) };
    for e in &topo.edges {
        let pts = &e.polyline;
        let min_pieces = if e.is_self_loop() { 3 } else { 1 };
        let pieces = ((e.length / max_len).ceil() as usize).max(min_pieces).min(pts.len().saturating_sub(1));
        if pieces <= 1 {
            out.edges.push(e.clone());
            continue;
        }
        // Cut indices closest to equal arc-length fractions.
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            acc += w[0].distance(w[1]);
            cum.push(acc);
        }
        let mut cuts = vec![0usize];
        for k in 1..pieces {
            let target = acc * k as f64 / pieces as f64;
            let idx = cum.partition_point(|&c| c < target).clamp(1, pts.len() - 2);
            if idx > *cuts.last().unwrap() {
                cuts.push(idx);
            }
        }
        cuts.push(pts.len() - 1);
        let mut prev_node = e.a;
        for (k, w) in cuts.windows(2).enumerate() {
            let last = k + 2 == cuts.len();
            let next_node = if last {
                e.b
            } else {
                out.nodes.push(pts[w[1]]);
                out.nodes.len() - 1
            };
            out.edges.push(TopoEdge::new(prev_node, next_node, pts[w[0]..=w[1]].to_vec()));
            prev_node = next_node;
        }
    }
    out
}

/// Fresh plan from the agent's position to its goal over the routing graph
/// of `topo`.
///
/// An agent squeezed into the inflated margin starts its plan from the
/// nearest free cell center instead.
pub fn plan_for(agent: &Agent, topo: &TopoGraph, mask: &OccupancyGrid) -> Result<WaypointPlan, GuidanceError> {
    let mut s = agent.position;
    if !mask.is_free_point(s) {
        if let Some((ix, iy)) = mask.nearest_free_cell(s) {
            s = mask.cell_center(ix, iy);
        }
    }
    let routing = routing_graph(topo, ROUTE_SEGMENT);
    let ag = augment(&routing, mask, s, agent.goal)?;
    shortest_path(&ag, mask)
}
