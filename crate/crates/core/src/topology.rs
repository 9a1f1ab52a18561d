//! Skeleton graph of the free space.
//!
//! [`thin`] reduces the free cells of an occupancy grid to a one-pixel-wide
//! skeleton with two-subiteration parallel thinning, [`skeleton_to_graph`]
//! turns skeleton pixels into a multigraph with polyline edges, and
//! [`prune_spurs`] drops short dead ends left by the raster.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{label_components, neighbors8, OccupancyGrid, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum GraphParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// One-pixel-wide subset of the free cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Skeleton {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    /// Out-of-grid reads as background.
    #[inline]
    fn at(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Number of 8-neighbors that are skeleton pixels.
    pub fn degree(&self, x: usize, y: usize) -> usize {
        neighbors8(x, y, self.width, self.height).filter(|&(nx, ny)| self.get(nx, ny)).count()
    }

    pub fn components(&self) -> usize {
        label_components(self.width, self.height, |x, y| self.get(x, y)).1
    }

    /// Foreground 8-neighborhood in the order N, NE, E, SE, S, SW, W, NW
    /// (north is +y).
    fn ring(&self, x: usize, y: usize) -> [bool; 8] {
        let (x, y) = (x as i64, y as i64);
        [
            self.at(x, y + 1),
            self.at(x + 1, y + 1),
            self.at(x + 1, y),
            self.at(x + 1, y - 1),
            self.at(x, y - 1),
            self.at(x - 1, y - 1),
            self.at(x - 1, y),
            self.at(x - 1, y + 1),
        ]
    }
}

/// Count of 0 -> 1 transitions around the cyclic neighborhood.
fn transitions(ring: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !ring[i] && ring[(i + 1) % 8]).count()
}

/// 8-connectivity number: 1 exactly when removing the pixel changes neither
/// the foreground nor the background topology.
fn connectivity_number(ring: &[bool; 8]) -> usize {
    let c = |i: usize| usize::from(!ring[i % 8]);
    [0, 2, 4, 6]
        .iter()
        .map(|&k| c(k) - c(k) * c(k + 1) * c(k + 2))
        .sum()
}

/// Removable without changing topology and not an end of a line.
fn is_simple_interior(ring: &[bool; 8]) -> bool {
    let b = ring.iter().filter(|&&v| v).count();
    b >= 2 && connectivity_number(ring) == 1
}

/// Thin the free region of `mask` to a one-pixel-wide skeleton.
///
/// Each subiteration marks deletion candidates with the classic parallel
/// thinning rules, reading only the previous buffer. Candidates are then
/// committed in raster order, each one only if it is still a simple,
/// non-end pixel, which keeps the component and hole structure intact even
/// for two-pixel-thick regions. A final pass removes redundant staircase
/// pixels so that every interior skeleton pixel has exactly two neighbors.
pub fn thin(mask: &OccupancyGrid) -> Skeleton {
    let mut sk = Skeleton {
        width: mask.width,
        height: mask.height,
        cells: mask.cells.iter().map(|&blocked| !blocked).collect(),
    };
    loop {
        let mut changed = false;
        for first_pass in [true, false] {
            let candidates: Vec<(usize, usize)> = (0..sk.height)
                .flat_map(|y| (0..sk.width).map(move |x| (x, y)))
                .filter(|&(x, y)| sk.get(x, y) && zs_candidate(&sk.ring(x, y), first_pass))
                .collect();
            for (x, y) in candidates {
                if is_simple_interior(&sk.ring(x, y)) {
                    sk.cells[y * sk.width + x] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    remove_staircases(&mut sk);
    sk
}

fn zs_candidate(ring: &[bool; 8], first_pass: bool) -> bool {
    let b = ring.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) || transitions(ring) != 1 {
        return false;
    }
    let [n, _, e, _, s, _, w, _] = *ring;
    if first_pass {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}

/// Delete simple non-end pixels that only sit in a staircase corner, i.e.
/// pixels with two 4-adjacent skeleton neighbors that touch each other.
fn remove_staircases(sk: &mut Skeleton) {
    loop {
        let mut changed = false;
        for y in 0..sk.height {
            for x in 0..sk.width {
                if !sk.get(x, y) {
                    continue;
                }
                let ring = sk.ring(x, y);
                let [n, _, e, _, s, _, w, _] = ring;
                let corner = (n && e) || (e && s) || (s && w) || (w && n);
                if corner && is_simple_interior(&ring) {
                    sk.cells[y * sk.width + x] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// A skeleton branch between two graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoEdge {
    pub a: usize,
    pub b: usize,
    /// Arc length of `polyline`, meters.
    pub length: f64,
    /// From node `a` to node `b`, inclusive of both node positions.
    pub polyline: Vec<Vec2>,
}

impl TopoEdge {
    /// Edge whose length is the arc length of `polyline`.
    pub fn new(a: usize, b: usize, polyline: Vec<Vec2>) -> Self {
        TopoEdge { a, b, length: arc_length(&polyline), polyline }
    }

    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }

    /// The other end of the edge, seen from `node`.
    pub fn opposite(&self, node: usize) -> usize {
        if self.a == node { self.b } else { self.a }
    }

    /// Polyline oriented to start at `node`.
    pub fn polyline_from(&self, node: usize) -> Vec<Vec2> {
        if self.a == node {
            self.polyline.clone()
        } else {
            self.polyline.iter().rev().copied().collect()
        }
    }
}

pub fn arc_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Multigraph over skeleton junctions and endpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopoGraph {
    /// Node `i` is at `nodes[i]`.
    pub nodes: Vec<Vec2>,
    pub edges: Vec<TopoEdge>,
}

impl TopoGraph {
    /// Edge-endpoint count per node; self-loops count twice.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    /// Connected components counted over nodes (isolated nodes included).
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..self.nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// `|E| - |V| + components`: the number of independent cycles.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.components() - self.nodes.len()
    }

    /// Plain-text export: `nodes N`, then `id x y` lines, then `edges M`,
    /// then per edge an `id_a id_b length n_points` line followed by
    /// `n_points` lines of `x y`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{i} {:.6} {:.6}", p.x, p.y);
        }
        let _ = writeln!(out, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {:.6} {}", e.a, e.b, e.length, e.polyline.len());
            for p in &e.polyline {
                let _ = writeln!(out, "{:.6} {:.6}", p.x, p.y);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TopoGraph, GraphParseError> {
        parse_graph(&mut text.lines().enumerate().map(|(i, l)| (i + 1, l)))
    }
}

/// Parse the [`TopoGraph::to_text`] format from a line stream.
pub(crate) fn parse_graph<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<TopoGraph, GraphParseError> {
    fn bad(line: usize, message: impl Into<String>) -> GraphParseError {
        GraphParseError::Malformed { line, message: message.into() }
    }
    let mut next = |what: &str| -> Result<(usize, Vec<&'a str>), GraphParseError> {
        lines
            .next()
            .map(|(n, l)| (n, l.split_whitespace().collect()))
            .ok_or_else(|| bad(0, format!("unexpected end of input, expected {what}")))
    };
    fn num<T: std::str::FromStr>(line: usize, tok: Option<&&str>) -> Result<T, GraphParseError> {
        tok.and_then(|t| t.parse().ok()).ok_or_else(|| bad(line, "expected a number"))
    }
    let (ln, head) = next("node count")?;
    if head.first() != Some(&"nodes") {
        return Err(bad(ln, "expected `nodes N`"));
    }
    let n_nodes: usize = num(ln, head.get(1))?;
    let mut graph = TopoGraph::default();
    for i in 0..n_nodes {
        let (ln, t) = next("node")?;
        if num::<usize>(ln, t.first())? != i {
            return Err(bad(ln, "node ids must be consecutive"));
        }
        graph.nodes.push(Vec2::new(num(ln, t.get(1))?, num(ln, t.get(2))?));
    }
    let (ln, head) = next("edge count")?;
    if head.first() != Some(&"edges") {
        return Err(bad(ln, "expected `edges M`"));
    }
    let n_edges: usize = num(ln, head.get(1))?;
    for _ in 0..n_edges {
        let (ln, t) = next("edge")?;
        let (a, b): (usize, usize) = (num(ln, t.first())?, num(ln, t.get(1))?);
        if a >= n_nodes || b >= n_nodes {
            return Err(bad(ln, "edge references unknown node"));
        }
        let length: f64 = num(ln, t.get(2))?;
        let n_points: usize = num(ln, t.get(3))?;
        let mut polyline = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let (ln, t) = next("polyline point")?;
            polyline.push(Vec2::new(num(ln, t.first())?, num(ln, t.get(1))?));
        }
        graph.edges.push(TopoEdge { a, b, length, polyline });
    }
    Ok(graph)
}

/// Extract nodes (skeleton pixels whose degree is not 2, with mutually
/// adjacent junction pixels merged, plus one pixel per isolated cycle) and
/// edges (maximal chains of degree-2 pixels between nodes).
pub fn skeleton_to_graph(s: &Skeleton, grid: &OccupancyGrid) -> TopoGraph {
    let (w, h) = (s.width, s.height);
    let idx = |x: usize, y: usize| y * w + x;
    let degree: Vec<usize> = (0..w * h).map(|i| if s.cells[i] { s.degree(i % w, i / w) } else { 0 }).collect();
    let is_node_pixel = |i: usize| s.cells[i] && degree[i] != 2;

    // Group node pixels: junction pixels (degree >= 3) merge with adjacent
    // junction pixels; endpoints and isolated pixels stand alone.
    let (junction_labels, _) = label_components(w, h, |x, y| s.get(x, y) && degree[idx(x, y)] >= 3);
    let mut node_of = vec![usize::MAX; w * h];
    let mut graph = TopoGraph::default();
    let mut cluster_node: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cluster_pixels: Vec<Vec<(usize, usize)>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = idx(x, y);
            if !is_node_pixel(i) {
                continue;
            }
            let node = if degree[i] >= 3 {
                *cluster_node.entry(junction_labels[i]).or_insert_with(|| {
                    cluster_pixels.push(Vec::new());
                    cluster_pixels.len() - 1
                })
            } else {
                cluster_pixels.push(Vec::new());
                cluster_pixels.len() - 1
            };
            cluster_pixels[node].push((x, y));
            node_of[i] = node;
        }
    }
    // Representative pixel: the cluster pixel nearest the cluster centroid.
    let mut rep: Vec<(usize, usize)> = Vec::with_capacity(cluster_pixels.len());
    for pixels in &cluster_pixels {
        let n = pixels.len() as f64;
        let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let best = pixels
            .iter()
            .copied()
            .min_by(|a, b| {
                let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                da.total_cmp(&db)
            })
            .expect("clusters are non-empty");
        rep.push(best);
        graph.nodes.push(grid.cell_center(best.0, best.1));
    }

    let center = |p: (usize, usize)| grid.cell_center(p.0, p.1);
    // Path from a node's representative pixel to one of its cluster pixels.
    let from_rep = |node: usize, p: (usize, usize)| {
        let mut pts = vec![graph.nodes[node]];
        if p != rep[node] {
            pts.push(center(p));
        }
        pts
    };

    let mut visited = vec![false; w * h];
    let mut direct_pairs: Vec<((usize, usize), (usize, usize))> = Vec::new();
    let mut edges = Vec::new();
    for node in 0..cluster_pixels.len() {
        for &start in &cluster_pixels[node] {
            for first in neighbors8(start.0, start.1, w, h) {
                let fi = idx(first.0, first.1);
                if !s.cells[fi] || node_of[fi] == node {
                    continue;
                }
                if node_of[fi] != usize::MAX {
                    // Two node pixels touching directly.
                    let key = if start < first { (start, first) } else { (first, start) };
                    if !direct_pairs.contains(&key) {
                        direct_pairs.push(key);
                        let other = node_of[fi];
                        let mut pts = from_rep(node, start);
                        let mut tail = from_rep(other, first);
                        tail.reverse();
                        pts.extend(tail);
                        edges.push(TopoEdge::new(node, other, pts));
                    }
                    continue;
                }
                if visited[fi] {
                    continue;
                }
                // Walk the chain of degree-2 pixels.
                let mut pts = from_rep(node, start);
                let mut prev = start;
                let mut cur = first;
                let end = loop {
                    visited[idx(cur.0, cur.1)] = true;
                    pts.push(center(cur));
                    let next = neighbors8(cur.0, cur.1, w, h)
                        .filter(|&p| p != prev && s.get(p.0, p.1))
                        .find(|&p| !visited[idx(p.0, p.1)] || node_of[idx(p.0, p.1)] != usize::MAX);
                    match next {
                        Some(p) if node_of[idx(p.0, p.1)] != usize::MAX => break Some(p),
                        Some(p) => {
                            prev = cur;
                            cur = p;
                        }
                        None => break None,
                    }
                };
                let Some(end) = end else { continue };
                let other = node_of[idx(end.0, end.1)];
                // A single pixel hugging its own junction cluster is raster noise.
                if other == node && pts.len() <= 3 {
                    continue;
                }
                let mut tail = from_rep(other, end);
                tail.reverse();
                pts.extend(tail);
                edges.push(TopoEdge::new(node, other, pts));
            }
        }
    }

    // Isolated cycles: every pixel has degree 2 and nothing was visited.
    for y in 0..h {
        for x in 0..w {
            let i = idx(x, y);
            if !s.cells[i] || visited[i] || node_of[i] != usize::MAX {
                continue;
            }
            let node = graph.nodes.len();
            graph.nodes.push(center((x, y)));
            visited[i] = true;
            let mut pts = vec![center((x, y))];
            let mut prev = (x, y);
            let mut cur = match neighbors8(x, y, w, h).find(|&p| s.get(p.0, p.1)) {
                Some(p) => p,
                None => continue,
            };
            while cur != (x, y) {
                visited[idx(cur.0, cur.1)] = true;
                pts.push(center(cur));
                let next = neighbors8(cur.0, cur.1, w, h)
                    .filter(|&p| p != prev && s.get(p.0, p.1))
                    .find(|&p| p == (x, y) || !visited[idx(p.0, p.1)]);
                match next {
                    Some(p) => {
                        prev = cur;
                        cur = p;
                    }
                    None => break,
                }
            }
            pts.push(center((x, y)));
            edges.push(TopoEdge::new(node, node, pts));
        }
    }
    graph.edges = edges;
    graph
}

/// Remove dead-end edges shorter than `min_length`, merging nodes left with
/// degree 2, until nothing changes. An edge is only removed when its far end
/// keeps degree >= 2 afterwards, so junctions never get disconnected and
/// isolated chains survive.
pub fn prune_spurs(g: &TopoGraph, min_length: f64) -> TopoGraph {
    let mut nodes: Vec<Option<Vec2>> = g.nodes.iter().copied().map(Some).collect();
    let mut edges: Vec<TopoEdge> = g.edges.clone();
    loop {
        let deg = degrees_of(nodes.len(), &edges);
        let spur = edges.iter().position(|e| {
            !e.is_self_loop()
                && e.length < min_length
                && ((deg[e.a] == 1 && deg[e.b] >= 3) || (deg[e.b] == 1 && deg[e.a] >= 3))
        });
        let Some(i) = spur else { break };
        let e = edges.remove(i);
        let (leaf, hub) = if deg[e.a] == 1 { (e.a, e.b) } else { (e.b, e.a) };
        nodes[leaf] = None;
        if deg[hub] - 1 == 2 {
            merge_through(hub, &mut nodes, &mut edges);
        }
    }
    // Compact node ids, keeping their relative order.
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut out = TopoGraph::default();
    for (i, n) in nodes.iter().enumerate() {
        if let Some(p) = n {
            remap[i] = out.nodes.len();
            out.nodes.push(*p);
        }
    }
    out.edges = edges
        .into_iter()
        .map(|mut e| {
            e.a = remap[e.a];
            e.b = remap[e.b];
            e
        })
        .collect();
    out
}

fn degrees_of(n: usize, edges: &[TopoEdge]) -> Vec<usize> {
    let mut deg = vec![0; n];
    for e in edges {
        deg[e.a] += 1;
        deg[e.b] += 1;
    }
    deg
}

/// Replace the two edges meeting at degree-2 node `hub` by one edge.
fn merge_through(hub: usize, nodes: &mut [Option<Vec2>], edges: &mut Vec<TopoEdge>) {
    let incident: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].a == hub || edges[i].b == hub).collect();
    if incident.len() != 2 || incident.iter().any(|&i| edges[i].is_self_loop()) {
        return;
    }
    let second = edges.remove(incident[1]);
    let first = edges.remove(incident[0]);
    let start = first.opposite(hub);
    let end = second.opposite(hub);
    let mut pts: Vec<Vec2> = first.polyline_from(start);
    pts.extend(second.polyline_from(hub).into_iter().skip(1));
    let mut merged = TopoEdge::new(start, end, pts);
    merged.length = first.length + second.length;
    nodes[hub] = None;
    edges.insert(incident[0], merged);
}
