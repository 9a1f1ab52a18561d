//! Continuous 2D primitives, rectangular obstacles and the occupancy grid.
//!
//! World coordinates are meters, y-up, with the world rectangle spanning
//! `[0, world_w] x [0, world_h]`. Grid cell `(ix, iy)` covers
//! `origin + [ix, ix + 1) * cell_size` horizontally and likewise vertically;
//! cells are stored row-major with `iy` selecting the row.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("world dimensions must be positive, got {0} x {1}")]
    BadWorld(f64, f64),
    #[error("cell size must be positive and at most min(world_w, world_h) = {max}, got {cell_size}")]
    BadCellSize { cell_size: f64, max: f64 },
    #[error("inflation must be non-negative, got {0}")]
    BadInflation(f64),
    #[error("rectangle must have positive area: min {0:?}, max {1:?}")]
    DegenerateRect(Vec2, Vec2),
}

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite(), "non-finite Vec2 ({x}, {y})");
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// 2D cross product `self.x * other.y - self.y * other.x`.
    #[inline]
    pub fn det(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    /// Unit vector in the same direction; the zero vector maps to itself.
    #[inline]
    pub fn normalize(self) -> Vec2 {
        let len = self.length();
        if len > 0.0 {
            self / len
        } else {
            Vec2::ZERO
        }
    }

    /// Counterclockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        *self = *self + o;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangular obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectObstacle {
    pub min_corner: Vec2,
    pub max_corner: Vec2,
}

impl RectObstacle {
    pub fn new(min_corner: Vec2, max_corner: Vec2) -> Result<Self, GeometryError> {
        if !(min_corner.x < max_corner.x && min_corner.y < max_corner.y) {
            return Err(GeometryError::DegenerateRect(min_corner, max_corner));
        }
        Ok(RectObstacle { min_corner, max_corner })
    }

    pub fn from_center(center: Vec2, width: f64, height: f64) -> Result<Self, GeometryError> {
        let half = Vec2::new(width * 0.5, height * 0.5);
        RectObstacle::new(center - half, center + half)
    }

    pub fn width(&self) -> f64 {
        self.max_corner.x - self.min_corner.x
    }

    pub fn height(&self) -> f64 {
        self.max_corner.y - self.min_corner.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        (self.min_corner + self.max_corner) * 0.5
    }

    /// Euclidean distance from `p` to the closed rectangle (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let dx = (self.min_corner.x - p.x).max(0.0).max(p.x - self.max_corner.x);
        let dy = (self.min_corner.y - p.y).max(0.0).max(p.y - self.max_corner.y);
        (dx * dx + dy * dy).sqrt()
    }

    /// Gap between two rectangles (0 when they touch or overlap).
    pub fn distance_to_rect(&self, other: &RectObstacle) -> f64 {
        let dx = (other.min_corner.x - self.max_corner.x)
            .max(self.min_corner.x - other.max_corner.x)
            .max(0.0);
        let dy = (other.min_corner.y - self.max_corner.y)
            .max(self.min_corner.y - other.max_corner.y)
            .max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min_corner.x
            && p.x <= self.max_corner.x
            && p.y >= self.min_corner.y
            && p.y <= self.max_corner.y
    }

    /// Corners in counterclockwise order starting at `min_corner`.
    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.min_corner,
            Vec2::new(self.max_corner.x, self.min_corner.y),
            self.max_corner,
            Vec2::new(self.min_corner.x, self.max_corner.y),
        ]
    }
}

/// One directed edge of an obstacle polygon, with enough neighborhood
/// information for the ORCA obstacle construction.
///
/// The solid side is to the left of `start -> end`; agents live on the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleEdge {
    pub start: Vec2,
    pub end: Vec2,
    /// Unit direction of the edge ending at `start`.
    pub prev_dir: Vec2,
    /// Unit direction of the edge leaving `end`.
    pub next_dir: Vec2,
    pub start_convex: bool,
    pub end_convex: bool,
}

impl ObstacleEdge {
    pub fn direction(&self) -> Vec2 {
        (self.end - self.start).normalize()
    }

    /// Distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let seg = self.end - self.start;
        let len_sq = seg.length_squared();
        let t = if len_sq > 0.0 {
            ((p - self.start).dot(seg) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        p.distance(self.start + seg * t)
    }
}

/// Closed polygon to directed edges. Vertices go counterclockwise around the
/// solid region; a clockwise ring therefore encloses free space.
pub fn polygon_edges(vertices: &[Vec2]) -> Vec<ObstacleEdge> {
    let n = vertices.len();
    let at = |i: usize| vertices[i % n];
    // Convex means the solid side turns left at the vertex.
    let convex = |i: usize| {
        let prev = at(i + n - 1);
        let cur = at(i);
        let next = at(i + 1);
        (cur - prev).det(next - cur) >= 0.0
    };
    (0..n)
        .map(|i| ObstacleEdge {
            start: at(i),
            end: at(i + 1),
            prev_dir: (at(i) - at(i + n - 1)).normalize(),
            next_dir: (at(i + 2) - at(i + 1)).normalize(),
            start_convex: convex(i),
            end_convex: convex(i + 1),
        })
        .collect()
}

/// ORCA edges for a set of rectangles plus, when `world` is given, the world
/// boundary as an enclosing wall.
pub fn obstacle_edges(obstacles: &[RectObstacle], world: Option<(f64, f64)>) -> Vec<ObstacleEdge> {
    let mut edges: Vec<ObstacleEdge> =
        obstacles.iter().flat_map(|o| polygon_edges(&o.corners())).collect();
    if let Some((w, h)) = world {
        let ring = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, h),
            Vec2::new(w, h),
            Vec2::new(w, 0.0),
        ];
        edges.extend(polygon_edges(&ring));
    }
    edges
}

/// Discretized free/blocked map.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub origin: Vec2,
    /// Row-major, `true` = blocked.
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new_free(width: usize, height: usize, cell_size: f64, origin: Vec2) -> Self {
        OccupancyGrid { width, height, cell_size, origin, cells: vec![false; width * height] }
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn is_blocked(&self, ix: usize, iy: usize) -> bool {
        self.cells[self.index(ix, iy)]
    }

    #[inline]
    pub fn set_blocked(&mut self, ix: usize, iy: usize, blocked: bool) {
        let i = self.index(ix, iy);
        self.cells[i] = blocked;
    }

    pub fn world_width(&self) -> f64 {
        self.width as f64 * self.cell_size
    }

    pub fn world_height(&self) -> f64 {
        self.height as f64 * self.cell_size
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn world_to_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let u = (p.x - self.origin.x) / self.cell_size;
        let v = (p.y - self.origin.y) / self.cell_size;
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let (ix, iy) = (u.floor() as usize, v.floor() as usize);
        // Points on the far world edge belong to the last cell.
        let ix = if ix == self.width && u <= self.width as f64 { ix - 1 } else { ix };
        let iy = if iy == self.height && v <= self.height as f64 { iy - 1 } else { iy };
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    /// True when `p` is inside the grid and its cell is free.
    pub fn is_free_point(&self, p: Vec2) -> bool {
        self.world_to_cell(p).is_some_and(|(ix, iy)| !self.is_blocked(ix, iy))
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&b| !b).count()
    }

    /// Free cell centers in raster order.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|iy| (0..self.width).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| !self.is_blocked(ix, iy))
            .collect()
    }

    /// Nearest free cell to `p` by breadth-first search over 8-neighbors,
    /// starting from the cell containing `p` (clamped into the grid).
    pub fn nearest_free_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let u = ((p.x - self.origin.x) / self.cell_size).floor();
        let v = ((p.y - self.origin.y) / self.cell_size).floor();
        let ix = u.clamp(0.0, (self.width - 1) as f64) as usize;
        let iy = v.clamp(0.0, (self.height - 1) as f64) as usize;
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([(ix, iy)]);
        seen[self.index(ix, iy)] = true;
        let mut best: Option<((usize, usize), f64)> = None;
        let mut best_ring = usize::MAX;
        while let Some((cx, cy)) = queue.pop_front() {
            let ring = cx.abs_diff(ix).max(cy.abs_diff(iy));
            if ring > best_ring {
                break;
            }
            if !self.is_blocked(cx, cy) {
                let d = self.cell_center(cx, cy).distance(p);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some(((cx, cy), d));
                }
                // Outer rings can still be closer in Euclidean terms.
                best_ring = best_ring.min(ring + ring.div_ceil(2) + 2);
            }
            for (nx, ny) in neighbors8(cx, cy, self.width, self.height) {
                let i = self.index(nx, ny);
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    /// Plain-text PGM (P2), one cell per pixel, 0 = blocked, 255 = free.
    /// The first text row is the top (max y) row of the grid.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for iy in (0..self.height).rev() {
            let row: Vec<&str> = (0..self.width)
                .map(|ix| if self.is_blocked(ix, iy) { "0" } else { "255" })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// In-grid 8-neighbors of `(x, y)` in a fixed order.
pub fn neighbors8(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    const OFFSETS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    OFFSETS.iter().filter_map(move |&(dx, dy)| {
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then_some((nx as usize, ny as usize))
    })
}

/// Label 8-connected components of the cells where `pred` holds.
/// Returns the per-cell label (`usize::MAX` where `pred` is false) and the
/// component count. Labels are assigned in raster order.
pub fn label_components(
    width: usize,
    height: usize,
    pred: impl Fn(usize, usize) -> bool,
) -> (Vec<usize>, usize) {
    let mut labels = vec![usize::MAX; width * height];
    let mut count = 0;
    let mut stack = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if labels[y * width + x] != usize::MAX || !pred(x, y) {
                continue;
            }
            labels[y * width + x] = count;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for (nx, ny) in neighbors8(cx, cy, width, height) {
                    let i = ny * width + nx;
                    if labels[i] == usize::MAX && pred(nx, ny) {
                        labels[i] = count;
                        stack.push((nx, ny));
                    }
                }
            }
            count += 1;
        }
    }
    (labels, count)
}

/// Number of 8-connected components of free cells.
pub fn free_components(grid: &OccupancyGrid) -> usize {
    label_components(grid.width, grid.height, |x, y| !grid.is_blocked(x, y)).1
}

/// Rasterize rectangles into a grid covering `[0, world_w] x [0, world_h]`.
///
/// A cell is blocked when its center lies within `inflation` of an obstacle
/// or outside the world rectangle shrunk by `inflation`.
pub fn rasterize(
    world_w: f64,
    world_h: f64,
    cell_size: f64,
    obstacles: &[RectObstacle],
    inflation: f64,
) -> Result<OccupancyGrid, GeometryError> {
    if !(world_w > 0.0 && world_h > 0.0) {
        return Err(GeometryError::BadWorld(world_w, world_h));
    }
    let max = world_w.min(world_h);
    if !(cell_size > 0.0 && cell_size <= max) {
        return Err(GeometryError::BadCellSize { cell_size, max });
    }
    if !(inflation >= 0.0) {
        return Err(GeometryError::BadInflation(inflation));
    }
    let width = (world_w / cell_size - 1e-9).ceil() as usize;
    let height = (world_h / cell_size - 1e-9).ceil() as usize;
    let mut grid = OccupancyGrid::new_free(width, height, cell_size, Vec2::ZERO);
    for iy in 0..height {
        for ix in 0..width {
            let c = grid.cell_center(ix, iy);
            let outside = c.x < inflation
                || c.y < inflation
                || c.x > world_w - inflation
                || c.y > world_h - inflation;
            let blocked = outside || obstacles.iter().any(|o| o.distance_to(c) <= inflation);
            grid.set_blocked(ix, iy, blocked);
        }
    }
    Ok(grid)
}

/// Free cells over total cells.
pub fn traversable_fraction(grid: &OccupancyGrid) -> f64 {
    if grid.cells.is_empty() {
        return 0.0;
    }
    grid.free_count() as f64 / grid.cells.len() as f64
}

/// Conservative line-of-sight test: every cell whose closed square the
/// segment `pq` touches must be free. Cells outside the grid are ignored.
pub fn raycast_free(grid: &OccupancyGrid, p: Vec2, q: Vec2) -> bool {
    supercover(grid, p, q, |ix, iy| !grid.is_blocked(ix, iy))
}

/// Visit every grid cell touched by segment `pq` until `visit` returns false.
/// Returns whether all visits returned true. The visit order is independent
/// of the argument order, so the result is symmetric in `p` and `q`.
pub fn supercover(
    grid: &OccupancyGrid,
    p: Vec2,
    q: Vec2,
    mut visit: impl FnMut(usize, usize) -> bool,
) -> bool {
    const EPS: f64 = 1e-9;
    let to_grid = |w: Vec2| ((w.x - grid.origin.x) / grid.cell_size, (w.y - grid.origin.y) / grid.cell_size);
    let (mut a, mut b) = (to_grid(p), to_grid(q));
    if (b.0, b.1) < (a.0, a.1) {
        std::mem::swap(&mut a, &mut b);
    }
    let (w, h) = (grid.width as i64, grid.height as i64);
    // Closed interval [lo, hi] touches cells ceil(lo) - 1 ..= floor(hi).
    let cell_range = |lo: f64, hi: f64, n: i64| {
        let first = ((lo - EPS).ceil() as i64 - 1).max(0);
        let last = ((hi + EPS).floor() as i64).min(n - 1);
        first..=last
    };
    let dx = b.0 - a.0;
    for ix in cell_range(a.0, b.0, w) {
        let (ylo, yhi) = if dx.abs() < EPS {
            (a.1.min(b.1), a.1.max(b.1))
        } else {
            let x0 = a.0.max(ix as f64);
            let x1 = b.0.min(ix as f64 + 1.0);
            let y_at = |x: f64| a.1 + (b.1 - a.1) * ((x - a.0) / dx).clamp(0.0, 1.0);
            let (y0, y1) = (y_at(x0.min(x1)), y_at(x1.max(x0)));
            (y0.min(y1), y0.max(y1))
        };
        for iy in cell_range(ylo, yhi, h) {
            if !visit(ix as usize, iy as usize) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with(width: usize, height: usize, blocked: &[(usize, usize)]) -> OccupancyGrid {
        let mut g = OccupancyGrid::new_free(width, height, 1.0, Vec2::ZERO);
        for &(x, y) in blocked {
            g.set_blocked(x, y, true);
        }
        g
    }

    #[test]
    fn empty_world_is_free() {
        let g = rasterize(2.0, 3.0, 0.1, &[], 0.0).unwrap();
        assert_eq!((g.width, g.height), (20, 30));
        assert_eq!(traversable_fraction(&g), 1.0);
    }

    #[test]
    fn exact_cover_blocks_nine_cells() {
        let rect = RectObstacle::new(Vec2::new(0.2, 0.2), Vec2::new(0.5, 0.5)).unwrap();
        let g = rasterize(1.0, 1.0, 0.1, &[rect], 0.0).unwrap();
        let blocked: Vec<_> = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .filter(|&(x, y)| g.is_blocked(x, y))
            .collect();
        let expected: Vec<_> = (2..=4).flat_map(|y| (2..=4).map(move |x| (x, y))).collect();
        assert_eq!(blocked, expected);
    }

    #[test]
    fn inflated_square_matches_minkowski_area() {
        let rect = RectObstacle::from_center(Vec2::new(2.5, 2.5), 1.0, 1.0).unwrap();
        let g = rasterize(5.0, 5.0, 0.1, &[rect], 0.5).unwrap();
        // Only count cells around the obstacle, not the boundary band.
        let mut area = 0.0;
        for iy in 0..g.height {
            for ix in 0..g.width {
                let c = g.cell_center(ix, iy);
                if rect.distance_to(c) <= 0.5 {
                    assert!(g.is_blocked(ix, iy));
                    area += 0.01;
                }
            }
        }
        let exact = 1.0 + 4.0 * 0.5 + std::f64::consts::PI * 0.25;
        assert!((area - exact).abs() / exact < 0.05, "area {area} vs {exact}");
    }

    #[test]
    fn rejects_oversized_cells() {
        assert!(matches!(
            rasterize(1.0, 2.0, 1.5, &[], 0.0),
            Err(GeometryError::BadCellSize { .. })
        ));
        assert!(rasterize(1.0, 1.0, 0.1, &[], -0.1).is_err());
    }

    #[test]
    fn boundary_band_is_blocked() {
        let g = rasterize(2.0, 2.0, 0.1, &[], 0.25).unwrap();
        assert!(g.is_blocked(0, 10));
        assert!(g.is_blocked(1, 10));
        assert!(!g.is_blocked(2, 10));
        assert!(g.is_blocked(19, 10));
        // 16 x 16 of 20 x 20 cells stay free.
        assert!((traversable_fraction(&g) - 256.0 / 400.0).abs() < 1e-12);
    }

    #[test]
    fn fraction_counts_cells() {
        let blocked: Vec<_> = (0..20).map(|i| (i % 10, i / 10)).collect();
        assert_eq!(traversable_fraction(&grid_with(10, 10, &blocked)), 0.8);
        let mut all = grid_with(3, 3, &[]);
        all.cells.iter_mut().for_each(|c| *c = true);
        assert_eq!(traversable_fraction(&all), 0.0);
    }

    #[test]
    fn degenerate_ray_in_free_cell() {
        let g = grid_with(5, 5, &[(2, 2)]);
        let p = Vec2::new(0.5, 0.5);
        assert!(raycast_free(&g, p, p));
        assert!(!raycast_free(&g, Vec2::new(2.5, 2.5), Vec2::new(2.5, 2.5)));
    }

    #[test]
    fn ray_blocked_in_row() {
        let g = grid_with(5, 3, &[(2, 1)]);
        assert!(!raycast_free(&g, Vec2::new(0.5, 1.5), Vec2::new(4.5, 1.5)));
        assert!(raycast_free(&g, Vec2::new(0.5, 0.5), Vec2::new(4.5, 0.5)));
    }

    #[test]
    fn corner_graze_is_blocked() {
        // Diagonal through the shared corner of (1,1) and (2,2) also touches
        // (1,2) and (2,1).
        let g = grid_with(4, 4, &[(2, 1)]);
        assert!(!raycast_free(&g, Vec2::new(0.5, 0.5), Vec2::new(3.5, 3.5)));
    }

    #[test]
    fn world_cell_round_trip() {
        let g = rasterize(4.0, 3.0, 0.25, &[], 0.0).unwrap();
        for (ix, iy) in [(0, 0), (3, 7), (15, 11)] {
            assert_eq!(g.world_to_cell(g.cell_center(ix, iy)), Some((ix, iy)));
        }
        assert_eq!(g.world_to_cell(Vec2::new(4.0, 3.0)), Some((15, 11)));
        assert_eq!(g.world_to_cell(Vec2::new(-0.01, 1.0)), None);
    }

    #[test]
    fn nearest_free_from_blocked_point() {
        let g = grid_with(5, 5, &[(2, 2), (1, 2), (3, 2)]);
        assert_eq!(g.nearest_free_cell(Vec2::new(2.5, 2.4)), Some((2, 1)));
        assert_eq!(g.nearest_free_cell(Vec2::new(0.5, 0.5)), Some((0, 0)));
    }

    #[test]
    fn pgm_export() {
        let g = grid_with(2, 2, &[(0, 0)]);
        assert_eq!(g.to_pgm(), "P2\n2 2\n255\n255 255\n0 255\n");
    }

    #[test]
    fn rectangle_edges_are_convex_and_ring_is_concave() {
        let rect = RectObstacle::new(Vec2::new(1.0, 1.0), Vec2::new(2.0, 3.0)).unwrap();
        let edges = obstacle_edges(&[rect], Some((5.0, 5.0)));
        assert_eq!(edges.len(), 8);
        assert!(edges[..4].iter().all(|e| e.start_convex && e.end_convex));
        assert!(edges[4..].iter().all(|e| !e.start_convex && !e.end_convex));
        // Agents outside the rectangle are on the right of its edges.
        let outside = Vec2::new(1.5, 0.0);
        assert!(edges[0].direction().det(outside - edges[0].start) < 0.0);
        // And inside the world they are on the right of the ring's edges.
        let inside = Vec2::new(2.5, 2.5);
        assert!(edges[4..].iter().all(|e| e.direction().det(inside - e.start) < 0.0));
    }
}
