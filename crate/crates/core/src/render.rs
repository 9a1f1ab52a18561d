//! Static SVG scenes.
//!
//! Scene coordinates are meters with y pointing up; the SVG transform flips
//! the y axis so the origin sits at the bottom-left corner of the image.

use std::fmt::Write as _;

use crate::geometry::{RectObstacle, Vec2};
use crate::topology::TopoGraph;

/// Output pixels per meter.
pub const PIXELS_PER_METER: f64 = 30.0;

#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub world: (f64, f64),
    pub obstacles: Vec<RectObstacle>,
    pub graph: Option<TopoGraph>,
    /// Agent positions and radii.
    pub agents: Vec<(Vec2, f64)>,
    /// Waypoint polylines.
    pub plans: Vec<Vec<Vec2>>,
    /// Recorded trajectories.
    pub trajectories: Vec<Vec<Vec2>>,
    pub goals: Vec<Vec2>,
}

const TRACE_COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn points(line: &[Vec2]) -> String {
    let mut s = String::new();
    for (i, p) in line.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.3},{:.3}", p.x, p.y);
    }
    s
}

impl Scene {
    pub fn new(world_w: f64, world_h: f64) -> Scene {
        Scene { world: (world_w, world_h), ..Scene::default() }
    }

    pub fn to_svg(&self) -> String {
        let (w, h) = self.world;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {w} {h}">"#,
            w * PIXELS_PER_METER,
            h * PIXELS_PER_METER
        );
        let _ = writeln!(out, r#"<g transform="translate(0 {h}) scale(1 -1)">"#);
        let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff" stroke="#000000" stroke-width="0.05"/>"##);
        for o in &self.obstacles {
            let _ = writeln!(
                out,
                r##"<rect class="obstacle" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#404040"/>"##,
                o.min_corner.x,
                o.min_corner.y,
                o.width(),
                o.height()
            );
        }
        if let Some(g) = &self.graph {
            for e in &g.edges {
                let _ = writeln!(
                    out,
                    r##"<polyline class="edge" points="{}" fill="none" stroke="#3a7bd5" stroke-width="0.06"/>"##,
                    points(&e.polyline)
                );
            }
            for n in &g.nodes {
                let _ = writeln!(
                    out,
                    r##"<circle class="node" cx="{:.3}" cy="{:.3}" r="0.15" fill="#3a7bd5"/>"##,
                    n.x, n.y
                );
            }
        }
        for (i, t) in self.trajectories.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<polyline class="trajectory" points="{}" fill="none" stroke="{}" stroke-width="0.04" stroke-dasharray="0.15 0.1"/>"#,
                points(t),
                TRACE_COLORS[i % TRACE_COLORS.len()]
            );
        }
        for p in &self.plans {
            let _ = writeln!(
                out,
                r##"<polyline class="plan" points="{}" fill="none" stroke="#d62728" stroke-width="0.08"/>"##,
                points(p)
            );
        }
        for g in &self.goals {
            let _ = writeln!(
                out,
                r##"<rect class="goal" x="{:.3}" y="{:.3}" width="0.3" height="0.3" fill="#d62728"/>"##,
                g.x - 0.15,
                g.y - 0.15
            );
        }
        for (p, r) in &self.agents {
            let _ = writeln!(
                out,
                r##"<circle class="agent" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#2ca02c"/>"##,
                p.x, p.y, r
            );
        }
        out.push_str("</g>\n</svg>\n");
        out
    }
}
