//! The velocity solver on its own: half-plane constraints, a speed disc and
//! a preferred velocity.
//!
//! Usage: cargo run --example lp_solver

use crowdnav::orca::solve_velocity_detailed;
use crowdnav::{OrcaLine, Vec2};

fn line(point: (f64, f64), direction: (f64, f64)) -> OrcaLine {
    OrcaLine { point: Vec2::new(point.0, point.1), direction: Vec2::new(direction.0, direction.1).normalize() }
}

fn main() {
    let pref = Vec2::new(1.0, 0.0);
    let cases = [
        ("no constraints", vec![], 0),
        ("x <= 0.5", vec![line((0.5, 0.0), (0.0, 1.0))], 0),
        ("x <= 0.5 and y >= 0.3", vec![line((0.5, 0.0), (0.0, 1.0)), line((0.0, 0.3), (1.0, 0.0))], 0),
        // Two agent lines that cannot both hold; the fallback spreads the violation.
        ("x >= 0.8 and x <= 0.2", vec![line((0.8, 0.0), (0.0, -1.0)), line((0.2, 0.0), (0.0, 1.0))], 0),
        // Same pair, but the first is an obstacle line and stays hard.
        ("hard x >= 0.8, soft x <= 0.2", vec![line((0.8, 0.0), (0.0, -1.0)), line((0.2, 0.0), (0.0, 1.0))], 1),
    ];
    for (name, lines, n_obstacle) in cases {
        let s = solve_velocity_detailed(&lines, n_obstacle, 1.0, pref);
        let worst = lines.iter().map(|l| -l.signed_distance(s.velocity)).fold(0.0_f64, f64::max);
        println!(
            "{name:<30} v = ({:+.4}, {:+.4})  |v| = {:.4}  worst violation {:.4}  fallback {}",
            s.velocity.x,
            s.velocity.y,
            s.velocity.length(),
            worst,
            s.fallback
        );
    }
}
