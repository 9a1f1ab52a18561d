//! Deterministic 2D crowd simulation.
//!
//! Agents move under ORCA (optimal reciprocal collision avoidance). The
//! guided policy additionally plans a waypoint path over a skeleton graph of
//! the free space, so that agents steer around static obstacles instead of
//! stalling against them. The [`metrics`] module scores episodes by how often
//! agents freeze.
//!
//! Module map:
//!
//! - [`geometry`]: vectors, rectangles, occupancy grids, raycasts.
//! - [`orca`]: half-plane constraints and the velocity solver.
//! - [`topology`]: grid thinning and skeleton graph extraction.
//! - [`guidance`]: per-agent augmented graphs and waypoint following.
//! - [`simulation`]: scenarios, episodes, benchmark runs, episode logs.
//! - [`metrics`]: frozen-frame classification and the five statistics.
//! - [`config`], [`render`], [`run`]: configuration files, SVG output and
//!   the command drivers used by the `crowdnav` binary.

pub mod config;
pub mod geometry;
pub mod guidance;
pub mod metrics;
pub mod orca;
pub mod render;
pub mod run;
pub mod simulation;
pub mod topology;

pub use geometry::{OccupancyGrid, RectObstacle, Vec2};
pub use orca::{Agent, OrcaLine};
pub use simulation::{Policy, ScenarioConfig};
