//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default (see [`ScenarioConfig::default`]). Environment variables named
//! `CROWDNAV_<KEY>` (key upper-cased) override file values, and command-line
//! flags override both.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::simulation::{PolicyChoice, ScenarioConfig};

pub const ENV_PREFIX: &str = "CROWDNAV_";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("{}: cannot parse `{value}` for `{key}`", location(*.line))]
    BadValue { line: usize, key: String, value: String },
    #[error("{}: `{key}` {message}", location(*.line))]
    Constraint { line: usize, key: String, message: String },
}

fn location(line: usize) -> String {
    if line == 0 {
        "override".to_string()
    } else {
        format!("line {line}")
    }
}

/// All recognised keys, in manifest order.
pub const KEYS: &[&str] = &[
    "world_w",
    "world_h",
    "n_agents",
    "n_obstacles",
    "obstacle_min_size",
    "obstacle_max_size",
    "radius",
    "max_speed",
    "neighbor_dist",
    "time_horizon",
    "time_horizon_obst",
    "cell_size",
    "frames_per_episode",
    "n_episodes",
    "min_traversable",
    "rng_seed",
    "policy",
    "theta",
    "goal_min_dist_frac",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() })
}

fn finite(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(line, key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() })
    }
}

/// Set one key. `line` is used in diagnostics; 0 marks an override.
pub fn set_key(cfg: &mut ScenarioConfig, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
    let value = value.trim();
    match key {
        "world_w" => cfg.world_w = finite(line, key, value)?,
        "world_h" => cfg.world_h = finite(line, key, value)?,
        "n_agents" => cfg.n_agents = parse(line, key, value)?,
        "n_obstacles" => cfg.n_obstacles = parse(line, key, value)?,
        "obstacle_min_size" => cfg.obstacle_min_size = finite(line, key, value)?,
        "obstacle_max_size" => cfg.obstacle_max_size = finite(line, key, value)?,
        "radius" => cfg.radius = finite(line, key, value)?,
        "max_speed" => cfg.max_speed = finite(line, key, value)?,
        "neighbor_dist" => cfg.neighbor_dist = finite(line, key, value)?,
        "time_horizon" => cfg.time_horizon = finite(line, key, value)?,
        "time_horizon_obst" => cfg.time_horizon_obst = finite(line, key, value)?,
        "cell_size" => cfg.cell_size = finite(line, key, value)?,
        "frames_per_episode" => cfg.frames_per_episode = parse(line, key, value)?,
        "n_episodes" => cfg.n_episodes = parse(line, key, value)?,
        "min_traversable" => cfg.min_traversable = finite(line, key, value)?,
        "rng_seed" => cfg.rng_seed = parse(line, key, value)?,
        "policy" => {
            cfg.policy = value
                .parse::<PolicyChoice>()
                .map_err(|_| ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() })?
        }
        "theta" => cfg.theta = finite(line, key, value)?,
        "goal_min_dist_frac" => cfg.goal_min_dist_frac = finite(line, key, value)?,
        _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
    }
    check_key(cfg, line, key)
}

fn check_key(cfg: &ScenarioConfig, line: usize, key: &str) -> Result<(), ConfigError> {
    let fail = |message: &str| Err(ConfigError::Constraint { line, key: key.to_string(), message: message.to_string() });
    match key {
        "world_w" if cfg.world_w <= 0.0 => fail("must be positive"),
        "world_h" if cfg.world_h <= 0.0 => fail("must be positive"),
        "n_agents" if cfg.n_agents < 1 => fail("must be at least 1"),
        "frames_per_episode" if cfg.frames_per_episode < 1 => fail("must be at least 1"),
        "min_traversable" if !(cfg.min_traversable > 0.0 && cfg.min_traversable <= 1.0) => fail("must be in (0, 1]"),
        "radius" | "max_speed" | "cell_size" | "neighbor_dist" | "time_horizon" | "time_horizon_obst"
        | "obstacle_min_size" | "obstacle_max_size"
            if value_of(cfg, key) <= 0.0 =>
        {
            fail("must be positive")
        }
        "theta" if !(cfg.theta > 0.0 && cfg.theta < 1.0) => fail("must be in (0, 1)"),
        "goal_min_dist_frac" if !(0.0..1.0).contains(&cfg.goal_min_dist_frac) => fail("must be in [0, 1)"),
        _ => Ok(()),
    }
}

fn value_of(cfg: &ScenarioConfig, key: &str) -> f64 {
    match key {
        "radius" => cfg.radius,
        "max_speed" => cfg.max_speed,
        "cell_size" => cfg.cell_size,
        "neighbor_dist" => cfg.neighbor_dist,
        "time_horizon" => cfg.time_horizon,
        "time_horizon_obst" => cfg.time_horizon_obst,
        "obstacle_min_size" => cfg.obstacle_min_size,
        "obstacle_max_size" => cfg.obstacle_max_size,
        _ => f64::NAN,
    }
}

/// Parse config text on top of the defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        set_key(&mut cfg, i + 1, key.trim(), value)?;
    }
    cross_check(&cfg)?;
    Ok(cfg)
}

/// Constraints that involve more than one key.
pub fn cross_check(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    if cfg.obstacle_min_size > cfg.obstacle_max_size {
        return Err(ConfigError::Constraint {
            line: 0,
            key: "obstacle_min_size".to_string(),
            message: "must not exceed obstacle_max_size".to_string(),
        });
    }
    if cfg.cell_size > cfg.world_w.min(cfg.world_h) {
        return Err(ConfigError::Constraint {
            line: 0,
            key: "cell_size".to_string(),
            message: "must not exceed the world size".to_string(),
        });
    }
    Ok(())
}

/// Apply `CROWDNAV_<KEY>` values from `vars`.
pub fn apply_env<I, K, V>(cfg: &mut ScenarioConfig, vars: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut found: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let key = k.as_ref().strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
            KEYS.contains(&key.as_str()).then(|| (key, v.as_ref().to_string()))
        })
        .collect();
    found.sort();
    for (key, value) in found {
        set_key(cfg, 0, &key, &value)?;
    }
    cross_check(cfg)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Serialise every key so that `parse_config(to_config_text(c)) == c`.
pub fn to_config_text(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    for key in KEYS {
        let value = match *key {
            "world_w" => fmt_f64(cfg.world_w),
            "world_h" => fmt_f64(cfg.world_h),
            "n_agents" => cfg.n_agents.to_string(),
            "n_obstacles" => cfg.n_obstacles.to_string(),
            "obstacle_min_size" => fmt_f64(cfg.obstacle_min_size),
            "obstacle_max_size" => fmt_f64(cfg.obstacle_max_size),
            "radius" => fmt_f64(cfg.radius),
            "max_speed" => fmt_f64(cfg.max_speed),
            "neighbor_dist" => fmt_f64(cfg.neighbor_dist),
            "time_horizon" => fmt_f64(cfg.time_horizon),
            "time_horizon_obst" => fmt_f64(cfg.time_horizon_obst),
            "cell_size" => fmt_f64(cfg.cell_size),
            "frames_per_episode" => cfg.frames_per_episode.to_string(),
            "n_episodes" => cfg.n_episodes.to_string(),
            "min_traversable" => fmt_f64(cfg.min_traversable),
            "rng_seed" => cfg.rng_seed.to_string(),
            "policy" => cfg.policy.name().to_string(),
            "theta" => fmt_f64(cfg.theta),
            "goal_min_dist_frac" => fmt_f64(cfg.goal_min_dist_frac),
            _ => unreachable!(),
        };
        let _ = writeln!(out, "{key} = {value}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
        assert_eq!(parse_config("# comment\n\n").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn ten_agent_variant() {
        let cfg = parse_config("n_agents = 10").unwrap();
        assert_eq!(cfg.n_agents, 10);
        assert_eq!(cfg.n_obstacles, 3);
    }

    #[test]
    fn out_of_range_names_key_and_line() {
        let err = parse_config("n_agents = 4\nmin_traversable = 1.5\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Constraint { line: 2, key: "min_traversable".into(), message: "must be in (0, 1]".into() }
        );
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn unknown_and_unparsable() {
        assert!(matches!(parse_config("speed = 1"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(parse_config("\nn_agents = four"), Err(ConfigError::BadValue { line: 2, .. })));
        assert!(matches!(parse_config("n_agents 4"), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn round_trip_through_text() {
        let cfg = ScenarioConfig { n_agents: 10, rng_seed: u64::MAX, theta: 0.1 + 0.2, ..ScenarioConfig::default() };
        assert_eq!(parse_config(&to_config_text(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ScenarioConfig::default();
        apply_env(&mut cfg, [("CROWDNAV_N_AGENTS", "7"), ("HOME", "/root"), ("CROWDNAV_POLICY", "topo")]).unwrap();
        assert_eq!(cfg.n_agents, 7);
        assert_eq!(cfg.policy.name(), "topo");
    }
}
