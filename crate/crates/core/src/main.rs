use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crowdnav::config::{apply_env, parse_config, set_key, ConfigError};
use crowdnav::run::{cmd_metrics, cmd_render, cmd_simulate, manifest_theta, RenderOptions};
use crowdnav::{ScenarioConfig, Vec2};

#[derive(Parser)]
#[command(name = "crowdnav", version, about = "Crowd simulation with plain and skeleton-guided ORCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the paired benchmark and write logs and reports.
    Simulate {
        /// Flat `key = value` config file; CROWDNAV_<KEY> env vars and flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["orca", "topo", "both"])]
        policy: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute reports from a run directory or a directory of logs.
    Metrics {
        dir: PathBuf,
        /// Frozen threshold as a fraction of max speed (defaults to the manifest value, else 0.3).
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Render a scenario file or an episode log to SVG.
    Render {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario file that supplies the skeleton graph for a log input.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Plan start for a scenario input, as `x,y`.
        #[arg(long, value_parser = parse_point, requires = "goal")]
        start: Option<Vec2>,
        /// Plan goal for a scenario input, as `x,y`.
        #[arg(long, value_parser = parse_point, requires = "start")]
        goal: Option<Vec2>,
        /// Agent positions are taken from this frame of a log.
        #[arg(long)]
        frame: Option<usize>,
        /// Draw each agent's plan to its first goal (log input with --scenario).
        #[arg(long)]
        plans: bool,
        /// Draw trajectory traces (log input).
        #[arg(long)]
        trajectories: bool,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_point(s: &str) -> Result<Vec2, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad x in `{s}`"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad y in `{s}`"))?;
    Ok(Vec2::new(x, y))
}

fn resolve_config(
    config: Option<PathBuf>,
    flags: &[(&str, Option<String>)],
) -> Result<ScenarioConfig, String> {
    let mut cfg = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    apply_env(&mut cfg, std::env::vars()).map_err(|e| format!("environment: {e}"))?;
    for (key, value) in flags {
        if let Some(v) = value {
            set_key(&mut cfg, 0, key, v).map_err(|e: ConfigError| format!("--{key}: {e}"))?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate { config, policy, episodes, agents, seed, jobs, out } => {
            let flags = [
                ("policy", policy),
                ("n_episodes", episodes.map(|v| v.to_string())),
                ("n_agents", agents.map(|v| v.to_string())),
                ("rng_seed", seed.map(|v| v.to_string())),
            ];
            let cfg = resolve_config(config, &flags)?;
            let summary = cmd_simulate(&cfg, &out, jobs).map_err(|e| e.to_string())?;
            if !summary.skipped.is_empty() {
                eprintln!("skipped infeasible episodes: {:?}", summary.skipped);
            }
            print!("{}", summary.report_text);
            eprintln!("wrote {}", summary.out_dir.display());
        }
        Command::Metrics { dir, theta } => {
            let theta = match theta {
                Some(t) => t,
                None => manifest_theta(&dir).map_err(|e| e.to_string())?.unwrap_or(ScenarioConfig::default().theta),
            };
            if !(theta > 0.0 && theta < 1.0) {
                return Err("--theta must be in (0, 1)".into());
            }
            let (text, kv) = cmd_metrics(&dir, theta).map_err(|e| e.to_string())?;
            print!("{text}");
            print!("{kv}");
        }
        Command::Render { input, out, scenario, start, goal, frame, plans, trajectories } => {
            let opts = RenderOptions { scenario, plan: start.zip(goal), frame, plans_from_log: plans, trajectories };
            cmd_render(&input, &out, &opts).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
