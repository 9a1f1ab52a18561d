use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crowdnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdnav"))
        .args(args)
        .env_remove("CROWDNAV_N_AGENTS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TWO_FRAME_LOG: &str = "\
# crowdnav episode log v1
# episode 0
# policy orca
# seed 1
# agents 2
# frames 2
# world 10.000000 10.000000
# radius 0.300000
# max_speed 0.200000
# goal_radius 0.600000
# start 0 1.000000 1.000000
# start 1 9.000000 9.000000
# goal 0 0 1.400000 1.000000
# goal 1 1 5.000000 5.000000
# goal 2 0 8.000000 1.000000
# reach 0 1 0
0 0 0 1.200000 1.000000 0.200000 0.000000 0 0
0 0 1 9.000000 9.000000 0.000000 0.000000 1 0
0 1 0 1.400000 1.000000 0.200000 0.000000 0 0
0 1 1 9.000000 9.000000 0.000000 0.000000 1 0
";

#[test]
fn simulate_then_metrics_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = crowdnav(&["simulate", "--policy", "topo", "--episodes", "1", "--seed", "7", "--jobs", "1", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("manifest.txt").is_file());
    assert!(out.join("logs/episode_0000_topo.log").is_file());
    assert!(!out.join("logs/episode_0000_orca.log").exists());
    assert!(out.join("scenarios/episode_0000.txt").is_file());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("rng_seed = 7"));
    assert!(manifest.contains("policy = topo"));

    let m = crowdnav(&["metrics", path(&out)]);
    assert!(m.status.success(), "{}", stderr(&m));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    let kv = fs::read_to_string(out.join("report.kv")).unwrap();
    assert_eq!(stdout(&m), format!("{report}{kv}"));
    assert!(kv.contains("topo.avg_velocity_per_path = "));
}

#[test]
fn metrics_on_hand_written_log() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("episode_0000_orca.log"), TWO_FRAME_LOG).unwrap();
    let o = crowdnav(&["metrics", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    // Agent 0: path 0 covers 0.4 m in 2 frames; agent 1 never moves.
    assert!(text.contains("orca.avg_velocity_per_path = 0.100000"), "{text}");
    assert!(text.contains("orca.avg_total_paths = 2.000000"), "{text}");
    assert!(text.contains("orca.pct_stuck_agents = 50.000000"), "{text}");
}

#[test]
fn malformed_log_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = TWO_FRAME_LOG.replace("0 1 0 1.400000", "0 1 0 oops");
    fs::write(dir.path().join("episode_0000_orca.log"), bad).unwrap();
    let o = crowdnav(&["metrics", path(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 19"), "{}", stderr(&o));
}

#[test]
fn metrics_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = crowdnav(&["metrics", path(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no episode logs"), "{}", stderr(&o));
}

#[test]
fn render_scenario_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = crowdnav(&["simulate", "--episodes", "1", "--agents", "2", "--seed", "3", "--jobs", "1", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scenario = out.join("scenarios/episode_0000.txt");

    let bare = dir.path().join("bare.svg");
    let o = crowdnav(&["render", path(&scenario), "--out", path(&bare)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(&bare).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("class=\"plan\""));

    let planned = dir.path().join("plan.svg");
    let o = crowdnav(&["render", path(&scenario), "--out", path(&planned), "--start", "1.5,1.5", "--goal", "18.5,18.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&planned).unwrap().contains("class=\"plan\""));

    let traced = dir.path().join("log.svg");
    let log = out.join("logs/episode_0000_topo.log");
    let o = crowdnav(&[
        "render", path(&log), "--out", path(&traced), "--scenario", path(&scenario), "--plans", "--trajectories", "--frame", "10",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&traced).unwrap().contains("class=\"plan\""));

    let empty_log = dir.path().join("empty.log");
    let header: String = TWO_FRAME_LOG.lines().filter(|l| l.starts_with('#') && !l.starts_with("# reach")).map(|l| format!("{l}\n")).collect();
    fs::write(&empty_log, header.replace("# frames 2", "# frames 0")).unwrap();
    let o = crowdnav(&["render", path(&empty_log), "--out", path(&dir.path().join("empty.svg"))]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n_agents = 4\nmin_traversable = 1.5\n").unwrap();
    let o = crowdnav(&["simulate", "--config", path(&cfg), "--out", path(&dir.path().join("x"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = crowdnav(&["simulate", "--config", path(&cfg), "--out", path(&dir.path().join("x"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));

    let o = crowdnav(&["simulate", "--policy", "fast", "--out", path(&dir.path().join("x"))]);
    assert!(!o.status.success());
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, "# short run\nn_agents = 3\nframes_per_episode = 20\nn_episodes = 5\n").unwrap();
    let out = dir.path().join("run");
    let o = crowdnav(&["simulate", "--config", path(&cfg), "--episodes", "2", "--jobs", "2", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("n_agents = 3"));
    assert!(manifest.contains("n_episodes = 2"));
    assert_eq!(fs::read_dir(out.join("logs")).unwrap().count(), 4);
}
