use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vortexswim::lbm::snapshot::Snapshot;

const TINY: &str = "\
grid.cells_per_length = 10
grid.length_x = 6
grid.length_y = 2
flow.u_in = 0.02
flow.reynolds = 20
flow.diameter = 0.5
flow.center_x = 1.5
flow.center_y = 1
flow.spinup_ticks = 300
fish.stations = 21
env.half_period = 20
env.target_x = 4.5
env.target_y = 1.2
env.init_x_min = 2.5
env.init_x_max = 3
env.init_y = 1
env.capture_radius = 0.2
env.omega_x_min = 0.5
env.omega_x_max = 5.5
env.omega_y_min = 0.2
env.omega_y_max = 1.8
env.max_steps = 4
agent.hidden = 8
agent.layers = 1
agent.batch = 4
agent.capacity = 100
agent.target_sync = 5
run.checkpoint_every = 2
run.trajectory_every = 1
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortexswim"))
}

fn tiny(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.cfg");
    fs::write(&p, TINY).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", s(cfg), "--out", s(out)];
    args.extend_from_slice(extra);
    run(&args)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn missing_config_exits_with_usage_error() {
    let out = bin().args(["train", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn bad_key_exits_with_usage_error() {
    let out = bin().args(["train", "--set", "flow.nonsense=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstable_tau_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "validate",
        "--out",
        s(tmp.path()),
        "--set",
        "flow.tau=0.4",
        "--set",
        "validate.strouhal=false",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = fs::read_to_string(tmp.path().join("validate/report.csv")).unwrap();
    let stability = report.lines().find(|l| l.starts_with("stability")).unwrap();
    assert!(stability.ends_with("false"), "{stability}");
    assert!(tmp.path().join("validate/manifest.json").is_file());
}

#[test]
fn training_writes_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().join("run");
    assert!(train(&cfg, &out, &["--set", "run.episodes=5"]).status.success());
    let t = out.join("train");
    let log = fs::read_to_string(t.join("rewards.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "episode,steps,cumulative_reward,outcome");
    assert_eq!(lines.len(), 6);
    for f in ["config.txt", "resolved.txt", "manifest.json", "checkpoints/replay.vswr", "checkpoints/ep_000004.vswq"] {
        assert!(t.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_dir(t.join("trajectories")).unwrap().count(), 5);
    let manifest: String = fs::read_to_string(t.join("manifest.json")).unwrap();
    assert!(manifest.contains("rewards.csv") && manifest.contains("config_hash"));
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let go = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        assert!(train(&cfg, &out, &["--seed", seed, "--set", "run.episodes=4"]).status.success());
        out.join("train")
    };
    let (a, b, c) = (go("a", "3"), go("b", "3"), go("c", "4"));
    assert_eq!(fs::read(a.join("rewards.csv")).unwrap(), fs::read(b.join("rewards.csv")).unwrap());
    assert_eq!(files(&a.join("trajectories")), files(&b.join("trajectories")));
    assert_ne!(files(&a.join("trajectories")), files(&c.join("trajectories")));
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let whole = tmp.path().join("whole");
    assert!(train(&cfg, &whole, &["--set", "run.episodes=6"]).status.success());
    let split = tmp.path().join("split");
    assert!(train(&cfg, &split, &["--set", "run.episodes=4"]).status.success());
    assert!(train(&cfg, &split, &["--set", "run.episodes=6", "--resume"]).status.success());
    let (w, p) = (whole.join("train"), split.join("train"));
    assert_eq!(fs::read(w.join("rewards.csv")).unwrap(), fs::read(p.join("rewards.csv")).unwrap());
    assert_eq!(files(&w.join("trajectories")), files(&p.join("trajectories")));
    assert_eq!(files(&w.join("checkpoints")), files(&p.join("checkpoints")));
}

#[test]
fn resume_refuses_a_changed_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().join("run");
    assert!(train(&cfg, &out, &["--set", "run.episodes=2"]).status.success());
    let again = train(&cfg, &out, &["--set", "run.episodes=4", "--set", "agent.lr=0.01", "--resume"]);
    assert!(!again.status.success());
}

#[test]
fn eval_sweep_writes_one_file_per_start() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().join("run");
    assert!(train(&cfg, &out, &["--set", "run.episodes=2"]).status.success());
    assert!(run(&["eval", "--config", s(&cfg), "--out", s(&out), "--sweep", "2.5:3:3"]).status.success());
    let e = out.join("eval");
    for x in ["2.50", "2.75", "3.00"] {
        let traj = fs::read_to_string(e.join(format!("start_{x}.csv"))).unwrap();
        assert!(traj.lines().count() >= 2, "{x}");
    }
    let summary = fs::read_to_string(e.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "start_x,outcome,steps_to_outcome,final_distance");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2.5"));
}

#[test]
fn spinup_snapshots_follow_the_cadence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = tmp.path().join("run");
    let res = run(&[
        "fields",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--spinup",
        "--cadence",
        "100",
        "--set",
        "flow.spinup_ticks=1000",
    ]);
    assert!(res.status.success());
    let f = out.join("fields");
    let mut snaps: Vec<PathBuf> = fs::read_dir(&f)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "vswm"))
        .collect();
    snaps.sort();
    assert_eq!(snaps.len(), 10);
    let last = Snapshot::read(snaps.last().unwrap()).unwrap();
    assert_eq!((last.nx, last.ny), (60, 20));
    assert_eq!(last.t, 1000.0);
    assert!((last.dx - 0.1).abs() < 1e-15);
    assert!(last.polyline.is_none());
    assert_eq!(Snapshot::from_bytes(&last.to_bytes(), snaps.last().unwrap()).unwrap(), last);
    assert!(f.join("warm_start.vswf").is_file());

    // the saved wake restarts a fish run without spinning up again
    let warm = f.join("warm_start.vswf");
    let warm_set = format!("flow.warm_start={}", warm.display());
    let fish = run(&[
        "fields",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("fish")),
        "--cadence",
        "20",
        "--set",
        &warm_set,
        "--set",
        "run.field_ticks=60",
    ]);
    assert!(fish.status.success());
    let mut snaps: Vec<PathBuf> = fs::read_dir(tmp.path().join("fish/fields"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "vswm"))
        .collect();
    snaps.sort();
    assert_eq!(snaps.len(), 3);
    let snap = Snapshot::read(&snaps[0]).unwrap();
    let line = snap.polyline.unwrap();
    assert!(!line.is_empty());
    // polyline in body lengths, inside the 6 x 2 domain
    assert!(line.iter().all(|p| (0.0..6.0).contains(&p[0]) && (0.0..2.0).contains(&p[1])));
}
