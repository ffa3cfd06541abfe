use std::path::{Path, PathBuf};
use std::process::Command;

use ganlab_cli::registry::{self, EXPERIMENTS};
use ganlab_cli::{run, ExperimentConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn ganlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ganlab")).args(args).output().expect("binary runs")
}

fn config(name: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = (registry::find(name).unwrap().defaults)();
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn shipped_configs_are_the_defaults() {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), EXPERIMENTS.len());
    for exp in &EXPERIMENTS {
        let path = configs_dir().join(format!("{}.json", exp.name));
        let shipped = ExperimentConfig::load(&path).unwrap();
        assert_eq!(shipped, (exp.defaults)(), "{}", path.display());
    }
}

#[test]
fn orbit_run_writes_listed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config("xy-orbit", dir.path())).unwrap();
    assert_eq!(m.artifacts, [PathBuf::from("trajectory.csv"), PathBuf::from("phase.svg")]);
    assert!(m.passed(), "{:?}", m.checks);
    for a in &m.artifacts {
        assert!(dir.path().join(a).is_file());
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    for key in ["experiment", "config", "artifacts", "checks", "elapsed_seconds"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let check = &json["checks"][0];
    for key in ["name", "value", "threshold", "pass"] {
        assert!(check.get(key).is_some(), "{key}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for name in ["cost-curves", "label-smoothing-optimum", "mle-gradient"] {
        let ma = run(&config(name, a.path())).unwrap();
        run(&config(name, b.path())).unwrap();
        for f in &ma.artifacts {
            let read = |d: &Path| std::fs::read(d.join(f)).unwrap();
            assert_eq!(read(a.path()), read(b.path()), "{name}: {}", f.display());
        }
    }
}

#[test]
fn seeds_write_to_their_own_directories_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("ssl-feature-matching", dir.path());
    cfg.seeds = vec![7, 3];
    if let Some(game) = cfg.game.as_mut() {
        game.steps = 20;
    }
    let m = run(&cfg).unwrap();
    let firsts: Vec<String> = m
        .artifacts
        .iter()
        .filter_map(|p| p.components().next().map(|c| c.as_os_str().to_string_lossy().into_owned()))
        .collect();
    let seven = firsts.iter().position(|c| c == "seed-7").unwrap();
    let three = firsts.iter().position(|c| c == "seed-3").unwrap();
    assert!(seven < three);
    assert!(dir.path().join("seed-3/predictions.svg").is_file());
    assert!(dir.path().join("accuracy.csv").is_file());
}

#[test]
fn missing_sections_take_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{"schema_version": 1, "experiment": "xy-discrete-spiral", "out_dir": {:?}, "params": {{"eta": 0.2}}}}"#,
        dir.path()
    ))
    .unwrap();
    let resolved = cfg.resolved().unwrap();
    assert_eq!(resolved.params["eta"], 0.2);
    assert_eq!(resolved.params["steps"], 100);
    assert!(run(&cfg).unwrap().passed());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: String| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let out = dir.path().join("out");
    let unknown = write(
        "unknown.json",
        format!(r#"{{"schema_version": 1, "experiment": "xy-orbits", "out_dir": {out:?}}}"#),
    );
    let o = ganlab(&["run", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xy-discrete-spiral"));

    let typo = write(
        "typo.json",
        format!(r#"{{"schema_version": 1, "experiment": "xy-orbit", "out_dir": {out:?}, "params": {{"dtt": 0.1}}}}"#),
    );
    assert_eq!(ganlab(&["run", "--config", typo.to_str().unwrap()]).status.code(), Some(2));

    // A regular file where the output directory should be.
    let blocker = write("blocker", String::new());
    let blocked = write(
        "blocked.json",
        format!(
            r#"{{"schema_version": 1, "experiment": "xy-orbit", "out_dir": {:?}}}"#,
            blocker.join("sub")
        ),
    );
    let o = ganlab(&["run", "--config", blocked.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not writable"));

    assert_eq!(ganlab(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn exit_status_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("cost-curves.json");
    let out = dir.path().join("curves");
    let o = ganlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("manifest.json").is_file());

    // The reverse fit's mean range cannot be met on this target.
    let cfg = configs_dir().join("kl-directions.json");
    let out = dir.path().join("kl");
    let o = ganlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL reverse_abs_mean"));
}

#[test]
fn seed_flag_replaces_the_seed_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("mle-gradient.json");
    let out = dir.path().join("mle");
    let o = ganlab(&["run", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("monte_carlo.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn list_is_stable_and_complete() {
    let a = ganlab(&["list"]);
    let b = ganlab(&["list"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for exp in &EXPERIMENTS {
        assert!(text.lines().any(|l| l.starts_with(exp.name) && l.contains(exp.topic)));
    }
}
