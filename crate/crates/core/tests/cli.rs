use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

use cspi::cli::main_with_args;

const OSCILLATOR: &str = r#"
[system]
operator = ["0.5 p0^2", "0.5 q0^2"]

[endpoints]
final = [[0.3, 1.0]]
initial = [[-0.5, 0.2]]

[lattice]
slices = 16
total_time = 0.2

[convergence]
slices = [2, 4, 8, 16]

[wiener]
nu = [5.0]
slices = 8
samples = 2000
seed = 3
"#;

const GAUGE: &str = r#"
[system]
constrained = 1
reduced = 1
operator = ["0.5 p1^2", "0.5 q1^2"]

[endpoints]
final = [[0.0, 0.2], [0.3, 1.0]]
initial = [[0.0, -0.4], [-0.5, 0.2]]

[lattice]
total_time = 0.2
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path) -> i32 {
    main_with_args([
        "cspi",
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ])
}

fn result(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap()
}

#[test]
fn overlap_of_a_label_with_itself_is_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &OSCILLATOR.replace("[-0.5, 0.2]", "[0.3, 1.0]"));
    assert_eq!(run("overlap", &cfg, dir.path()), 0);
    let doc = result(dir.path());
    assert_eq!(doc["computation"], "overlap");
    assert!((doc["result"]["amplitude_re"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(doc["result"]["amplitude_im"].as_f64().unwrap(), 0.0);
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["computation", "config", "result", "seed", "timestamp", "version"]);
}

#[test]
fn convergence_writes_a_decreasing_error_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), OSCILLATOR);
    assert_eq!(run("convergence", &cfg, dir.path()), 0);
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "slices,epsilon,amplitude_re,amplitude_im,error");
    let errors: Vec<f64> = lines.map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(errors.len(), 4);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let slope = result(dir.path())["result"]["slope"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&slope));
}

#[test]
fn reruns_are_identical_apart_from_the_timestamp() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), OSCILLATOR);
    for sub in ["lattice", "symbols", "wiener"] {
        let (a, b) = (dir.path().join(format!("{sub}-a")), dir.path().join(format!("{sub}-b")));
        assert_eq!(run(sub, &cfg, &a), 0);
        assert_eq!(run(sub, &cfg, &b), 0);
        let strip = |p: &Path| {
            let mut v = result(p);
            v.as_object_mut().unwrap().remove("timestamp");
            v
        };
        assert_eq!(strip(&a), strip(&b), "{sub}");
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name != "result.json" {
                assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
            }
        }
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), OSCILLATOR);
    let out = dir.path().join("w");
    let code = main_with_args([
        "cspi",
        "wiener",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
        "--quiet",
    ]);
    assert_eq!(code, 0);
    let doc = result(&out);
    assert_eq!(doc["seed"], 99);
    assert_eq!(doc["config"]["wiener"]["seed"], 99);
}

#[test]
fn constrained_routes_agree() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), GAUGE);
    assert_eq!(run("constraint-equivalence", &cfg, dir.path()), 0);
    let doc = result(dir.path());
    let devs = doc["result"]["deviations"].as_object().unwrap();
    assert!(!devs.is_empty());
    for (pair, d) in devs {
        assert!(d.as_f64().unwrap() < 1e-4, "{pair}: {d}");
    }
    assert_eq!(doc["result"]["ladder_monotone"], true);
    assert!(dir.path().join("equivalence_ladder.csv").exists());
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run("overlap", &dir.path().join("missing.toml"), &out), 1);

    let cfg = write_config(dir.path(), "[system\n");
    assert_eq!(run("overlap", &cfg, &out), 2);
    let cfg = write_config(dir.path(), &OSCILLATOR.replace("0.5 q0^2", "0.5 x0^2"));
    assert_eq!(run("overlap", &cfg, &out), 2);
    let cfg = write_config(dir.path(), &OSCILLATOR.replace("[system]", "[system]\nhbar = -1.0"));
    assert_eq!(run("overlap", &cfg, &out), 3);
    let cfg = write_config(dir.path(), &format!("{OSCILLATOR}\n[unknown]\nx = 1\n"));
    assert_eq!(run("overlap", &cfg, &out), 2);
    assert!(!out.join("result.json").exists());
}
