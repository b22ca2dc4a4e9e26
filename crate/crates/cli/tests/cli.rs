use std::path::Path;
use std::process::{Command, Output};

fn rhmb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhmb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            for (name, bytes) in files(&p) {
                out.push((
                    format!("{}/{name}", p.file_name().unwrap().to_string_lossy()),
                    bytes,
                ));
            }
        } else {
            out.push((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

#[test]
fn run_output_does_not_depend_on_jobs() {
    // same directory both times: the metadata records it
    let dir = tempfile::tempdir().unwrap();
    let snapshot = |jobs: &str| {
        let out = rhmb(&[
            "run",
            "--preset",
            "1a",
            "--horizon",
            "2000",
            "--seed",
            "9",
            "--realizations",
            "3",
            "--trajectories",
            "2",
            "--jobs",
            jobs,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        files(dir.path())
    };
    let single = snapshot("1");
    assert_eq!(single.len(), 3 * 2 * 3 + 2);
    assert_eq!(single, snapshot("3"));
}

#[test]
fn run_writes_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = rhmb(&[
        "run",
        "--preset",
        "2b",
        "--horizon",
        "300",
        "--realizations",
        "1",
        "--trajectories",
        "1",
        "--agents",
        "hucrl,flat_ucrl",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("t,agent,mean_regret,stderr,n_runs\n"));
    let meta: String = std::fs::read_to_string(dir.path().join("metadata.json")).unwrap();
    assert!(meta.contains("\"rho_star\""));
}

#[test]
fn oracle_prints_stationary_law_of_preset_1a() {
    let out = rhmb(&["oracle", "--preset", "1a", "--seed", "42"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "mu_S=(0.5556, 0.4444)"), "{text}");
    assert!(text.contains("rho*="));
    assert!(text.contains("T_M="));
}

#[test]
fn validate_rejects_small_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let mut cfg = rhmb::harness::ExperimentConfig::preset("1a");
    cfg.alpha = 2.0;
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let out = rhmb(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[config]:"), "{err}");
    assert!(err.contains("alpha > 3"), "{err}");
}

#[test]
fn validate_accepts_presets() {
    for p in ["1a", "1b", "2a", "2b"] {
        let out = rhmb(&["validate", "--preset", p]);
        assert!(out.status.success(), "{p}: {}", stderr(&out));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
    }
}

#[test]
fn unknown_preset_is_reported() {
    let out = rhmb(&["validate", "--preset", "3c"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).starts_with("error[unknown_preset]:"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let out = rhmb(&["run", "--horizon", "many"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]:"), "{err}");
}

#[test]
fn quick_selftest_passes() {
    let out = rhmb(&["selftest", "--quick"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS")).count(),
        5,
        "{text}"
    );
}
