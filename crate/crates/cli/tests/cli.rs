use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread::sleep;
use std::time::Duration;

fn covroute(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covroute"))
        .args(args)
        .current_dir(dir)
        .env_remove("COVERAGE_ROUTER_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_SWEEP: &str = "[sim]\nduration = 300\n[sweep]\nalphas = [0.0, 0.5, 1.0]\nlambdas = [0.5, 1.0, 2.0]\nreplicates = 1\n";

#[test]
fn stats_for_grid_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = covroute(dir.path(), &["net", "stats", "--preset", "grid5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (key, val) in [
        ("nodes", "25"),
        ("edges", "40"),
        ("mean_degree", "3.2"),
        ("diameter", "800"),
    ] {
        assert!(
            text.lines()
                .any(|l| l.split_whitespace().collect::<Vec<_>>() == [key, val]),
            "{key} in\n{text}"
        );
    }
}

#[test]
fn generated_file_has_same_stats() {
    let dir = tempfile::tempdir().unwrap();
    assert!(covroute(
        dir.path(),
        &["net", "generate", "--preset", "grid10", "--out", "g.json"]
    )
    .status
    .success());
    let from_file = covroute(dir.path(), &["net", "stats", "g.json"]);
    let in_memory = covroute(dir.path(), &["net", "stats", "--preset", "grid10"]);
    assert_eq!(stdout(&from_file), stdout(&in_memory));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        covroute(dir.path(), &["net", "generate", "--out", "x.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        covroute(dir.path(), &["net", "stats"]).status.code(),
        Some(2)
    );
    assert_eq!(
        covroute(dir.path(), &["net", "stats", "--preset", "grid7"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        covroute(
            dir.path(),
            &["sim", "run", "--alpha", "1.5", "--out", "t.csv"]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn zero_rate_writes_empty_log_and_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let o = covroute(
        dir.path(),
        &[
            "sim",
            "run",
            "--lambda",
            "0",
            "--duration",
            "100",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let log = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(
        log.trim(),
        "vehicle_id,origin,dest,spawn_time,arrival_time,free_flow_time"
    );
}

#[test]
fn same_seed_same_trip_log() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "sim",
            "run",
            "--lambda",
            "2",
            "--duration",
            "400",
            "--seed",
            "12",
            "--out",
            out,
        ]
    };
    assert!(covroute(dir.path(), &args("a.csv")).status.success());
    assert!(covroute(dir.path(), &args("b.csv")).status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(a.len() > 1000);
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn flags_override_config_and_land_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "[sim]\nalpha = 0.3\nduration = 120\nseed = 4\n",
    )
    .unwrap();
    let o = covroute(
        dir.path(),
        &[
            "sim", "run", "--config", "c.toml", "--alpha", "0.9", "--out", "t.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&dir.path().join("t.csv.manifest.json"));
    assert_eq!(m["config"]["sim"]["alpha"], 0.9);
    assert_eq!(m["config"]["sim"]["seed"], 4);
    assert_eq!(m["network_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_covroute"));
        cmd.args(["sim", "run", "--duration", "60", "--out", "t.csv"])
            .args(extra)
            .current_dir(dir.path());
        match env {
            Some(v) => cmd.env("COVERAGE_ROUTER_SEED", v),
            None => cmd.env_remove("COVERAGE_ROUTER_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        manifest(&dir.path().join("t.csv.manifest.json"))["config"]["sim"]["seed"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(run(&[], Some("31")), 31);
    assert_eq!(run(&["--seed", "5"], Some("31")), 5);
    assert_eq!(run(&[], None), 1);
}

#[test]
fn sweep_writes_all_artifacts_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL_SWEEP).unwrap();
    let o = covroute(
        dir.path(),
        &["sweep", "--config", "c.toml", "--jobs", "2", "--out", "s1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("s1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["heatmap.txt", "manifest.json", "sweep.csv"]);
    let csv = fs::read_to_string(dir.path().join("s1/sweep.csv")).unwrap();
    assert!(csv.starts_with("topology,router,alpha,lambda,replicate,seed,mean_travel_time,mean_delay,mean_delay_capped,completion_rate,congested,status\n"));
    // 3 alphas + sp + msp, 3 rates, 1 replicate
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
    let heat = fs::read_to_string(dir.path().join("s1/heatmap.txt")).unwrap();
    assert_eq!(heat.lines().count(), 4);
    assert!(heat.lines().all(|l| l.split(',').count() == 4));

    // the manifest alone reproduces the run
    let m = manifest(&dir.path().join("s1/manifest.json"));
    fs::write(
        dir.path().join("replay.toml"),
        toml::to_string(&m["config"]).unwrap(),
    )
    .unwrap();
    assert!(covroute(
        dir.path(),
        &["sweep", "--config", "replay.toml", "--out", "s2"]
    )
    .status
    .success());
    assert_eq!(
        csv,
        fs::read_to_string(dir.path().join("s2/sweep.csv")).unwrap()
    );
    assert_eq!(
        heat,
        fs::read_to_string(dir.path().join("s2/heatmap.txt")).unwrap()
    );

    // never overwrite
    assert_eq!(
        covroute(dir.path(), &["sweep", "--config", "c.toml", "--out", "s1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_network_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let o = covroute(dir.path(), &["sweep", "--net", "nope.json", "--out", "s"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
    assert!(!dir.path().join("s").exists());
}

#[test]
fn interrupted_sweep_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_covroute"))
        .args(["sweep", "--replicates", "3", "--out", "big"])
        .current_dir(dir.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    sleep(Duration::from_millis(700));
    assert!(
        child.try_wait().unwrap().is_none(),
        "sweep finished before it could be interrupted"
    );
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(!dir.path().join("big").exists());
}

#[test]
fn compare_reports_gain_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL_SWEEP).unwrap();
    let o = covroute(
        dir.path(),
        &[
            "compare", "--config", "c.toml", "--alpha", "0.9", "--out", "cmp",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(rows[0], ["router", "alpha", "lambda_hat", "gain_vs_sp"]);
    assert!(rows.iter().any(|r| r[0] == "sp" && r[1] == "NA"));
    assert!(rows.iter().any(|r| r[0] == "coverage" && r[1] == "0.9"));
    assert_eq!(
        fs::read_to_string(dir.path().join("cmp/compare.txt")).unwrap(),
        text
    );
}

#[test]
fn defaults_are_printable_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let o = covroute(dir.path(), &["--print-defaults"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.contains("eta_crit = 0.2")
            && text.contains("sigma = 10.0")
            && text.contains("replicates = 3")
    );
    fs::write(dir.path().join("d.toml"), &text).unwrap();
    let o = covroute(
        dir.path(),
        &[
            "sim",
            "run",
            "--config",
            "d.toml",
            "--duration",
            "60",
            "--out",
            "t.csv",
        ],
    );
    assert!(o.status.success());
}
