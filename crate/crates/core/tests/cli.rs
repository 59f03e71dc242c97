//! End-to-end tests of the `robust-ocp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cmd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_robust-ocp"));
    c.env_remove("ROBUST_OCP_OUT_DIR");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_summaries_steps_and_aggregate() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "updater = \"nr-aci\"\nepsilon_true = 0.1\nhorizon = 2000\nseeds = \"1-2\"\n");
    let out = dir.path().join("out");
    let o = cmd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    for s in [1, 2] {
        let summary: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join(format!("seed-{s}/summary.json"))).unwrap())
                .unwrap();
        assert_eq!(summary["seed"], s);
        assert_eq!(summary["updater"], "nr-aci");
        assert_eq!(summary["horizon"], 2000);
        assert!(summary["theory_checks"]["threshold_bounds"]["passed"].as_bool().unwrap());

        let steps = std::fs::read_to_string(out.join(format!("seed-{s}/steps.csv"))).unwrap();
        let mut lines = steps.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,tau,set_size,covered_clean,covered_noisy,miscover_prob,pinball,robust_pinball,grad"
        );
        assert_eq!(lines.count(), 2000);
    }
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let rows: Vec<&str> = agg.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("mean,"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), agg);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "horizon = 500\nseeds = [1]\n");
    let out = dir.path().join("out");
    let o = cmd()
        .args(["run", "--seed", "4,9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("seed-4/summary.json").exists());
    assert!(out.join("seed-9/summary.json").exists());
    assert!(!out.join("seed-1").exists());
}

#[test]
fn output_directory_precedence() {
    let dir = TempDir::new().unwrap();
    let from_env = dir.path().join("env");
    let from_cfg = dir.path().join("cfg");
    let from_flag = dir.path().join("flag");

    let plain = config(&dir, "horizon = 200\n");
    let o = cmd().args(["run", "--config"]).arg(&plain).env("ROBUST_OCP_OUT_DIR", &from_env).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_env.join("aggregate.csv").exists());

    let with_dir = config(&dir, &format!("horizon = 200\noutput_dir = {:?}\n", from_cfg.to_str().unwrap()));
    let o = cmd().args(["run", "--config"]).arg(&with_dir).env("ROBUST_OCP_OUT_DIR", &from_env).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_cfg.join("aggregate.csv").exists());

    let o = cmd()
        .args(["run", "--config"])
        .arg(&with_dir)
        .arg("--out")
        .arg(&from_flag)
        .env("ROBUST_OCP_OUT_DIR", &from_env)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_flag.join("aggregate.csv").exists());
}

#[test]
fn file_stream_run_resolves_path_relative_to_config() {
    let dir = TempDir::new().unwrap();
    std::fs::copy(fixture("stream.csv"), dir.path().join("stream.csv")).unwrap();
    let cfg = config(&dir, "stream = \"file\"\nstream_path = \"stream.csv\"\nupdater = \"nr-saocp\"\nepsilon_true = 0.1\n");
    let out = dir.path().join("out");
    let o = cmd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("seed-1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["horizon"], 5);
    assert!(summary["ex_err"].is_null());
}

#[test]
fn malformed_stream_reports_line_and_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        &format!("stream = \"file\"\nstream_path = {:?}\n", fixture("bad_sum.jsonl").to_str().unwrap()),
    );
    let o = cmd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "horizon = 100\nlearning_rate = 0.1\n");
    let o = cmd().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "updater = \"nr-aci\"\nepsilon_true = 0.1\nhorizon = 3000\nseeds = [1, 2]\nverify_cases = 100\n");
    let out = dir.path().join("out");
    let o = cmd().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.contains("PASS")), "{stdout}");
    assert!(stdout.contains("unbiasedness: 400/400"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["cases"], 100);
}

#[test]
fn sweep_writes_table() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "horizon = 1000\nseeds = \"1-2\"\nsweep_updaters = [\"aci\", \"nr-aci\"]\nsweep_schedules = [\"constant\"]\nsweep_epsilons = [0.1]\nsweep_alphas = [0.1]\n",
    );
    let out = dir.path().join("out");
    let o = cmd().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "schedule,epsilon,aci_alpha0.1_covgap_pct,aci_alpha0.1_size,nr-aci_alpha0.1_covgap_pct,nr-aci_alpha0.1_size"
    );
    assert!(lines[1].starts_with("constant,0.1,"));
    assert_eq!(lines.len(), 2);
}
