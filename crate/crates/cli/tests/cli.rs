use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lcfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcfuse")).args(args).output().expect("binary runs")
}

fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn simulate(dir: &Path) {
    let o = lcfuse(&["simulate", "--config", s(&small_config()), "--out", s(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcfuse(&["simulate", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn config_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "version = 1\n").unwrap();
    let o = lcfuse(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("d"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "version = 1\nseed = 3\n[fusion]\nuse_5g = true\n").unwrap();
    let o = lcfuse(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("d"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn print_defaults_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcfuse(&["config", "print-defaults", "--seed", "11"]);
    assert_eq!(code(&o), 0);
    let cfg = dir.path().join("defaults.toml");
    std::fs::write(&cfg, &o.stdout).unwrap();
    let parsed = lcfuse_core::config::ScenarioConfig::load(&cfg).unwrap();
    assert_eq!(parsed, lcfuse_core::config::ScenarioConfig::with_seed(11));
}

#[test]
fn fused_without_5g_solution_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data);
    let out = dir.path().join("run");
    let o = lcfuse(&["run", "--config", s(&small_config()), "--mode", "fused", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("5g-sa"));
}

#[test]
fn missing_data_directory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcfuse(&["run", "--seed", "1", "--mode", "ins-sa", "--data", s(&dir.path().join("nope")), "--out", s(&dir.path().join("run"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn corrupt_imu_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data);
    let imu = data.join("imu.csv");
    let mut text = std::fs::read_to_string(&imu).unwrap();
    text.push_str("1e9,abc,0,0,0,0,0\n");
    std::fs::write(&imu, text).unwrap();
    let o = lcfuse(&["run", "--config", s(&small_config()), "--mode", "ins-sa", "--data", s(&data), "--out", s(&dir.path().join("run"))]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("imu.csv"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&a);
    simulate(&b);
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_flag_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&a);
    let o = lcfuse(&["simulate", "--config", s(&small_config()), "--seed", "8", "--out", s(&b)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(a.join("trajectory.csv")).unwrap(), std::fs::read(b.join("trajectory.csv")).unwrap());
    assert_ne!(std::fs::read(a.join("imu.csv")).unwrap(), std::fs::read(b.join("imu.csv")).unwrap());
}

#[test]
fn ins_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data);
    let mut outputs = Vec::new();
    for run in ["r1", "r2"] {
        let out = dir.path().join(run);
        let o = lcfuse(&["run", "--config", s(&small_config()), "--mode", "ins-sa", "--data", s(&data), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("ins_sa.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn default_scenario_has_37_sites() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "version = 1\nseed = 2\n").unwrap();
    let out = dir.path().join("data");
    let o = lcfuse(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sites = std::fs::read_to_string(out.join("sites.csv")).unwrap();
    assert_eq!(sites.lines().count(), 38);
}

#[test]
fn staged_run_and_single_solution_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    simulate(&data);
    for mode in ["5g-sa", "fused"] {
        let o = lcfuse(&["run", "--config", s(&small_config()), "--mode", mode, "--data", s(&data), "--out", s(&run)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let eval = dir.path().join("eval");
    let o = lcfuse(&["eval", "--data", s(&data), "--out", s(&eval), s(&run.join("fused.csv"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("5G-OBMS"));
    assert!(!table.contains("INS-SA"));
    assert!(eval.join("report_fused.json").exists());
    assert!(eval.join("cdf_fused.csv").exists());
    assert!(!eval.join("report_5g_sa.json").exists());
}

#[test]
fn pipeline_matches_staged_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcfuse(&["pipeline", "--config", s(&small_config()), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let staged = dir.path().join("staged");
    let data = staged.join("data");
    let run = staged.join("run");
    simulate(&data);
    let o = lcfuse(&["run", "--config", s(&small_config()), "--data", s(&data), "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["5g_sa.csv", "ins_sa.csv", "fused.csv"] {
        assert_eq!(std::fs::read(dir.path().join("run").join(f)).unwrap(), std::fs::read(run.join(f)).unwrap(), "{f}");
    }
}
