use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PLANTED: &str = r#"
[dataset]
source = "planted"
n = 20
r = 3
seed = 4

[problem]
rank = 3
lambda = 1.0

[solver]
tol = 1e-12
"#;

const SYNTHETIC: &str = r#"
[dataset]
source = "synthetic"
n = 30
m = 30
seed = 5
noise_t = 0.01
symmetrize_noise = true

[problem]
rank = 3
lambda = 1.0
"#;

fn gsmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsmf")).args(args).output().expect("failed to launch gsmf")
}

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn run_in(dir: &Path, cmd: &str, config: &Path, out: &str, extra: &[&str]) -> Output {
    let out = dir.join(out);
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    gsmf(&args)
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of `sweep.csv` as header-keyed maps.
fn sweep_rows(dir: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

#[test]
fn planted_solve_converges() {
    let (dir, config) = setup(PLANTED);
    let o = run_in(dir.path(), "solve", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["status"], "converged");
    assert!(s["relobj"].as_f64().unwrap() <= 1e-6, "{s}");

    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], gsmf::io::TRACE_HEADER);
    assert_eq!(lines.len() - 1, s["iters"].as_u64().unwrap() as usize);
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[2], s["f_value"].as_f64().unwrap());
    assert_eq!(last[4], s["relobj"].as_f64().unwrap());
    assert_eq!(last[5], s["sym_gap"].as_f64().unwrap());
    assert_eq!(last[6], s["stationarity_residual"].as_f64().unwrap());
}

#[test]
fn zero_time_budget_exits_with_limit() {
    let (dir, config) = setup(&format!("{PLANTED}max_time_sec = 0\n"));
    let o = run_in(dir.path(), "solve", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["status"], "time_limit");
    let rows = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap().lines().count() - 1;
    assert!(rows <= 1);
}

#[test]
fn missing_rank_is_reported() {
    let (dir, config) = setup(&PLANTED.replace("rank = 3\n", ""));
    let o = run_in(dir.path(), "solve", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rank"), "{}", stderr(&o));
}

#[test]
fn traces_are_byte_identical() {
    let (dir, config) = setup(&format!("{SYNTHETIC}\n[solver]\nmax_iters = 50\nrecord_elapsed = false\n"));
    for out in ["a", "b"] {
        let o = run_in(dir.path(), "solve", &config, out, &["--seed", "9"]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(2), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert!(a.len() > 100);
    assert_eq!(a, b);
}

#[test]
fn gen_data_is_deterministic() {
    let (dir, config) = setup(SYNTHETIC);
    for out in ["a", "b"] {
        let o = run_in(dir.path(), "gen-data", &config, out, &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/M.mtx")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/M.mtx")).unwrap());
    let m = gsmf::io::read_matrix(&dir.path().join("a/M.mtx")).unwrap();
    assert_eq!(m.shape(), (30, 30));
    assert_eq!(m, m.transpose());
}

#[test]
fn empty_sweep_names_the_axis() {
    let (dir, config) = setup(&format!("{SYNTHETIC}\n[sweep]\nalpha = []\n"));
    let o = run_in(dir.path(), "sweep", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`alpha`"), "{}", stderr(&o));
}

#[test]
fn alpha_sweep_agrees_on_relobj() {
    let (dir, config) = setup(&format!("{SYNTHETIC}\n[sweep]\nalpha = [0.2, 0.6, 2.0]\n"));
    let o = run_in(dir.path(), "sweep", &config, "out", &["--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = sweep_rows(&dir.path().join("out"));
    assert_eq!(rows.len(), 3);
    let relobj: Vec<f64> = rows.iter().map(|r| r["mean_relobj"].parse().unwrap()).collect();
    assert!(rows.iter().all(|r| r["status"] == "converged"));
    let (lo, hi) = relobj.iter().fold((f64::MAX, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!((hi - lo) / lo <= 0.01, "{relobj:?}");
    assert!(dir.path().join("out/runs/point002_rep00.csv").exists());
}

#[test]
fn lambda_sweep_orders_symmetry() {
    let (dir, config) = setup(&format!("{SYNTHETIC}\n[sweep]\nlambda = [0.01, 100.0]\n"));
    let o = run_in(dir.path(), "sweep", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = sweep_rows(&dir.path().join("out"));
    let gap: Vec<f64> = rows.iter().map(|r| r["mean_sym_gap"].parse().unwrap()).collect();
    assert!(gap[1] < gap[0], "{gap:?}");
}

#[test]
fn failing_sweep_point_is_marked() {
    let (dir, config) = setup(&format!("{SYNTHETIC}\n[sweep]\nalpha = [0.6, 1.0]\n"));
    let o = run_in(dir.path(), "sweep", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(1));
    let rows = sweep_rows(&dir.path().join("out"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["status"], "converged");
    assert_eq!(rows[1]["status"], "failed");
}

fn check_report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("check.json")).unwrap()).unwrap()
}

fn failed_items(report: &serde_json::Value) -> Vec<String> {
    report["items"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|i| i["passed"] == false)
        .map(|i| i["name"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn check_passes_on_a_valid_config() {
    let (dir, config) = setup(PLANTED);
    let o = run_in(dir.path(), "check", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = check_report(&dir.path().join("out"));
    assert_eq!(report["passed"], true);
    assert!(failed_items(&report).is_empty());
    assert!(report["diagnostics"]["stationarity_residual"].is_number());
}

#[test]
fn check_reports_inconsistent_relaxation() {
    let (dir, config) = setup(&format!("{PLANTED}\n[relaxation]\nalpha = 2.0\nbeta = 3.0\n"));
    let o = run_in(dir.path(), "check", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(1));
    let report = check_report(&dir.path().join("out"));
    let failed = failed_items(&report);
    assert!(failed.contains(&"config.relaxation".to_string()), "{failed:?}");
    assert!(!failed.contains(&"operators.full_map".to_string()), "{failed:?}");
}

#[test]
fn check_reports_asymmetric_sampling() {
    let config = PLANTED.replace("lambda = 1.0", "lambda = 1.0\nmap = { kind = \"symmetric_sampling\", omega = \"omega.csv\" }");
    let (dir, config) = setup(&config);
    fs::write(dir.path().join("omega.csv"), "1,1\n2,1\n").unwrap();
    let o = run_in(dir.path(), "check", &config, "out", &[]);
    assert_eq!(o.status.code(), Some(1));
    let report = check_report(&dir.path().join("out"));
    let problem = report["items"].as_array().unwrap().iter().find(|i| i["name"] == "config.problem").unwrap();
    assert_eq!(problem["passed"], false);
    assert!(problem["detail"].as_str().unwrap().contains("mirror"), "{problem}");
}

#[test]
fn sampled_problem_solves() {
    let config = PLANTED.replace("lambda = 1.0", "lambda = 1.0\nmap = { kind = \"sampling\", omega = \"omega.csv\" }");
    let (dir, config) = setup(&config);
    let mut pairs = String::new();
    for j in 1..=20 {
        for i in 1..=20 {
            if (i + j) % 3 != 0 {
                pairs.push_str(&format!("{i},{j}\n"));
            }
        }
    }
    fs::write(dir.path().join("omega.csv"), pairs).unwrap();
    let o = run_in(dir.path(), "solve", &config, "out", &["--audit"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["descent_violations"], 0);
    assert!(s["relobj"].as_f64().unwrap() < 1e-2, "{s}");
}

/// The TOML listings of the command-line chapter.
fn book_configs() -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src/cli.md");
    let text = fs::read_to_string(path).unwrap();
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        match (&mut current, line.trim()) {
            (None, "```toml") => current = Some(String::new()),
            (Some(_), "```") => blocks.push(current.take().unwrap()),
            (Some(block), _) => {
                block.push_str(line);
                block.push('\n');
            }
            _ => {}
        }
    }
    blocks
}

#[test]
fn book_configs_load() {
    let blocks = book_configs();
    assert_eq!(blocks.len(), 2);
    for block in blocks {
        // Shrink the dataset so gen-data stays quick; the schema is what matters.
        let (dir, config) = setup(&block.replace("n = 100", "n = 10").replace("m = 100", "m = 10"));
        let o = run_in(dir.path(), "gen-data", &config, "out", &[]);
        assert_eq!(o.status.code(), Some(0), "{}\n{block}", stderr(&o));
    }
}

#[test]
fn missing_rank_message_matches_the_book() {
    let (dir, config) = setup(&PLANTED.replace("rank = 3\n", ""));
    let o = run_in(dir.path(), "solve", &config, "out", &[]);
    let err = stderr(&o);
    assert!(err.starts_with("error: invalid config"), "{err}");
    assert!(err.contains("missing field `rank`"), "{err}");
}
