use std::path::Path;
use std::process::{Command, Output};

fn hyfal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyfal")).args(args).env_remove("HYFAL_OUT_DIR").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn billiard_first_bounce_from_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hyfal(&["simulate", "--model", "billiard", "--x0", "0.1,0.1", "--angle", "48.5", "--T", "10", "--unchecked", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("transitions.csv"));
    assert_eq!(&header[..3], ["tau", "src", "dst"]);
    let tau: f64 = rows[0][0].parse().unwrap();
    let exact = 1.9 / 48.5f64.to_radians().sin();
    assert!((tau - exact).abs() < 1e-9, "{tau} vs {exact}");
    let (h, traj) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(h, ["t", "loc", "x1", "x2", "x3", "x4"]);
    assert_eq!(traj.last().unwrap()[0].parse::<f64>().unwrap(), 10.0);
}

#[test]
fn out_of_box_start_needs_unchecked() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyfal(&["simulate", "--model", "billiard", "--angle", "48.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn glycemic_start_robustness_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyfal(&["simulate", "--model", "glycemic", "--formula", "requirement", "--sensitivity", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let r: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("robustness "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((r - 0.8287).abs() <= 0.05, "{r}");
    let (header, rows) = read_csv(&dir.path().join("sensitivity.csv"));
    assert_eq!(header.len(), 1 + 9 + 6);
    assert_eq!(&rows[0][1..10], ["1", "0", "0", "0", "1", "0", "0", "0", "1"]);
}

#[test]
fn usage_and_validation_exit_codes() {
    assert_eq!(hyfal(&["simulate"]).status.code(), Some(2));
    assert_eq!(hyfal(&["simulate", "--model", "pendulum"]).status.code(), Some(3));
    assert_eq!(hyfal(&["falsify"]).status.code(), Some(2));
    assert_eq!(hyfal(&["falsify", "--model", "glycemic", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(hyfal(&["falsify", "--model", "glycemic", "--p", "2"]).status.code(), Some(3));
    assert_eq!(hyfal(&["falsify", "--model", "glycemic", "--formula", "(always 0 10 (in-box Q 0 1))"]).status.code(), Some(3));
    assert_eq!(hyfal(&["falsify", "--model", "glycemic", "--formula", "(always 0 500 (in-box G 0 1))"]).status.code(), Some(3));
}

#[test]
fn glycemic_descent_falsifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hyfal(&["falsify", "--model", "glycemic", "--driver", "gd", "--h", "1e-5", "--k1", "30", "--k2", "20", "--out", out]);
    assert!(o.status.success());
    let line = stdout(&o);
    let fields: Vec<&str> = line.trim().split(',').collect();
    assert_eq!(fields[0], "falsified");
    assert!(fields[1].parse::<f64>().unwrap() < 0.0);
    let trace = json(&dir.path().join("trace_gd.json"));
    assert_eq!(trace["falsified"], true);
    assert!(trace["best_r"].as_f64().unwrap() < 0.0);
    let (header, _) = read_csv(&dir.path().join("robustness_gd.csv"));
    assert_eq!(header, ["sim", "phase", "iteration", "attempt", "r", "accepted", "best_so_far"]);
}

#[test]
fn single_sample_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyfal(&["falsify", "--model", "vehicle", "--driver", "sa", "--budget", "1", "--seeds", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().split(',').nth(2), Some("1"));
    let (_, rows) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(rows[0][4], "1");
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let flags = ["--model", "billiard", "--driver", "sa+gd", "--seeds", "3,8", "--budget", "12", "--r-threshold", "0.5"];
    let mut dump = vec!["falsify"];
    dump.extend(flags);
    dump.push("--dump-config");
    let o = hyfal(&dump);
    assert!(o.status.success());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, stdout(&o)).unwrap();

    let mut direct = vec!["falsify"];
    direct.extend(flags);
    direct.extend(["--out", a.to_str().unwrap()]);
    assert!(hyfal(&direct).status.success());
    assert!(hyfal(&["falsify", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.success());
    for seed in [3, 8] {
        let name = format!("trace_seed{seed}.json");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hyfal"))
        .args(["simulate", "--model", "vehicle", "--T", "1"])
        .env("HYFAL_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn experiment_summary_matches_raw_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyfal(&[
        "experiment", "--model", "billiard", "--seeds", "11", "--budget", "6", "--r-threshold", "0.3", "--k1", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, table) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(header, ["statistic", "SA", "SA+GD"]);
    assert_eq!(table.len(), 6);
    assert_eq!(table[0][0], "num. of total falsification");
    let (_, runs) = read_csv(&dir.path().join("runs.csv"));
    assert_eq!(runs.len(), 2);
    for (col, run) in runs.iter().enumerate() {
        let falsified = run[3] == "true";
        assert_eq!(table[0][col + 1], format!("{}/1", u8::from(falsified)));
        let min_rob: f64 = run[4].parse().unwrap();
        assert_eq!(table[2][col + 1].parse::<f64>().unwrap(), min_rob);
        let arm = run[0].replace('+', "");
        let trace = json(&dir.path().join(format!("traces/{arm}_run0.json")));
        assert_eq!(trace["best_r"].as_f64().unwrap(), min_rob);
        let sims = trace["records"].as_array().unwrap().len();
        assert_eq!(sims.to_string(), run[5]);
    }
    assert!(dir.path().join("plot_best_so_far.csv").exists());
}
