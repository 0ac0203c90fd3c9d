use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

fn fieldnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldnet"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .display()
        .to_string()
}

#[test]
fn plan_reproduces_the_planning_figures() {
    let o = fieldnet(&["plan", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let avg = v["avg_ma"].as_f64().unwrap();
    assert!((avg - 46.39).abs() < 0.01);
    let expected = 7800.0 * 0.7 / avg;
    assert!((v["hours"].as_f64().unwrap() - expected).abs() < 1e-9);

    let o = fieldnet(&["plan", "--sleep-s", "0"]);
    assert_eq!(code(&o), 1);
    let o = fieldnet(&["plan", "--derating", "1.5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_then_report_from_store_agree() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let report = dir.path().join("report.json");
    let (store_s, report_s) = (store.to_str().unwrap(), report.to_str().unwrap());
    let o = fieldnet(&[
        "simulate", "--until", "1day", "--seed", "3", "--store", store_s, "--report", report_s,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("yield 1.0000"));
    let in_run = std::fs::read_to_string(&report).unwrap();
    let v: Value = serde_json::from_str(&in_run).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["totals"]["unaccounted"], 0);

    let o = fieldnet(&["report", "--store", store_s]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), in_run);

    // A used store is refused rather than overwritten.
    let o = fieldnet(&["simulate", "--until", "1h", "--store", store_s]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("empty store"), "{}", stderr(&o));
}

#[test]
fn report_on_empty_and_missing_stores() {
    let dir = tempfile::tempdir().unwrap();
    let o = fieldnet(&["report", "--store", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["totals"]["emitted"], 0);
    assert_eq!(v["quarantined"], 0);

    let o = fieldnet(&["report", "--store", dir.path().join("nope").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_scenarios_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.toml");
    std::fs::write(&f, "format = 1\nseed = 1\nduration_s = \"soon\"\n").unwrap();
    let o = fieldnet(&["simulate", "--scenario", f.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.toml: line 3, column 14"), "{}", stderr(&o));

    std::fs::write(&f, "format = 2\nseed = 1\nduration_s = 100\n").unwrap();
    let o = fieldnet(&["simulate", "--scenario", f.to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    let o = fieldnet(&[
        "simulate",
        "--scenario",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bundled_scenario_runs_from_the_cli() {
    let scenario = repo_file("scenarios/fault-stack.toml");
    let o = fieldnet(&["simulate", "--scenario", &scenario]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["duration_s"], 7 * 86_400);
    assert_eq!(v["restarts"].as_array().unwrap().len(), 1);

    // Truncating the run below its fault schedule is a validation error.
    let o = fieldnet(&["simulate", "--scenario", &scenario, "--until", "2days"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("after the end of the run"), "{}", stderr(&o));
}

#[test]
fn calibrate_fits_exported_series() {
    let dir = tempfile::tempdir().unwrap();
    let (mut cheap, mut reference) = (String::new(), String::new());
    for i in 0..200u64 {
        let truth = 20.0 + 10.0 * (i as f64 / 30.0).sin();
        cheap.push_str(&format!("{{\"t\":{},\"value\":{}}}\n", i * 305, 1.25 * truth - 3.75));
        reference.push_str(&format!("{{\"t\":{},\"value\":{}}}\n", i * 305 + 2, truth));
    }
    let (c, r) = (dir.path().join("c.ndjson"), dir.path().join("r.ndjson"));
    std::fs::write(&c, cheap).unwrap();
    std::fs::write(&r, reference).unwrap();
    let o = fieldnet(&[
        "calibrate",
        "--cheap",
        c.to_str().unwrap(),
        "--ref",
        r.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["slope"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((v["intercept"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(v["n_points"], 200);

    std::fs::write(&r, "{\"t\":1,\"value\":\"grazing\"}\n").unwrap();
    let o = fieldnet(&[
        "calibrate",
        "--cheap",
        c.to_str().unwrap(),
        "--ref",
        r.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Starts `fieldnet serve` on an ephemeral port and returns its base URL.
fn serve(extra: &[&str]) -> (Served, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fieldnet"))
        .args(["serve", "--port", "0"])
        .args(extra)
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let url = loop {
        let line = lines.next().expect("server exited before listening").unwrap();
        if let Some(url) = line.strip_prefix("listening on ") {
            break url.to_string();
        }
    };
    // Keep draining so the server never blocks on a full pipe.
    std::thread::spawn(move || for _ in lines {});
    (Served(child), url)
}

#[test]
fn serve_inject_and_status_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("live.toml");
    std::fs::write(
        &scenario,
        "format = 1\nseed = 2\nduration_s = 86400\ntime_compression = 600.0\n\n\
         [[nodes]]\nid = \"soil\"\nkind = \"soil\"\ncount = 2\n",
    )
    .unwrap();
    let (_server, url) = serve(&["--scenario", scenario.to_str().unwrap()]);

    let o = fieldnet(&[
        "inject",
        "--server",
        &url,
        "--at",
        "20h",
        "--node",
        "soil-2",
        "--fault",
        "radio_hang",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("t=72000"));

    let o = fieldnet(&[
        "inject",
        "--server",
        &url,
        "--node",
        "soil-1",
        "--fault",
        r#"{"kind":"extra_load","ma":20}"#,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = fieldnet(&["inject", "--server", &url, "--node", "soil-9", "--fault", "radio_hang"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = fieldnet(&["inject", "--server", &url, "--node", "soil-1", "--fault", "gremlins"]);
    assert_eq!(code(&o), 1);

    // Simulated time advances at 600x wall clock.
    let mut now = 0;
    for _ in 0..50 {
        let o = fieldnet(&["status", "--server", &url]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
        now = v["now_s"].as_u64().unwrap();
        if now > 600 {
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
    assert!(now > 600, "simulation did not advance: {now}");
}

#[test]
fn serve_refuses_a_busy_port() {
    let (_server, url) = serve(&[]);
    let port = url.rsplit(':').next().unwrap();
    let o = fieldnet(&["serve", "--port", port]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cannot listen"), "{}", stderr(&o));
}

#[test]
fn client_commands_fail_cleanly_without_a_server() {
    let o = fieldnet(&["status", "--server", "http://127.0.0.1:9"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("request failed"), "{}", stderr(&o));
}
