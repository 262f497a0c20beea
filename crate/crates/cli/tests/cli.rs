use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mobknot"));
    c.env_remove("MOBKNOT_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mobknot-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn error_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(err.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {err}"))
}

#[test]
fn energy_report_fields() {
    let o = run(&["energy", "--input", "preset:ellipse", "--grid", "128"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["method"], "cosine");
    assert_eq!(v["grid_size"], 128);
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["cross_check"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn energy_methods_agree() {
    let value = |m: &str| {
        let o = run(&["energy", "--input", "preset:trefoil", "--grid", "128", "--method", m]);
        assert!(o.status.success(), "{m}");
        serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap()["value"].as_f64().unwrap()
    };
    let e = value("cosine");
    for m in ["fhw", "from-v", "hadamard"] {
        assert!((value(m) - e).abs() < 1e-6 * e, "{m}");
    }
}

#[test]
fn csv_headers() {
    let cases: [(&[&str], &str); 3] = [
        (&["potential", "--input", "preset:ellipse", "--grid", "32"], "t,V"),
        (&["angle", "--input", "preset:ellipse", "--grid", "16"], "i,j,theta"),
        (&["grad", "--input", "preset:ellipse", "--grid", "32"], "t,gx,gy,gz,norm,route_residual"),
    ];
    for (args, header) in cases {
        let o = run(args);
        assert!(o.status.success(), "{args:?}");
        let out = stdout(&o);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some(header));
        assert!(lines.count() > 0);
    }
}

#[test]
fn hadamard_gradient_reports_route_residual() {
    let o = run(&["grad", "--input", "preset:trefoil", "--grid", "64", "--route", "hadamard", "--weight", "v3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for line in out.lines().skip(1) {
        let r: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(r < 1e-6);
    }
}

#[test]
fn transform_round_trips_through_files() {
    let dir = scratch("transform");
    let knot = dir.join("knot.json");
    let moved = dir.join("moved.json");
    let t = dir.join("t.json");
    fs::write(&t, r#"{"word":[{"type":"homothety","k":2.0},{"type":"inversion","center":[0.0,0.0,9.0],"radius":1.5}]}"#).unwrap();
    assert!(run(&["transform", "--input", "preset:ellipse", "--grid", "64", "--seed", "7", "--output", knot.to_str().unwrap()])
        .status
        .success());
    let o = run(&["transform", "--input", knot.to_str().unwrap(), "--transform", t.to_str().unwrap(), "--output", moved.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let energy = |p: &PathBuf| {
        let o = run(&["energy", "--input", p.to_str().unwrap()]);
        serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap()["value"].as_f64().unwrap()
    };
    let (a, b) = (energy(&knot), energy(&moved));
    assert!((a - b).abs() < 1e-9 * a);
}

#[test]
fn check_on_circle_passes() {
    let o = run(&["check", "--input", "preset:circle", "--grid", "128", "--count", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"]["circle.v_max"]["value"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["environment"]["knots"][0], "circle");
}

#[test]
fn check_on_ellipse_seed_42() {
    let o = run(&["check", "--input", "preset:ellipse", "--seed", "42", "--count", "25"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failed: Vec<&String> = v["checks"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(_, e)| e["pass"] != true)
        .map(|(k, _)| k)
        .collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(o.status.success());
    assert_eq!(v["environment"]["seed"], 42);
    assert_eq!(v["environment"]["count"], 25);
}

#[test]
fn failing_check_exits_nonzero() {
    let dir = scratch("strict");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"check":{"tolerances":{"energy_invariance":1e-30}}}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "check", "--input", "preset:ellipse", "--grid", "64", "--count", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], false);
    assert_eq!(v["checks"]["ellipse.energy_invariance"]["pass"], false);
}

#[test]
fn config_from_environment() {
    let dir = scratch("env");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"check":{"tolerances":{"energy_invariance":1e-30}}}"#).unwrap();
    let o = bin()
        .env("MOBKNOT_CONFIG", &cfg)
        .args(["check", "--input", "preset:ellipse", "--grid", "64", "--count", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn self_intersecting_knot_is_rejected() {
    // figure eight in the plane: the grid passes through the origin twice
    let n = 64;
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            [t.sin(), (2.0 * t).sin() / 2.0, 0.0]
        })
        .collect();
    let json = serde_json::json!({ "representation": "samples", "points": pts }).to_string();
    let mut child = bin()
        .args(["check", "--input", "-", "--count", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(json.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "invalid_knot");
}

#[test]
fn malformed_input_gives_json_error() {
    let dir = scratch("bad");
    let bad = dir.join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    for args in [
        vec!["energy", "--input", bad.to_str().unwrap()],
        vec!["energy", "--input", "/definitely/missing.json"],
        vec!["energy", "--input", "preset:dodecahedron"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let e = error_json(&o);
        assert!(e["error"]["message"].as_str().unwrap().len() > 3);
    }
}

#[test]
fn flow_writes_trace_and_snapshots() {
    let dir = scratch("flow");
    let cfg = dir.join("flow.json");
    let trace = dir.join("trace.csv");
    let snaps = dir.join("snaps");
    fs::write(&cfg, r#"{"flow":{"max_steps":12,"snapshot_every":5}}"#).unwrap();
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "flow",
        "--input",
        "preset:perturbed_circle",
        "--grid",
        "128",
        "--output",
        trace.to_str().unwrap(),
        "--snapshots",
        snaps.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,E,grad_norm,roundness,step_size_used"));
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 13);
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    for name in ["step_00000.json", "step_00005.json", "step_00010.json", "final.json"] {
        assert!(snaps.join(name).exists(), "{name}");
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["check", "--input", "preset:trefoil", "--grid", "64", "--count", "2"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let args = ["grad", "--input", "preset:trefoil", "--grid", "64"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}
