use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use planewave::dynamics::Event;
use planewave::io::serialize_case;
use planewave::scenarios::load_benchmark;

fn planewave(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planewave"))
        .args(args)
        .env("PLANEWAVE_OUT", out)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_writes_a_bundle_under_the_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = planewave(&out, &["simulate", "wscc9", "--horizon", "1.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "manifest.json",
        "summary.json",
        "frequency.svg",
        "planewave_nodes.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["case"], "wscc9");
    assert!(summary["rocof"]["hz_per_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn out_flag_overrides_env() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag");
    let o = planewave(
        &dir.path().join("env"),
        &["--out", flag.to_str().unwrap(), "momentum", "wscc9"],
    );
    assert_eq!(code(&o), 0);
    assert!(flag.join("momentum.csv").exists());
    assert!(!dir.path().join("env").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("kappa = 1.741347e-5"));
}

#[test]
fn reruns_produce_the_same_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "wscc9",
        "--model",
        "classical",
        "--horizon",
        "1.2",
    ];
    assert_eq!(code(&planewave(&dir.path().join("a"), &args)), 0);
    assert_eq!(code(&planewave(&dir.path().join("b"), &args)), 0);
    assert_eq!(
        fs::read(dir.path().join("a/manifest.json")).unwrap(),
        fs::read(dir.path().join("b/manifest.json")).unwrap()
    );
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&planewave(&out, &["simulate", "nosuch"])), 2);
    assert_eq!(
        code(&planewave(
            &out,
            &[
                "sweep",
                "sensitivity",
                "wscc9",
                "--param",
                "bogus",
                "--values",
                "1"
            ]
        )),
        2
    );
    assert_eq!(code(&planewave(&out, &["prony", "x.csv"])), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[system]\nbase_mva = 100\n").unwrap();
    let o = planewave(&out, &["simulate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn missing_input_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        code(&planewave(
            &dir.path().join("o"),
            &["prony", missing.to_str().unwrap(), "--order", "4"]
        )),
        4
    );
}

#[test]
fn numerical_blow_up_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = load_benchmark("wscc9").unwrap();
    for g in case.generators.iter_mut() {
        g.t_v = 1e-5;
    }
    case.events = vec![
        Event::ThreePhaseFault {
            time: 0.1,
            branch: case.network.branches[6].id,
            position: 0.5,
            admittance: None,
        },
        Event::ClearFault { time: 0.2 },
    ];
    let path = dir.path().join("stiff.toml");
    fs::write(&path, serialize_case(&case).unwrap()).unwrap();
    let o = planewave(
        &dir.path().join("o"),
        &["simulate", path.to_str().unwrap(), "--horizon", "0.5"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn prony_on_a_csv_signal() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ringdown.csv");
    let mut text = String::from("time_s,f_hz\n");
    for k in 0..600 {
        let t = k as f64 * 0.02;
        let v = 60.0 + 0.1 * (-0.3 * t).exp() * (2.0 * std::f64::consts::PI * 0.6 * t).cos();
        text.push_str(&format!("{t},{v}\n"));
    }
    fs::write(&csv, text).unwrap();
    let out = dir.path().join("o");
    let o = planewave(&out, &["prony", csv.to_str().unwrap(), "--auto-order"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let modes: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("modes.json")).unwrap()).unwrap();
    let m = modes
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["omega"].as_f64().unwrap() > 1.0)
        .unwrap();
    assert!((m["sigma"].as_f64().unwrap() + 0.3).abs() < 1e-4);
    assert!((m["omega"].as_f64().unwrap() - 2.0 * std::f64::consts::PI * 0.6).abs() < 1e-4);
}

#[test]
fn share_sweep_plots_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = planewave(&out, &["sweep", "share", "wscc9", "--h", "6,2.15,1"]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(out.join("share.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 3);
    let csv = fs::read_to_string(out.join("share.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
