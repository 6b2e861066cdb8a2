use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn icflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icflow")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("icflow-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SHORT_HYPERBOLIC: &str = r#"{"ambient":"hyperbolic","p":2,"n_theta":32,
    "initial":{"kind":"perturbed","r0":1,"eps":0.02,"k":2},"stop":{"t_end":2}}"#;

#[test]
fn run_writes_all_artifacts() {
    let dir = scratch("run");
    let cfg = write(&dir, "c.json", SHORT_HYPERBOLIC);
    let out = dir.join("out");
    let res = icflow(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with(
        "t,dt,u_min,u_max,osc,v_max,kappa_min,kappa_max,F_min,F_max,z_max,B_min,chi_max,theta_ref,u_tilde_min,u_tilde_max,kt_min,kt_max,dist_sphere\n"
    ));
    assert!(!series.contains('\r'));
    let rows = icflow::io::parse_series(&series).unwrap();
    assert_eq!(rows.last().unwrap().t, 2.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stop_reason"], "t_end");
    assert!(manifest["started_at"].as_f64().unwrap() <= manifest["finished_at"].as_f64().unwrap());
    let typed: icflow::io::RunManifest =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let echo = icflow::io::config_to_json(&typed.config);
    let cfg = icflow::io::parse_config(&echo).unwrap();
    assert_eq!(icflow::io::config_to_json(&cfg), echo);
    assert_eq!(cfg.stop.t_end, Some(2.0));

    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert!(snaps.len() >= 2 && snaps.len() <= 12);
    let svg = fs::read_to_string(out.join("summary.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let bad_p = write(&dir, "p.json", r#"{"ambient":"euclidean","p":1,"initial":{"kind":"sphere","r0":1}}"#);
    let res = icflow(&["run", bad_p.to_str().unwrap(), "--out", dir.join("p").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`p`"));

    let unknown = write(
        &dir,
        "u.json",
        r#"{"ambient":"euclidean","p":2,"initial":{"kind":"sphere","r0":1},"bogus":1}"#,
    );
    assert_eq!(icflow(&["run", unknown.to_str().unwrap()]).status.code(), Some(5));

    // not horoconvex initially: the pinching monitor halts, then the convexity one
    let pinch = r#"{"ambient":"hyperbolic","p":2,"n_theta":64,"initial":{"kind":"perturbed","r0":1,"eps":0.05,"k":3}"#;
    let cfg = write(&dir, "z.json", &format!("{pinch}}}"));
    let out = dir.join("z");
    let res = icflow(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("pinching_violated"));

    let cfg = write(&dir, "c.json", &format!(r#"{pinch},"stop":{{"halt_on_pinching_violation":false}}}}"#));
    let res = icflow(&["run", cfg.to_str().unwrap(), "--out", dir.join("c").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));

    let missing = dir.join("nope.json");
    assert_eq!(icflow(&["run", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn reference_prints_sphere_radius() {
    let res = icflow(&[
        "reference",
        "--ambient",
        "euclidean",
        "--r0",
        "1",
        "--p",
        "2",
        "--t-end",
        "2",
        "--samples",
        "3",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,theta");
    let last: Vec<f64> = lines[3].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 2.0);
    assert!((last[1] - 2.0).abs() < 1e-14);

    let res = icflow(&["reference", "--ambient", "euclidean", "--r0", "1", "--p", "2", "--t-end", "5"]);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn counterexample_reports_negative_slope() {
    let res = icflow(&["counterexample", "--a2", "1", "--b2", "2", "--p", "2", "--numeric"]);
    assert_eq!(res.status.code(), Some(0));
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(out.starts_with("t,h11_origin\n"));
    assert!(out.lines().skip(1).any(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() < 0.0));
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("closed form -7.0"));
    assert!(err.contains("crosses below zero: true"));
    assert_eq!(icflow(&["counterexample", "--p", "1"]).status.code(), Some(5));
}

#[test]
fn sweep_runs_each_config_separately() {
    let dir = scratch("sweep");
    write(&dir, "a.json", SHORT_HYPERBOLIC);
    write(&dir, "b.json", &SHORT_HYPERBOLIC.replace("\"k\":2", "\"k\":1"));
    write(&dir, "notes.txt", "ignored");
    let res = icflow(&["sweep", dir.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    for stem in ["a", "b"] {
        assert!(dir.join("runs").join(stem).join("manifest.json").exists());
        assert!(dir.join("runs").join(stem).join("series.csv").exists());
    }
    let a = fs::read_to_string(dir.join("runs/a/series.csv")).unwrap();
    let b = fs::read_to_string(dir.join("runs/b/series.csv")).unwrap();
    assert_ne!(a, b);
}
