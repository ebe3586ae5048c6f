use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fasctl_core::design::DesignFile;
use fasctl_core::lmi::{self, LmiSolution};
use fasctl_core::{augment, plants, Mat, Vector};
use serde_json::Value;
use tempfile::TempDir;

fn fasctl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fasctl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SHORT_EM: &str = r#"
plant = "electromech"
seed = 4

[sim]
t_end = 0.5
dt = 1e-4
stride = 50
x0 = [1.0, 1.0, -14.609971423850023]
observer_init = { kind = "xtilde_hat", value = [6.6805, -42.5471, -16.35, 9.0924] }
fault = [{ kind = "sinusoid", amp = 6.0, freq = 1.0 }]
"#;

#[test]
fn synth_reports_published_gains() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["synth", "--plant", "electromech", "--mu-e", "40", "--gamma-f", "1", "--poles", "-2,-3,-4", "-o", "em"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("K                  [24.000000, 26.000000, 9.000000]"), "{}", stdout(&o));
    assert!(tmp.path().join("em/design.json").exists());

    let o = fasctl(
        tmp.path(),
        &["synth", "--plant", "ballbeam", "--mu-e", "8", "--gamma-f", "5", "--poles", "-3,-4,-0.8,-0.9", "--json", "-o", "bb"],
    );
    assert!(o.status.success());
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let k: Vec<f64> = report["gain"][0].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (got, want) in k.iter().zip([8.64, 25.44, 24.62, 8.7]) {
        assert!((got - want).abs() < 1e-9);
    }
    assert!(report["constraint_residual"].as_f64().unwrap() < 1e-8);
    assert!(report["lmi_margin"].as_f64().unwrap() > 1e-6);
    assert_eq!(report["decay_certified"], Value::Bool(false));
}

#[test]
fn missing_plant_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["synth"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fasctl(tmp.path(), &["synth", "--error-json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
    // clap errors honor the flag too
    let o = fasctl(tmp.path(), &["synth", "--bogus", "--error-json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["exit_code"], 2);
}

#[test]
fn unknown_plant_fails_with_kind() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["synth", "--plant", "cartpole", "--error-json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "unknown_plant");
}

#[test]
fn infeasible_decay_rate_surfaces_solver_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["synth", "--plant", "electromech", "--mu-e", "1e7", "--error-json"]);
    assert_eq!(o.status.code(), Some(1));
    let kind = stderr_json(&o)["error"]["kind"].as_str().unwrap().to_string();
    assert!(kind == "lmi_infeasible" || kind == "decay_rate_unachievable", "{kind}");
}

#[test]
fn manifest_rerun_reproduces_csv_bytes() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.toml"), SHORT_EM).unwrap();
    let a = fasctl(tmp.path(), &["sim", "--manifest", "run.toml", "-o", "a"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = fasctl(tmp.path(), &["sim", "--manifest", "run.toml", "-o", "b"]);
    assert!(b.status.success());
    let csv_a = fs::read(tmp.path().join("a/default.csv")).unwrap();
    assert_eq!(csv_a, fs::read(tmp.path().join("b/default.csv")).unwrap());

    // the manifest written next to the outputs reproduces them as well
    let c = fasctl(tmp.path(), &["sim", "--manifest", "a/manifest.toml", "-o", "c"]);
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert_eq!(csv_a, fs::read(tmp.path().join("c/default.csv")).unwrap());

    let header = String::from_utf8(csv_a).unwrap();
    assert!(header.starts_with("t,x1,x2,x3,xhat1,xhat2,xhat3,d1,dhat1,u1,y1,y2\n"));
}

#[test]
fn json_manifest_matches_toml_manifest() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.toml"), SHORT_EM).unwrap();
    let parsed: toml::Value = toml::from_str(SHORT_EM).unwrap();
    fs::write(tmp.path().join("run.json"), serde_json::to_string(&parsed).unwrap()).unwrap();
    assert!(fasctl(tmp.path(), &["sim", "--manifest", "run.toml", "-o", "t"]).status.success());
    let o = fasctl(tmp.path(), &["sim", "--manifest", "run.json", "-o", "j"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(tmp.path().join("t/default.csv")).unwrap(),
        fs::read(tmp.path().join("j/default.csv")).unwrap()
    );
}

#[test]
fn open_loop_holds_input_at_zero() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.toml"), SHORT_EM).unwrap();
    let o = fasctl(tmp.path(), &["sim", "--manifest", "run.toml", "--open-loop", "-o", "ol"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(tmp.path().join("ol/default.csv")).unwrap();
    let u_col = csv.lines().next().unwrap().split(',').position(|h| h == "u1").unwrap();
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(u_col).unwrap().parse::<f64>().unwrap(), 0.0);
    }
    let summary = read_json(&tmp.path().join("ol/default.summary.json"));
    assert_eq!(summary["open_loop"], Value::Bool(true));
}

#[test]
fn zero_horizon_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["sim", "--plant", "electromech", "--t-end", "0", "--error-json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("t_end"));
}

#[test]
fn ballbeam_scenario_one_has_finite_itae() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["sim", "--plant", "ballbeam", "--scenario", "scenario1", "--t-end", "3", "-o", "bb"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&tmp.path().join("bb/scenario1.summary.json"));
    assert!(summary["abort"].is_null());
    let itae = summary["metrics"]["states"][0]["itae"].as_f64().unwrap();
    assert!(itae.is_finite() && itae > 0.0);
    assert!(!tmp.path().join("bb/scenario1.abort.json").exists());
}

#[test]
fn uncompensated_ballbeam_writes_partial_csv_and_abort() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["sim", "--plant", "ballbeam", "--no-compensation", "--t-end", "3", "-o", "nc"]);
    assert!(o.status.success());
    let abort = read_json(&tmp.path().join("nc/scenario1.abort.json"));
    assert_eq!(abort["kind"], "safe_region");
    let rows = fs::read_to_string(tmp.path().join("nc/scenario1.csv")).unwrap().lines().count() - 1;
    let summary = read_json(&tmp.path().join("nc/scenario1.summary.json"));
    assert_eq!(summary["samples"].as_u64().unwrap() as usize, rows);
    // a full 3 s run at the default stride would hold 3001 rows
    assert!(rows > 1 && rows < 3001);
}

#[test]
fn parallel_jobs_match_serial_output() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str, jobs: &'static str| {
        vec!["sim", "--plant", "ballbeam", "--scenario", "scenario1", "--scenario", "scenario2", "--t-end", "1", "--jobs", jobs, "-o", out]
    };
    assert!(fasctl(tmp.path(), &args("serial", "1")).status.success());
    assert!(fasctl(tmp.path(), &args("par", "3")).status.success());
    for name in ["scenario1.csv", "scenario2.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("serial").join(name)).unwrap(),
            fs::read(tmp.path().join("par").join(name)).unwrap()
        );
    }
}

#[test]
fn metrics_command_reproduces_summary() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.toml"), SHORT_EM).unwrap();
    assert!(fasctl(tmp.path(), &["sim", "--manifest", "run.toml", "-o", "m"]).status.success());
    let o = fasctl(tmp.path(), &["metrics", "m/default.csv"]);
    assert!(o.status.success());
    let from_csv: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let summary = read_json(&tmp.path().join("m/default.summary.json"));
    assert_eq!(from_csv, summary["metrics"]);
}

#[test]
fn verify_fresh_design_and_corrupted_copy() {
    let tmp = TempDir::new().unwrap();
    assert!(fasctl(tmp.path(), &["synth", "--plant", "electromech", "-o", "d"]).status.success());
    let o = fasctl(tmp.path(), &["verify", "--design", "d/design.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    let mut design: Value = read_json(&tmp.path().join("d/design.json"));
    for row in design["observer"]["l"].as_array_mut().unwrap() {
        for v in row.as_array_mut().unwrap() {
            *v = Value::from(0.0);
        }
    }
    fs::write(tmp.path().join("bad.json"), design.to_string()).unwrap();
    let o = fasctl(tmp.path(), &["verify", "--design", "bad.json", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let poles = report["checks"].as_array().unwrap().iter().find(|c| c["check"] == "observer_poles").unwrap();
    assert_eq!(poles["pass"], Value::Bool(false));
}

#[test]
fn verify_bundled_fixtures() {
    let tmp = TempDir::new().unwrap();
    let o = fasctl(tmp.path(), &["verify", "--fixture", "ballbeam"]);
    assert!(o.status.success(), "{}", stdout(&o));

    // the printed electromech gains miss the constraint by |T43 + 10 M_e|
    let o = fasctl(tmp.path(), &["verify", "--fixture", "electromech", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = report["checks"].as_array().unwrap().iter().find(|c| c["check"] == "constraint").unwrap();
    let inertia = plants::ElectromechParams::default().inertia();
    assert!((c["value"].as_f64().unwrap() - (-1.6642 + 10.0 * inertia).abs()).abs() < 1e-9);

    let o = fasctl(tmp.path(), &["verify", "--fixture", "cartpole"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_malformed_design_names_location() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("broken.json"), "{\"schema_version\": 1,\n \"plant\": }").unwrap();
    let o = fasctl(tmp.path(), &["verify", "--design", "broken.json", "--error-json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert_eq!(err["error"]["kind"], "parse");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn verify_lmi_certificate_file() {
    let tmp = TempDir::new().unwrap();
    assert!(fasctl(tmp.path(), &["synth", "--plant", "ballbeam", "-o", "d"]).status.success());
    let file = DesignFile::from_json(&fs::read_to_string(tmp.path().join("d/design.json")).unwrap()).unwrap();
    let obs = file.observer.unwrap();
    let aug = augment(&plants::by_name("ballbeam").unwrap()).unwrap();
    let problem = lmi::assemble_theorem1(&aug, obs.mu_e, obs.gamma_f, &Vector::zeros(2), 1e-6).unwrap();
    let x = problem
        .pack(&[obs.p_e.clone(), &obs.p_e * &obs.l, &obs.p_e * &obs.s, Mat::from_element(1, 1, obs.eta)])
        .unwrap();
    let write = |name: &str, x: Vec<f64>| {
        let sol = LmiSolution { x, margin: obs.margin, iterations: 0 };
        let body = format!(
            "{{\"problem\": {}, \"solution\": {}}}",
            problem.to_json().unwrap(),
            serde_json::to_string(&sol).unwrap()
        );
        fs::write(tmp.path().join(name), body).unwrap();
    };
    write("good.json", x.clone());
    write("zero.json", vec![0.0; x.len()]);
    assert!(fasctl(tmp.path(), &["verify", "--lmi", "good.json"]).status.success());
    assert_eq!(fasctl(tmp.path(), &["verify", "--lmi", "zero.json"]).status.code(), Some(1));
}

#[test]
fn nothing_to_verify_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(fasctl(tmp.path(), &["verify"]).status.code(), Some(2));
}
