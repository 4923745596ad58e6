use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nmcf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmcf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const LAW: &str = r#""law": {"B": 1, "beta": 1, "n": 2}"#;

fn disk_run(engine: &str, t_end: f64) -> String {
    format!(
        r#"{{{LAW}, "initial_shape": {{"kind": "disk", "radius": 0.5, "n_theta": 64}}, "engine": {engine}, "t_end": {t_end}}}"#
    )
}

#[test]
fn stationary_disk_preset_passes_run_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"preset": "stationary-disk", "output": "out"}"#).unwrap();
    let run = nmcf(&["run", "c.json"], dir.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let out = dir.path().join("out");
    let summary = read_json(&out.join("summary.json"));
    assert!(summary["terminal_residual"].as_f64().unwrap() < 1e-3);
    assert_eq!(summary["config"]["t_end"], 5.0);
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(out.join("trajectory.csv").is_file());
    assert!(out.join("snapshots/0000.json").is_file());
    assert!(!out.join("certificates.csv").exists());

    let audit = nmcf(&["audit", "out", "--checks=preservation,holder,convergence"], dir.path());
    assert_eq!(code(&audit), 0, "{}", String::from_utf8_lossy(&audit.stdout));
    let report = read_json(&out.join("audit.json"));
    assert_eq!(report["pass"], true);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    for c in checks {
        assert!(c.get("name").is_some() && c.get("margin").is_some() && c.get("details").is_some());
    }
}

#[test]
fn cos3_decay_preset_dissipates_and_refuses_preservation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"preset": "cos3-decay", "output": "out"}"#).unwrap();
    let run = nmcf(&["run", "c.json"], dir.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let out = dir.path().join("out");
    let mut rows = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let energy: Vec<f64> = rows
        .deserialize::<std::collections::HashMap<String, f64>>()
        .map(|r| r.unwrap()["energy"])
        .collect();
    assert_eq!(energy.len(), 501);
    assert!(energy.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(energy.last().unwrap() < &energy[0]);
    assert!(out.join("certificates.csv").is_file());

    // the initial shape is outside the ρ = 0.01 reflection class
    let audit = nmcf(&["audit", "out", "--checks=preservation"], dir.path());
    assert_eq!(code(&audit), 3);
    assert!(stderr(&audit).contains("hypothesis refusal"));

    let audit = nmcf(&["audit", "out", "--checks=holder,convergence"], dir.path());
    assert_eq!(code(&audit), 0);
    let report = read_json(&out.join("audit.json"));
    let holder = &report["checks"][0];
    assert_eq!(holder["name"], "holder");
    assert!(holder["details"]["c"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_configs_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            disk_run(r#"{"kind": "flow", "dt_safty": 0.3}"#, 0.1).replace(r#""t_end""#, r#""output": "o", "t_end""#),
            "dt_safty",
        ),
        (disk_run(r#"{"kind": "flow"}"#, 0.1).replace(r#""t_end""#, r#""t_ned""#), "t_ned"),
        (disk_run(r#"{"kind": "flow"}"#, -1.0), "t_end"),
        (disk_run(r#"{"kind": "flow"}"#, 0.1), "output"),
        (disk_run(r#"{"kind": "flow"}"#, 0.1).replace(r#""beta": 1"#, r#""beta": 0.2"#), "beta"),
        (disk_run(r#"{"kind": "warp"}"#, 0.1), "engine"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let name = format!("bad{i}.json");
        fs::write(dir.path().join(&name), text).unwrap();
        let out = nmcf(&["run", &name], dir.path());
        assert_ne!(code(&out), 0, "{text}");
        assert!(stderr(&out).contains(field), "{field}: {}", stderr(&out));
    }
}

#[test]
fn audit_reports_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = nmcf(&["audit", "empty"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing artifacts"));
}

#[test]
fn missing_snapshot_file_is_a_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let text = disk_run(r#"{"kind": "flow"}"#, 0.05).replace(
        r#""t_end": 0.05"#,
        r#""t_end": 0.05, "output": "out""#,
    );
    fs::write(dir.path().join("c.json"), text).unwrap();
    assert_eq!(code(&nmcf(&["run", "c.json"], dir.path())), 0);
    fs::remove_file(dir.path().join("out/snapshots/0000.json")).unwrap();
    let out = nmcf(&["audit", "out", "--checks=holder"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("0000.json"));
}

#[test]
fn runs_are_deterministic_and_summaries_reproduce_them() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{{LAW}, "initial_shape": {{"kind": "cos3-perturbation", "base": 0.4, "amplitude": 0.05, "n_theta": 64}},
            "engine": {{"kind": "flow", "dt_safety": 0.5}}, "t_end": 0.05, "snapshot_stride": 50,
            "output": "a", "seed": 7}}"#
    );
    fs::write(dir.path().join("c.json"), text).unwrap();
    assert_eq!(code(&nmcf(&["run", "c.json"], dir.path())), 0);
    assert_eq!(code(&nmcf(&["run", "c.json", "--out", "b"], dir.path())), 0);
    assert_eq!(code(&nmcf(&["run", "a/summary.json", "--out", "c"], dir.path())), 0);
    let csv = |d: &str| fs::read(dir.path().join(d).join("trajectory.csv")).unwrap();
    assert_eq!(csv("a"), csv("b"));
    assert_eq!(csv("a"), csv("c"));
    let a = read_json(&dir.path().join("a/summary.json"));
    let c = read_json(&dir.path().join("c/summary.json"));
    assert_eq!(a["config"]["seed"], 7);
    assert_eq!(a["config"]["engine"], c["config"]["engine"]);
    assert_eq!(a["config"]["initial_shape"], c["config"]["initial_shape"]);
}

#[test]
fn shapes_load_from_files_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("cfg")).unwrap();
    let shape = nmcf::StarShape::disk(nmcf::Vec2::zeros(), 0.45, 48).unwrap();
    nmcf::io::write_shape(&dir.path().join("cfg/shape.json"), &shape).unwrap();
    let text = format!(
        r#"{{{LAW}, "initial_shape": {{"kind": "file", "path": "shape.json"}},
            "engine": {{"kind": "levelset", "dx": 0.05}}, "t_end": 0.02, "output": "out"}}"#
    );
    fs::write(dir.path().join("cfg/c.json"), text).unwrap();
    let out = nmcf(&["run", "cfg/c.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("cfg/out/field.json").is_file());

    let missing = format!(
        r#"{{{LAW}, "initial_shape": {{"kind": "file", "path": "nope.json"}},
            "engine": {{"kind": "flow"}}, "t_end": 0.02, "output": "out"}}"#
    );
    fs::write(dir.path().join("cfg/m.json"), missing).unwrap();
    let out = nmcf(&["run", "cfg/m.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("initial_shape.path"));
}

fn bundle(runs: &[String], m_sweep: &[String]) -> String {
    format!(
        r#"{{"output": "gaps", "runs": [{}], "m_sweep": [{}]}}"#,
        runs.join(","),
        m_sweep.join(",")
    )
}

fn gaps(dir: &Path) -> Vec<f64> {
    csv::Reader::from_path(dir.join("gaps/gaps.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap()[2].parse().unwrap())
        .collect()
}

#[test]
fn flow_and_levelset_agree_on_a_circle() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<String> = [
        r#"{"kind": "flow", "dt_safety": 0.4}"#,
        r#"{"kind": "flow", "dt_safety": 0.2}"#,
        r#"{"kind": "levelset", "dx": 0.0625}"#,
        r#"{"kind": "levelset", "dx": 0.03125}"#,
    ]
    .iter()
    .map(|e| disk_run(e, 0.1))
    .collect();
    fs::write(dir.path().join("b.json"), bundle(&runs, &[])).unwrap();
    let out = nmcf(&["cross-validate", "b.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = gaps(dir.path());
    assert_eq!(g.len(), 2);
    assert!(g[1] < g[0] && g[1] < 0.03125);
}

#[test]
fn flow_and_atw_gaps_shrink_with_h() {
    let dir = tempfile::tempdir().unwrap();
    let atw = |h: f64, m: f64| format!(r#"{{"kind": "atw", "h": {h}, "M": {m}, "r0": 0.2}}"#);
    let mut runs: Vec<String> = [0.4, 0.2, 0.1]
        .iter()
        .map(|s| disk_run(&format!(r#"{{"kind": "flow", "dt_safety": {s}}}"#), 0.1))
        .collect();
    runs.extend([0.02, 0.01, 0.005].iter().map(|h| disk_run(&atw(*h, 4.0), 0.1)));
    let sweep: Vec<String> = [1.0, 4.0].iter().map(|m| disk_run(&atw(0.005, *m), 0.1)).collect();
    fs::write(dir.path().join("b.json"), bundle(&runs, &sweep)).unwrap();
    let out = nmcf(&["cross-validate", "b.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = gaps(dir.path());
    assert_eq!(g.len(), 5);
    assert!(g[0] / g[1] >= 1.5 && g[1] / g[2] >= 1.5, "{g:?}");
    let table = read_json(&dir.path().join("gaps/gaps.json"));
    assert_eq!(table["monotone"], true);
}

#[test]
fn bundles_with_different_laws_or_shapes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = disk_run(r#"{"kind": "flow"}"#, 0.1);
    let b = disk_run(r#"{"kind": "levelset", "dx": 0.0625}"#, 0.1).replace(r#""B": 1"#, r#""B": 2"#);
    fs::write(dir.path().join("b.json"), bundle(&[a.clone(), b], &[])).unwrap();
    let out = nmcf(&["cross-validate", "b.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("runs[1].law"), "{}", stderr(&out));

    let c = disk_run(r#"{"kind": "levelset", "dx": 0.0625}"#, 0.1).replace("0.5", "0.45");
    fs::write(dir.path().join("c.json"), bundle(&[a.clone(), c], &[])).unwrap();
    let out = nmcf(&["cross-validate", "c.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("initial_shape"));

    fs::write(dir.path().join("d.json"), bundle(&[a], &[])).unwrap();
    assert_eq!(code(&nmcf(&["cross-validate", "d.json"], dir.path())), 2);
}
