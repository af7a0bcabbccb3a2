use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynphasor::io::{RunManifest, Table};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynphasor"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    toml::from_str(&std::fs::read_to_string(dir.join("manifest.toml")).unwrap()).unwrap()
}

#[test]
fn modes_reports_sso() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("modes.csv");
    let o = run(&["modes", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("re,im,freq_hz,zeta_pct,participation"));
    assert!(stderr(&o).contains("Hz"), "{}", stderr(&o));
}

#[test]
fn flat_simulation_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("flat.toml");
    std::fs::write(&sc, "duration = 0.2\nsample_period = 0.01\nrecord = [\"p:tie\"]\n").unwrap();
    let out = dir.path().join("run");
    let o = run(&["simulate", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::read(&out.join("trajectory.csv")).unwrap();
    assert_eq!(t.names, ["time", "p:tie"]);
    assert_eq!(t.rows(), 21);
    let p = t.column("p:tie").unwrap();
    assert!(p.iter().all(|v| (v - p[0]).abs() < 1e-6));
    let m = manifest(&out);
    assert_eq!(m.command, "simulate");
    assert!(m.outputs.contains_key("trajectory.csv"));
    assert_eq!(m.solver.unwrap().rtol, 1e-3);
}

#[test]
fn bode_and_impact() {
    let dir = tempfile::tempdir().unwrap();
    let bode = dir.path().join("bode/bode.csv");
    let o =
        run(&["bode", "--input", "p_dc:DC7", "--output", "p:tie", "--points", "50", "--out", bode.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::read(&bode).unwrap();
    assert_eq!(t.rows(), 50);
    assert_eq!(t.names, ["omega", "mag:p_dc:DC7->p:tie", "phase:p_dc:DC7->p:tie"]);
    assert!(manifest(bode.parent().unwrap()).outputs.contains_key("bode.csv"));
    let impact = dir.path().join("impact.csv");
    let o = run(&["impact", "--output", "p:tie", "--pll-bw", "15", "--out", impact.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&impact).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.contains("p_dc:DC7") && text.contains("p_dc:DC9"));
}

#[test]
fn prony_recovers_synthetic_mode() {
    let dir = tempfile::tempdir().unwrap();
    let t: Vec<f64> = (0..2000).map(|k| k as f64 * 1e-3).collect();
    let y: Vec<f64> = t.iter().map(|t| 1.0 + (-0.5 * t).exp() * (2.0 * std::f64::consts::PI * 6.0 * t).cos()).collect();
    let csv = dir.path().join("traj.csv");
    Table::new(vec!["time".into(), "y".into()], vec![t, y]).unwrap().write(&csv).unwrap();
    let out = dir.path().join("prony.csv");
    let o = run(&[
        "prony",
        "--csv",
        csv.to_str().unwrap(),
        "--channel",
        "y",
        "--t0",
        "0.1",
        "--t1",
        "1.9",
        "--order",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = Table::read(&out).unwrap();
    let f = table.column("freq_hz").unwrap();
    let z = table.column("zeta_pct").unwrap();
    let k = f.iter().position(|f| (f - 6.0).abs() < 1e-3).expect("6 Hz component");
    let zeta = 0.5 / (0.25f64 + (2.0 * std::f64::consts::PI * 6.0).powi(2)).sqrt();
    assert!((z[k] - 100.0 * zeta).abs() < 1e-2, "{} vs {}", z[k], 100.0 * zeta);
}

#[test]
fn design_then_simulate_with_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design");
    let o = run(&["design", "--spec", data("design.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["K_IBR2.toml", "K_IBR1.toml", "stages.csv", "modes_open_loop.csv", "modes_closed_loop.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let sc = dir.path().join("flat.toml");
    std::fs::write(&sc, "duration = 0.1\nsample_period = 0.01\nrecord = [\"p:tie\"]\n").unwrap();
    let run_dir = dir.path().join("run");
    let o = run(&[
        "simulate",
        "--scenario",
        sc.to_str().unwrap(),
        "--controller",
        out.join("K_IBR2.toml").to_str().unwrap(),
        "--controller",
        out.join("K_IBR1.toml").to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = Table::read(&run_dir.join("trajectory.csv")).unwrap();
    let p = p.column("p:tie").unwrap();
    assert!(p.iter().all(|v| (v - p[0]).abs() < 1e-6), "controllers disturb the equilibrium");
}

#[test]
fn batch_runs_each_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for name in ["a", "b"] {
        let p = dir.path().join(format!("{name}.toml"));
        std::fs::write(&p, "duration = 0.05\nsample_period = 0.01\nrecord = [\"p:tie\"]\n").unwrap();
        paths.push(p);
    }
    let out = dir.path().join("out");
    let o = run(&[
        "batch",
        "--scenarios",
        paths[0].to_str().unwrap(),
        paths[1].to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("a/trajectory.csv").exists() && out.join("b/trajectory.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nbase_mva = \"x\"\n").unwrap();
    let o = run(&["modes", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("bad.toml"), "{}", stderr(&o));
    let o = run(&["modes", "--pll-bw", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["prony", "--csv", "/nonexistent.csv", "--channel", "y", "--t0", "0", "--t1", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn voltage_collapse_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("collapse.toml");
    std::fs::write(
        &sc,
        "duration = 0.5\nsample_period = 0.01\nrecord = [\"p:tie\"]\n\n[[event]]\ntime = 0.05\nkind = \"dc_pulse\"\n\
         input = \"p_dc:DC7\"\nsignal = { type = \"constant\", value = 200.0 }\n",
    )
    .unwrap();
    let o = run(&["simulate", "--scenario", sc.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
