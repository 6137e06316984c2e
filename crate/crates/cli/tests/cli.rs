use std::path::Path;
use std::process::{Command, Output};

fn decolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decolab"))
        .args(args)
        .env("DECOLAB_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

const QUBIT: &str = r#"{
  "hamiltonian": [[[0,0],[0,0]],[[0,0],[0,0]]],
  "channels": [{"operator": [[[1,0],[0,0]],[[0,0],[-1,0]]], "gamma": 1.0}],
  "initial": [[0.7071067811865476,0],[0.7071067811865476,0]],
  "dt": 0.001, "t_end": 0.5, "n_traj": 200, "seed": 11, "record_every": 100
}"#;

#[test]
fn simulate_writes_comparison_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("qubit.json");
    std::fs::write(&cfg, QUBIT).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = decolab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(a.join("ensemble_vs_master.csv")).unwrap();
    assert!(text.starts_with("t,re_rho01_ens,re_rho01_det,"));
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(std::fs::read_to_string(a.join("convergence.csv")).unwrap().starts_with("n_traj,"));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["seed"], 11);
}

#[test]
fn simulate_rejects_empty_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("zero.json");
    std::fs::write(&cfg, QUBIT.replace("\"n_traj\": 200", "\"n_traj\": 0")).unwrap();
    let o = decolab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_traj"));
}

#[test]
fn fit_sdf1_and_ddf1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sdf1");
    let o = decolab(&["fit", "--model", "sdf1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(v["model"], "SDF1");
    assert_eq!(v["n_f"], 3);
    let phi = v["params"].as_array().unwrap().iter().find(|p| p["name"] == "phi").unwrap();
    assert!(phi["value"].as_f64().unwrap() < 1.0);
    assert!(phi["err_rescaled"].is_number());
    assert_eq!(v["significance"].as_array().unwrap().len(), 2);
    let m = manifest(&out);
    assert_eq!(m["dataset_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);

    let out = tmp.path().join("ddf1");
    let o = decolab(&["fit", "--model", "ddf1", "--freeze", "phi=0.881", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(v["n_f"], 2);
    assert_eq!(v["phi_frozen"], 0.881);
}

#[test]
fn fit_usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&decolab(&["fit", "--model", "nope", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&decolab(&["fit", "--model", "ddf1", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&decolab(&["fit", "--model", "sdf1", "--freeze", "x=1", "--out", out.to_str().unwrap()])), 2);
    let bad = tmp.path().join("bad.csv");
    std::fs::write(
        &bad,
        "experiment,kind,class,sqrt_s_gev,value_mb,err_stat,err_syst,err_lo,err_hi,include,note\nX,SD,A,10,-1,0.1,0,,,true,\n",
    )
    .unwrap();
    let o = decolab(&["fit", "--model", "sdc1", "--data", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn dyson_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = decolab(&["dyson", "--gamma", "1", "--detuning", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out.join("gain_surface.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let phi: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    assert!((phi - 0.2).abs() < 1e-15);

    let out = tmp.path().join("zeno");
    let o = decolab(&["dyson", "--gamma", "0.25:4:16", "--detuning", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let phis: Vec<f64> = std::fs::read_to_string(out.join("gain_surface.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let peak = phis.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert!(peak > 0 && peak < phis.len() - 1);
    assert!(phis[..=peak].windows(2).all(|w| w[1] >= w[0]));
    assert!(phis[peak..].windows(2).all(|w| w[1] <= w[0]));

    assert_eq!(code(&decolab(&["dyson", "--gamma", "3:1:4", "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn symcheck_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, spec: &str| {
        let p = tmp.path().join(format!("{name}.json"));
        std::fs::write(&p, spec).unwrap();
        let out = tmp.path().join(name);
        let o = decolab(&["symcheck", "--spec", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        (o, out)
    };
    let family = r#""basis":{"pairs":1},"energies":[0.2,0.2],"channels":[{"amplitudes":[1,0],"gamma":0.4},{"amplitudes":[0,1],"gamma":0.4}]"#;
    let (o, out) = run("cp", &format!(r#"{{"kind":"cp",{family}}}"#));
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);

    let (o, out) = run("cpt", &format!(r#"{{"kind":"cpt",{family}}}"#));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("channel 0"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], false);

    let (o, _) = run("bad", r#"{"kind":"cpt","basis":{"pairs":1},"channels":[{"amplitudes":[1,0,2],"gamma":0.4}]}"#);
    assert_eq!(code(&o), 2);
    let (o, _) = run("garbage", "{not json");
    assert_eq!(code(&o), 2);
}
