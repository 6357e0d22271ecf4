use std::process::{Command, Output};

use serde_json::Value;

fn circpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circpc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn pc_density_csv() {
    let o =
        circpc(&["pc-density", "--family", "vm", "--base", "uniform", "--lambda", "1", "--grid", "0:10:200"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,pdf,cdf"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[0], vec![0.0, 0.5, 0.0]);
    assert_eq!(rows[199][0], 10.0);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
}

#[test]
fn calibrate_json() {
    let o = circpc(&["calibrate", "--family", "wc", "--U", "0.6", "--alpha", "0.3"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["method"], "closed_form");
    assert!((v["roundtrip_alpha"].as_f64().unwrap() - 0.3).abs() < 1e-8);
    assert!(v["lambda"].as_f64().unwrap() > 0.0);

    let o =
        circpc(&["calibrate", "--family", "vm", "--base", "point-mass", "--U", "1.5708", "--alpha", "0.4"]);
    let v = json(&o);
    assert_eq!(v["method"], "numeric");
    assert!((v["roundtrip_alpha"].as_f64().unwrap() - 0.4).abs() < 1e-8);
}

#[test]
fn infeasible_calibration_is_a_runtime_error() {
    let o =
        circpc(&["calibrate", "--family", "vm", "--base", "point-mass", "--U", "1.5708", "--alpha", "0.9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("attainable"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(circpc(&["sample", "--family", "vm", "--n", "3"]).status.code(), Some(2));
    assert_eq!(circpc(&["pc-density", "--family", "vm", "--grid", "0:1:3"]).status.code(), Some(2));
    assert_eq!(
        circpc(&["pc-density", "--family", "vm", "--lambda", "1", "--grid", "1:0:3"]).status.code(),
        Some(2)
    );
    assert_eq!(circpc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(circpc(&["--help"]).status.code(), Some(0));
}

#[test]
fn sample_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("wind.csv");
    let data_s = data.to_str().unwrap();
    let o = circpc(&[
        "sample",
        "--family",
        "vm",
        "--mu",
        "1",
        "--concentration",
        "2",
        "--n",
        "200",
        "--seed",
        "3",
        "--out",
        data_s,
    ]);
    assert!(o.status.success());
    let again = dir.path().join("again.csv");
    circpc(&[
        "sample",
        "--family",
        "vm",
        "--mu",
        "1",
        "--concentration",
        "2",
        "--n",
        "200",
        "--seed",
        "3",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&again).unwrap());

    let o = circpc(&[
        "fit",
        "--family",
        "vm",
        "--data",
        data_s,
        "--prior",
        "pc-uniform",
        "--U",
        "1.5708",
        "--alpha-from-data",
        "--seed",
        "1",
        "--iterations",
        "4000",
        "--burn-in",
        "1000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let mean = v["summary"]["concentration_mean"].as_f64().unwrap();
    assert!(mean > 1.4 && mean < 2.7, "{mean}");
    let alpha = v["tail"]["alpha"].as_f64().unwrap();
    assert!(alpha > 0.0 && alpha < 1.0);
    let chain = std::fs::read_to_string(v["chain_csv"].as_str().unwrap()).unwrap();
    assert!(chain.starts_with("iter,mu,concentration\n1001,"));
    assert_eq!(chain.lines().count(), 3001);
}

#[test]
fn fit_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "angle_rad\n0.1\n0.3\n6.1\n0.2\n").unwrap();
    let cfg = dir.path().join("fit.json");
    std::fs::write(
        &cfg,
        r#"{"model":{"family":"wc","prior":{"prior":"reference","kind":"beta","a":1.0,"b":1.0}},
            "mcmc":{"iterations":3000,"burn_in":1000}}"#,
    )
    .unwrap();
    let out = dir.path().join("chain.csv");
    let o = circpc(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--seed",
        "2",
        "--chain-out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["summary"]["draws"], 2000);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2001);
}

#[test]
fn fit_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "degrees\n10\n").unwrap();
    let o =
        circpc(&["fit", "--family", "vm", "--data", data.to_str().unwrap(), "--prior", "h2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = circpc(&["fit", "--family", "vm", "--data", "/no/such/file.csv", "--prior", "h2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&data, "angle_rad\n1\n").unwrap();
    let o = circpc(&[
        "fit",
        "--family",
        "vm",
        "--data",
        data.to_str().unwrap(),
        "--prior",
        "beta",
        "--a",
        "1",
        "--b",
        "1",
        "--seed",
        "1",
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn distance_and_reference_density() {
    let o = circpc(&["distance", "--family", "wc", "--grid", "0:0.5:3"]);
    let text = stdout(&o);
    assert!(text.starts_with("param,distance,derivative\n0,0,1\n"));
    let o =
        circpc(&["ref-density", "--family", "vm", "--prior", "h3", "--base", "uniform", "--grid", "0:1:2"]);
    assert!(stdout(&o).starts_with("distance,pdf\n0,0\n"));
    let o = circpc(&["ref-density", "--family", "vm", "--prior", "gamma", "--b", "2", "--grid", "0:1:2"]);
    assert_eq!(stdout(&o), "param,pdf\n0,2\n1,0.2706705664732254\n");
    let o = circpc(&["ref-density", "--family", "wc", "--prior", "h2", "--grid", "0:1:2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn audit_json() {
    let o = circpc(&["audit", "--family", "vm", "--base", "uniform", "--prior", "h2"]);
    let v = json(&o);
    assert_eq!(v["report"]["classification"], "base-model-favoring");
    let o = circpc(&["audit", "--family", "vm", "--base", "point-mass", "--prior", "pc", "--lambda", "1.26"]);
    let v = json(&o);
    assert_eq!(v["report"]["classification"], "base-model-favoring");
    let o = circpc(&["audit", "--family", "wc", "--prior", "beta", "--a", "2", "--b", "2"]);
    assert_eq!(json(&o)["report"]["classification"], "complexity-favoring");
}

#[test]
fn simulate_small_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    std::fs::write(
        &cfg,
        r#"{"family":"cardioid","truths":[0.2],"sample_sizes":[40],"replicates":3,
            "priors":[{"kind":"pc","base":"uniform","U":0.5,"alphas":[0.3]},{"kind":"fixed","prior":{"kind":"uniform-half"}}],
            "mcmc":{"iterations":1500,"burn_in":500}}"#,
    )
    .unwrap();
    let run = |workers: &str| {
        let o =
            circpc(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "520", "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let a = run("1");
    assert_eq!(a, run("2"));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "prior,hyper,truth,N,post_mean_avg,post_mean_sd,cells_failed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("pc-uniform,0.3,0.2,40,"));
    assert!(lines[2].starts_with("uniform-half,-,0.2,40,"));
    assert_eq!(circpc(&["simulate", "--family", "vm"]).status.code(), Some(2));
}
