use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pricing_lab::config::ExperimentConfig;

const CONFIG: &str = r#"{
  "problem": {
    "d1": 3, "d2": 1, "noise_r": 1.0, "alpha_max": 1.5, "beta_max": 1.5,
    "sampler": { "x_lo": 43.3, "x_hi": 72.2, "y_lo": 80.0, "y_hi": 120.0 }
  },
  "offline": { "n": 200, "v_true": 0.25 },
  "policies": [
    { "kind": "co3", "v_factor": 1.1 },
    { "kind": "ucb" },
    { "kind": "ts_offline" }
  ],
  "run": { "horizon": 60, "reps": 5, "seed": 3, "grid_size": 64, "delta_mc_samples": 500 }
}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pricing-lab"));
    c.env_remove("PRICING_LAB_THREADS");
    c
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn missing_config_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = bin().args(["run", "--config"]).arg(&missing).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(missing.to_str().unwrap()));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"seed\": 3", "\"seed\": 3, \"speed\": 9"));
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["repro", "fig9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Parses, but beta'y is positive on the support.
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("\"y_lo\": 80.0, \"y_hi\": 120.0", "\"y_lo\": -120.0, \"y_hi\": -80.0"),
    );
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(matches!(out.status.code(), Some(2) | Some(3)));
    // A file where the output directory should go.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&blocker).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn same_seed_is_byte_identical_and_threads_do_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        ok(bin().args(["run", "--threads", threads, "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap());
        out
    };
    let (a, b, c) = (run("a", "1"), run("b", "1"), run("c", "8"));
    for f in ["traces.csv", "aggregate.csv", "manifest.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
        assert_eq!(read(a.join(f)), read(c.join(f)), "{f}");
    }
    let env_threads = dir.path().join("d");
    ok(bin()
        .env("PRICING_LAB_THREADS", "3")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&env_threads)
        .output()
        .unwrap());
    assert_eq!(read(a.join("aggregate.csv")), read(env_threads.join("aggregate.csv")));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&a).output().unwrap());
    ok(bin().args(["run", "--seed", "4", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap());
    assert_ne!(read(a.join("traces.csv")), read(b.join("traces.csv")));
    let m: serde_json::Value = serde_json::from_str(&read(b.join("manifest.json"))).unwrap();
    assert_eq!(m["config"]["run"]["seed"], 4);
}

#[test]
fn output_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("o");
    ok(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap());
    let traces = read(out.join("traces.csv"));
    assert_eq!(traces.lines().next().unwrap(), "policy,rep,t,instant_regret,cum_regret");
    assert_eq!(traces.lines().count(), 1 + 3 * 5 * 60);
    let agg = read(out.join("aggregate.csv"));
    assert_eq!(agg.lines().next().unwrap(), "policy,t,mean_cum_regret,band_low,band_high");
    assert_eq!(agg.lines().count(), 1 + 3 * 60);
    for line in agg.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        assert!(f[1] <= f[0] && f[0] <= f[2], "{line}");
    }
}

#[test]
fn manifest_round_trips_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    ok(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&a).output().unwrap());
    let m: serde_json::Value = serde_json::from_str(&read(a.join("manifest.json"))).unwrap();
    let resolved = serde_json::to_string(&m["config"]).unwrap();
    assert_eq!(ExperimentConfig::from_json(&resolved).unwrap(), ExperimentConfig::from_json(CONFIG).unwrap());
    assert_eq!(m["v_true"], 0.25);
    let reps = m["reps"].as_array().unwrap();
    assert_eq!(reps.len(), 5);
    assert!(reps[0]["offline_lam_min"].as_f64().unwrap() > 0.0);
    assert!(reps[0]["delta_sq"]["std_err"].as_f64().unwrap() >= 0.0);
    let cfg2 = write_config(&dir.path().join("a"), &resolved);
    let b = dir.path().join("b");
    ok(bin().args(["run", "--config"]).arg(&cfg2).arg("--out").arg(&b).output().unwrap());
    assert_eq!(read(a.join("traces.csv")), read(b.join("traces.csv")));
}

#[test]
fn single_point_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = dir.path().join("run");
    let sweep = dir.path().join("sweep");
    ok(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&run).output().unwrap());
    ok(bin().args(["sweep", "--grid", "0.0625", "--config"]).arg(&cfg).arg("--out").arg(&sweep).output().unwrap());
    let csv = read(sweep.join("sweep.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "policy,v_true_sq,mean_final_regret,std_final_regret");
    let agg = read(run.join("aggregate.csv"));
    for row in lines {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], "0.0625");
        let last = agg.lines().rfind(|l| l.starts_with(&format!("{},", f[0]))).unwrap();
        let mean: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(mean, f[2].parse::<f64>().unwrap(), "{}", f[0]);
    }
}

#[test]
fn power_grid_has_ten_points_recorded_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("\"reps\": 5", "\"reps\": 1").replace("\"horizon\": 60", "\"horizon\": 20"),
    );
    let out = dir.path().join("s");
    ok(bin().args(["sweep", "--grid", "T^{-n/5}:0..9", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap());
    let csv = read(out.join("sweep.csv"));
    let ucb: Vec<f64> =
        csv.lines().filter(|l| l.starts_with("ucb,")).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ucb.len(), 10);
    for (n, v) in ucb.iter().enumerate() {
        assert_eq!(*v, 20f64.powf(-(n as f64) / 5.0));
    }
}

#[test]
fn repro_configs_match_the_experiment_protocol() {
    use pricing_lab::policy::PolicyKind;
    use pricing_lab::repro::{self, Figure};
    use pricing_lab::sim;

    let a = repro::config(Figure::Fig2a).unwrap();
    assert_eq!((a.problem.d2, a.run.horizon, a.run.reps), (1, 1000, 20));
    let ratios: Vec<f64> = sim::policy_records(&a, 0.1).iter().filter_map(|r| r.v_ratio).collect();
    assert_eq!(ratios, vec![1.1, 10.0]);
    let kinds: Vec<PolicyKind> = a.policies.iter().map(|p| p.kind).collect();
    for k in [PolicyKind::Co3, PolicyKind::Ucb, PolicyKind::UcbOffline, PolicyKind::Ts, PolicyKind::TsOffline] {
        assert!(kinds.contains(&k));
    }

    let b = repro::config(Figure::Fig2b).unwrap();
    assert_eq!(b.problem.d2, 5);
    assert!(b.policies.iter().any(|p| p.kind == PolicyKind::Gco3));
    assert!(!b.policies.iter().any(|p| p.kind == PolicyKind::Co3));

    let c = repro::config(Figure::Fig2c).unwrap();
    assert_eq!((c.run.horizon, c.run.reps), (5000, 20));
    assert_eq!(c.policies[0].alpha_exp, Some(0.25));
    assert_eq!(sim::parse_grid(repro::FIG2C_GRID, c.run.horizon).unwrap().len(), 10);
}

#[test]
fn repro_fig2a_writes_manifest_with_both_bounds() {
    let dir = tempfile::tempdir().unwrap();
    ok(bin().args(["repro", "fig2a", "--out"]).arg(dir.path()).output().unwrap());
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("fig2a/manifest.json"))).unwrap();
    let ratios: Vec<f64> = m["policies"].as_array().unwrap().iter().filter_map(|p| p["v_ratio"].as_f64()).collect();
    assert_eq!(ratios, vec![1.1, 10.0]);
}
