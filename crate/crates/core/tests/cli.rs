use imt_neuron::config::{read_dist_file, ExperimentConfig, DEFAULT_CONFIG};
use imt_neuron::fpt::transfer_curve;
use imt_neuron::io::{num, RunManifest, Table};
use imt_neuron::series::SeriesControl;
use imt_neuron::threshold::ThresholdDist;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imt-neuron"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("experiment.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unstable_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DEFAULT_CONFIG.replace("dt = 4e-8", "dt = 4e-6"));
    let out = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability limit"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_label_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["cv-sweep", "--dist", "cauchy"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn empty_threshold_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("empty.txt");
    fs::write(&f, "").unwrap();
    let out = run(&["fit-threshold", f.to_str().unwrap()], dir.path());
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("need at least"));
}

#[test]
fn validation_passes_and_a_corrupted_coefficient_fails_it() {
    let dir = tempfile::tempdir().unwrap();
    let good = run(&["validate", "--out", "good"], dir.path());
    assert_eq!(code(&good), 0, "{}", String::from_utf8_lossy(&good.stdout));
    let bad = run(&["validate", "--out", "bad", "--corrupt-rho2", "1.01"], dir.path());
    assert_eq!(code(&bad), 3);
    let t = Table::read(&dir.path().join("bad/validation.csv")).unwrap();
    let pass = t.column("pass").unwrap();
    assert!(t.rows.iter().any(|r| r[pass] == "false"));
}

#[test]
fn analytic_tables_are_reproducible_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["cv-sweep", "--sigma-t", "6,8", "--dist", "constant,gaussian,ep3", "--out", out]
    };
    assert_eq!(code(&run(&args("a"), dir.path())), 0);
    assert_eq!(code(&run(&args("b"), dir.path())), 0);
    let a = fs::read(dir.path().join("a/cv_sweep.csv")).unwrap();
    let b = fs::read(dir.path().join("b/cv_sweep.csv")).unwrap();
    assert_eq!(a, b);

    let t = Table::read(&dir.path().join("a/cv_sweep.csv")).unwrap();
    assert_eq!(t.rows.len(), 6);
    let status = t.numbers("cv").unwrap();
    let statuses: Vec<&str> = t.rows.iter().map(|r| r[t.column("status").unwrap()].as_str()).collect();
    assert_eq!(statuses.iter().filter(|s| **s == "diverged").count(), 1);
    assert_eq!(status.iter().filter(|v| v.is_some()).count(), 5);

    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "cv-sweep");
    assert_eq!(t.meta_value("config_sha256"), Some(manifest.config_sha256.as_str()));
    for o in &manifest.outputs {
        let bytes = fs::read(dir.path().join("a").join(&o.path)).unwrap();
        assert_eq!(imt_neuron::io::sha256_hex(&bytes), o.sha256);
    }
    let snapshot = ExperimentConfig::parse(&manifest.config, Path::new(".")).unwrap();
    assert_eq!(snapshot.seed, ExperimentConfig::builtin().seed);
}

#[test]
fn simulation_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| vec!["simulate", "--vgs", "1.84", "--seed", "5", "--out", out];
    assert_eq!(code(&run(&args("a"), dir.path())), 0);
    assert_eq!(code(&run(&args("b"), dir.path())), 0);
    for f in ["trace.csv", "spikes.txt"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f} differs");
    }
    let trace = Table::read(&dir.path().join("a/trace.csv")).unwrap();
    assert!(trace.rows.len() > 1000);
    let spikes = fs::read_to_string(dir.path().join("a/spikes.txt")).unwrap();
    assert!(spikes.lines().filter(|l| !l.starts_with('#')).count() > 100);
}

#[test]
fn fitted_threshold_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    // Deterministic quasi-Gaussian samples: inverse normal CDF on a grid.
    let normal = statrs::distribution::Normal::new(1.6, 0.06).unwrap();
    let mut files = Vec::new();
    for g in 0..3 {
        let text: String = (0..300)
            .map(|i| {
                let u = (i as f64 + 0.5 + 0.1 * g as f64) / 300.3;
                format!("{}\n", num(statrs::distribution::ContinuousCDF::inverse_cdf(&normal, u)))
            })
            .collect();
        let f = dir.path().join(format!("group{g}.txt"));
        fs::write(&f, text).unwrap();
        files.push(f.to_str().unwrap().to_string());
    }
    let mut args = vec!["fit-threshold"];
    args.extend(files.iter().map(String::as_str));
    let out = run(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("consistent"));
    match read_dist_file(&dir.path().join("out/fitted_threshold.toml")).unwrap() {
        ThresholdDist::Gaussian { mean, std } => {
            assert!((mean - 1.6).abs() < 2e-3);
            assert!((std - 0.06).abs() < 3e-3);
        }
        other => panic!("expected a Gaussian, got {other:?}"),
    }
    let groups = Table::read(&dir.path().join("out/threshold_groups.csv")).unwrap();
    assert_eq!(groups.rows.len(), 3);
}

#[test]
fn measured_curve_ranks_its_own_model_first() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::builtin();
    let circuit = cfg.circuit().unwrap();
    let grid: Vec<f64> = (0..7).map(|i| 1.80 + 0.01 * i as f64).collect();
    let ep3 = ThresholdDist::exp_power_with_std(1.6, 0.0584, 3.0).unwrap();
    let model = transfer_curve(&circuit, &grid, 4.0 * cfg.noise.sigma_t_unit, &ep3, &SeriesControl::default());
    let mut measured = Table::new(["v_gs", "rate_hz"]);
    for (i, p) in model.iter().enumerate() {
        // A few percent of deterministic scatter.
        let wobble = 1.0 + 0.03 * if i % 2 == 0 { 1.0 } else { -1.0 };
        measured.push(vec![num(p.v_gs), num(p.rate.clone().unwrap() * wobble)]);
    }
    measured.write(&dir.path().join("measured.csv")).unwrap();
    let text = DEFAULT_CONFIG
        .replace("v_gs = { start = 1.76, stop = 1.86, step = 0.005 }", "v_gs = { start = 1.80, stop = 1.86, step = 0.01 }")
        .replace("sigma_t = [4.0, 5.0, 6.0, 7.0, 8.0]", "sigma_t = [4.0, 6.0, 8.0]")
        + "\n[measured]\ntransfer_curve = \"measured.csv\"\n";
    let cfg_path = write_config(dir.path(), &text);
    let out = run(&["transfer-curve", "--config", &cfg_path], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ranking = Table::read(&dir.path().join("out/transfer_curve_ranking.csv")).unwrap();
    let first = &ranking.rows[0];
    assert_eq!(first[ranking.column("dist").unwrap()], "ep3");
    assert_eq!(first[ranking.column("sigma_t").unwrap()].parse::<f64>().unwrap(), 4.0);
    let curve = Table::read(&dir.path().join("out/transfer_curve.csv")).unwrap();
    assert_eq!(curve.rows.len(), 7 * 3 * 3);
}
