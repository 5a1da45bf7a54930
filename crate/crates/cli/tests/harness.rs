use std::fs;
use std::path::Path;
use std::process::Command;

use bdl_harness::plot::{emit_plot_data, PlotKind};
use bdl_harness::{replay, run_experiment, Config, ExperimentKind, HarnessError, RunManifest, MANIFEST};

const OCCUPATION: &str = r#"
schema_version = 1
seed = 11
[occupation]
lambda = 1.0
beta = 1.0
rho_ratio = 2.0
lengths = [60.0, 120.0]
realizations = 3
"#;

const FK: &str = r#"
schema_version = 1
seed = 5
[fk]
lambda = 1.0
beta = 1.0
mu = -0.5
paths = 100
n_steps = 64
tol = 1e-4
epsilon = [0.2, 1.0]
laplace_t = [1.0]
"#;

const SWEEP: &str = r#"
schema_version = 1
seed = 3
[thermo]
lambda = 1.0
beta = 1.0
rho_ratio = 0.5
length = 50.0
realizations = 2
[sweep]
base = "thermo"
lengths = [40.0, 60.0]
rho_ratios = [0.5, 1.0, 2.0]
"#;

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = Config::parse(OCCUPATION).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&cfg, ExperimentKind::Occupation, a.path()).unwrap();
    run_experiment(&cfg, ExperimentKind::Occupation, b.path()).unwrap();
    for o in &ma.outputs {
        assert_eq!(read(a.path(), &o.path), read(b.path(), &o.path), "{}", o.path);
    }
    assert_eq!(ma.derived_seeds.len(), 6);
}

#[test]
fn different_seed_changes_output() {
    let mut cfg = Config::parse(OCCUPATION).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, ExperimentKind::Occupation, a.path()).unwrap();
    cfg.seed = 12;
    run_experiment(&cfg, ExperimentKind::Occupation, b.path()).unwrap();
    assert_ne!(read(a.path(), "realizations.csv"), read(b.path(), "realizations.csv"));
}

#[test]
fn zero_realizations_rejected_without_output() {
    let cfg = Config::parse(&OCCUPATION.replace("realizations = 3", "realizations = 0")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let err = run_experiment(&cfg, ExperimentKind::Occupation, &out).unwrap_err();
    assert!(matches!(err, HarnessError::Validation(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("occupation.realizations"));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_rejected() {
    let err = Config::parse(&format!("{OCCUPATION}\nwindow_sclae = 3.0\n")).unwrap_err();
    assert!(matches!(err, HarnessError::Validation(_)));
    assert!(Config::parse("schema_version = 1\nfoo = 1\n").is_err());
}

#[test]
fn wrong_schema_version_rejected() {
    let err = Config::parse(&OCCUPATION.replace("schema_version = 1", "schema_version = 9")).unwrap_err();
    assert!(err.to_string().contains("schema_version"));
}

#[test]
fn missing_section_rejected() {
    let cfg = Config::parse(OCCUPATION).unwrap();
    assert!(matches!(cfg.validate(ExperimentKind::Fk), Err(HarnessError::Validation(_))));
}

#[test]
fn config_round_trips() {
    for text in [OCCUPATION, FK, SWEEP] {
        let cfg = Config::parse(text).unwrap();
        let again = Config::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg.to_toml(), again.to_toml());
    }
}

#[test]
fn manifest_replays() {
    let cfg = Config::parse(FK).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let m = run_experiment(&cfg, ExperimentKind::Fk, &run).unwrap();
    let loaded = RunManifest::load(&run.join(MANIFEST)).unwrap();
    assert!(loaded.verify(&run));
    assert_eq!(loaded.outputs.len(), m.outputs.len());
    let bad = replay(&loaded, &dir.path().join("again")).unwrap();
    assert!(bad.is_empty(), "{bad:?}");

    fs::write(run.join("fk.csv"), "tampered\n").unwrap();
    assert!(!loaded.verify(&run));
}

#[test]
fn sweep_resumes_and_skips_finished_points() {
    let cfg = Config::parse(SWEEP).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    run_experiment(&cfg, ExperimentKind::Sweep, &out).unwrap();
    let first = read(&out, "sweep.csv");
    let points: Vec<_> = fs::read_dir(out.join("points")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(points.len(), 6);

    // remove one finished point; the rest must be reused untouched
    let mut stamps: Vec<_> = points
        .iter()
        .map(|p| (p.clone(), fs::metadata(p.join(MANIFEST)).unwrap().modified().unwrap()))
        .collect();
    stamps.sort();
    fs::remove_dir_all(&stamps[0].0).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    run_experiment(&cfg, ExperimentKind::Sweep, &out).unwrap();
    assert_eq!(read(&out, "sweep.csv"), first);
    assert!(stamps[0].0.join(MANIFEST).exists());
    for (p, t) in &stamps[1..] {
        assert_eq!(fs::metadata(p.join(MANIFEST)).unwrap().modified().unwrap(), *t);
    }
}

#[test]
fn plot_columns_are_labelled() {
    let cfg = Config::parse(FK).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, ExperimentKind::Fk, dir.path()).unwrap();
    let path = emit_plot_data(dir.path(), PlotKind::Fk).unwrap();
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains("# columns: epsilon F F_se"));
    let data: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    assert!(data.iter().all(|l| l.split(' ').count() == 3));
    assert!(emit_plot_data(dir.path(), PlotKind::Ids).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bdl");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, OCCUPATION.replace("realizations = 3", "realizations = 0")).unwrap();
    let status = Command::new(bin)
        .args(["occupation", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let good = dir.path().join("fk.toml");
    fs::write(&good, FK).unwrap();
    let status = Command::new(bin)
        .args(["fk", "--seed", "9", "--jobs", "1", "--config"])
        .arg(&good)
        .env("BDL_OUT", dir.path().join("env_out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let m = RunManifest::load(&dir.path().join("env_out").join(MANIFEST)).unwrap();
    assert_eq!(m.seed, 9);
}
