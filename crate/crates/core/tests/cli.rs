use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gasket_qw::cli::{CliError, RunManifest, EXIT_CAP, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, MANIFEST_FILE};
use tempfile::TempDir;

fn gasket_qw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasket-qw"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("GASKET_QW_WORKERS")
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::read(&dir.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn simulate_writes_one_row_per_step() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let res = gasket_qw(&["simulate", "--g", "4", "--bc", "reflective", "--start", "16,0", "--steps", "16"], &out);
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_csv(&out.join("sigma.csv"));
    assert_eq!(rows[0], ["t", "sigma_x", "sigma_y", "sigma"]);
    assert_eq!(rows.len() - 1, 17);
    assert_eq!(rows[1][0], "0");
    assert_eq!(rows[17][0], "16");
    let m = manifest(&out);
    assert_eq!(m.config.steps, Some(16));
    assert!(m.artifacts.contains(&"fit.csv".to_string()));
}

#[test]
fn verify_passes_at_generation_two() {
    let tmp = TempDir::new().unwrap();
    let res = gasket_qw(&["verify", "--g", "2"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_csv(&tmp.path().join("verify.csv"));
    assert_eq!(rows[0], ["check", "boundary", "value", "tolerance", "pass"]);
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    for check in ["unitarity", "shift_involution", "sparse_vs_dense", "time_average_vs_spectral"] {
        assert_eq!(names.iter().filter(|n| **n == check).count(), 2, "{check}");
    }
    assert!(rows[1..].iter().all(|r| r[4] == "true"));
}

#[test]
fn limiting_marginal_is_normalized() {
    let tmp = TempDir::new().unwrap();
    let res = gasket_qw(&["limiting", "--g", "4", "--bc", "periodic", "--start", "16,0"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_csv(&tmp.path().join("limiting_x.csv"));
    assert_eq!(rows[0], ["x", "p"]);
    let total: f64 = rows[1..].iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
    let full = read_csv(&tmp.path().join("limiting.csv"));
    assert_eq!(full.len() - 1, 123);
    assert!(manifest(tmp.path()).notes.iter().any(|n| n.contains("spectral")));
}

#[test]
fn identical_configs_give_identical_csvs_and_replay_reproduces_them() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let args = ["tvd", "--g", "3", "--horizon", "400", "--start", "8,0"];
    assert_eq!(gasket_qw(&args, &a).status.code(), Some(EXIT_OK));
    assert_eq!(gasket_qw(&args, &b).status.code(), Some(EXIT_OK));
    assert_eq!(csv_files(&a), csv_files(&b));
    assert_eq!(csv_files(&a).len(), 2);

    let manifest_path = a.join(MANIFEST_FILE);
    let res = Command::new(env!("CARGO_BIN_EXE_gasket-qw"))
        .args(["replay", manifest_path.to_str().unwrap(), "--out", c.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(csv_files(&a), csv_files(&c));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.json");
    fs::write(&config, r#"{"generation": 3, "boundary": "reflective", "start": "8,0", "steps": 4}"#).unwrap();
    let out = tmp.path().join("out");
    let res = gasket_qw(&["simulate", "--config", config.to_str().unwrap(), "--steps", "8"], &out);
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read_csv(&out.join("sigma.csv")).len() - 1, 9);
    let m = manifest(&out);
    assert_eq!(m.config.generation, 3);
    assert_eq!(m.config.steps, Some(8));
}

#[test]
fn invalid_configuration_exits_with_field_message() {
    let tmp = TempDir::new().unwrap();
    let res = gasket_qw(&["simulate", "--g", "4", "--start", "1,0"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&res.stderr).contains("start"));

    let res = gasket_qw(&["mixing", "--g", "3", "--eps", "0.5,2"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&res.stderr).contains("epsilons"));

    let config = tmp.path().join("bad.json");
    fs::write(&config, r#"{"generatoin": 3}"#).unwrap();
    let res = gasket_qw(&["simulate", "--config", config.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_CONFIG));

    let res = gasket_qw(&["simulate", "--bc", "sideways"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn dense_cap_is_reported_with_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let res = gasket_qw(&["verify", "--g", "3", "--cap", "50"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_CAP));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cap"));
    assert_eq!(CliError::Verification(vec!["x".into()]).exit_code(), EXIT_VERIFY);
}

#[test]
fn limiting_falls_back_to_time_average_above_the_cap() {
    let tmp = TempDir::new().unwrap();
    let res = gasket_qw(&["limiting", "--g", "3", "--cap", "50", "--limit-horizon", "2000"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    let notes = manifest(tmp.path()).notes;
    assert!(notes.iter().any(|n| n.contains("T=2000")), "{notes:?}");
}

#[test]
fn sweep_is_reproducible_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &Path, workers: &str| {
        let res = Command::new(env!("CARGO_BIN_EXE_gasket-qw"))
            .args(["sweep", "--g", "4", "--out", dir.to_str().unwrap()])
            .env("GASKET_QW_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    };
    let (one, three) = (tmp.path().join("one"), tmp.path().join("three"));
    run(&one, "1");
    run(&three, "3");
    assert_eq!(csv_files(&one), csv_files(&three));
    assert_eq!(manifest(&three).config.workers, Some(3));
    let per_vertex = read_csv(&one.join("per_vertex.csv"));
    assert_eq!(per_vertex[0], ["x", "y", "a", "exponent", "residual"]);
    assert_eq!(per_vertex.len() - 1, 123);
    let hist = read_csv(&one.join("histogram.csv"));
    let counted: usize = hist[1..].iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(counted, 123);
}

#[test]
fn mixing_scan_over_generations() {
    let tmp = TempDir::new().unwrap();
    let res = gasket_qw(&["mixing", "--generations", "2,3,4", "--horizon", "3000", "--eps", "0.1,0.05"], tmp.path());
    assert_eq!(res.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_csv(&tmp.path().join("mixing.csv"));
    assert_eq!(rows[0], ["N", "epsilon", "tau"]);
    assert_eq!(rows.len() - 1, 6);
    assert!(rows[1..].iter().all(|r| r[2].parse::<u64>().is_ok()));
    let fits = read_csv(&tmp.path().join("mixing_fit.csv"));
    assert_eq!(fits.len() - 1, 2);
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let res = Command::new(env!("CARGO_BIN_EXE_gasket-qw")).arg(flag).output().unwrap();
        assert_eq!(res.status.code(), Some(EXIT_OK));
    }
}
