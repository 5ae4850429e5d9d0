use std::fs;
use std::path::Path;

use collapse_kinetics::cli::main_with_args;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["collapse-kinetics".to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    full.extend(["--out".to_string(), dir.display().to_string()]);
    main_with_args(full)
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let column = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap();
    reader
        .records()
        .map(|r| r.unwrap()[column].parse().unwrap())
        .collect()
}

#[test]
fn tables_without_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["tables"]), 0);
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for table in ["table1", "table2", "table3", "table4"] {
        assert!(
            names
                .iter()
                .any(|n| n.starts_with(table) && n.ends_with(".csv")),
            "{table} missing from {names:?}"
        );
    }
    assert!(names.iter().any(|n| n == "manifest.json"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "tables");
}

#[test]
fn identical_branches_do_not_reduce() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rate",
        "--set",
        "model.family=\"thermal\"",
        "--set",
        "model.mass=\"1 GeV\"",
        "--set",
        "model.temperature=\"0.5 GeV\"",
        "--set",
        "geometry.separation=\"0 cm\"",
        "--format",
        "csv",
    ];
    assert_eq!(run(dir.path(), &args), 0);
    let gamma = csv_column(&dir.path().join("rate.csv"), "gamma");
    assert!(!gamma.is_empty());
    assert!(gamma.iter().all(|g| *g == 0.0), "{gamma:?}");
}

#[test]
fn unknown_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["rate", "--set", "model.colour=1"]), 2);
    let config = dir.path().join("run.toml");
    fs::write(&config, "[run]\nn_trajectories = 10\n").unwrap();
    let config = config.display().to_string();
    assert_eq!(run(dir.path(), &["reduce-mc", "--config", &config]), 2);
    assert_eq!(
        run(dir.path(), &["rate", "--set", "model.mass=\"1 cm\""]),
        2
    );
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml").display().to_string();
    assert_eq!(run(dir.path(), &["rate", "--config", &missing]), 1);
}

/// The slowly converging unparticle rate at very late times hits the
/// quadrature's rounding floor.
#[test]
fn non_convergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rate",
        "--set",
        "model.family=\"unparticle\"",
        "--set",
        "model.dimension=0.75",
        "--set",
        "model.scale=\"1 GeV\"",
        "--set",
        "model.temperature=\"1 GeV\"",
        "--set",
        "geometry.separation=\"1 GeV^-1\"",
        "--set",
        "run.times=[\"1e5 GeV^-1\"]",
    ];
    assert_eq!(run(dir.path(), &args), 3);
}

#[test]
fn reduce_mc_is_deterministic() {
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let args = [
                "reduce-mc",
                "--seed",
                "17",
                "--set",
                "run.n_traj=500",
                "--format",
                "csv",
            ];
            assert_eq!(run(dir.path(), &args), 0);
            fs::read(dir.path().join("reduce-mc.csv")).unwrap()
        })
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}
