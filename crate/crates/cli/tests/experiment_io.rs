use std::fs;
use std::path::Path;
use std::process::Command;

use orgfw_cli::compare::compare;
use orgfw_cli::records::{read_records, HEADER, TIMING_COLUMN};
use orgfw_cli::{run_experiment, CliError, RunConfig};

fn config(dir: &Path, body: &str, extra: &[&str]) -> RunConfig {
    let mut overrides: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    overrides.push(format!("output_dir=\"{}\"", dir.display()));
    RunConfig::parse(body, &overrides).unwrap()
}

const SMALL: &str = r#"
algorithm = "ORGFW"
T = 4
seeds = [0, 1, 2]
[synthetic]
d = 5
C = 3
n = 200
"#;

fn without_timing(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.remove(TIMING_COLUMN);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn four_rounds_give_four_rows_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(dir.path(), SMALL, &[])).unwrap();
    let rows = read_records(fs::File::open(&out.csv_paths[0]).unwrap()).unwrap();
    for seed in [0, 1, 2] {
        let rounds: Vec<usize> = rows.iter().filter(|(s, _)| *s == seed).map(|(_, r)| r.round).collect();
        assert_eq!(rounds, vec![1, 2, 3, 4]);
    }
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|(_, r)| r.cum_regret.is_some() && r.fw_gap.is_some() && r.est_error.is_some()));
    let text = fs::read_to_string(&out.csv_paths[0]).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
}

#[test]
fn rerun_is_identical_except_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let extra = ["algorithm=[\"ORGFW\",\"MORGFW\"]", "noise.kind=\"minibatch\"", "noise.size=2"];
    let ra = run_experiment(&config(a.path(), SMALL, &extra)).unwrap();
    let rb = run_experiment(&config(b.path(), SMALL, &extra)).unwrap();
    for (pa, pb) in ra.csv_paths.iter().zip(&rb.csv_paths) {
        let ta = fs::read_to_string(pa).unwrap();
        let tb = fs::read_to_string(pb).unwrap();
        assert_eq!(without_timing(&ta), without_timing(&tb));
    }
    // a third run reuses the comparator cache of the first and must not change the rows
    let rc = run_experiment(&config(a.path(), SMALL, &extra)).unwrap();
    assert_eq!(
        without_timing(&fs::read_to_string(&rc.csv_paths[0]).unwrap()),
        without_timing(&fs::read_to_string(&rb.csv_paths[0]).unwrap())
    );
}

#[test]
fn two_algorithms_two_named_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(dir.path(), SMALL, &["algorithm=[\"ORGFW\",\"OSFW\"]"])).unwrap();
    let names: Vec<String> = out
        .csv_paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["ORGFW.csv", "OSFW.csv"]);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn every_row_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        SMALL,
        &["algorithm=[\"ORGFW\",\"OSFW\",\"OFW\",\"MetaFW\",\"MORGFW\"]", "T=6"],
    );
    let out = run_experiment(&cfg).unwrap();
    for ((algo, per_seed), path) in out.runs.iter().zip(&out.csv_paths) {
        let rows = read_records(fs::File::open(path).unwrap()).unwrap();
        let expected: Vec<_> = per_seed
            .iter()
            .flat_map(|(s, rs)| rs.iter().map(move |r| (*s, r.clone())))
            .collect();
        assert_eq!(rows, expected, "{algo}");
        if algo.is_meta() {
            assert!(rows.iter().all(|(_, r)| r.est_error.is_none()));
        }
    }
}

#[test]
fn summary_json_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL, &["T=16", "t_grid=[4,8,16,32]", "seeds=[0,1]"]);
    run_experiment(&cfg).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let emp = &v["empirical"];
    for k in ["lipschitz", "sigma", "m", "diameter"] {
        assert!(emp[k].as_f64().unwrap() >= 0.0, "{k}");
    }
    let algo = &v["algorithms"][0];
    assert_eq!(algo["algorithm"], "ORGFW");
    assert!(algo["final_regret"]["median"].is_number());
    assert!(algo["slope"]["slope"].is_number());
    assert_eq!(algo["slope"]["t_grid"].as_array().unwrap().len(), 4);
    assert_eq!(v["comparators"].as_array().unwrap().len(), 2);
    assert!(v["comparators"][0]["gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["config"]["T"], 16);
}

#[test]
fn nonconvex_runs_leave_regret_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL, &["model=\"nn\"", "hidden=3", "alpha=0.6667"]);
    let out = run_experiment(&cfg).unwrap();
    let rows = read_records(fs::File::open(&out.csv_paths[0]).unwrap()).unwrap();
    assert!(rows.iter().all(|(_, r)| r.cum_regret.is_none() && r.fw_gap.is_some()));
    assert!(out.summary.comparators.is_empty());
}

#[test]
fn unwritable_output_dir_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = run_experiment(&config(&blocker.join("sub"), SMALL, &[])).unwrap_err();
    assert!(matches!(err, CliError::OutputDir { .. }), "{err}");
}

#[test]
fn compare_win_rates() {
    let dir = tempfile::tempdir().unwrap();
    let many = ["seeds=[0,1,2,3,4,5,6,7,8,9]", "T=8"];
    let a = config(dir.path(), SMALL, &many);
    let b = config(dir.path(), SMALL, &[many[0], many[1], "algorithm=\"OSFW\""]);
    let (summary, path) = compare(&[a, b], Some(&dir.path().join("cmp"))).unwrap();
    assert!(path.exists());
    assert_eq!(summary.entries.len(), 2);
    assert_eq!(summary.win_rates.len(), 2);
    for w in &summary.win_rates {
        assert!((0.0..=1.0).contains(&w.win_rate));
    }
    assert!((summary.win_rates[0].win_rate + summary.win_rates[1].win_rate - 1.0).abs() < 1e-12);

    let one = config(dir.path(), SMALL, &["seeds=[3]", "algorithm=[\"ORGFW\",\"OSFW\",\"OFW\"]"]);
    let (single, _) = compare(&[one], Some(&dir.path().join("one"))).unwrap();
    assert_eq!(single.win_rates.len(), 6);
    assert!(single.win_rates.iter().all(|w| [0.0, 0.5, 1.0].contains(&w.win_rate)));

    let c = config(dir.path(), SMALL, &["seeds=[0,1]"]);
    let d = config(dir.path(), SMALL, &["seeds=[0,2]", "algorithm=\"OSFW\""]);
    assert!(matches!(compare(&[c, d], None), Err(CliError::Compare(_))));
}

#[test]
fn binary_run_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, SMALL).unwrap();
    let out_dir = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_orgfw"))
        .arg("run")
        .arg(&cfg_path)
        .arg("--set")
        .arg(format!("output_dir=\"{}\"", out_dir.display()))
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out_dir.join("ORGFW.csv").exists());

    let comparator = Command::new(env!("CARGO_BIN_EXE_orgfw"))
        .arg("comparator")
        .arg(&cfg_path)
        .arg("--set")
        .arg(format!("output_dir=\"{}\"", out_dir.display()))
        .output()
        .unwrap();
    assert!(comparator.status.success());
    assert_eq!(String::from_utf8_lossy(&comparator.stdout).lines().filter(|l| l.starts_with("seed ")).count(), 3);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, format!("learningrate = 0.1\n{SMALL}")).unwrap();
    let fail = Command::new(env!("CARGO_BIN_EXE_orgfw")).arg("run").arg(&bad).output().unwrap();
    assert!(!fail.status.success());
    let stderr = String::from_utf8_lossy(&fail.stderr);
    assert!(stderr.contains("learningrate") && stderr.contains("algorithm"), "{stderr}");
}

#[test]
fn dataset_csv_source_resolves_against_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let ds = orgfw::stream::synthetic_dataset::<f64>(3, 2, 40, 1.0, 5).unwrap();
    orgfw::stream::write_dataset_csv(&ds, fs::File::create(dir.path().join("pts.csv")).unwrap()).unwrap();
    let body = "algorithm = \"OFW\"\nT = 3\n[csv]\npath = \"pts.csv\"\n";
    std::env::set_var(orgfw_cli::config::DATA_DIR_ENV, dir.path());
    let out = run_experiment(&config(&dir.path().join("out"), body, &[])).unwrap();
    std::env::remove_var(orgfw_cli::config::DATA_DIR_ENV);
    assert_eq!(out.summary.dataset.n, 40);
    assert_eq!(out.summary.dataset.name, "pts");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path, &[]).unwrap();
            assert!(!cfg.algorithms.is_empty(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
