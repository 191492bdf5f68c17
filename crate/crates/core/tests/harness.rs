use std::path::PathBuf;

use risbeam::harness::cli::run_with;
use risbeam::harness::{
    child_seed, run_experiment, run_experiment_with_threads, ExperimentConfig, Mode, ResultsTable, Scale,
};

fn small(mode: Mode, realizations: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: "it".into(),
        mode,
        realizations,
        master_seed: 11,
        record_timing: false,
        ..ExperimentConfig::default().with_scale(Scale::Desk)
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("risbeam-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["risbeam"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = small(Mode::Maximize, 2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = ExperimentConfig {
        record_timing: true,
        ..small(Mode::Attack, 2)
    };
    let one = run_experiment_with_threads(&cfg, 1).unwrap().without_timing();
    let two = run_experiment_with_threads(&cfg, 2).unwrap().without_timing();
    assert_eq!(one.rows, two.rows);
    assert_eq!(one.realizations.len(), two.realizations.len());
    for (x, y) in one.realizations.iter().zip(&two.realizations) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.pre_attack_rho_db, y.pre_attack_rho_db);
        assert_eq!(x.post_attack_rho_db, y.post_attack_rho_db);
    }
}

#[test]
fn json_records_seeds_and_traces() {
    let cfg = small(Mode::Maximize, 1);
    let table = run_experiment(&cfg).unwrap();
    let text = table.to_json(&cfg).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["config"]["master_seed"], 11);
    let reals = doc["realizations"].as_array().unwrap();
    assert_eq!(reals.len(), 1);
    assert_eq!(reals[0]["seed"].as_u64(), Some(child_seed(11, 0)));
    assert!(reals[0]["ao"]["records"].as_array().is_some_and(|r| !r.is_empty()));
    let (back, back_cfg) = ResultsTable::from_json(&text).unwrap();
    assert_eq!(back, table);
    assert_eq!(back_cfg, cfg);
}

#[test]
fn maximize_rows_are_feasible_and_monotone() {
    let table = run_experiment(&small(Mode::Maximize, 2)).unwrap();
    for info in &table.realizations {
        assert!(info.error.is_none(), "{:?}", info.error);
        let ao = info.ao.as_ref().unwrap();
        assert!(ao.records.windows(2).all(|w| w[1].rho >= w[0].rho));
    }
    assert!(table.rows.iter().all(|r| r.feasible == Some(true)));
}

#[test]
fn attack_cli_lowers_rho_on_every_realization() {
    let cfg_path = scratch("attack.toml");
    let out_path = scratch("attack.csv");
    let cfg = ExperimentConfig {
        name: "cli".into(),
        realizations: 3,
        master_seed: 5,
        system: ExperimentConfig::default().with_scale(Scale::Desk).system,
        ..ExperimentConfig::default()
    };
    std::fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let (code, _, err) = cli(&["attack", "--config", cfg_path.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let table = ResultsTable::read_csv(std::fs::File::open(&out_path).unwrap()).unwrap();
    for i in 0..3 {
        let trace: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.experiment == "cli/attack" && r.realization == i)
            .collect();
        let first = trace.iter().find(|r| r.iteration == 0).and_then(|r| r.rho_db).unwrap();
        let last = trace.iter().max_by_key(|r| r.iteration).and_then(|r| r.rho_db).unwrap();
        assert!(last < first, "realization {i}: {first} -> {last}");
    }
}

#[test]
fn reproduce_desk_runs() {
    let (code, out, err) = cli(&["reproduce", "fig3", "--scale", "desk", "--seed", "7"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("experiment,sweep,iteration,mean_rho_db,count"));
    assert!(err.contains("reference"));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["--help"]).0, 0);
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["maximize", "--realizations", "0"]).0, 1);
    assert_eq!(cli(&["maximize", "--config", "/nonexistent/risbeam.toml"]).0, 1);
    assert_eq!(cli(&["reproduce", "fig3", "--config", "x.toml"]).0, 1);
    assert_eq!(cli(&["maximize", "--threads", "0"]).0, 1);

    let bad = scratch("bad.toml");
    std::fs::write(&bad, "system.M = 8\nsystem.unknown = 3\n").unwrap();
    let (code, _, err) = cli(&["maximize", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("unknown"), "{err}");

    let unwritable = "/nonexistent/dir/out.csv";
    let (code, _, _) = cli(&["maximize", "--scale", "desk", "--realizations", "1", "--out", unwritable]);
    assert_eq!(code, 2);
}
