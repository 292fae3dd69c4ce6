use std::path::Path;
use std::process::{Command, Output};

use agent_factory_core::controller::Experiment;
use agent_factory_core::feature_model::{expert_configuration, FeatureModel};
use agent_factory_core::neurogenome::decode_genome;
use agent_factory_core::streetlight::{AmbientSchedule, PersonSpec, WorldConfig};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agent-factory"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small_world(dir: &Path) -> String {
    let people = vec![
        PersonSpec {
            spawn_tick: 0,
            start_cell: 0,
            dest_cell: 9,
        },
        PersonSpec {
            spawn_tick: 10,
            start_cell: 14,
            dest_cell: 2,
        },
    ];
    let world = WorldConfig::new(3, 15, 40, people, AmbientSchedule::alternating(40, 10));
    let path = dir.join("world.json");
    std::fs::write(&path, serde_json::to_string(&world).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn model_show_prints_the_model() {
    let out = bin(&["model", "show"]);
    assert!(out.status.success());
    let model = FeatureModel::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(model.contains("lightSensor"));
}

#[test]
fn model_validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(
        &good,
        serde_json::to_string(&expert_configuration()).unwrap(),
    )
    .unwrap();
    let out = bin(&["model", "validate", good.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid"));

    let bad = dir.path().join("bad.json");
    let config = expert_configuration().with("linear");
    std::fs::write(&bad, serde_json::to_string(&config).unwrap()).unwrap();
    let out = bin(&["model", "validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("activation"));

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, r#"{"modelVersion": 3}"#).unwrap();
    assert_eq!(
        bin(&["model", "validate", garbled.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let missing = dir.path().join("missing.json");
    assert_eq!(
        bin(&["model", "validate", missing.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn run_resume_report() {
    let dir = tempfile::tempdir().unwrap();
    let world = small_world(dir.path());
    let out_dir = dir.path().join("out");
    let out = bin(&[
        "run",
        "--world",
        &world,
        "--generations",
        "3",
        "--seed",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let exp_path = out_dir.join("experiment.json");
    let e = Experiment::load(&exp_path).unwrap();
    assert_eq!(e.generations(), 3);
    let history = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
    let (spec, genome) =
        decode_genome(&std::fs::read_to_string(out_dir.join("best-genome.json")).unwrap()).unwrap();
    assert_eq!(&spec, e.spec());
    assert_eq!(Some(&genome), e.best_genome());

    let exp = exp_path.to_str().unwrap();
    let out = bin(&["resume", "--experiment", exp, "--generations", "2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(Experiment::load(&exp_path).unwrap().generations(), 5);

    let out = bin(&["report", "--experiment", exp, "--format", "csv"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("generation,phase,best,mean,liveConnections,deselectedInputs\n"));
    assert_eq!(csv.lines().count(), 6);

    let trace = dir.path().join("trace.csv");
    let out = bin(&[
        "report",
        "--experiment",
        exp,
        "--format",
        "text",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("generations: 5"));
    assert!(text.contains("verdict:"));
    let rows = std::fs::read_to_string(trace).unwrap();
    assert!(rows.starts_with("tick,lampIdx,cmd,listening,tx,energyCum\n"));
    assert_eq!(rows.lines().count(), 1 + 40 * 3);
}

#[test]
fn run_rejects_invalid_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let bad = expert_configuration().without("activation");
    std::fs::write(&config, serde_json::to_string(&bad).unwrap()).unwrap();
    let out = bin(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--generations",
        "1",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn corrupt_experiment_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("experiment.json");
    std::fs::write(&path, r#"{"kind":"experiment","version":1,"body":{}}"#).unwrap();
    let out = bin(&["report", "--experiment", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    let out = bin(&["resume", "--experiment", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
