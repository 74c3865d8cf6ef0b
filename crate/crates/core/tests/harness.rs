use locvar::harness::{emit_results, run_experiment, ExperimentConfig, ExperimentResult, OutputFormat};
use locvar::lattice::CodeKind;
use locvar::noise::DistKind;

fn rows() -> Vec<ExperimentResult> {
    run_experiment(&ExperimentConfig {
        code: CodeKind::Surface,
        distances: vec![3],
        p_mus: vec![0.04],
        sigmas: vec![0.3],
        dist: DistKind::Uniform,
        trials: 500,
        seed: 77,
        ..ExperimentConfig::default()
    })
    .unwrap()
}

#[test]
fn json_round_trip_is_field_for_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let rows = rows();
    emit_results(&rows, OutputFormat::Json, &path).unwrap();
    let back: Vec<ExperimentResult> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn single_row_csv_and_repeat_emission() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let one = &rows()[..1];
    emit_results(one, OutputFormat::Csv, &a).unwrap();
    emit_results(one, OutputFormat::Csv, &b).unwrap();
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
}

#[test]
fn empty_or_unwritable_emission_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_results(&[], OutputFormat::Csv, &dir.path().join("x.csv")).is_err());
    let bad = dir.path().join("missing").join("x.csv");
    let err = emit_results(&rows(), OutputFormat::Csv, &bad).unwrap_err();
    assert!(err.to_string().contains(bad.to_str().unwrap()));
}

#[test]
fn invalid_uniform_bounds_are_rejected() {
    let cfg = ExperimentConfig {
        dist: DistKind::Uniform,
        uniform_bounds: Some((0.1, 0.6)),
        trials: 10,
        ..ExperimentConfig::default()
    };
    assert!(run_experiment(&cfg).unwrap_err().is_configuration());
}
