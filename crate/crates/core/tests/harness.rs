use offload_core::config::{Config, DEFAULT_CONFIG};
use offload_core::harness::{fleet_recipe, run_experiment_text, ExperimentKind, RunManifest};
use offload_core::mtl::DecisionRule;
use offload_core::Error;

#[test]
fn failed_run_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // the plot script path is taken by a directory, so the last write fails
    std::fs::create_dir(dir.path().join("fig6.gp")).unwrap();
    let err = run_experiment_text(ExperimentKind::BadDataRatio, DEFAULT_CONFIG, 0, dir.path())
        .unwrap_err();
    assert!(matches!(err, Error::Stage { .. }));
    assert_eq!(err.exit_code(), 3);
    assert!(!dir.path().join("fig6.csv").exists());
    assert!(!dir.path().join("fig6.manifest.json").exists());
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m =
        run_experiment_text(ExperimentKind::BadDataRatio, DEFAULT_CONFIG, 7, dir.path()).unwrap();
    let back = RunManifest::load(&dir.path().join("fig6.manifest.json")).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.seed, 7);
    assert_eq!(back.config, DEFAULT_CONFIG);
    assert!(back.stages.iter().any(|s| s.stage == "sweep"));
    assert!(back.outputs.iter().all(|o| o.sha256.len() == 64));
}

#[test]
fn large_fleets_train_on_regression_only() {
    let cfg = Config::shipped();
    let (small, rule) = fleet_recipe(&cfg, 5, 0);
    assert_eq!(small.chi_c, 1.0);
    assert_eq!(rule, DecisionRule::ClassArgmax);
    let (large, rule) = fleet_recipe(&cfg, 6, 0);
    assert_eq!(large.chi_c, 0.0);
    assert_eq!(large.chi_r, 1.0);
    assert!(matches!(rule, DecisionRule::AllocSupport { .. }));
}

#[test]
fn experiment_names() {
    for (name, kind) in [
        ("fig5a-training-fraction", ExperimentKind::TrainingFraction),
        ("fig5b-n-avs", ExperimentKind::FleetSize),
        ("fig6-eta", ExperimentKind::BadDataRatio),
    ] {
        assert_eq!(name.parse::<ExperimentKind>().unwrap(), kind);
        assert_eq!(kind.name(), name);
    }
}
