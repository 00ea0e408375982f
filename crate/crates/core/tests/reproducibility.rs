use siegel::experiments::{run, ExperimentConfig, Scenario};

fn config(scenario: Scenario, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(scenario);
    cfg.seed = seed;
    cfg.dims = vec![1];
    cfg.instances = Some(2);
    cfg.samples = Some(200);
    cfg.mc_samples = Some(20_000);
    cfg
}

#[test]
fn seeded_runs_are_identical() {
    for scenario in [
        Scenario::Geometry,
        Scenario::Domination,
        Scenario::Trace,
        Scenario::Equivalence,
    ] {
        let a = run(&config(scenario, 5)).unwrap();
        let b = run(&config(scenario, 5)).unwrap();
        assert_eq!(
            a.canonical_json().unwrap(),
            b.canonical_json().unwrap(),
            "{}",
            scenario.name()
        );
    }
}

#[test]
fn seeds_change_random_scenarios() {
    let a = run(&config(Scenario::Domination, 5)).unwrap();
    let b = run(&config(Scenario::Domination, 6)).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn report_round_trips_through_json() {
    let report = run(&config(Scenario::Trace, 1)).unwrap();
    let text = report.to_json_pretty().unwrap();
    let back: siegel::experiments::ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert!(report.passed());
}
