use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use siegel::error::Result;
use siegel::experiments::{parse_measures, ExperimentConfig};
use siegel::geometry::SiegelPoint;
use siegel::lattice::Lattice;
use siegel::measures::{AtomicMeasure, Measure};
use siegel::quadrature::QuadratureSpec;
use siegel::region::Region;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.display().to_string(), fs::read(&p).unwrap()))
        .collect()
}

/// Every seed parses or fails cleanly, accepted values survive a round
/// trip, and at least one seed is accepted.
fn replay<T: Serialize>(target: &str, parse: fn(&[u8]) -> Result<T>) {
    let mut accepted = 0;
    for (name, bytes) in corpus(target) {
        if let Ok(v) = parse(&bytes) {
            accepted += 1;
            let text = serde_json::to_vec(&v).unwrap();
            assert!(parse(&text).is_ok(), "{name} does not round trip");
        }
    }
    assert!(accepted > 0, "no seed of {target} parses");
}

#[test]
fn fuzz_seeds_replay() {
    replay("point", SiegelPoint::from_json_slice);
    replay("atomic_measure", AtomicMeasure::from_json_slice);
    replay("measure", Measure::from_json_slice);
    replay("measure_list", parse_measures);
    replay("region", Region::from_json_slice);
    replay("lattice", Lattice::from_json_slice);
    replay("experiment_config", ExperimentConfig::from_json_slice);
    replay("quadrature_spec", QuadratureSpec::from_json_slice);
}

#[test]
fn invalid_seeds_are_rejected() {
    assert!(SiegelPoint::from_json_slice(br#"[[2, 0], [0, 1]]"#).is_err());
    assert!(Region::from_json_slice(br#"{"n": 1, "rho_min": 2, "rho_max": 1, "re_zn_bound": 1}"#).is_err());
    assert!(ExperimentConfig::from_json_slice(br#"{"scenario": "trace", "bogus": 1}"#).is_err());
    assert!(QuadratureSpec::from_json_slice(
        br#"{"region": {"n": 1, "rho_min": 0.5, "rho_max": 2, "re_zn_bound": 1}, "order": 1}"#
    )
    .is_err());
    assert!(AtomicMeasure::from_json_slice(br#"{"atoms": [{"point": [[0, 1]], "weight": -1}]}"#).is_err());
}
