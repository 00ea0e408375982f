use siegel::lattice::{build_lattice, min_separation, partition_separated, verify_covering, Lattice};
use siegel::region::Region;

#[test]
fn lattice_is_separated_and_covers() {
    for (n, seed) in [(1, 1), (1, 9), (2, 3)] {
        let region = Region::new(n, 0.5, 2.0, 0.8, 1.5).unwrap();
        let r = 0.6;
        let lat = build_lattice(&region, r, seed).unwrap();
        assert!(min_separation(&lat) >= r / 2.0);
        let cov = verify_covering(&lat, 3000, seed + 100).unwrap();
        assert_eq!(cov.covered, cov.samples, "worst gap {}", cov.worst_gap);
        assert!(lat.points.iter().all(|p| region.contains(p)));
    }
}

#[test]
fn same_seed_same_lattice() {
    let region = Region::new(1, 0.25, 4.0, 1.0, 3.0).unwrap();
    let a = build_lattice(&region, 0.5, 42).unwrap();
    let b = build_lattice(&region, 0.5, 42).unwrap();
    assert_eq!(a, b);
    let text = serde_json::to_string(&a).unwrap();
    assert_eq!(Lattice::from_json_slice(text.as_bytes()).unwrap(), a);
}

#[test]
fn partition_classes_are_far_apart() {
    let region = Region::new(1, 0.25, 4.0, 1.0, 3.0).unwrap();
    let lat = build_lattice(&region, 0.5, 7).unwrap();
    let part = partition_separated(&lat, 2.0).unwrap();
    let total: usize = part.families.iter().map(Vec::len).sum();
    assert_eq!(total, lat.len());
    for class in &part.families {
        let pts = class.iter().map(|&i| lat.points[i].clone()).collect();
        if class.len() > 1 {
            let sub = Lattice::new(lat.r, lat.region.clone(), pts).unwrap();
            assert!(min_separation(&sub) > 2.0);
        }
    }
}

#[test]
fn malformed_lattice_json_is_rejected() {
    assert!(Lattice::from_json_slice(b"{}").is_err());
    let bad = r#"{"r": -1, "region": {"n": 1, "rho_min": 0.5, "rho_max": 2, "re_zn_bound": 1}, "points": [[[0, 1]]]}"#;
    assert!(Lattice::from_json_slice(bad.as_bytes()).is_err());
}
