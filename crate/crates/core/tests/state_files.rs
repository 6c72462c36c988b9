use std::collections::BTreeMap;

use polyent::measures;
use polyent::qstate::{self, Bipartition, DimVector, State};
use polyent::roofopt;
use polyent::OptimizerConfig;

#[test]
fn named_states_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut params = BTreeMap::new();
    params.insert("p".to_string(), 0.8);
    let werner = qstate::named_state("werner", &params).unwrap();
    let path = dir.path().join("werner.json");
    qstate::save_state(&werner, &path).unwrap();
    let back = qstate::load_state(&path).unwrap();
    assert_eq!(back, werner);
    let c = measures::concurrence_2q(&back.to_density()).unwrap();
    assert!((c - 0.7).abs() < 1e-9);
}

#[test]
fn marginal_files_feed_the_optimizers() {
    let dir = tempfile::tempdir().unwrap();
    let ghz_ab = qstate::ghz(3, 2).unwrap().marginal(&[0, 1]).unwrap();
    let path = dir.path().join("ghz_ab.json");
    qstate::save_state(&State::Mixed(ghz_ab), &path).unwrap();
    let rho = qstate::load_state(&path).unwrap().to_density();
    let cut = Bipartition::parse("0:", 2).unwrap();
    let eoa = roofopt::maximize_roof(&rho, &cut, &OptimizerConfig::default()).unwrap();
    assert!((eoa.value - 1.0).abs() < 1e-4, "{}", eoa.value);
    let eof = roofopt::minimize_roof(&rho, &cut, &OptimizerConfig::default()).unwrap();
    assert!(eof.value.abs() < 1e-4, "{}", eof.value);
}

#[test]
fn random_states_are_reproducible_from_their_seed() {
    let dims = DimVector::new(vec![2, 3]).unwrap();
    let a = qstate::state_to_json(&State::Mixed(qstate::random_mixed(&dims, 3, 17).unwrap())).unwrap();
    let b = qstate::state_to_json(&State::Mixed(qstate::random_mixed(&dims, 3, 17).unwrap())).unwrap();
    assert_eq!(a, b);
    let c = qstate::state_to_json(&State::Pure(qstate::haar_pure(&dims, 17))).unwrap();
    assert_ne!(a, c);
}
