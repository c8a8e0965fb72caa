mod common;

use common::quad::{j_cases, quadrature};

#[test]
fn j_matches_quadrature() {
    let worst = j_cases(77, 20, 1e-8).unwrap();
    assert!(worst < 1e-8);
}

#[test]
fn unit_normalization() {
    assert!((quadrature(0, 0, 1, 0, 0.3) - 1.0).abs() < 1e-10);
}
