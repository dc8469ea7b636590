use std::time::Instant;

use pointup::gradcheck::{check_composite, check_primitives, composite_config, TOLERANCE};

#[test]
fn every_primitive_matches_finite_differences() {
    let results = check_primitives(20, 1).unwrap();
    for r in &results {
        assert!(r.error < TOLERANCE, "{}: {:e}", r.name, r.error);
    }
}

#[test]
fn composite_loss_matches_finite_differences() {
    let start = Instant::now();
    for r in check_composite(&composite_config(), 3).unwrap() {
        println!("{:<48} {:e}", r.name, r.error);
        assert!(r.passed(), "{}: {:e}", r.name, r.error);
    }
    println!("elapsed {:?}", start.elapsed());
}
