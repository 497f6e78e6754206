use marsense_bench::{phantom, random_measurements};

#[test]
fn fixtures_match_requested_sizes() {
    assert_eq!(phantom(32).dims(), (32, 32));
    let m = random_measurements(64, 0.3, 1);
    assert_eq!(m.dims(), (64, 64));
    assert_eq!(m.len(), (0.3f64 * 4096.0).round() as usize);
}
