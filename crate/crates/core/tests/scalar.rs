use torus_coherent::scalar::*;

#[test]
fn wrap_stays_in_unit_interval() {
    for &x in &[-1e-18_f64, -0.25, 0.0, 0.999_999, 1.0, 3.75, -7.5] {
        let y = wrap_unit(x);
        assert!((0.0..1.0).contains(&y), "{x} -> {y}");
    }
    assert_eq!(wrap_unit(-0.25_f64), 0.75);
    assert_eq!(wrap_unit(3.75_f32), 0.75);
}
