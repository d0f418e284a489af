use torus_coherent::mode_select::*;
use torus_coherent::{Error, ModeIndex};

fn brute_disk_count(r: i32) -> usize {
    let mut c = 0;
    for a in -r - 1..=r + 1 {
        for b in -r - 1..=r + 1 {
            if a * a + b * b <= r * r {
                c += 1;
            }
        }
    }
    c
}

#[test]
fn disk_counts() {
    assert_eq!(lattice_disk(8.0).len(), 197);
    assert_eq!(lattice_disk(11.0).len(), 377);
    for r in 0..15 {
        assert_eq!(lattice_disk(f64::from(r)).len(), brute_disk_count(r));
    }
    assert_eq!(lattice_disk(1.5).len(), 9);
}

#[test]
fn product_ball_sizes() {
    assert_eq!(product_ball(6, 8.0).len(), 33293);
    let s = product_ball(0, 1.0);
    assert_eq!(s.len(), 5);
    let s = product_ball(2, 0.0);
    assert_eq!(s.len(), 25);
    assert!(s.modes().iter().all(|k| k.n_is_zero()));
}

#[test]
fn class_union_sizes() {
    assert_eq!(class_union(2, 11.0).len(), 9425);
    let s = class_union(0, 1.0);
    assert_eq!(s.len(), 5);
    assert!(s.modes().iter().all(|k| k.m == k.n));
}

#[test]
fn sets_are_closed_sorted_and_contain_origin() {
    for s in [
        product_ball(3, 4.5),
        class_union(2, 5.0),
        product_ball(1, 2.0),
    ] {
        assert!(s.is_negation_closed());
        assert!(s.contains(&ModeIndex::ZERO));
        assert!(s.modes().windows(2).all(|w| w[0] < w[1]));
        for (i, k) in s.modes().iter().enumerate() {
            assert_eq!(s.position(k), Some(i));
        }
    }
}

#[test]
fn non_closed_custom_set_detected() {
    let s = ModeSet::from_modes(
        [ModeIndex::ZERO, ModeIndex::new(1, 0, 0, 0)],
        ModeSetKind::Custom,
    );
    assert!(matches!(s.negation_map(), Err(Error::NotNegationClosed(_))));
}

#[test]
fn csv_export() {
    let mut buf = Vec::new();
    product_ball(0, 1.0).write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "m1,m2,n1,n2");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0,0,-1,0");
}

proptest::proptest! {
    #[test]
    fn cardinality_formula(k in 0u32..4, r in 0.0f64..7.0) {
        let disk = lattice_disk(r).len();
        let per = (2 * k as usize + 1).pow(2);
        proptest::prop_assert_eq!(product_ball(k, r).len(), per * disk);
        proptest::prop_assert_eq!(class_union(k, r).len(), per * disk);
        proptest::prop_assert!(product_ball(k, r).is_negation_closed());
        proptest::prop_assert!(class_union(k, r).is_negation_closed());
    }
}
