use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use torus_coherent::fourier_field::*;
use torus_coherent::{Error, ModeIndex};

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

#[test]
fn translated_gyres_modes() {
    let f = builtin_translated_gyres::<f64>();
    assert_eq!(f.len(), 4);
    assert_eq!(
        f.coeff(&ModeIndex::new(1, 1, 1, 1)),
        [c(0.0, -0.25), c(0.0, 0.25)]
    );
    assert_eq!(
        f.coeff(&ModeIndex::new(-1, -1, -1, -1)),
        [c(0.0, 0.25), c(0.0, -0.25)]
    );
    let k = ModeIndex::new(1, 1, 1, 1);
    let v = f.coeff(&k);
    assert_eq!(v[0] + v[1], c(0.0, 0.0));
    f.validate().unwrap();
}

#[test]
fn shear_modes() {
    let f = builtin_shear::<f64>();
    assert_eq!(f.len(), 8);
    assert_eq!(
        f.coeff(&ModeIndex::new(1, 0, 0, 1)),
        [c(-0.25, 0.0), c(0.0, 0.0)]
    );
    assert_eq!(f.coeff(&ModeIndex::new(1, 0, 0, -1))[0], c(0.25, 0.0));
    assert!(f.get(&ModeIndex::ZERO).is_none());
    f.validate().unwrap();
}

#[test]
fn eval_matches_hand_values() {
    let g = builtin_translated_gyres::<f64>();
    let v = g.eval([0.0, 0.0], [0.0, 0.25]);
    assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14, "{v:?}");
    let s = builtin_shear::<f64>();
    let v = s.eval([0.25, 0.25], [0.25, 0.25]);
    assert!(
        (v[0] - 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14,
        "{v:?}"
    );
    let a = s.eval([0.13, 0.71], [0.4, 0.9]);
    let b = s.eval([1.13, 1.71], [1.4, 1.9]);
    assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
}

#[test]
fn builtins_match_closed_forms() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let gy = builtin_translated_gyres::<f64>();
    let sh = builtin_shear::<f64>();
    let osc = builtin_oscillating_gyres(0.15, 1e-4).unwrap();
    for _ in 0..100 {
        let th = [rng.random::<f64>(), rng.random::<f64>()];
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let pairs = [
            (gy.eval(th, x), closed_form::translated_gyres(th, x), 1e-8),
            (sh.eval(th, x), closed_form::shear(th, x), 1e-8),
            // Thresholding at 1e-4 truncates the Bessel tails.
            (
                osc.eval(th, x),
                closed_form::oscillating_gyres(0.15, th, x),
                2e-3,
            ),
        ];
        for (a, b, tol) in pairs {
            assert!(
                (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol,
                "{a:?} vs {b:?}"
            );
        }
        let s = osc.at_theta(th).eval(x);
        let d = osc.eval(th, x);
        assert!((s[0] - d[0]).abs() < 1e-12 && (s[1] - d[1]).abs() < 1e-12);
        let im = osc.eval_complex(th, x);
        assert!(im[0].im.abs() < 1e-10 * osc.max_norm() && im[1].im.abs() < 1e-10 * osc.max_norm());
    }
}

/// Bessel `J_k(x)` from its power series.
fn bessel_j(k: i32, x: f64) -> f64 {
    let a = k.unsigned_abs() as i32;
    let mut term = (x / 2.0).powi(a) / (1..=a).map(f64::from).product::<f64>();
    let mut sum = 0.0;
    for j in 0..40 {
        sum += term;
        let j = f64::from(j);
        term *= -(x * x / 4.0) / ((j + 1.0) * (j + 1.0 + f64::from(a)));
    }
    if k < 0 && a % 2 == 1 {
        -sum
    } else {
        sum
    }
}

#[test]
fn oscillating_gyres_matches_bessel_expansion() {
    // Shifting by δ(sin 2πθ₁, cos 2πθ₂) multiplies v̂_aut(n) by
    // J_{m₁}(2πδn₁) · i^{m₂} J_{m₂}(2πδn₂).
    let delta = 0.15;
    let err = 1e-4;
    let f = builtin_oscillating_gyres(delta, err).unwrap();
    let aut = builtin_translated_gyres::<f64>();
    let mut expected = BTreeMap::new();
    for (k, va) in aut.iter() {
        let n = k.n;
        for m1 in -12..=12 {
            for m2 in -12..=12 {
                let tau = std::f64::consts::TAU;
                let s = bessel_j(m1, tau * delta * f64::from(n[0]))
                    * bessel_j(m2, tau * delta * f64::from(n[1]));
                let s = Complex::new(0.0, 1.0).powi(m2) * s;
                let v = [va[0] * s, va[1] * s];
                if v[0].norm() >= err || v[1].norm() >= err {
                    expected.insert(ModeIndex::new(m1, m2, n[0], n[1]), v);
                }
            }
        }
    }
    assert_eq!(f.len(), expected.len());
    for (k, v) in &expected {
        let got = f.get(k).unwrap_or_else(|| panic!("missing {k}"));
        assert!(
            (got[0] - v[0]).norm() < 1e-12 && (got[1] - v[1]).norm() < 1e-12,
            "{k}"
        );
    }
    assert!(f.divergence_residual() < 1e-10);
    assert_eq!(f.hermitian_residual(), 0.0);
}

#[test]
fn oscillating_gyres_small_delta_limit() {
    let f = builtin_oscillating_gyres(1e-7_f64, 1e-4).unwrap();
    let mut modes: Vec<_> = f.modes().copied().collect();
    modes.sort();
    let mut want = vec![
        ModeIndex::new(0, 0, -1, -1),
        ModeIndex::new(0, 0, -1, 1),
        ModeIndex::new(0, 0, 1, -1),
        ModeIndex::new(0, 0, 1, 1),
    ];
    want.sort();
    assert_eq!(modes, want);
}

#[test]
fn oscillating_gyres_rejects_bad_parameters() {
    assert!(builtin_oscillating_gyres(0.0_f64, 1e-4).is_err());
    assert!(builtin_oscillating_gyres(-0.1_f64, 1e-4).is_err());
    assert!(builtin_oscillating_gyres(0.6_f64, 1e-4).is_err());
    assert!(builtin_oscillating_gyres(0.15_f64, 0.0).is_err());
}

#[test]
fn numeric_coeffs_reproduces_translated_gyres() {
    let f = numeric_coeffs(closed_form::translated_gyres::<f64>, [16; 4], 1e-4).unwrap();
    let g = builtin_translated_gyres::<f64>();
    assert_eq!(f.len(), 4);
    for (k, v) in g.iter() {
        let w = f.coeff(k);
        assert!((v[0] - w[0]).norm() < 1e-12 && (v[1] - w[1]).norm() < 1e-12);
    }
}

#[test]
fn numeric_coeffs_constant_field() {
    let f = numeric_coeffs(|_, _| [0.3_f64, -1.25], [4; 4], 1e-4).unwrap();
    assert_eq!(f.len(), 1);
    let v = f.coeff(&ModeIndex::ZERO);
    assert!((v[0] - c(0.3, 0.0)).norm() < 1e-15 && (v[1] - c(-1.25, 0.0)).norm() < 1e-15);
}

#[test]
fn numeric_coeffs_aliases_above_nyquist() {
    // cos(2π·5 x₁) on 8 points aliases onto |n₁| = 3.
    let f = numeric_coeffs(
        |_, x: [f64; 2]| [0.0, (std::f64::consts::TAU * 5.0 * x[0]).cos()],
        [4, 4, 8, 4],
        1e-6,
    )
    .unwrap();
    assert!(f.get(&ModeIndex::new(0, 0, 3, 0)).is_some());
    assert!(f.get(&ModeIndex::new(0, 0, 5, 0)).is_none());
}

#[test]
fn numeric_coeffs_errors() {
    assert!(numeric_coeffs(|_, _| [0.0_f64, 0.0], [4, 5, 4, 4], 1e-4).is_err());
    let r = numeric_coeffs(|_, _| [f64::NAN, 0.0], [4; 4], 1e-4);
    assert!(matches!(r, Err(Error::NonFinite(_))));
}

#[test]
fn numeric_coeffs_idempotent_through_eval() {
    let f = builtin_oscillating_gyres(0.15_f64, 1e-4).unwrap();
    let (mm, nn) = f.max_frequencies();
    let axis = 2 * (mm[0].max(mm[1]).max(nn[0]).max(nn[1]) as usize) + 2;
    let axis = axis + axis % 2;
    let g = numeric_coeffs(|th, x| f.eval(th, x), [axis; 4], 0.0).unwrap();
    for (k, v) in f.iter() {
        let w = g.coeff(k);
        assert!(
            (v[0] - w[0]).norm() < 1e-10 && (v[1] - w[1]).norm() < 1e-10,
            "{k}"
        );
    }
    for (k, w) in g.iter() {
        if f.get(k).is_none() {
            assert!(w[0].norm() < 1e-10 && w[1].norm() < 1e-10, "{k}");
        }
    }
}

#[test]
fn validation_catches_broken_tables() {
    let k = ModeIndex::new(0, 0, 1, 0);
    let v = [c(0.0, 0.0), c(0.5, 0.0)];
    let ok = FourierField::from_coeffs([(k, v), (-k, [v[0].conj(), v[1].conj()])], 0.0).unwrap();
    assert_eq!(ok.len(), 2);
    assert!(FourierField::from_coeffs([(k, v)], 0.0).is_err());
    let div = [c(0.5, 0.0), c(0.0, 0.0)];
    assert!(FourierField::from_coeffs([(k, div), (-k, div)], 0.0).is_err());
    let bad = [c(0.0, 0.0), c(0.5, 0.1)];
    assert!(FourierField::from_coeffs([(k, bad), (-k, bad)], 0.0).is_err());
}

#[test]
fn csv_round_trip_is_exact() {
    let f = builtin_oscillating_gyres(0.15_f64, 1e-4).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let g = FourierField::<f64>::read_csv(&buf[..]).unwrap();
    assert!(f.iter().eq(g.iter()));
}

#[test]
fn single_precision_fields() {
    let f = builtin_shear::<f32>();
    let v = f.eval([0.25, 0.25], [0.25, 0.25]);
    assert!((v[0] - 1.0).abs() < 1e-6 && (v[1] - 1.0).abs() < 1e-6);
    let g = numeric_coeffs(closed_form::translated_gyres::<f32>, [8; 4], 1e-4).unwrap();
    assert_eq!(g.len(), 4);
}
