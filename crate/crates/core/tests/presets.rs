use num_complex::Complex;
use torus_coherent::generator::CoefficientVector;
use torus_coherent::presets::*;
use torus_coherent::spectral::RitzPair;

fn p(re: f64, im: f64) -> RitzPair {
    RitzPair {
        z: Complex::new(re, im),
        vector: CoefficientVector(vec![]),
        residual: 0.0,
    }
}

#[test]
fn selection_rules() {
    let pairs = vec![
        p(0.0, 0.0),
        p(0.0, 0.5),
        p(-0.0886, 0.0),
        p(-0.0886, 0.52),
        p(-0.0886, -0.52),
        p(-0.0886, 1.04),
        p(-0.0886, -1.04),
        p(-0.0891, 0.002),
        p(-0.12, 0.0),
    ];
    assert_eq!(
        Pick::LeadingReal.select(&pairs).unwrap().z,
        Complex::new(-0.0886, 0.0)
    );
    let c = Pick::LeadingComplex { min_abs_im: 0.5 }
        .select(&pairs)
        .unwrap();
    assert_eq!(c.z, Complex::new(-0.0886, -1.04));
    assert_eq!(Pick::Leading.select(&pairs[7..]).unwrap().z.re, -0.0891);
    assert!(Pick::LeadingReal.select(&pairs[..2]).is_err());
}

#[test]
fn names_round_trip() {
    for e in Example::ALL {
        assert_eq!(e.name().parse::<Example>().unwrap(), e);
    }
    assert!("gyres".parse::<Example>().is_err());
    assert_eq!(Example::Shear.preset().modeset().len(), 33293);
    assert_eq!(Example::TranslatedGyres.preset().modeset().len(), 9425);
}
