use faer::Mat;
use torus_coherent::fourier_field::{builtin_shear, builtin_translated_gyres};
use torus_coherent::generator::assemble;
use torus_coherent::generator::CoefficientVector;
use torus_coherent::mode::ModeIndex;
use torus_coherent::mode_select::{class_union, product_ball};
use torus_coherent::spectral::*;
use torus_coherent::{Error, C64 as C};

fn alpha() -> [f64; 2] {
    [0.2, 0.2 * 2f64.sqrt()]
}

#[test]
fn recovers_zero_mode_eigenvalue() {
    let gen = assemble(&builtin_shear(), &product_ball(1, 2.0), 0.03, alpha()).unwrap();
    let i = gen.modeset().position(&ModeIndex::new(1, 0, 0, 0)).unwrap();
    let v = CoefficientVector::unit(gen.dim(), i);
    let z = C::new(0.0, -std::f64::consts::TAU * 0.2);
    assert!(residual(&gen, z, &v).unwrap() <= 1e-14);
    assert!((z.im + 1.256637).abs() < 1e-6);

    let cfg = SolverConfig::new(12).with_shift(C::new(0.0, -1.2));
    let spec = solve_shift_invert(&gen, &cfg).unwrap();
    assert!(!spec.incomplete);
    let best = &spec.pairs[0];
    assert!((best.z - z).norm() < 1e-12, "{}", best.z);
    for p in &spec.pairs {
        assert!(
            p.residual <= 1e-8 * (1.0 + p.z.norm()),
            "{} {}",
            p.z,
            p.residual
        );
        assert!((p.vector.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn matches_dense_spectrum_on_small_problem() {
    let gen = assemble(
        &builtin_translated_gyres(),
        &class_union(1, 2.5),
        0.1,
        alpha(),
    )
    .unwrap();
    let n = gen.dim();
    let dense = Mat::<C>::from_fn(n, n, |i, j| gen.matrix().get(i, j));
    let mut all: Vec<C> = dense.eigenvalues().unwrap();
    let shift = C::new(1.0, 0.0);
    all.sort_by(|a, b| (a - shift).norm().total_cmp(&(b - shift).norm()));
    let spec = solve_shift_invert(&gen, &SolverConfig::new(10)).unwrap();
    assert_eq!(spec.pairs.len(), 10);
    for p in &spec.pairs {
        let nearest = all
            .iter()
            .map(|z| (z - p.z).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-9, "{} not in dense spectrum", p.z);
        assert!(p.z.re <= 1e-10);
    }
    let cutoff = (all[9] - shift).norm();
    for p in &spec.pairs {
        assert!((p.z - shift).norm() <= cutoff + 1e-9);
    }
}

#[test]
fn exact_shift_is_perturbed() {
    let gen = assemble(&builtin_shear(), &product_ball(1, 1.0), 0.03, alpha()).unwrap();
    // 0 is an eigenvalue (the constant mode).
    let cfg = SolverConfig::new(3).with_shift(C::new(0.0, 0.0));
    match ShiftedSolver::new(&gen, cfg.shift) {
        Err(Error::Factorization { .. }) => {}
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("singular shift accepted"),
    }
    let spec = solve_shift_invert(&gen, &cfg).unwrap();
    assert!(spec.shift_perturbed);
    assert!(spec.pairs[0].z.norm() < 1e-9);
}

#[test]
fn config_validation() {
    assert!(SolverConfig::new(0).validate().is_err());
    let mut c = SolverConfig::new(5);
    c.krylov_dim = 5;
    assert!(c.validate().is_err());
    assert_eq!(SolverConfig::new(100).krylov_dim, 210);
    assert_eq!(SolverConfig::new(3).krylov_dim, 40);
    let g = gap_shift(0.03);
    assert!((g.re + 2.0 * std::f64::consts::PI.powi(2) * 9e-4).abs() < 1e-15);
}

fn check_gap_and_pairing(
    gen: &torus_coherent::generator::DiscreteGenerator<f64>,
    spec: &Spectrum,
    eps: f64,
) {
    let gap = -2.0 * std::f64::consts::PI.powi(2) * eps * eps;
    let far = spec
        .pairs
        .iter()
        .map(|p| (p.z - spec.shift).norm())
        .fold(0.0, f64::max);
    for p in &spec.pairs {
        assert!(p.z.re <= 1e-10, "{}", p.z);
        if p.z.re < -1e-8 {
            assert!(p.z.re <= gap + 1e-6, "{} above gap {gap}", p.z);
        }
        let (zc, w) = conjugate_partner(p, gen.modeset()).unwrap();
        let r = residual(gen, zc, &w).unwrap();
        assert!(
            (r - p.residual).abs() <= 1e-10 * (1.0 + p.z.norm()),
            "{r} vs {}",
            p.residual
        );
        if p.z.im.abs() > 1e-8 && (zc - spec.shift).norm() < far - 1e-6 {
            assert!(
                spec.pairs
                    .iter()
                    .any(|o| (o.z - zc).norm() <= 1e-8 * (1.0 + zc.norm())),
                "no partner for {}",
                p.z
            );
        }
    }
}

#[test]
fn decaying_modes_respect_gap_and_come_in_conjugate_pairs() {
    let eps = 0.03;
    let gen = assemble(
        &builtin_translated_gyres(),
        &class_union(1, 5.0),
        eps,
        alpha(),
    )
    .unwrap();
    let spec = solve_shift_invert(&gen, &SolverConfig::new(60)).unwrap();
    check_gap_and_pairing(&gen, &spec, eps);
    let gen = assemble(&builtin_shear(), &product_ball(2, 4.0), eps, alpha()).unwrap();
    let spec = solve_shift_invert(&gen, &SolverConfig::new(40).with_shift(gap_shift(eps))).unwrap();
    check_gap_and_pairing(&gen, &spec, eps);
}
