use num_complex::Complex;
use torus_coherent::sparse::*;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn sample() -> CscMatrix<f64> {
    CscMatrix::from_columns(
        3,
        vec![
            vec![(2, c(1.0, -0.5)), (0, c(0.1, 0.0))],
            vec![],
            vec![(1, c(std::f64::consts::PI, 1e-300)), (1, c(1.0, 0.0))],
        ],
    )
}

#[test]
fn construction_sorts_and_merges() {
    let a = sample();
    assert_eq!(a.nnz(), 3);
    assert_eq!(a.row_idx(), &[0, 2, 1]);
    assert_eq!(a.get(1, 2), c(std::f64::consts::PI + 1.0, 1e-300));
    assert_eq!(a.get(1, 1), c(0.0, 0.0));
    assert!(a.is_stored(2, 0) && !a.is_stored(1, 0));
}

#[test]
fn matvec_variants_agree() {
    let a = sample();
    let x = vec![c(1.0, 2.0), c(-3.0, 0.0), c(0.5, 0.5)];
    let y = a.matvec(&x).unwrap();
    let z = a.par_matvec(&x).unwrap();
    assert_eq!(y, z);
    assert_eq!(y[2], c(1.0, -0.5) * c(1.0, 2.0));
    assert!(a.matvec(&x[..2]).is_err());
}

#[test]
fn matrix_market_round_trip() {
    let a = sample();
    let mut buf = Vec::new();
    a.write_matrix_market(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let mut it = text.lines();
    assert_eq!(
        it.next(),
        Some("%%MatrixMarket matrix coordinate complex general")
    );
    assert_eq!(it.next(), Some("3 3 3"));
    let b = CscMatrix::read_matrix_market(&buf[..]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn matrix_market_rejects_garbage() {
    let bad = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2\n";
    assert!(CscMatrix::read_matrix_market(bad.as_bytes()).is_err());
    let short = "%%MatrixMarket matrix coordinate complex general\n2 2 2\n1 1 2 0\n";
    assert!(CscMatrix::read_matrix_market(short.as_bytes()).is_err());
}
