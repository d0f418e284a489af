//! Sparse Fourier–Galerkin discretization of the augmented generator.
//!
//! For a field `v̂`, a mode set `S`, diffusion `ε` and driving rate `α`, the
//! matrix entries are
//!
//! ```text
//! Γ(m,n; m,n)   = -½ε²(2π‖n‖)² - 2πi (m·α + n·v̂(0,0))
//! Γ(m,n; m',n') = -2πi n·v̂(m-m', n-n')            (m,n) ≠ (m',n')
//! ```
//!
//! split as `Γ = D + R + A` with `D` real non-positive diagonal, `R` purely
//! imaginary diagonal and `A` skew-Hermitian.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier_field::FourierField;
use crate::mode::ModeIndex;
use crate::mode_select::{ModeSet, ModeSetKind};
use crate::scalar::Real;
use crate::sparse::CscMatrix;

/// Coefficients `f̂(m,n)` aligned with a [`ModeSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector<T>(pub Vec<Complex<T>>);

impl<T: Real> CoefficientVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex::new(T::zero(), T::zero()); len])
    }

    /// Unit vector at position `i`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[i] = Complex::new(T::one(), T::zero());
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> T {
        self.0.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `max |f̂(-m,-n) - conj f̂(m,n)|`, i.e. distance from representing a real function.
    pub fn real_symmetry_residual(&self, modes: &ModeSet) -> Result<T> {
        let neg = modes.negation_map()?;
        if neg.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: neg.len(),
                got: self.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&neg)
            .map(|(z, &j)| (self.0[j] - z.conj()).norm())
            .fold(T::zero(), T::max))
    }

    pub fn is_real_symmetric(&self, modes: &ModeSet, tol: T) -> bool {
        self.real_symmetry_residual(modes)
            .map(|r| r <= tol)
            .unwrap_or(false)
    }
}

impl CoefficientVector<f64> {
    /// Write `m1,m2,n1,n2,re,im` rows in mode set order; values round-trip exactly.
    pub fn write_csv<W: std::io::Write>(&self, modes: &ModeSet, mut out: W) -> Result<()> {
        if modes.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                got: self.len(),
            });
        }
        writeln!(out, "m1,m2,n1,n2,re,im")?;
        for (k, z) in modes.modes().iter().zip(&self.0) {
            writeln!(
                out,
                "{},{},{},{},{:e},{:e}",
                k.m[0], k.m[1], k.n[0], k.n[1], z.re, z.im
            )?;
        }
        Ok(())
    }

    /// Read a vector written by [`Self::write_csv`]; rows must match `modes` exactly.
    pub fn read_csv<R: std::io::BufRead>(input: R, modes: &ModeSet) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty coefficient vector file".into()))??;
        if header.trim() != "m1,m2,n1,n2,re,im" {
            return Err(Error::Parse(format!(
                "unexpected header {:?}",
                header.trim()
            )));
        }
        let mut values = Vec::with_capacity(modes.len());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: String| Error::Parse(format!("line {}: {e}", lineno + 2));
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() != 6 {
                return Err(bad("expected 6 columns".into()));
            }
            let mut k = [0i32; 4];
            for (a, c) in k.iter_mut().zip(&cols[..4]) {
                *a = c.trim().parse().map_err(|e| bad(format!("{e}")))?;
            }
            let k = ModeIndex::new(k[0], k[1], k[2], k[3]);
            if modes.position(&k) != Some(values.len()) {
                return Err(bad(format!(
                    "mode {k:?} out of place for the given mode set"
                )));
            }
            let re: f64 = cols[4].trim().parse().map_err(|e| bad(format!("{e}")))?;
            let im: f64 = cols[5].trim().parse().map_err(|e| bad(format!("{e}")))?;
            values.push(Complex::new(re, im));
        }
        if values.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                got: values.len(),
            });
        }
        Ok(Self(values))
    }
}

/// The assembled discrete generator `Γ_S`.
#[derive(Clone, Debug)]
pub struct DiscreteGenerator<T> {
    modeset: ModeSet,
    eps: T,
    alpha: [T; 2],
    v00: [Complex<T>; 2],
    matrix: CscMatrix<T>,
}

/// Summary written next to an exported matrix.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorStats {
    pub dim: usize,
    pub nnz: usize,
    pub density: f64,
    pub eps: f64,
    pub alpha: [f64; 2],
    pub kind: ModeSetKind,
}

#[inline]
fn minus_two_pi_i<T: Real>(w: Complex<T>) -> Complex<T> {
    let tp = T::TAU();
    Complex::new(tp * w.im, -tp * w.re)
}

#[inline]
fn dot_n<T: Real>(n: [T; 2], v: &[Complex<T>; 2]) -> Complex<T> {
    v[0] * n[0] + v[1] * n[1]
}

/// `-½ε²(2π‖n‖)²`.
pub fn diffusion_entry<T: Real>(eps: T, mode: &ModeIndex) -> T {
    let half = T::lit(0.5);
    let k = T::TAU();
    -half * eps * eps * k * k * T::int(mode.n_norm_sq())
}

/// Imaginary part of `-2πi m·α`.
pub fn rotation_entry<T: Real>(alpha: [T; 2], mode: &ModeIndex) -> T {
    -T::TAU() * (T::int(mode.m[0].into()) * alpha[0] + T::int(mode.m[1].into()) * alpha[1])
}

/// Assemble `Γ_S` column by column.
///
/// An off-diagonal entry is stored only when the coupling mode `v̂(m-m', n-n')`
/// is stored, neither endpoint has `n = 0`, and the value is nonzero. The
/// coupling is evaluated with the midpoint wavevector `(n+n')/2`, which equals
/// `n·v̂` for divergence-free `v̂` and makes the off-diagonal part exactly
/// skew-Hermitian in floating point.
pub fn assemble<T: Real>(
    field: &FourierField<T>,
    modeset: &ModeSet,
    eps: T,
    alpha: [T; 2],
) -> Result<DiscreteGenerator<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "diffusion must be positive, got {eps}"
        )));
    }
    if !(alpha[0].is_finite() && alpha[1].is_finite()) {
        return Err(Error::InvalidParameter(
            "driving rate must be finite".into(),
        ));
    }
    modeset.negation_map()?;

    let v00 = field.coeff(&ModeIndex::ZERO);
    let couplings: Vec<(ModeIndex, [Complex<T>; 2])> = field
        .iter()
        .filter(|(k, _)| **k != ModeIndex::ZERO)
        .map(|(k, v)| (*k, *v))
        .collect();
    let half = T::lit(0.5);
    let zero = Complex::new(T::zero(), T::zero());

    let columns: Vec<Vec<(usize, Complex<T>)>> = modeset
        .modes()
        .par_iter()
        .enumerate()
        .map(|(j, col)| {
            let mut entries = Vec::with_capacity(couplings.len() + 1);
            let nj = [T::int(col.n[0].into()), T::int(col.n[1].into())];
            let diag = Complex::new(diffusion_entry(eps, col), rotation_entry(alpha, col))
                + minus_two_pi_i(dot_n(nj, &v00));
            entries.push((j, diag));
            if col.n_is_zero() {
                return entries;
            }
            for (d, v) in &couplings {
                let row = *col + *d;
                if row.n_is_zero() {
                    continue;
                }
                let Some(i) = modeset.position(&row) else {
                    continue;
                };
                let mid = [
                    (T::int(row.n[0].into()) + nj[0]) * half,
                    (T::int(row.n[1].into()) + nj[1]) * half,
                ];
                let val = minus_two_pi_i(dot_n(mid, v));
                if val != zero {
                    entries.push((i, val));
                }
            }
            entries
        })
        .collect();

    Ok(DiscreteGenerator {
        modeset: modeset.clone(),
        eps,
        alpha,
        v00,
        matrix: CscMatrix::from_columns(modeset.len(), columns),
    })
}

impl<T: Real> DiscreteGenerator<T> {
    /// Rebuild a generator from an imported matrix. The constant field mode is
    /// read back from the diagonal at `n = (1,0)` and `n = (0,1)`.
    pub fn from_matrix(
        matrix: CscMatrix<T>,
        modeset: ModeSet,
        eps: T,
        alpha: [T; 2],
    ) -> Result<Self> {
        if matrix.nrows() != modeset.len() || matrix.ncols() != modeset.len() {
            return Err(Error::DimensionMismatch {
                expected: modeset.len(),
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if !(eps > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "diffusion must be positive, got {eps}"
            )));
        }
        modeset.negation_map()?;
        let mut v00 = [Complex::new(T::zero(), T::zero()); 2];
        for (axis, n) in [[1, 0], [0, 1]].into_iter().enumerate() {
            let Some(j) = modeset.modes().iter().position(|k| k.n == n) else {
                continue;
            };
            let k = modeset.get(j);
            let d = matrix.get(j, j)
                - Complex::new(diffusion_entry(eps, &k), rotation_entry(alpha, &k));
            // d = -2πi v̂₀[axis]
            v00[axis] = Complex::new(-d.im, d.re) / T::TAU();
        }
        Ok(Self {
            modeset,
            eps,
            alpha,
            v00,
            matrix,
        })
    }

    pub fn modeset(&self) -> &ModeSet {
        &self.modeset
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn alpha(&self) -> [T; 2] {
        self.alpha
    }

    pub fn matrix(&self) -> &CscMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.modeset.len()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Fraction of stored entries.
    pub fn density(&self) -> f64 {
        let n = self.dim() as f64;
        self.nnz() as f64 / (n * n)
    }

    pub fn stats(&self) -> GeneratorStats {
        GeneratorStats {
            dim: self.dim(),
            nnz: self.nnz(),
            density: self.density(),
            eps: self.eps.to_f64_lossy(),
            alpha: [self.alpha[0].to_f64_lossy(), self.alpha[1].to_f64_lossy()],
            kind: self.modeset.kind(),
        }
    }

    /// Sparse matrix–vector product `Γ_S f̂`.
    pub fn apply(&self, f: &CoefficientVector<T>) -> Result<CoefficientVector<T>> {
        Ok(CoefficientVector(self.matrix.matvec(&f.0)?))
    }

    /// Diagonal of `D`.
    pub fn diffusion_diagonal(&self) -> Vec<T> {
        self.modeset
            .modes()
            .iter()
            .map(|k| diffusion_entry(self.eps, k))
            .collect()
    }

    /// Imaginary parts of the diagonal of `R`.
    pub fn rotation_diagonal(&self) -> Vec<T> {
        self.modeset
            .modes()
            .iter()
            .map(|k| rotation_entry(self.alpha, k))
            .collect()
    }

    /// The advection part `A = Γ_S - D - R`, including the `n·v̂(0,0)` diagonal.
    pub fn advection_part(&self) -> CscMatrix<T> {
        let d = self.diffusion_diagonal();
        let r = self.rotation_diagonal();
        let cols = (0..self.dim())
            .map(|j| {
                self.matrix
                    .column(j)
                    .map(|(i, v)| {
                        if i == j {
                            (i, v - Complex::new(d[j], r[j]))
                        } else {
                            (i, v)
                        }
                    })
                    .collect()
            })
            .collect();
        CscMatrix::from_columns(self.dim(), cols)
    }

    /// The constant mode of the field, `v̂(0,0)`.
    pub fn mean_velocity(&self) -> [Complex<T>; 2] {
        self.v00
    }

    /// `max |Γ(i,j) + conj Γ(j,i)|` over off-diagonal stored entries (both orientations).
    pub fn skew_hermitian_residual(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.dim() {
            for (i, v) in self.matrix.column(j) {
                if i != j {
                    worst = worst.max((v + self.matrix.get(j, i).conj()).norm());
                }
            }
        }
        worst
    }

    /// Write the matrix in Matrix Market format.
    pub fn write_matrix_market<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.matrix.write_matrix_market(out)
    }
}

/// Dense test oracle: every entry `⟨F_{m,n}, 𝐆 F_{m',n'}⟩` by equal-weight
/// quadrature on a `quad_sizes` grid over `(θ₁, θ₂, x₁, x₂)`, using pointwise
/// field evaluation and the closed form
/// `𝐆F_{m',n'} = (-½ε²(2π‖n'‖)² - 2πi n'·v(θ,x) - 2πi m'·α) F_{m',n'}`.
///
/// Returns a row-major `|S| × |S|` matrix. Intended for `|S| ≤ 200`.
pub fn oracle_dense_assemble(
    field: &FourierField<f64>,
    modeset: &ModeSet,
    eps: f64,
    alpha: [f64; 2],
    quad_sizes: [usize; 4],
) -> Result<Vec<Vec<Complex<f64>>>> {
    let (vm, vn) = field.max_frequencies();
    let sm = modeset.max_m();
    let sn = modeset.max_n();
    let need = [
        2 * sm + vm[0],
        2 * sm + vm[1],
        2 * sn + vn[0],
        2 * sn + vn[1],
    ];
    for a in 0..4 {
        if quad_sizes[a] as i32 <= need[a] {
            return Err(Error::BelowNyquist(format!(
                "quadrature axis {a} has {} points; at least {} required",
                quad_sizes[a],
                need[a] + 1
            )));
        }
    }
    let npts: usize = quad_sizes.iter().product();
    let dim = modeset.len();
    let tau = std::f64::consts::TAU;
    let pts: Vec<([f64; 2], [f64; 2])> = (0..npts)
        .map(|mut p| {
            let mut c = [0.0; 4];
            for a in (0..4).rev() {
                c[a] = (p % quad_sizes[a]) as f64 / quad_sizes[a] as f64;
                p /= quad_sizes[a];
            }
            ([c[0], c[1]], [c[2], c[3]])
        })
        .collect();
    let vel: Vec<[f64; 2]> = pts.par_iter().map(|(th, x)| field.eval(*th, *x)).collect();

    // basis[p, i] = F_i(point p), generator image g[p, j] = (𝐆F_j)(point p)
    let basis = faer::Mat::<Complex<f64>>::from_fn(npts, dim, |p, i| {
        let k = modeset.get(i);
        let (th, x) = pts[p];
        let ph = tau
            * (th[0] * f64::from(k.m[0])
                + th[1] * f64::from(k.m[1])
                + x[0] * f64::from(k.n[0])
                + x[1] * f64::from(k.n[1]));
        Complex::from_polar(1.0, ph)
    });
    let image = faer::Mat::<Complex<f64>>::from_fn(npts, dim, |p, j| {
        let k = modeset.get(j);
        let v = vel[p];
        let diff = -0.5 * eps * eps * tau * tau * k.n_norm_sq() as f64;
        let adv = f64::from(k.n[0]) * v[0] + f64::from(k.n[1]) * v[1];
        let rot = f64::from(k.m[0]) * alpha[0] + f64::from(k.m[1]) * alpha[1];
        Complex::new(diff, -tau * (adv + rot)) * basis[(p, j)]
    });
    let gram = basis.adjoint() * &image;
    let w = 1.0 / npts as f64;
    Ok((0..dim)
        .map(|i| (0..dim).map(|j| gram[(i, j)] * w).collect())
        .collect())
}
