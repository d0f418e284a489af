//! Driven, divergence-free velocity fields on 𝕋² × 𝕋² stored as sparse Fourier tables.
//!
//! A field `v(θ, x)` is represented by its coefficients `v̂(m, n) ∈ ℂ²` with
//!
//! ```text
//! v(θ, x) = Σ v̂(m, n) · exp(2πi (θ·m + x·n)).
//! ```
//!
//! Every constructor returns a table that is Hermitian-symmetric
//! (`v̂(-m,-n) = conj v̂(m,n)`, so the field is real) and divergence-free
//! (`n · v̂(m,n) = 0`).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::mode::ModeIndex;
use crate::scalar::Real;

/// Default coefficient threshold.
pub const DEFAULT_ERR: f64 = 1e-4;
/// Default number of samples per axis for [`numeric_coeffs`].
pub const DEFAULT_AXIS: usize = 32;
/// Relative tolerance for the divergence and realness checks.
pub const VALIDATION_TOL: f64 = 1e-10;

/// CSV header for coefficient tables.
pub const CSV_HEADER: &str = "m1,m2,n1,n2,re_v1,im_v1,re_v2,im_v2";

pub type Coeff<T> = [Complex<T>; 2];

/// Sparse Fourier representation of a driven velocity field.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField<T> {
    coeffs: BTreeMap<ModeIndex, Coeff<T>>,
    threshold_used: T,
}

impl<T: Real> FourierField<T> {
    /// Build a field from raw coefficients and check both structural invariants.
    pub fn from_coeffs(
        coeffs: impl IntoIterator<Item = (ModeIndex, Coeff<T>)>,
        threshold_used: T,
    ) -> Result<Self> {
        let field = Self {
            coeffs: coeffs.into_iter().collect(),
            threshold_used,
        };
        field.validate()?;
        Ok(field)
    }

    /// The zero field.
    pub fn zero() -> Self {
        Self {
            coeffs: BTreeMap::new(),
            threshold_used: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn threshold_used(&self) -> T {
        self.threshold_used
    }

    pub fn get(&self, mode: &ModeIndex) -> Option<&Coeff<T>> {
        self.coeffs.get(mode)
    }

    /// Coefficient at `mode`, zero when not stored.
    pub fn coeff(&self, mode: &ModeIndex) -> Coeff<T> {
        self.coeffs
            .get(mode)
            .copied()
            .unwrap_or([Complex::new(T::zero(), T::zero()); 2])
    }

    /// Stored modes in [`ModeIndex`] order.
    pub fn iter(&self) -> impl Iterator<Item = (&ModeIndex, &Coeff<T>)> {
        self.coeffs.iter()
    }

    pub fn modes(&self) -> impl Iterator<Item = &ModeIndex> {
        self.coeffs.keys()
    }

    /// `max ‖v̂(m,n)‖₂` over stored modes.
    pub fn max_norm(&self) -> T {
        self.coeffs
            .values()
            .map(|c| (c[0].norm_sqr() + c[1].norm_sqr()).sqrt())
            .fold(T::zero(), T::max)
    }

    /// Largest `|m_i|` and `|n_i|` over stored modes.
    pub fn max_frequencies(&self) -> ([i32; 2], [i32; 2]) {
        let mut mm = [0, 0];
        let mut nn = [0, 0];
        for k in self.coeffs.keys() {
            for i in 0..2 {
                mm[i] = mm[i].max(k.m[i].abs());
                nn[i] = nn[i].max(k.n[i].abs());
            }
        }
        (mm, nn)
    }

    /// `max |n · v̂(m,n)|` over stored modes.
    pub fn divergence_residual(&self) -> T {
        self.coeffs
            .iter()
            .map(|(k, c)| (c[0] * T::int(k.n[0].into()) + c[1] * T::int(k.n[1].into())).norm())
            .fold(T::zero(), T::max)
    }

    /// `max |v̂(-m,-n) - conj v̂(m,n)|`, counting missing partners as zero.
    pub fn hermitian_residual(&self) -> T {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let p = self.coeff(&-*k);
                (p[0] - c[0].conj()).norm().max((p[1] - c[1].conj()).norm())
            })
            .fold(T::zero(), T::max)
    }

    /// Check Hermitian symmetry and the divergence-free constraint.
    pub fn validate(&self) -> Result<()> {
        for (k, c) in &self.coeffs {
            if !(c[0].re.is_finite()
                && c[0].im.is_finite()
                && c[1].re.is_finite()
                && c[1].im.is_finite())
            {
                return Err(Error::NonFinite(format!("coefficient at {k}")));
            }
            if !self.coeffs.contains_key(&-*k) {
                return Err(Error::InvalidField(format!(
                    "mode {k} has no conjugate partner"
                )));
            }
        }
        let scale = self.max_norm();
        let tol = T::lit(VALIDATION_TOL) * scale;
        let herm = self.hermitian_residual();
        if herm > tol {
            return Err(Error::InvalidField(format!(
                "Hermitian symmetry violated by {herm} (tolerance {tol})"
            )));
        }
        let div = self.divergence_residual();
        if div > tol {
            return Err(Error::InvalidField(format!(
                "divergence residual {div} exceeds {tol}"
            )));
        }
        Ok(())
    }

    /// Evaluate `v(θ, x)`. The imaginary residual is discarded.
    pub fn eval(&self, theta: [T; 2], x: [T; 2]) -> [T; 2] {
        let two_pi = T::TAU();
        let mut acc = [Complex::new(T::zero(), T::zero()); 2];
        for (k, c) in &self.coeffs {
            let phase = two_pi
                * (theta[0] * T::int(k.m[0].into())
                    + theta[1] * T::int(k.m[1].into())
                    + x[0] * T::int(k.n[0].into())
                    + x[1] * T::int(k.n[1].into()));
            let e = Complex::from_polar(T::one(), phase);
            acc[0] += c[0] * e;
            acc[1] += c[1] * e;
        }
        [acc[0].re, acc[1].re]
    }

    /// Like [`Self::eval`] but also returns the discarded imaginary parts.
    pub fn eval_complex(&self, theta: [T; 2], x: [T; 2]) -> Coeff<T> {
        let two_pi = T::TAU();
        let mut acc = [Complex::new(T::zero(), T::zero()); 2];
        for (k, c) in &self.coeffs {
            let phase = two_pi
                * (theta[0] * T::int(k.m[0].into())
                    + theta[1] * T::int(k.m[1].into())
                    + x[0] * T::int(k.n[0].into())
                    + x[1] * T::int(k.n[1].into()));
            let e = Complex::from_polar(T::one(), phase);
            acc[0] += c[0] * e;
            acc[1] += c[1] * e;
        }
        acc
    }

    /// Freeze the driving state: collapse all `m` into a physical-space
    /// trigonometric polynomial `x ↦ v(θ, x)`.
    pub fn at_theta(&self, theta: [T; 2]) -> PhysicalSlice<T> {
        let two_pi = T::TAU();
        let mut by_n: BTreeMap<[i32; 2], Coeff<T>> = BTreeMap::new();
        for (k, c) in &self.coeffs {
            let phase =
                two_pi * (theta[0] * T::int(k.m[0].into()) + theta[1] * T::int(k.m[1].into()));
            let e = Complex::from_polar(T::one(), phase);
            let slot = by_n
                .entry(k.n)
                .or_insert([Complex::new(T::zero(), T::zero()); 2]);
            slot[0] += c[0] * e;
            slot[1] += c[1] * e;
        }
        PhysicalSlice::new(by_n)
    }

    /// Write the coefficient table as CSV (17 significant digits).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for (k, c) in &self.coeffs {
            writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                k.m[0], k.m[1], k.n[0], k.n[1], c[0].re, c[0].im, c[1].re, c[1].im
            )?;
        }
        Ok(())
    }

    /// Read a coefficient table written by [`Self::write_csv`] and validate it.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty coefficient file".into()))??;
        if header.trim() != CSV_HEADER {
            return Err(Error::Parse(format!(
                "unexpected header {:?}",
                header.trim()
            )));
        }
        let mut coeffs = BTreeMap::new();
        let mut min_abs = f64::INFINITY;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() != 8 {
                return Err(Error::Parse(format!(
                    "line {}: expected 8 columns",
                    lineno + 2
                )));
            }
            let int = |s: &str| -> Result<i32> {
                s.trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            let flt = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            let k = ModeIndex::new(int(cols[0])?, int(cols[1])?, int(cols[2])?, int(cols[3])?);
            let v = [
                Complex::new(flt(cols[4])?, flt(cols[5])?),
                Complex::new(flt(cols[6])?, flt(cols[7])?),
            ];
            min_abs = min_abs.min(v[0].norm().max(v[1].norm()));
            if coeffs
                .insert(k, [v[0].map(T::lit), v[1].map(T::lit)])
                .is_some()
            {
                return Err(Error::Parse(format!("duplicate mode {k}")));
            }
        }
        // The threshold that produced the table is unknown; record the largest
        // value compatible with every stored coefficient.
        let thr = if min_abs.is_finite() {
            T::lit(min_abs)
        } else {
            T::zero()
        };
        Self::from_coeffs(coeffs, thr)
    }
}

trait MapComplex<T> {
    fn map<U>(self, f: impl Fn(T) -> U) -> Complex<U>;
}

impl<T> MapComplex<T> for Complex<T> {
    fn map<U>(self, f: impl Fn(T) -> U) -> Complex<U> {
        Complex::new(f(self.re), f(self.im))
    }
}

/// `x ↦ v(θ, x)` for one frozen driving state, evaluated with cached powers
/// of `exp(2πi x_j)`.
#[derive(Clone, Debug)]
pub struct PhysicalSlice<T> {
    terms: Vec<([i32; 2], Coeff<T>)>,
    max_n: [i32; 2],
}

impl<T: Real> PhysicalSlice<T> {
    fn new(by_n: BTreeMap<[i32; 2], Coeff<T>>) -> Self {
        let mut max_n = [0, 0];
        for n in by_n.keys() {
            max_n[0] = max_n[0].max(n[0].abs());
            max_n[1] = max_n[1].max(n[1].abs());
        }
        Self {
            terms: by_n.into_iter().collect(),
            max_n,
        }
    }

    pub fn eval(&self, x: [T; 2]) -> [T; 2] {
        let two_pi = T::TAU();
        let base = [
            Complex::from_polar(T::one(), two_pi * x[0]),
            Complex::from_polar(T::one(), two_pi * x[1]),
        ];
        let mut acc = [T::zero(); 2];
        if self.max_n[0] <= 4 && self.max_n[1] <= 4 {
            // Small bandwidth: powers by repeated multiplication.
            let mut pw = [[Complex::new(T::one(), T::zero()); 9]; 2];
            for a in 0..2 {
                for j in 1..=(self.max_n[a] as usize) {
                    pw[a][4 + j] = pw[a][3 + j] * base[a];
                    pw[a][4 - j] = pw[a][4 + j].conj();
                }
            }
            for (n, c) in &self.terms {
                let e = pw[0][(4 + n[0]) as usize] * pw[1][(4 + n[1]) as usize];
                acc[0] += (c[0] * e).re;
                acc[1] += (c[1] * e).re;
            }
        } else {
            for (n, c) in &self.terms {
                let e = Complex::from_polar(
                    T::one(),
                    two_pi * (x[0] * T::int(n[0].into()) + x[1] * T::int(n[1].into())),
                );
                acc[0] += (c[0] * e).re;
                acc[1] += (c[1] * e).re;
            }
        }
        acc
    }
}

/// Builtin: the autonomous 2×2 gyre grid translated by the driving state,
/// `v(θ, x) = v_aut(x + θ)`. Exactly four modes.
pub fn builtin_translated_gyres<T: Real>() -> FourierField<T> {
    let q = T::lit(0.25);
    let z = T::zero();
    let i = |s: f64| Complex::new(z, q * T::lit(s));
    let coeffs = [
        (ModeIndex::new(1, 1, 1, 1), [i(-1.0), i(1.0)]),
        (ModeIndex::new(1, -1, 1, -1), [i(1.0), i(1.0)]),
        (ModeIndex::new(-1, 1, -1, 1), [i(-1.0), i(-1.0)]),
        (ModeIndex::new(-1, -1, -1, -1), [i(1.0), i(-1.0)]),
    ];
    FourierField {
        coeffs: coeffs.into_iter().collect(),
        threshold_used: T::zero(),
    }
}

/// Builtin: two shears of oscillating strength,
/// `v(θ, x) = sin(2πθ₁)(sin 2πx₂, 0) + sin(2πθ₂)(0, sin 2πx₁)`. Eight modes.
pub fn builtin_shear<T: Real>() -> FourierField<T> {
    let z = Complex::new(T::zero(), T::zero());
    let r = |s: f64| Complex::new(T::lit(s), T::zero());
    // sin a · sin b = -¼ (e^{i(a+b)} - e^{i(a-b)} - e^{i(b-a)} + e^{-i(a+b)})
    let coeffs = [
        (ModeIndex::new(1, 0, 0, 1), [r(-0.25), z]),
        (ModeIndex::new(1, 0, 0, -1), [r(0.25), z]),
        (ModeIndex::new(-1, 0, 0, 1), [r(0.25), z]),
        (ModeIndex::new(-1, 0, 0, -1), [r(-0.25), z]),
        (ModeIndex::new(0, 1, 1, 0), [z, r(-0.25)]),
        (ModeIndex::new(0, 1, -1, 0), [z, r(0.25)]),
        (ModeIndex::new(0, -1, 1, 0), [z, r(0.25)]),
        (ModeIndex::new(0, -1, -1, 0), [z, r(-0.25)]),
    ];
    FourierField {
        coeffs: coeffs.into_iter().collect(),
        threshold_used: T::zero(),
    }
}

/// Builtin: the gyre grid oscillating with amplitude `delta`,
/// `v(θ, x) = v_aut(x + δ (sin 2πθ₁, cos 2πθ₂))`, computed numerically on a
/// [`DEFAULT_AXIS`]⁴ grid and thresholded at `err`.
pub fn builtin_oscillating_gyres<T: Real>(delta: T, err: T) -> Result<FourierField<T>> {
    if !(delta > T::zero()) || !(delta < T::lit(0.5)) {
        return Err(Error::InvalidParameter(format!(
            "oscillation amplitude must lie in (0, 0.5), got {delta}"
        )));
    }
    if !(err > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {err}"
        )));
    }
    let field = numeric_coeffs(
        |theta, x| closed_form::oscillating_gyres(delta, theta, x),
        [DEFAULT_AXIS; 4],
        err,
    )?;
    field.validate()?;
    Ok(field)
}

/// Fourier coefficients of a sampled field by a 4-D DFT.
///
/// `sampler(θ, x)` is evaluated on the uniform grid with `axis_sizes` points
/// along `(θ₁, θ₂, x₁, x₂)`. The coefficient of `(m, n)` is the grid average
/// of `v · exp(-2πi(θ·m + x·n))`. Modes whose components are all below `err`
/// in absolute value are dropped, the survivors are closed under negation and
/// averaged with their conjugate partner so the table is exactly Hermitian.
/// Nyquist bins are discarded; content above Nyquist aliases.
pub fn numeric_coeffs<T, F>(sampler: F, axis_sizes: [usize; 4], err: T) -> Result<FourierField<T>>
where
    T: Real,
    F: Fn([T; 2], [T; 2]) -> [T; 2] + Sync,
{
    for &n in &axis_sizes {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "axis sizes must be even and positive, got {axis_sizes:?}"
            )));
        }
    }
    if !(err >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be non-negative, got {err}"
        )));
    }
    let [n0, n1, n2, n3] = axis_sizes;
    let total = n0 * n1 * n2 * n3;
    let inner = n1 * n2 * n3;

    let mut comp = [
        vec![Complex::new(T::zero(), T::zero()); total],
        vec![Complex::new(T::zero(), T::zero()); total],
    ];
    {
        let [c0, c1] = &mut comp;
        let grid = |j: usize, n: usize| T::int(j as i64) / T::int(n as i64);
        c0.par_chunks_mut(inner)
            .zip(c1.par_chunks_mut(inner))
            .enumerate()
            .try_for_each(|(j0, (a, b))| -> Result<()> {
                for j1 in 0..n1 {
                    for j2 in 0..n2 {
                        for j3 in 0..n3 {
                            let idx = (j1 * n2 + j2) * n3 + j3;
                            let v =
                                sampler([grid(j0, n0), grid(j1, n1)], [grid(j2, n2), grid(j3, n3)]);
                            if !(v[0].is_finite() && v[1].is_finite()) {
                                return Err(Error::NonFinite(format!(
                                    "sample at grid index ({j0},{j1},{j2},{j3})"
                                )));
                            }
                            a[idx] = Complex::new(v[0], T::zero());
                            b[idx] = Complex::new(v[1], T::zero());
                        }
                    }
                }
                Ok(())
            })?;
    }
    for c in comp.iter_mut() {
        fft_nd_forward(c, axis_sizes);
    }
    let norm = T::one() / T::int(total as i64);

    let signed = |j: usize, n: usize| -> Option<i32> {
        let h = n / 2;
        if j == h {
            None
        } else if j < h {
            Some(j as i32)
        } else {
            Some(j as i32 - n as i32)
        }
    };
    let wrap = |k: i32, n: usize| -> usize { k.rem_euclid(n as i32) as usize };
    let flat = |k: &ModeIndex| -> usize {
        ((wrap(k.m[0], n0) * n1 + wrap(k.m[1], n1)) * n2 + wrap(k.n[0], n2)) * n3 + wrap(k.n[1], n3)
    };

    let mut keep: Vec<ModeIndex> = Vec::new();
    for (idx, (a, b)) in comp[0].iter().zip(comp[1].iter()).enumerate() {
        if (a.norm() * norm) < err && (b.norm() * norm) < err {
            continue;
        }
        let j3 = idx % n3;
        let j2 = (idx / n3) % n2;
        let j1 = (idx / (n3 * n2)) % n1;
        let j0 = idx / inner;
        if let (Some(m1), Some(m2), Some(k1), Some(k2)) = (
            signed(j0, n0),
            signed(j1, n1),
            signed(j2, n2),
            signed(j3, n3),
        ) {
            keep.push(ModeIndex::new(m1, m2, k1, k2));
        }
    }
    let mut closed: BTreeMap<ModeIndex, Coeff<T>> = BTreeMap::new();
    for k in keep.iter().flat_map(|k| [*k, -*k]) {
        if closed.contains_key(&k) {
            continue;
        }
        let (i, j) = (flat(&k), flat(&-k));
        let half = T::lit(0.5);
        let sym = |c: &Vec<Complex<T>>| (c[i] + c[j].conj()) * (norm * half);
        let v = [sym(&comp[0]), sym(&comp[1])];
        closed.insert(k, v);
        closed.insert(-k, [v[0].conj(), v[1].conj()]);
    }
    // Partners have identical moduli after symmetrization, so this keeps the
    // table closed under negation.
    closed.retain(|_, c| !(c[0].norm() < err && c[1].norm() < err));
    Ok(FourierField {
        coeffs: closed,
        threshold_used: err,
    })
}

fn fft_nd_forward<T: Real>(data: &mut [Complex<T>], dims: [usize; 4]) {
    let mut planner = FftPlanner::<T>::new();
    let total: usize = dims.iter().product();
    for axis in 0..4 {
        let n = dims[axis];
        let stride: usize = dims[axis + 1..].iter().product();
        let fft = planner.plan_fft_forward(n);
        if stride == 1 {
            data.par_chunks_mut(n).for_each(|line| fft.process(line));
            continue;
        }
        let block = n * stride;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex::new(T::zero(), T::zero()); n];
            for s in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = chunk[j * stride + s];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    chunk[j * stride + s] = *v;
                }
            }
        });
        debug_assert_eq!(total % block, 0);
    }
}

/// Closed-form samplers of the builtin fields and the gyre stream function.
pub mod closed_form {
    use crate::scalar::Real;

    /// `v_aut(x) = (cos 2πx₁ sin 2πx₂, -sin 2πx₁ cos 2πx₂)`.
    pub fn gyres<T: Real>(x: [T; 2]) -> [T; 2] {
        let (s1, c1) = (T::TAU() * x[0]).sin_cos();
        let (s2, c2) = (T::TAU() * x[1]).sin_cos();
        [c1 * s2, -s1 * c2]
    }

    /// Stream function of [`gyres`]: `ψ(x) = cos(2πx₁) cos(2πx₂) / 2π`.
    pub fn gyre_stream<T: Real>(x: [T; 2]) -> T {
        (T::TAU() * x[0]).cos() * (T::TAU() * x[1]).cos() / T::TAU()
    }

    pub fn translated_gyres<T: Real>(theta: [T; 2], x: [T; 2]) -> [T; 2] {
        gyres([x[0] + theta[0], x[1] + theta[1]])
    }

    pub fn oscillating_gyres<T: Real>(delta: T, theta: [T; 2], x: [T; 2]) -> [T; 2] {
        let off = [
            delta * (T::TAU() * theta[0]).sin(),
            delta * (T::TAU() * theta[1]).cos(),
        ];
        gyres([x[0] + off[0], x[1] + off[1]])
    }

    pub fn shear<T: Real>(theta: [T; 2], x: [T; 2]) -> [T; 2] {
        let a = (T::TAU() * theta[0]).sin();
        let b = (T::TAU() * theta[1]).sin();
        [a * (T::TAU() * x[1]).sin(), b * (T::TAU() * x[0]).sin()]
    }
}
