//! Eigenpairs of `Γ_S` nearest a complex shift.
//!
//! Implicitly restarted Arnoldi on the shift-inverted operator
//! `(Γ_S - σI)⁻¹`, applied through a block-sparse direct factorization
//! (see [`crate::block_lu`]). A Ritz value `μ` of the inverted operator maps back to
//! `z = σ + 1/μ`; the largest `|μ|` are the eigenvalues closest to `σ`.

use std::collections::HashMap;
use std::io::Write;

use faer::Mat;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block_lu::BlockLu;
use crate::error::{Error, Result};
use crate::generator::{CoefficientVector, DiscreteGenerator};
use crate::mode_select::ModeSet;
use crate::sparse::CscMatrix;

type C = Complex<f64>;

const START_SEED: u64 = 0x5eed_0001;

/// Eigenvalue `z = λ + iη` with a unit coefficient eigenvector.
#[derive(Clone, Debug)]
pub struct RitzPair {
    pub z: C,
    pub vector: CoefficientVector<f64>,
    /// `‖Γ_S v - z v‖₂`, recomputed against the assembled matrix.
    pub residual: f64,
}

impl RitzPair {
    /// Decay rate `λ = Re z`.
    pub fn lambda(&self) -> f64 {
        self.z.re
    }

    /// Rotation rate `η = Im z`.
    pub fn eta(&self) -> f64 {
        self.z.im
    }
}

/// Shift-invert Arnoldi parameters.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub k: usize,
    pub shift: C,
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl SolverConfig {
    /// Defaults: shift 1, Krylov dimension `max(2k + 10, 40)`, tolerance `1e-10`,
    /// 200 restarts.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            shift: C::new(1.0, 0.0),
            krylov_dim: (2 * k + 10).max(40),
            tol: 1e-10,
            max_restarts: 200,
        }
    }

    pub fn with_shift(mut self, shift: C) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.krylov_dim <= self.k {
            return Err(Error::InvalidParameter(format!(
                "krylov_dim ({}) must exceed k ({})",
                self.krylov_dim, self.k
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(self.shift.re.is_finite() && self.shift.im.is_finite()) {
            return Err(Error::InvalidParameter("shift must be finite".into()));
        }
        Ok(())
    }
}

/// Shift at the Poincaré spectral-gap bound, `-2π²ε²`.
pub fn gap_shift(eps: f64) -> C {
    let pi = std::f64::consts::PI;
    C::new(-2.0 * pi * pi * eps * eps, 0.0)
}

/// Output of [`solve_shift_invert`].
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Converged pairs sorted by `|z - shift|`.
    pub pairs: Vec<RitzPair>,
    /// Shift actually factorized.
    pub shift: C,
    /// The requested shift could not be factorized and was perturbed.
    pub shift_perturbed: bool,
    /// Fewer than `k` pairs converged within `max_restarts`.
    pub incomplete: bool,
    pub restarts: usize,
    pub operator_applications: usize,
}

impl Spectrum {
    /// Write `re,im,residual` rows in the stored order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im,residual")?;
        for p in &self.pairs {
            writeln!(out, "{:e},{:e},{:e}", p.z.re, p.z.im, p.residual)?;
        }
        Ok(())
    }
}

/// Direct factorization of `Γ_S - σI`, blocked by physical wavenumber `n`.
pub struct ShiftedSolver {
    lu: BlockLu,
    matrix: CscMatrix<f64>,
    shift: C,
}

/// Refinement sweeps per solve; blocks are pivoted only internally, so a
/// shift left of the imaginary axis can lose digits without them.
const REFINE_STEPS: usize = 3;

/// Largest relative backward error accepted from the factorization.
const PROBE_TOL: f64 = 1e-8;

/// Pairs whose true residual exceeds this (relative to `1 + |z|`) are
/// discarded even if the Krylov estimate called them converged.
const ACCEPT_TOL: f64 = 1e-6;

impl ShiftedSolver {
    pub fn new(gen: &DiscreteGenerator<f64>, shift: C) -> Result<Self> {
        let fail = |reason: String| Error::Factorization {
            shift_re: shift.re,
            shift_im: shift.im,
            reason,
        };
        let mut label: HashMap<[i32; 2], usize> = HashMap::new();
        let group_of: Vec<usize> = gen
            .modeset()
            .modes()
            .iter()
            .map(|k| {
                let next = label.len();
                *label.entry(k.n).or_insert(next)
            })
            .collect();
        let lu = BlockLu::factorize(gen.matrix(), shift, &group_of)?;
        let solver = Self {
            lu,
            matrix: gen.matrix().clone(),
            shift,
        };
        // Exactly singular pivots surface as non-finite solutions, nearly
        // singular ones as a large backward error.
        let b = start_vector(gen.dim());
        let probe = solver.solve(&b);
        if probe
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(fail("singular matrix (shift is an eigenvalue)".into()));
        }
        let err = norm(&solver.residual(&b, &probe));
        if !(err <= PROBE_TOL * norm(&b)) {
            return Err(fail(format!(
                "numerically singular (backward error {err:.1e})"
            )));
        }
        Ok(solver)
    }

    fn residual(&self, b: &[C], x: &[C]) -> Vec<C> {
        let ax = self.matrix.matvec(x).expect("square system");
        b.iter()
            .zip(ax)
            .zip(x)
            .map(|((bi, ai), xi)| bi - (ai - self.shift * xi))
            .collect()
    }

    /// `(Γ_S - σI)⁻¹ b`.
    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let mut x = self.lu.solve(b);
        let bn = norm(b);
        for _ in 0..REFINE_STEPS {
            let r = self.residual(b, &x);
            if norm(&r) <= 1e-12 * bn {
                break;
            }
            let d = self.lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += di;
            }
        }
        x
    }
}

/// `‖Γ_S v - z v‖₂`.
pub fn residual(gen: &DiscreteGenerator<f64>, z: C, v: &CoefficientVector<f64>) -> Result<f64> {
    let gv = gen.apply(v)?;
    Ok(gv
        .0
        .iter()
        .zip(&v.0)
        .map(|(a, b)| (a - z * b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// The pair for `conj z`: `w(m,n) = conj v(-m,-n)`.
pub fn conjugate_partner(pair: &RitzPair, modes: &ModeSet) -> Result<(C, CoefficientVector<f64>)> {
    let neg = modes.negation_map()?;
    let w = neg.iter().map(|&j| pair.vector.0[j].conj()).collect();
    Ok((pair.z.conj(), CoefficientVector(w)))
}

/// The `k` eigenvalues of `Γ_S` closest to `cfg.shift`, with eigenvectors.
///
/// If the shifted matrix is singular the shift is perturbed once by
/// `1e-7·(1+|σ|)·(1+i)`; [`Spectrum::shift_perturbed`] records this.
pub fn solve_shift_invert(gen: &DiscreteGenerator<f64>, cfg: &SolverConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let n = gen.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty generator".into()));
    }
    let (solver, shift, perturbed) = match ShiftedSolver::new(gen, cfg.shift) {
        Ok(s) => (s, cfg.shift, false),
        Err(Error::Factorization { .. }) => {
            let s = cfg.shift + C::new(1.0, 1.0) * (1e-7 * (1.0 + cfg.shift.norm()));
            (ShiftedSolver::new(gen, s)?, s, true)
        }
        Err(e) => return Err(e),
    };

    let k = cfg.k.min(n);
    let m = cfg.krylov_dim.min(n);
    let mut arnoldi = Arnoldi::new(n, m);
    arnoldi.start(&start_vector(n));
    let op = |x: &[C]| solver.solve(x);

    let mut restarts = 0;
    let (ritz, incomplete) = if m == n || k >= m {
        arnoldi.extend(0, m, &op);
        let ritz = arnoldi.ritz(m)?;
        (ritz.into_iter().take(k).collect::<Vec<_>>(), false)
    } else {
        let mut kept = 0;
        loop {
            arnoldi.extend(kept, m, &op);
            let ritz = arnoldi.ritz(m)?;
            let beta = arnoldi.beta;
            let converged = |r: &Ritz| beta * r.last_component.norm() <= cfg.tol * r.mu.norm();
            let nconv = ritz.iter().take(k).filter(|r| converged(r)).count();
            if nconv >= k || restarts >= cfg.max_restarts || beta == 0.0 {
                let done: Vec<Ritz> = ritz
                    .into_iter()
                    .take(k)
                    .filter(|r| converged(r) || beta == 0.0)
                    .collect();
                let incomplete = done.len() < k;
                break (done, incomplete);
            }
            // Keep a few more than k to avoid stagnation, as ARPACK does.
            let keep = (k + nconv.min((m - k) / 2)).min(m - 1);
            let shifts: Vec<C> = ritz[keep..].iter().map(|r| r.mu).collect();
            arnoldi.implicit_restart(m, keep, &shifts);
            kept = keep;
            restarts += 1;
        }
    };

    let mut pairs: Vec<RitzPair> = ritz
        .into_iter()
        .map(|r| {
            let v = arnoldi.combine(&r.y);
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let v = CoefficientVector(v.into_iter().map(|z| z / norm).collect());
            let z = shift + C::new(1.0, 0.0) / r.mu;
            let res = residual(gen, z, &v)?;
            Ok(RitzPair {
                z,
                vector: v,
                residual: res,
            })
        })
        .collect::<Result<_>>()?;
    let found = pairs.len();
    pairs.retain(|p| p.residual <= ACCEPT_TOL * (1.0 + p.z.norm()));
    let incomplete = incomplete || pairs.len() < found;
    pairs.sort_by(|a, b| {
        (a.z - cfg.shift)
            .norm()
            .total_cmp(&(b.z - cfg.shift).norm())
            .then(a.z.im.total_cmp(&b.z.im))
    });
    Ok(Spectrum {
        pairs,
        shift,
        shift_perturbed: perturbed,
        incomplete,
        restarts,
        operator_applications: arnoldi.applications,
    })
}

/// Fixed pseudo-random start vector. A constant vector would be invariant
/// under the symmetries of the examples and never excite odd eigenvectors.
fn start_vector(n: usize) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    (0..n)
        .map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

struct Ritz {
    mu: C,
    /// Unit eigenvector of the projected Hessenberg matrix.
    y: Vec<C>,
    last_component: C,
}

/// Arnoldi factorization `A V_j = V_j H_j + β v_{j+1} e_jᵀ`.
struct Arnoldi {
    n: usize,
    /// Column-major basis, `m + 1` columns of length `n`.
    basis: Vec<Vec<C>>,
    /// Dense `(m+1) × m` Hessenberg, row-major.
    h: Vec<Vec<C>>,
    beta: f64,
    applications: usize,
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Arnoldi {
    fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            basis: Vec::with_capacity(m + 1),
            h: vec![vec![C::new(0.0, 0.0); m]; m + 1],
            beta: 0.0,
            applications: 0,
        }
    }

    fn start(&mut self, v0: &[C]) {
        let nv = norm(v0);
        self.basis.clear();
        self.basis.push(v0.iter().map(|z| z / nv).collect());
    }

    /// Grow the factorization from `from` to `to` columns. `basis` must hold
    /// `from + 1` vectors on entry.
    fn extend(&mut self, from: usize, to: usize, op: &impl Fn(&[C]) -> Vec<C>) {
        self.basis.truncate(from + 1);
        for j in from..to {
            let mut w = op(&self.basis[j]);
            self.applications += 1;
            let wn0 = norm(&w);
            // Classical Gram–Schmidt, applied twice.
            let mut coeffs = vec![C::new(0.0, 0.0); j + 1];
            for _ in 0..2 {
                for (i, v) in self.basis.iter().enumerate() {
                    let c = dot(v, &w);
                    coeffs[i] += c;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            for (i, c) in coeffs.iter().enumerate() {
                self.h[i][j] = *c;
            }
            let mut beta = norm(&w);
            if beta <= 1e-14 * wn0.max(f64::MIN_POSITIVE) {
                // Invariant subspace: continue with a fresh orthogonal direction.
                self.h[j + 1][j] = C::new(0.0, 0.0);
                if j + 1 == to {
                    self.beta = 0.0;
                    self.basis.push(vec![C::new(0.0, 0.0); self.n]);
                    return;
                }
                w = self.fresh_direction(j);
                beta = 0.0;
                self.basis.push(w);
            } else {
                self.h[j + 1][j] = C::new(beta, 0.0);
                self.basis.push(w.into_iter().map(|z| z / beta).collect());
            }
            self.beta = beta;
        }
    }

    fn fresh_direction(&self, j: usize) -> Vec<C> {
        for seed in 0..self.n {
            let mut w: Vec<C> = (0..self.n)
                .map(|i| {
                    let t = ((i * 7919 + seed * 104729 + j * 31) % 1009) as f64 / 1009.0 - 0.5;
                    C::new(t, 0.0)
                })
                .collect();
            for _ in 0..2 {
                for v in &self.basis {
                    let c = dot(v, &w);
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            let nw = norm(&w);
            if nw > 1e-8 {
                return w.into_iter().map(|z| z / nw).collect();
            }
        }
        vec![C::new(0.0, 0.0); self.n]
    }

    /// Eigenpairs of the leading `m × m` Hessenberg block, sorted by `|μ|` descending.
    fn ritz(&self, m: usize) -> Result<Vec<Ritz>> {
        let hm = Mat::<C>::from_fn(m, m, |i, j| self.h[i][j]);
        let evd = hm.eigen().map_err(|e| {
            Error::InvalidParameter(format!("projected eigenproblem failed: {e:?}"))
        })?;
        let s = evd.S();
        let u = evd.U();
        let mut out: Vec<Ritz> = (0..m)
            .map(|c| {
                let mut y: Vec<C> = (0..m).map(|i| u[(i, c)]).collect();
                let ny = norm(&y);
                for z in y.iter_mut() {
                    *z /= ny;
                }
                let last = y[m - 1];
                Ritz {
                    mu: s[c],
                    y,
                    last_component: last,
                }
            })
            .collect();
        out.sort_by(|a, b| b.mu.norm().total_cmp(&a.mu.norm()));
        Ok(out)
    }

    /// Apply the unwanted Ritz values as shifted QR steps and truncate to `keep` columns.
    fn implicit_restart(&mut self, m: usize, keep: usize, shifts: &[C]) {
        let mut h: Vec<Vec<C>> = (0..m).map(|i| self.h[i][..m].to_vec()).collect();
        let mut q: Vec<Vec<C>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| C::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        for &mu in shifts {
            hessenberg_qr_step(&mut h, &mut q, mu);
        }
        // f⁺ = v_{keep+1} H⁺[keep, keep-1] + β v_{m+1} Q[m-1, keep-1]
        let sigma = q[m - 1][keep - 1];
        let hk = h[keep][keep - 1];
        let mut f: Vec<C> = vec![C::new(0.0, 0.0); self.n];
        // New basis V⁺ = V_m Q[:, 0..=keep]; column `keep` feeds the residual.
        let mut new_basis: Vec<Vec<C>> = Vec::with_capacity(m + 1);
        for c in 0..=keep.min(m - 1) {
            let mut v = vec![C::new(0.0, 0.0); self.n];
            for (i, b) in self.basis[..m].iter().enumerate() {
                let coef = q[i][c];
                if coef == C::new(0.0, 0.0) {
                    continue;
                }
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk += coef * bk;
                }
            }
            new_basis.push(v);
        }
        if keep < m {
            for (fk, vk) in f.iter_mut().zip(&new_basis[keep]) {
                *fk += hk * vk;
            }
        }
        let resid_scale = sigma * self.beta;
        for (fk, vk) in f.iter_mut().zip(&self.basis[m]) {
            *fk += resid_scale * vk;
        }
        new_basis.truncate(keep);
        let bnorm = norm(&f);
        for row in self.h.iter_mut() {
            for v in row.iter_mut() {
                *v = C::new(0.0, 0.0);
            }
        }
        for i in 0..keep {
            for j in 0..keep {
                self.h[i][j] = h[i][j];
            }
        }
        self.basis = new_basis;
        if bnorm > 0.0 {
            self.h[keep][keep - 1] = C::new(bnorm, 0.0);
            self.basis.push(f.into_iter().map(|z| z / bnorm).collect());
        } else {
            self.h[keep][keep - 1] = C::new(0.0, 0.0);
            let fresh = self.fresh_direction(keep);
            self.basis.push(fresh);
        }
        self.beta = bnorm;
    }

    /// `V y` over the first `y.len()` basis vectors.
    fn combine(&self, y: &[C]) -> Vec<C> {
        let mut v = vec![C::new(0.0, 0.0); self.n];
        for (c, b) in y.iter().zip(&self.basis) {
            for (vk, bk) in v.iter_mut().zip(b) {
                *vk += c * bk;
            }
        }
        v
    }
}

/// One explicitly shifted QR step `H - μI = QR`, `H ← RQ + μI`, on an upper
/// Hessenberg matrix via Givens rotations; accumulates `Q_acc ← Q_acc Q`.
fn hessenberg_qr_step(h: &mut [Vec<C>], q_acc: &mut [Vec<C>], mu: C) {
    let m = h.len();
    for i in 0..m {
        h[i][i] -= mu;
    }
    let mut rots: Vec<(f64, C)> = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m.saturating_sub(1) {
        let a = h[j][j];
        let b = h[j + 1][j];
        let (c, s) = givens(a, b);
        for col in j..m {
            let x = h[j][col];
            let y = h[j + 1][col];
            h[j][col] = x * c + s * y;
            h[j + 1][col] = -s.conj() * x + y * c;
        }
        h[j + 1][j] = C::new(0.0, 0.0);
        rots.push((c, s));
    }
    for (j, &(c, s)) in rots.iter().enumerate() {
        let rows = (j + 2).min(m);
        for row in h.iter_mut().take(rows) {
            let x = row[j];
            let y = row[j + 1];
            row[j] = x * c + s.conj() * y;
            row[j + 1] = -s * x + y * c;
        }
        for row in q_acc.iter_mut() {
            let x = row[j];
            let y = row[j + 1];
            row[j] = x * c + s.conj() * y;
            row[j + 1] = -s * x + y * c;
        }
    }
    for i in 0..m {
        h[i][i] += mu;
    }
}

/// Complex Givens rotation `(c, s)` with real `c` such that
/// `[c s; -s̄ c] [a; b] = [r; 0]`.
fn givens(a: C, b: C) -> (f64, C) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn givens_annihilates() {
        for (a, b) in [
            (C::new(1.0, 2.0), C::new(-0.5, 0.3)),
            (C::new(0.0, 0.0), C::new(2.0, -1.0)),
            (C::new(3.0, 0.0), C::new(0.0, 0.0)),
        ] {
            let (c, s) = givens(a, b);
            let top = a * c + s * b;
            let bot = -s.conj() * a + b * c;
            assert!(bot.norm() < 1e-14);
            assert!((top.norm() - a.norm().hypot(b.norm())).abs() < 1e-14);
        }
    }

    #[test]
    fn qr_step_is_similarity() {
        let m = 6;
        let mut h: Vec<Vec<C>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i > j + 1 {
                            C::new(0.0, 0.0)
                        } else {
                            C::new((i * 3 + j) as f64 * 0.1 + 0.2, (j as f64 - i as f64) * 0.05)
                        }
                    })
                    .collect()
            })
            .collect();
        let orig = h.clone();
        let mut q: Vec<Vec<C>> = (0..m)
            .map(|i| (0..m).map(|j| C::new((i == j) as u8 as f64, 0.0)).collect())
            .collect();
        hessenberg_qr_step(&mut h, &mut q, C::new(0.3, 0.1));
        // Q^H H_orig Q == H_new
        for i in 0..m {
            for j in 0..m {
                let mut acc = C::new(0.0, 0.0);
                for a in 0..m {
                    for b in 0..m {
                        acc += q[a][i].conj() * orig[a][b] * q[b][j];
                    }
                }
                assert!((acc - h[i][j]).norm() < 1e-12, "({i},{j})");
            }
            for j in 0..i.saturating_sub(1) {
                assert!(h[i][j].norm() < 1e-12);
            }
        }
    }
}
