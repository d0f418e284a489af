//! Fibres `f(θ, ·)` of an eigenfunction of `Γ_S` and the coherent-set rules.
//!
//! A Ritz pair `(z, f̂)` with `z = λ + iη` gives the family of sets
//!
//! * CS1: `Re(e^{iηt} f(φᵗθ, x)) > 0`;
//! * CS2: `|Re(e^{iηt} f(φᵗθ, x))| / ‖Re(e^{iηt} f(φᵗθ))‖₁ > q`;
//! * CS3: `|f(φᵗθ, x)| / ‖f(φᵗθ)‖₁ > q`,
//!
//! where `φᵗθ = θ + αt mod 1`. Norms are grid averages over a uniform raster.

use std::io::Write;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::CoefficientVector;
use crate::mode_select::ModeSet;
use crate::scalar::wrap_unit;
use crate::spectral::RitzPair;

type C = Complex<f64>;

/// Default fibre raster resolution per axis.
pub const DEFAULT_GRID: usize = 256;

/// `|Im z|` below this counts as a real eigenvalue.
pub const REAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CS1")]
    Cs1,
    #[serde(rename = "CS2")]
    Cs2,
    #[serde(rename = "CS3")]
    Cs3,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cs1 => "CS1",
            Method::Cs2 => "CS2",
            Method::Cs3 => "CS3",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CS1" => Ok(Method::Cs1),
            "CS2" => Ok(Method::Cs2),
            "CS3" => Ok(Method::Cs3),
            _ => Err(Error::InvalidParameter(format!(
                "unknown method {s:?} (expected CS1, CS2 or CS3)"
            ))),
        }
    }
}

/// Make the eigenvector's global phase canonical.
///
/// Complex `z`: the first largest-magnitude coefficient becomes positive real.
/// Real `z`: the phase is chosen so that `v(m,n) = conj v(-m,-n)`, the vector
/// is averaged with its conjugate partner to make this exact, and the sign is
/// fixed so the first largest-magnitude coefficient has positive real part.
pub fn phase_normalize(pair: &RitzPair, modes: &ModeSet) -> Result<RitzPair> {
    let v = &pair.vector.0;
    if v.len() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            got: v.len(),
        });
    }
    let out = if pair.z.im.abs() < REAL_TOL {
        let neg = modes.negation_map()?;
        // For a simple real eigenvalue conj(v(-k)) = c v(k) with |c| = 1;
        // Σ v(k) v(-k) = c̄ ‖v‖², so its phase identifies c.
        let s: C = v.iter().zip(&neg).map(|(a, &j)| a * v[j]).sum();
        let rot = if s.norm() > 1e-300 {
            (s / s.norm()).sqrt().inv()
        } else {
            C::new(1.0, 0.0)
        };
        let r: Vec<C> = v.iter().map(|a| a * rot).collect();
        let mut sym: Vec<C> = r
            .iter()
            .zip(&neg)
            .map(|(a, &j)| (a + r[j].conj()) * 0.5)
            .collect();
        let sign = if sym[argmax_abs(&sym)].re < 0.0 {
            -1.0
        } else {
            1.0
        };
        let nrm = sym.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for (i, a) in sym.iter_mut().enumerate() {
            *a *= sign / nrm;
            // Pin self-paired entries to the real axis bit-exactly.
            if neg[i] == i {
                a.im = 0.0;
            }
        }
        // Mirror entries so the symmetry holds bit-exactly.
        for i in 0..sym.len() {
            let j = neg[i];
            if j > i {
                sym[j] = sym[i].conj();
            }
        }
        sym
    } else {
        let p = v[argmax_abs(v)];
        let rot = if p.norm() > 0.0 {
            p.conj() / p.norm()
        } else {
            C::new(1.0, 0.0)
        };
        let nrm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let mut w: Vec<C> = v.iter().map(|a| a * rot / nrm).collect();
        let i = argmax_abs(&w);
        w[i] = C::new(w[i].norm(), 0.0);
        w
    };
    Ok(RitzPair {
        z: pair.z,
        vector: CoefficientVector(out),
        residual: pair.residual,
    })
}

/// First index whose magnitude is within a relative `1e-9` of the maximum.
fn argmax_abs(v: &[C]) -> usize {
    let max = v.iter().map(|a| a.norm()).fold(0.0, f64::max);
    v.iter()
        .position(|a| a.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0)
}

/// An eigenfunction together with an extraction rule.
#[derive(Clone, Debug)]
pub struct CoherentFamily {
    pub pair: RitzPair,
    pub modes: ModeSet,
    pub method: Method,
    /// Threshold for CS2/CS3; ignored by CS1.
    pub q: f64,
    pub grid_size: usize,
}

impl CoherentFamily {
    /// Phase-normalizes `pair` and checks the raster against the mode set.
    pub fn new(
        pair: &RitzPair,
        modes: &ModeSet,
        method: Method,
        q: f64,
        grid_size: usize,
    ) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "threshold q must be ≥ 0, got {q}"
            )));
        }
        let need = 2 * modes.max_n() as usize + 2;
        if grid_size < need {
            return Err(Error::BelowNyquist(format!(
                "fibre grid {grid_size} needs at least {need} points per axis"
            )));
        }
        Ok(Self {
            pair: phase_normalize(pair, modes)?,
            modes: modes.clone(),
            method,
            q,
            grid_size,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.pair.z.re
    }

    pub fn eta(&self) -> f64 {
        self.pair.z.im
    }

    /// `f(θ, ·)` on the `grid_size²` raster by a zero-padded inverse DFT.
    pub fn fibre(&self, theta: [f64; 2]) -> FibreRaster {
        eval_fibre(&self.pair.vector, &self.modes, theta, self.grid_size)
            .expect("grid size checked at construction")
    }

    /// The set `A_{θ₀}^t` as a membership predicate.
    pub fn frame(&self, theta0: [f64; 2], alpha: [f64; 2], t: f64) -> Frame {
        let theta = [
            wrap_unit(theta0[0] + alpha[0] * t),
            wrap_unit(theta0[1] + alpha[1] * t),
        ];
        let raster = self.fibre(theta);
        let phase = match self.method {
            Method::Cs3 => C::new(1.0, 0.0),
            _ => C::from_polar(1.0, self.eta() * t),
        };
        let norm = match self.method {
            Method::Cs1 => 1.0,
            Method::Cs2 => raster.mean_of(|f| (phase * f).re.abs()),
            Method::Cs3 => raster.l1,
        };
        Frame {
            raster,
            method: self.method,
            q: self.q,
            phase,
            norm,
        }
    }

    /// Right-hand side of the eigenfunction survival bound for CS1 families:
    /// `½ e^{2λt} ‖f^R‖_∞⁻² |A⁰|⁻¹ ‖Re(e^{iηt} f(φᵗθ₀))‖₂²`.
    pub fn theoretical_survival_bound(
        &self,
        theta0: [f64; 2],
        alpha: [f64; 2],
        t: f64,
    ) -> Result<f64> {
        if self.method != Method::Cs1 {
            return Err(Error::InvalidParameter(
                "the survival bound is stated for CS1 families only".into(),
            ));
        }
        let f0 = self.frame(theta0, alpha, 0.0);
        let sup = f0
            .raster
            .values
            .iter()
            .map(|f| f.re.abs())
            .fold(0.0, f64::max);
        let area = f0.area();
        if area == 0.0 || sup == 0.0 {
            return Err(Error::EmptyCoherentSet);
        }
        let ft = self.frame(theta0, alpha, t);
        let l2sq = ft.raster.mean_of(|f| (ft.phase * f).re.powi(2));
        Ok(0.5 * (2.0 * self.lambda() * t).exp() / (sup * sup) / area * l2sq)
    }
}

/// Complex fibre values on a uniform grid over `𝕋²`.
///
/// `values[j₂·N + j₁] = f(θ, (j₁/N, j₂/N))`: rows run along `x₂`.
#[derive(Clone, Debug)]
pub struct FibreRaster {
    pub size: usize,
    pub values: Vec<C>,
    pub theta: [f64; 2],
    /// Grid average of `|f|`.
    pub l1: f64,
}

impl FibreRaster {
    pub fn at(&self, j1: usize, j2: usize) -> C {
        self.values[j2 * self.size + j1]
    }

    pub fn mean_of(&self, g: impl Fn(C) -> f64) -> f64 {
        self.values.iter().map(|&f| g(f)).sum::<f64>() / self.values.len() as f64
    }

    /// Bilinear interpolation at `x ∈ 𝕋²`.
    pub fn interpolate(&self, x: [f64; 2]) -> C {
        let n = self.size;
        let s1 = wrap_unit(x[0]) * n as f64;
        let s2 = wrap_unit(x[1]) * n as f64;
        let (i1, i2) = (s1.floor() as usize % n, s2.floor() as usize % n);
        let (a, b) = (s1 - s1.floor(), s2 - s2.floor());
        let (k1, k2) = ((i1 + 1) % n, (i2 + 1) % n);
        self.at(i1, i2) * ((1.0 - a) * (1.0 - b))
            + self.at(k1, i2) * (a * (1.0 - b))
            + self.at(i1, k2) * ((1.0 - a) * b)
            + self.at(k1, k2) * (a * b)
    }

    /// `x1,x2,re,im` rows, `x₁` fastest.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x1,x2,re,im")?;
        let n = self.size as f64;
        for j2 in 0..self.size {
            for j1 in 0..self.size {
                let v = self.at(j1, j2);
                writeln!(
                    out,
                    "{},{},{:e},{:e}",
                    j1 as f64 / n,
                    j2 as f64 / n,
                    v.re,
                    v.im
                )?;
            }
        }
        Ok(())
    }
}

/// `f(θ, x) = Σ f̂(m,n) e^{2πi θ·m} e^{2πi x·n}` on an `N × N` grid.
pub fn eval_fibre(
    vector: &CoefficientVector<f64>,
    modes: &ModeSet,
    theta: [f64; 2],
    size: usize,
) -> Result<FibreRaster> {
    if vector.len() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            got: vector.len(),
        });
    }
    let max_n = modes.max_n() as usize;
    if size < 2 * max_n + 2 {
        return Err(Error::BelowNyquist(format!(
            "fibre grid {size} needs at least {} points per axis",
            2 * max_n + 2
        )));
    }
    let tau = std::f64::consts::TAU;
    let mut grid = vec![C::new(0.0, 0.0); size * size];
    for (k, c) in modes.modes().iter().zip(&vector.0) {
        let ph = tau * (theta[0] * f64::from(k.m[0]) + theta[1] * f64::from(k.m[1]));
        let j1 = k.n[0].rem_euclid(size as i32) as usize;
        let j2 = k.n[1].rem_euclid(size as i32) as usize;
        grid[j2 * size + j1] += c * C::from_polar(1.0, ph);
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(size);
    // Rows (x₁ direction), then columns (x₂ direction).
    for row in grid.chunks_mut(size) {
        fft.process(row);
    }
    let mut col = vec![C::new(0.0, 0.0); size];
    for j1 in 0..size {
        for j2 in 0..size {
            col[j2] = grid[j2 * size + j1];
        }
        fft.process(&mut col);
        for j2 in 0..size {
            grid[j2 * size + j1] = col[j2];
        }
    }
    let l1 = grid.iter().map(|f| f.norm()).sum::<f64>() / (size * size) as f64;
    Ok(FibreRaster {
        size,
        values: grid,
        theta,
        l1,
    })
}

/// Direct summation of `f(θ, x)` at one point.
pub fn eval_direct(
    vector: &CoefficientVector<f64>,
    modes: &ModeSet,
    theta: [f64; 2],
    x: [f64; 2],
) -> C {
    let tau = std::f64::consts::TAU;
    modes
        .modes()
        .iter()
        .zip(&vector.0)
        .map(|(k, c)| {
            let ph = theta[0] * f64::from(k.m[0])
                + theta[1] * f64::from(k.m[1])
                + x[0] * f64::from(k.n[0])
                + x[1] * f64::from(k.n[1]);
            c * C::from_polar(1.0, tau * ph)
        })
        .sum()
}

/// The set `A_{θ₀}^t` for one time `t`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub raster: FibreRaster,
    pub method: Method,
    pub q: f64,
    /// `e^{iηt}` for CS1/CS2, `1` for CS3.
    pub phase: C,
    /// Normalizer of the rule (1 for CS1).
    pub norm: f64,
}

impl Frame {
    fn rule(&self, f: C) -> bool {
        match self.method {
            Method::Cs1 => (self.phase * f).re > 0.0,
            Method::Cs2 => self.norm > 0.0 && (self.phase * f).re.abs() / self.norm > self.q,
            Method::Cs3 => self.norm > 0.0 && f.norm() / self.norm > self.q,
        }
    }

    /// Membership at an arbitrary point (bilinear interpolation).
    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.rule(self.raster.interpolate(x))
    }

    /// Membership at grid nodes, row-major with rows along `x₂`.
    pub fn mask(&self) -> Vec<bool> {
        self.raster.values.iter().map(|&f| self.rule(f)).collect()
    }

    /// Fraction of grid nodes inside the set.
    pub fn area(&self) -> f64 {
        let m = self.mask();
        m.iter().filter(|&&b| b).count() as f64 / m.len() as f64
    }

    /// Binary PGM (P5): members black, others white, top row at the largest `x₂`.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.raster.size;
        write!(out, "P5\n{n} {n}\n255\n")?;
        let mask = self.mask();
        let mut bytes = Vec::with_capacity(n * n);
        for j2 in (0..n).rev() {
            for j1 in 0..n {
                bytes.push(if mask[j2 * n + j1] { 0u8 } else { 255u8 });
            }
        }
        out.write_all(&bytes)?;
        Ok(())
    }
}

/// `(e^{λt}, e^{2λt})` on `times`.
pub fn bound_curves(lambda: f64, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        times.iter().map(|t| (lambda * t).exp()).collect(),
        times.iter().map(|t| (2.0 * lambda * t).exp()).collect(),
    )
}

/// `∫₀^∞ e^{2λt} dt = -1/(2λ)`.
pub fn cumulative_estimate(lambda: f64) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cumulative estimate needs λ < 0, got {lambda}"
        )));
    }
    Ok(-1.0 / (2.0 * lambda))
}
