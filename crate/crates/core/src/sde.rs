//! Euler–Maruyama particle ensembles for `dx = v(θ_t, x) dt + ε dw`,
//! `θ_t = θ₀ + αt mod 1`, and survival statistics of coherent families.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::coherent::{bound_curves, CoherentFamily, Method};
use crate::error::{Error, Result};
use crate::fourier_field::FourierField;
use crate::scalar::{wrap_unit, Real};

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Particles per axis of the initial uniform grid.
    pub grid_particles: usize,
    pub t_max: f64,
    pub h: f64,
    pub eps: f64,
    pub alpha: [f64; 2],
    pub theta0: [f64; 2],
    pub seed: u64,
    /// Steps between membership checks.
    pub check_every: usize,
}

impl SimConfig {
    pub fn new(eps: f64, alpha: [f64; 2]) -> Self {
        Self {
            grid_particles: 150,
            t_max: 10.0,
            h: 0.01,
            eps,
            alpha,
            theta0: [0.0, 0.0],
            seed: 42,
            check_every: 1,
        }
    }

    /// Number of integration steps, `t_max / h`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step h must be positive, got {}",
                self.h
            )));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_max must be ≥ 0, got {}",
                self.t_max
            )));
        }
        let s = self.t_max / self.h;
        if (s - s.round()).abs() > 1e-9 * s.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_max / h = {s} is not an integer number of steps"
            )));
        }
        Ok(s.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        if self.grid_particles < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 particles per axis".into(),
            ));
        }
        if self.check_every == 0 {
            return Err(Error::InvalidParameter("check_every must be ≥ 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ε must be ≥ 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    /// Cell-centred `N × N` grid, particle `j·N + i` at `((i+½)/N, (j+½)/N)`.
    pub fn initial_positions(&self) -> Vec<[f64; 2]> {
        let n = self.grid_particles;
        let c = |i: usize| (i as f64 + 0.5) / n as f64;
        (0..n * n).map(|p| [c(p % n), c(p / n)]).collect()
    }
}

/// One independent random stream per particle, keyed by `(seed, index)`.
pub fn particle_streams(seed: u64, count: usize) -> Vec<ChaCha8Rng> {
    (0..count)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64);
            r
        })
        .collect()
}

/// One Euler–Maruyama step of length `h` starting at time `t`.
///
/// Particles with `active[i] == false` are left untouched and consume no
/// random numbers.
#[allow(clippy::too_many_arguments)]
pub fn step_ensemble<T: Real>(
    positions: &mut [[T; 2]],
    active: Option<&[bool]>,
    field: &FourierField<T>,
    theta0: [T; 2],
    alpha: [T; 2],
    t: T,
    h: T,
    eps: T,
    streams: &mut [ChaCha8Rng],
) -> Result<()>
where
    StandardNormal: Distribution<T>,
{
    if streams.len() != positions.len() {
        return Err(Error::DimensionMismatch {
            expected: positions.len(),
            got: streams.len(),
        });
    }
    let theta = [
        wrap_unit(theta0[0] + alpha[0] * t),
        wrap_unit(theta0[1] + alpha[1] * t),
    ];
    let slice = field.at_theta(theta);
    let noise = eps * h.sqrt();
    let bad = positions
        .par_iter_mut()
        .zip(streams.par_iter_mut())
        .enumerate()
        .filter(|(i, _)| active.is_none_or(|a| a[*i]))
        .map(|(_, (x, rng))| {
            let v = slice.eval(*x);
            let xi0: T = StandardNormal.sample(rng);
            let xi1: T = StandardNormal.sample(rng);
            x[0] = wrap_unit(x[0] + v[0] * h + noise * xi0);
            x[1] = wrap_unit(x[1] + v[1] * h + noise * xi1);
            usize::from(!(x[0].is_finite() && x[1].is_finite()))
        })
        .sum::<usize>();
    if bad > 0 {
        return Err(Error::NonFinite(format!(
            "{bad} particle positions became non-finite"
        )));
    }
    Ok(())
}

/// Survival probability of a coherent family along a particle simulation.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub n_alive: Vec<usize>,
    pub n_initial: usize,
    /// Trapezoidal integral of `survival` over `[0, horizon]`.
    pub c_value: f64,
    pub horizon: f64,
    /// Least-squares slope of `log survival` on the second half of the run;
    /// `-∞` when survival reaches zero there.
    pub escape_fit: f64,
}

/// Simulate the particle grid and track first exits from `A_{θ₀}^t`.
pub fn run_survival(
    family: &CoherentFamily,
    cfg: &SimConfig,
    field: &FourierField<f64>,
) -> Result<SurvivalCurve> {
    run_survival_with(family, cfg, field, |_, _, _| {})
}

/// As [`run_survival`], calling `observe(t, positions, alive)` at `t = 0` and
/// after every check.
pub fn run_survival_with(
    family: &CoherentFamily,
    cfg: &SimConfig,
    field: &FourierField<f64>,
    mut observe: impl FnMut(f64, &[[f64; 2]], &[bool]),
) -> Result<SurvivalCurve> {
    cfg.validate()?;
    let steps = cfg.steps()?;
    let mut pos = cfg.initial_positions();
    let frame0 = family.frame(cfg.theta0, cfg.alpha, 0.0);
    let mut alive: Vec<bool> = pos.par_iter().map(|x| frame0.contains(*x)).collect();
    let n_initial = alive.iter().filter(|&&a| a).count();
    if n_initial == 0 {
        return Err(Error::EmptyCoherentSet);
    }
    observe(0.0, &pos, &alive);
    let mut streams = particle_streams(cfg.seed, pos.len());
    let mut times = vec![0.0];
    let mut n_alive = vec![n_initial];
    for s in 0..steps {
        let t = s as f64 * cfg.h;
        step_ensemble(
            &mut pos,
            Some(&alive),
            field,
            cfg.theta0,
            cfg.alpha,
            t,
            cfg.h,
            cfg.eps,
            &mut streams,
        )?;
        if (s + 1) % cfg.check_every == 0 || s + 1 == steps {
            let t1 = (s + 1) as f64 * cfg.h;
            let frame = family.frame(cfg.theta0, cfg.alpha, t1);
            alive
                .par_iter_mut()
                .zip(pos.par_iter())
                .for_each(|(a, x)| *a = *a && frame.contains(*x));
            times.push(t1);
            n_alive.push(alive.iter().filter(|&&a| a).count());
            observe(t1, &pos, &alive);
        }
    }
    let survival: Vec<f64> = n_alive
        .iter()
        .map(|&k| k as f64 / n_initial as f64)
        .collect();
    let mut curve = SurvivalCurve {
        times,
        survival,
        n_alive,
        n_initial,
        c_value: 0.0,
        horizon: cfg.t_max,
        escape_fit: 0.0,
    };
    curve.c_value = cumulative_survival(&curve, cfg.t_max)?;
    curve.escape_fit = escape_rate_fit(&curve, [cfg.t_max / 2.0, cfg.t_max])?;
    Ok(curve)
}

/// Trapezoidal `∫₀^horizon survival dt`, interpolating linearly at `horizon`.
pub fn cumulative_survival(curve: &SurvivalCurve, horizon: f64) -> Result<f64> {
    let t_end = curve.times.last().copied().unwrap_or(0.0);
    if !(horizon >= 0.0) || horizon > t_end * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} outside the simulated range [0, {t_end}]"
        )));
    }
    let mut acc = 0.0;
    for w in 0..curve.times.len().saturating_sub(1) {
        let (t0, t1) = (curve.times[w], curve.times[w + 1]);
        if t0 >= horizon {
            break;
        }
        let (s0, s1) = (curve.survival[w], curve.survival[w + 1]);
        if t1 <= horizon {
            acc += 0.5 * (s0 + s1) * (t1 - t0);
        } else {
            let sh = s0 + (s1 - s0) * (horizon - t0) / (t1 - t0);
            acc += 0.5 * (s0 + sh) * (horizon - t0);
        }
    }
    Ok(acc)
}

/// Least-squares slope of `log survival` against `t` over `window`.
pub fn escape_rate_fit(curve: &SurvivalCurve, window: [f64; 2]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.survival)
        .filter(|(t, _)| **t >= window[0] - 1e-12 && **t <= window[1] + 1e-12)
        .map(|(t, s)| (*t, *s))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "fit window [{}, {}] holds fewer than two samples",
            window[0], window[1]
        )));
    }
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Binomial standard error of each survival estimate.
pub fn binomial_sigma(curve: &SurvivalCurve) -> Vec<f64> {
    let n = curve.n_initial as f64;
    curve
        .survival
        .iter()
        .map(|&p| (p * (1.0 - p) / n).sqrt())
        .collect()
}

impl SurvivalCurve {
    /// `t,survival,bound_exp_lambda,bound_exp_2lambda,n_alive`.
    pub fn write_csv<W: Write>(&self, lambda: f64, mut out: W) -> Result<()> {
        let (b1, b2) = bound_curves(lambda, &self.times);
        writeln!(out, "t,survival,bound_exp_lambda,bound_exp_2lambda,n_alive")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{}",
                self.times[i], self.survival[i], b1[i], b2[i], self.n_alive[i]
            )?;
        }
        Ok(())
    }
}

/// Run summary as written to JSON.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalSummary {
    pub lambda: f64,
    pub eta: f64,
    pub method: Method,
    pub q: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub horizon: f64,
    /// `None` when survival reached zero inside the fit window.
    pub escape_fit: Option<f64>,
    pub n_initial: usize,
    pub seed: u64,
}

impl SurvivalSummary {
    pub fn new(family: &CoherentFamily, cfg: &SimConfig, curve: &SurvivalCurve) -> Self {
        Self {
            lambda: family.lambda(),
            eta: family.eta(),
            method: family.method,
            q: family.q,
            c: curve.c_value,
            horizon: curve.horizon,
            escape_fit: curve.escape_fit.is_finite().then_some(curve.escape_fit),
            n_initial: curve.n_initial,
            seed: cfg.seed,
        }
    }
}
