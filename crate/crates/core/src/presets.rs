//! The three worked examples: fields, mode sets, parameters and the rule for
//! picking the eigenpair whose fibres define the coherent family.

use serde::Serialize;

use crate::coherent::{Method, REAL_TOL};
use crate::error::{Error, Result};
use crate::fourier_field::{self, FourierField};
use crate::mode_select::{self, ModeSet};
use crate::spectral::RitzPair;

/// Real parts above this are treated as the (undamped) zero-mode family.
pub const DECAY_TOL: f64 = 1e-6;

/// Real parts within this of the maximum count as ties.
pub const TIE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Example {
    TranslatedGyres,
    OscillatingGyres,
    Shear,
}

impl Example {
    pub const ALL: [Example; 3] = [
        Example::TranslatedGyres,
        Example::OscillatingGyres,
        Example::Shear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Example::TranslatedGyres => "translated-gyres",
            Example::OscillatingGyres => "oscillating-gyres",
            Example::Shear => "shear",
        }
    }

    pub fn preset(self) -> Preset {
        let (mode_rule, (k, r)) = match self {
            Example::TranslatedGyres => (ModeRule::ClassUnion, mode_select::presets::CLASS_UNION),
            _ => (ModeRule::ProductBall, mode_select::presets::PRODUCT_BALL),
        };
        let (method, pick, eigen_k) = match self {
            Example::TranslatedGyres => {
                (Method::Cs3, Pick::LeadingComplex { min_abs_im: 0.5 }, 100)
            }
            Example::OscillatingGyres => (Method::Cs2, Pick::LeadingReal, 20),
            Example::Shear => (Method::Cs1, Pick::LeadingReal, 20),
        };
        Preset {
            example: self,
            mode_rule,
            k,
            r,
            eps: 0.03,
            alpha: [0.2, 0.2 * 2f64.sqrt()],
            delta: 0.15,
            err: fourier_field::DEFAULT_ERR,
            method,
            q: 1.0,
            pick,
            eigen_k,
        }
    }

    /// Builtin velocity field; `delta` and `err` only affect the oscillating gyres.
    pub fn field(self, delta: f64, err: f64) -> Result<FourierField<f64>> {
        match self {
            Example::TranslatedGyres => Ok(fourier_field::builtin_translated_gyres()),
            Example::OscillatingGyres => fourier_field::builtin_oscillating_gyres(delta, err),
            Example::Shear => Ok(fourier_field::builtin_shear()),
        }
    }
}

impl std::fmt::Display for Example {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Example::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('-', "_") == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown example {s:?} (expected translated-gyres, oscillating-gyres or shear)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRule {
    ProductBall,
    ClassUnion,
}

impl ModeRule {
    pub fn build(self, k: u32, r: f64) -> ModeSet {
        match self {
            ModeRule::ProductBall => mode_select::product_ball(k, r),
            ModeRule::ClassUnion => mode_select::class_union(k, r),
        }
    }
}

impl std::str::FromStr for ModeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product-ball" | "product_ball" => Ok(ModeRule::ProductBall),
            "class-union" | "class_union" => Ok(ModeRule::ClassUnion),
            _ => Err(Error::InvalidParameter(format!(
                "unknown mode rule {s:?} (expected product-ball or class-union)"
            ))),
        }
    }
}

/// Which eigenpair defines the coherent family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Pick {
    /// Largest real part among real eigenvalues with `Re z < -DECAY_TOL`.
    LeadingReal,
    /// Largest real part among eigenvalues with `Re z < -DECAY_TOL` and
    /// `|Im z| > min_abs_im`. Ties in the real part go to the largest `|Im z|`,
    /// then to negative `Im z`.
    LeadingComplex { min_abs_im: f64 },
    /// Largest real part among all eigenvalues with `Re z < -DECAY_TOL`.
    Leading,
}

impl Pick {
    pub fn select<'a>(&self, pairs: &'a [RitzPair]) -> Result<&'a RitzPair> {
        let ok = |p: &&RitzPair| {
            p.z.re < -DECAY_TOL
                && match self {
                    Pick::LeadingReal => p.z.im.abs() < REAL_TOL,
                    Pick::LeadingComplex { min_abs_im } => p.z.im.abs() > *min_abs_im,
                    Pick::Leading => true,
                }
        };
        let cands: Vec<&RitzPair> = pairs.iter().filter(ok).collect();
        let best_re = cands
            .iter()
            .map(|p| p.z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        cands
            .into_iter()
            .filter(|p| p.z.re >= best_re - TIE_TOL)
            .min_by(|a, b| {
                b.z.im
                    .abs()
                    .total_cmp(&a.z.im.abs())
                    .then(a.z.im.total_cmp(&b.z.im))
                    .then(b.z.re.total_cmp(&a.z.re))
            })
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no eigenvalue matches the {self:?} selection rule"
                ))
            })
    }
}

/// Full-scale parameters for one example.
#[derive(Clone, Debug, Serialize)]
pub struct Preset {
    pub example: Example,
    pub mode_rule: ModeRule,
    pub k: u32,
    pub r: f64,
    pub eps: f64,
    pub alpha: [f64; 2],
    pub delta: f64,
    pub err: f64,
    pub method: Method,
    pub q: f64,
    pub pick: Pick,
    /// Eigenpairs requested from the solver.
    pub eigen_k: usize,
}

impl Preset {
    pub fn field(&self) -> Result<FourierField<f64>> {
        self.example.field(self.delta, self.err)
    }

    pub fn modeset(&self) -> ModeSet {
        self.mode_rule.build(self.k, self.r)
    }
}
