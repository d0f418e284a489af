//! Flag groups, the INI-style config file and resolved run settings.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use torus_coherent::coherent::{Method, DEFAULT_GRID};
use torus_coherent::fourier_field::DEFAULT_ERR;
use torus_coherent::presets::{Example, ModeRule, Pick};
use torus_coherent::spectral::gap_shift;
use torus_coherent::C64;

/// Two comma-separated reals, e.g. `0.2,0.28`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pair(pub [f64; 2]);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = parse_list(s)?;
        match v[..] {
            [a, b] => Ok(Pair([a, b])),
            _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
        }
    }
}

/// Comma-separated reals.
#[derive(Clone, Debug, PartialEq)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = parse_list(s)?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(v))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("{p:?} is not a finite number"))
        })
        .collect()
}

/// `gap`, a real number, or `re,im`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShiftArg {
    Gap,
    Value(C64),
}

impl FromStr for ShiftArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "gap" {
            return Ok(ShiftArg::Gap);
        }
        match parse_list(s)?[..] {
            [re] => Ok(ShiftArg::Value(C64::new(re, 0.0))),
            [re, im] => Ok(ShiftArg::Value(C64::new(re, im))),
            _ => Err(format!("expected `gap`, `re` or `re,im`, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PickArg {
    LeadingReal,
    LeadingComplex,
    Leading,
}

impl FromStr for PickArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "leading-real" => Ok(PickArg::LeadingReal),
            "leading-complex" => Ok(PickArg::LeadingComplex),
            "leading" => Ok(PickArg::Leading),
            _ => Err(format!(
                "unknown rule {s:?} (expected leading-real, leading-complex or leading)"
            )),
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct FieldOpts {
    /// Coefficient CSV to use instead of the stage input (or the builtin field)
    #[arg(long, value_name = "CSV")]
    pub field: Option<PathBuf>,
    /// Oscillation amplitude δ of the oscillating gyres
    #[arg(long)]
    pub delta: Option<f64>,
    /// Coefficient threshold for numerically transformed fields
    #[arg(long)]
    pub err: Option<f64>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct ModeOpts {
    /// Driving frequency cut-off ‖m‖_∞ ≤ K (or class range for class-union)
    #[arg(long = "K", value_name = "K")]
    pub kmax: Option<u32>,
    /// Physical frequency radius ‖n‖ ≤ r
    #[arg(long)]
    pub r: Option<f64>,
    /// product-ball or class-union
    #[arg(long)]
    pub mode_rule: Option<ModeRule>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct PhysOpts {
    /// Noise amplitude ε
    #[arg(long)]
    pub eps: Option<f64>,
    /// Driving rate α as `a1,a2`
    #[arg(long, value_name = "A1,A2")]
    pub alpha: Option<Pair>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SolverOpts {
    /// Number of eigenpairs
    #[arg(long)]
    pub k: Option<usize>,
    /// Shift: `gap` (-2π²ε²), a real number or `re,im`
    #[arg(long)]
    pub shift: Option<ShiftArg>,
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_restarts: Option<usize>,
    /// Eigenpair defining the coherent family: leading-real, leading-complex or leading
    #[arg(long)]
    pub pick: Option<PickArg>,
    /// Minimum |Im z| for leading-complex
    #[arg(long)]
    pub min_abs_im: Option<f64>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct FamilyOpts {
    /// CS1, CS2 or CS3
    #[arg(long)]
    pub method: Option<Method>,
    /// Threshold for CS2/CS3
    #[arg(long)]
    pub q: Option<f64>,
    /// Fibre raster size per axis
    #[arg(long)]
    pub grid: Option<usize>,
    /// Initial driving phase θ₀ as `t1,t2`
    #[arg(long, value_name = "T1,T2")]
    pub theta: Option<Pair>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct ExtractOpts {
    /// Times at which to extract sets, comma-separated
    #[arg(long = "t", value_name = "T,...")]
    pub times: Option<List>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SimOpts {
    /// Particles per axis
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Euler–Maruyama step
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps between membership checks
    #[arg(long)]
    pub check_every: Option<usize>,
}

/// Flat `key = value` settings; section headers are ignored.
#[derive(Debug, Default)]
pub struct Settings {
    values: HashMap<String, String>,
    source: Option<PathBuf>,
}

impl Settings {
    pub fn load(path: Option<&Path>, known: &BTreeSet<String>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let ini = ini::Ini::load_from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                let k = k.trim().trim_start_matches("--").replace('_', "-");
                if !known.contains(&k) {
                    bail!("{}: unknown key {k:?}", path.display());
                }
                values.insert(k, v.trim().to_string());
            }
        }
        Ok(Self {
            values,
            source: Some(path.to_path_buf()),
        })
    }

    /// The flag if given, else the config value.
    pub fn get<T>(&self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                let src = self
                    .source
                    .as_deref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default();
                anyhow::Error::new(crate::Invalid(format!("{src}: key {key}: {e}")))
            }),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Defaults before flags and config: an example preset, or generic values for custom fields.
#[derive(Clone, Debug, Serialize)]
pub struct Defaults {
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
    pub eigen_k: usize,
}

impl Defaults {
    pub fn for_example(example: Option<Example>) -> Self {
        match example {
            Some(e) => {
                let p = e.preset();
                Self {
                    mode_rule: p.mode_rule,
                    k: p.k,
                    r: p.r,
                    eps: p.eps,
                    alpha: p.alpha,
                    delta: p.delta,
                    err: p.err,
                    method: p.method,
                    q: p.q,
                    pick: p.pick,
                    eigen_k: p.eigen_k,
                }
            }
            None => Self {
                mode_rule: ModeRule::ProductBall,
                k: 6,
                r: 8.0,
                eps: 0.03,
                alpha: [0.2, 0.2 * 2f64.sqrt()],
                delta: 0.15,
                err: DEFAULT_ERR,
                method: Method::Cs1,
                q: 1.0,
                pick: Pick::Leading,
                eigen_k: 20,
            },
        }
    }
}

/// Everything a stage needs besides its own flags.
pub struct Ctx {
    pub example: Option<Example>,
    pub defaults: Defaults,
    pub settings: Settings,
    pub out: PathBuf,
    pub from: PathBuf,
}

impl Ctx {
    pub fn input(&self, name: &str) -> PathBuf {
        self.from.join(name)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn shift(&self, flag: Option<ShiftArg>, eps: f64) -> anyhow::Result<C64> {
        Ok(match self.settings.get("shift", flag)? {
            None => C64::new(1.0, 0.0),
            Some(ShiftArg::Gap) => gap_shift(eps),
            Some(ShiftArg::Value(z)) => z,
        })
    }

    pub fn pick(&self, opts: &SolverOpts) -> anyhow::Result<Pick> {
        let min_abs_im = self.settings.get("min-abs-im", opts.min_abs_im)?;
        Ok(match self.settings.get("pick", opts.pick)? {
            None => match (self.defaults.pick, min_abs_im) {
                (Pick::LeadingComplex { .. }, Some(m)) => Pick::LeadingComplex { min_abs_im: m },
                (p, _) => p,
            },
            Some(PickArg::LeadingReal) => Pick::LeadingReal,
            Some(PickArg::Leading) => Pick::Leading,
            Some(PickArg::LeadingComplex) => Pick::LeadingComplex {
                min_abs_im: min_abs_im.unwrap_or(0.5),
            },
        })
    }

    pub fn grid(&self, opts: &FamilyOpts) -> anyhow::Result<usize> {
        Ok(self
            .settings
            .get("grid", opts.grid)?
            .unwrap_or(DEFAULT_GRID))
    }
}
