//! Finite Fourier mode sets used as the Galerkin basis.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mode::ModeIndex;

/// How a [`ModeSet`] was built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ModeSetKind {
    /// `{‖m‖_∞ ≤ K} × {‖n‖₂ ≤ r}`.
    ProductBall { k: u32, r: f64 },
    /// Union of the `(2K+1)²` classes `{(n + (k,ℓ), n)}` with `‖n‖₂ ≤ r`.
    ClassUnion { k: u32, r: f64 },
    /// Arbitrary user-supplied modes.
    Custom,
}

/// Ordered set of Fourier modes with index lookup.
#[derive(Clone, Debug)]
pub struct ModeSet {
    modes: Vec<ModeIndex>,
    index: HashMap<ModeIndex, usize>,
    kind: ModeSetKind,
}

impl ModeSet {
    /// Sorts and deduplicates `modes`.
    pub fn from_modes(modes: impl IntoIterator<Item = ModeIndex>, kind: ModeSetKind) -> Self {
        let mut modes: Vec<ModeIndex> = modes.into_iter().collect();
        modes.sort_unstable();
        modes.dedup();
        let index = modes.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        Self { modes, index, kind }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn kind(&self) -> ModeSetKind {
        self.kind
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn get(&self, i: usize) -> ModeIndex {
        self.modes[i]
    }

    pub fn position(&self, mode: &ModeIndex) -> Option<usize> {
        self.index.get(mode).copied()
    }

    pub fn contains(&self, mode: &ModeIndex) -> bool {
        self.index.contains_key(mode)
    }

    /// Position of `-mode` for every entry, or the first mode whose negative is missing.
    pub fn negation_map(&self) -> Result<Vec<usize>> {
        self.modes
            .iter()
            .map(|k| self.position(&-*k).ok_or(Error::NotNegationClosed(*k)))
            .collect()
    }

    pub fn is_negation_closed(&self) -> bool {
        self.negation_map().is_ok()
    }

    /// Largest `|n_i|` over the set.
    pub fn max_n(&self) -> i32 {
        self.modes
            .iter()
            .map(|k| k.n[0].abs().max(k.n[1].abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn max_m(&self) -> i32 {
        self.modes.iter().map(|k| k.m_inf_norm()).max().unwrap_or(0)
    }

    /// Write `m1,m2,n1,n2` rows in set order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m1,m2,n1,n2")?;
        for k in &self.modes {
            writeln!(out, "{},{},{},{}", k.m[0], k.m[1], k.n[0], k.n[1])?;
        }
        Ok(())
    }

    /// Read rows written by [`Self::write_csv`]. The file order must already be sorted.
    pub fn read_csv<R: BufRead>(input: R, kind: ModeSetKind) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mode set file".into()))??;
        if header.trim() != "m1,m2,n1,n2" {
            return Err(Error::Parse(format!(
                "unexpected header {:?}",
                header.trim()
            )));
        }
        let mut modes = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<i32> = line
                .trim()
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
                })
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected 4 columns",
                    lineno + 2
                )));
            }
            modes.push(ModeIndex::new(v[0], v[1], v[2], v[3]));
        }
        if modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse(
                "modes are not in strictly increasing order".into(),
            ));
        }
        Ok(Self::from_modes(modes, kind))
    }
}

/// Lattice points `n ∈ ℤ²` with `‖n‖₂ ≤ r`, boundary inclusive.
pub fn lattice_disk(r: f64) -> Vec<[i32; 2]> {
    if !(r >= 0.0) {
        return Vec::new();
    }
    let rr = r.floor() as i32;
    let r2 = r * r;
    let mut out = Vec::new();
    for a in -rr..=rr {
        for b in -rr..=rr {
            let d = f64::from(a * a + b * b);
            // Integer radii must count boundary points exactly.
            if d <= r2 || (d - r2).abs() <= 1e-9 * r2.max(1.0) {
                out.push([a, b]);
            }
        }
    }
    out
}

/// `S = {m : ‖m‖_∞ ≤ K} × {n : ‖n‖₂ ≤ r}`.
pub fn product_ball(k: u32, r: f64) -> ModeSet {
    let k_i = k as i32;
    let disk = lattice_disk(r);
    let mut modes = Vec::with_capacity((2 * k as usize + 1).pow(2) * disk.len());
    for m1 in -k_i..=k_i {
        for m2 in -k_i..=k_i {
            for n in &disk {
                modes.push(ModeIndex::new(m1, m2, n[0], n[1]));
            }
        }
    }
    ModeSet::from_modes(modes, ModeSetKind::ProductBall { k, r })
}

/// `S = {(n₁+k, n₂+ℓ, n₁, n₂) : |k|,|ℓ| ≤ K, ‖n‖₂ ≤ r}`.
pub fn class_union(k: u32, r: f64) -> ModeSet {
    let k_i = k as i32;
    let disk = lattice_disk(r);
    let mut modes = Vec::with_capacity((2 * k as usize + 1).pow(2) * disk.len());
    for a in -k_i..=k_i {
        for b in -k_i..=k_i {
            for n in &disk {
                modes.push(ModeIndex::new(n[0] + a, n[1] + b, n[0], n[1]));
            }
        }
    }
    ModeSet::from_modes(modes, ModeSetKind::ClassUnion { k, r })
}

/// Class label `m - n` of a mode; translated-gyre couplings preserve it.
pub fn class_of(mode: &ModeIndex) -> [i32; 2] {
    [mode.m[0] - mode.n[0], mode.m[1] - mode.n[1]]
}

/// Named `(K, r)` choices.
pub mod presets {
    /// Translated gyres.
    pub const CLASS_UNION: (u32, f64) = (2, 11.0);
    /// Oscillating gyres and shear.
    pub const PRODUCT_BALL: (u32, f64) = (6, 8.0);
    /// Smaller physical resolution for the product-ball rule.
    pub const PRODUCT_BALL_COARSE: (u32, f64) = (6, 6.0);
}
