//! Integer Fourier mode indices on the driving torus × physical torus.

use std::fmt;
use std::ops::{Neg, Sub};

/// A Fourier mode `(m, n)`: `m` indexes the driving torus, `n` the physical torus.
///
/// Ordering is lexicographic on `(m1, m2, n1, n2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModeIndex {
    pub m: [i32; 2],
    pub n: [i32; 2],
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex {
        m: [0, 0],
        n: [0, 0],
    };

    pub const fn new(m1: i32, m2: i32, n1: i32, n2: i32) -> Self {
        Self {
            m: [m1, m2],
            n: [n1, n2],
        }
    }

    pub fn as_array(&self) -> [i32; 4] {
        [self.m[0], self.m[1], self.n[0], self.n[1]]
    }

    /// Squared Euclidean norm of the physical wavevector.
    pub fn n_norm_sq(&self) -> i64 {
        let [a, b] = self.n;
        i64::from(a) * i64::from(a) + i64::from(b) * i64::from(b)
    }

    pub fn m_inf_norm(&self) -> i32 {
        self.m[0].abs().max(self.m[1].abs())
    }

    pub fn n_is_zero(&self) -> bool {
        self.n == [0, 0]
    }
}

impl Neg for ModeIndex {
    type Output = ModeIndex;
    fn neg(self) -> ModeIndex {
        ModeIndex::new(-self.m[0], -self.m[1], -self.n[0], -self.n[1])
    }
}

impl Sub for ModeIndex {
    type Output = ModeIndex;
    fn sub(self, o: ModeIndex) -> ModeIndex {
        ModeIndex::new(
            self.m[0] - o.m[0],
            self.m[1] - o.m[1],
            self.n[0] - o.n[0],
            self.n[1] - o.n[1],
        )
    }
}

impl std::ops::Add for ModeIndex {
    type Output = ModeIndex;
    fn add(self, o: ModeIndex) -> ModeIndex {
        ModeIndex::new(
            self.m[0] + o.m[0],
            self.m[1] + o.m[1],
            self.n[0] + o.n[0],
            self.n[1] + o.n[1],
        )
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{};{},{})",
            self.m[0], self.m[1], self.n[0], self.n[1]
        )
    }
}
