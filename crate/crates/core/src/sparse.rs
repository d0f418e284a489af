//! Compressed-column sparse storage and Matrix Market I/O.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square or rectangular sparse matrix in compressed-column layout.
///
/// Row indices within each column are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<Complex<T>>,
}

impl<T: Real> CscMatrix<T> {
    /// Build from per-column `(row, value)` lists. Rows are sorted; duplicates summed.
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(usize, Complex<T>)>>) -> Self {
        let ncols = columns.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0);
        let nnz: usize = columns.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for mut col in columns {
            col.sort_by_key(|e| e.0);
            let start = row_idx.len();
            for (r, v) in col {
                assert!(r < nrows, "row index {r} out of bounds ({nrows})");
                if row_idx.len() > start && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// `(row, value)` pairs of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// Entry `(i, j)`; zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[r.clone()].binary_search(&i) {
            Ok(p) => self.values[r.start + p],
            Err(_) => Complex::new(T::zero(), T::zero()),
        }
    }

    /// Whether `(i, j)` is structurally stored.
    pub fn is_stored(&self, i: usize, j: usize) -> bool {
        self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
            .binary_search(&i)
            .is_ok()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.nrows];
        for (j, xj) in x.iter().enumerate() {
            if xj.re == T::zero() && xj.im == T::zero() {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
        Ok(y)
    }

    /// Row-compressed copy, used for parallel products.
    pub fn transpose_structure(&self) -> (Vec<usize>, Vec<usize>, Vec<Complex<T>>) {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![Complex::new(T::zero(), T::zero()); self.nnz()];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = self.row_idx[p];
                cols[next[r]] = j;
                vals[next[r]] = self.values[p];
                next[r] += 1;
            }
        }
        (counts, cols, vals)
    }

    /// `y = A x` parallelized over rows.
    pub fn par_matvec(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let (ptr, cols, vals) = self.transpose_structure();
        Ok((0..self.nrows)
            .into_par_iter()
            .map(|i| {
                (ptr[i]..ptr[i + 1])
                    .map(|p| vals[p] * x[cols[p]])
                    .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
            })
            .collect())
    }

    /// Dense row-major copy (small matrices only).
    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        let mut d = vec![vec![Complex::new(T::zero(), T::zero()); self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.column(j) {
                d[i][j] = v;
            }
        }
        d
    }

    /// Write in Matrix Market `coordinate complex general` format, 1-based,
    /// with shortest round-trip decimal representations.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for j in 0..self.ncols {
            for (i, v) in self.column(j) {
                writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

impl CscMatrix<f64> {
    /// Read a Matrix Market `coordinate complex general` file.
    pub fn read_matrix_market<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let banner = lines
            .next()
            .ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
        let b = banner.to_ascii_lowercase();
        let fields: Vec<&str> = b.split_whitespace().collect();
        if fields.len() < 5
            || fields[0] != "%%matrixmarket"
            || fields[1] != "matrix"
            || fields[2] != "coordinate"
            || fields[3] != "complex"
            || fields[4] != "general"
        {
            return Err(Error::Parse(format!(
                "unsupported Matrix Market banner {banner:?}; expected coordinate complex general"
            )));
        }
        let mut size_line = None;
        for line in lines.by_ref() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            size_line = Some(t.to_string());
            break;
        }
        let size_line = size_line.ok_or_else(|| Error::Parse("missing size line".into()))?;
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|e| Error::Parse(format!("size line: {e}")))
            })
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse(format!("bad size line {size_line:?}")));
        }
        let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
        let mut columns: Vec<Vec<(usize, Complex<f64>)>> = vec![Vec::new(); ncols];
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("bad entry line {t:?}")));
            }
            let pi = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            };
            let pf = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            };
            let (i, j) = (pi(parts[0])?, pi(parts[1])?);
            if i == 0 || j == 0 || i > nrows || j > ncols {
                return Err(Error::Parse(format!("entry ({i},{j}) out of range")));
            }
            columns[j - 1].push((i - 1, Complex::new(pf(parts[2])?, pf(parts[3])?)));
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::Parse(format!(
                "expected {nnz} entries, found {seen}"
            )));
        }
        Ok(Self::from_columns(nrows, columns))
    }
}
