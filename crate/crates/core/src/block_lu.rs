//! Block-sparse direct solver for `Γ_S - σI`.
//!
//! Unknowns are grouped (by physical wavenumber `n` for `Γ_S`), groups are
//! ordered by nested dissection of the group graph, and the matrix is
//! eliminated block by block with dense kernels. Pivoting happens inside
//! diagonal blocks only. This is stable whenever the Hermitian part of the
//! matrix is definite, which holds for `Γ_S - σI` with `Re σ > 0`.

use std::collections::{BTreeMap, VecDeque};

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Accum, Mat, Par};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

type C = Complex<f64>;

/// Groups with at most this many members are not dissected further.
const LEAF: usize = 3;

/// Factorization `P (A - σI) Pᵀ = L U` in block form.
pub struct BlockLu {
    n: usize,
    /// Global indices of each group, in elimination order.
    groups: Vec<Vec<usize>>,
    diag: Vec<PartialPivLu<C>>,
    /// `(i, A_ik)` for every block below the diagonal in column `k`.
    lower: Vec<Vec<(usize, Mat<C>)>>,
    /// `(j, A_kk⁻¹ A_kj)` for every block right of the diagonal in row `k`.
    upper: Vec<Vec<(usize, Mat<C>)>>,
}

impl BlockLu {
    /// Factorize `a - shift·I`; `group_of[i]` labels the block of unknown `i`.
    pub fn factorize(a: &CscMatrix<f64>, shift: C, group_of: &[usize]) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || group_of.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: group_of.len(),
            });
        }
        let ngroups = group_of.iter().copied().max().map_or(0, |g| g + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); ngroups];
        for (i, &g) in group_of.iter().enumerate() {
            members[g].push(i);
        }
        let members: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
        let mut label = vec![0usize; n];
        for (g, m) in members.iter().enumerate() {
            for &i in m {
                label[i] = g;
            }
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
        for j in 0..n {
            for (i, _) in a.column(j) {
                let (gi, gj) = (label[i], label[j]);
                if gi != gj {
                    adj[gi].push(gj);
                    adj[gj].push(gi);
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let order = nested_dissection(&adj);
        let groups: Vec<Vec<usize>> = order.iter().map(|&g| members[g].clone()).collect();
        let mut block = vec![0usize; n];
        let mut local = vec![0usize; n];
        for (p, m) in groups.iter().enumerate() {
            for (l, &i) in m.iter().enumerate() {
                block[i] = p;
                local[i] = l;
            }
        }

        let nb = groups.len();
        let mut diag: Vec<Mat<C>> = groups
            .iter()
            .map(|m| {
                let mut d = Mat::<C>::zeros(m.len(), m.len());
                for l in 0..m.len() {
                    d[(l, l)] = -shift;
                }
                d
            })
            .collect();
        let mut lower: Vec<BTreeMap<usize, Mat<C>>> = vec![BTreeMap::new(); nb];
        let mut upper: Vec<BTreeMap<usize, Mat<C>>> = vec![BTreeMap::new(); nb];
        for j in 0..n {
            let (bj, lj) = (block[j], local[j]);
            for (i, v) in a.column(j) {
                let (bi, li) = (block[i], local[i]);
                let (ri, rj) = (groups[bi].len(), groups[bj].len());
                let target = if bi == bj {
                    &mut diag[bi]
                } else if bi > bj {
                    lower[bj].entry(bi).or_insert_with(|| Mat::zeros(ri, rj))
                } else {
                    upper[bi].entry(bj).or_insert_with(|| Mat::zeros(ri, rj))
                };
                target[(li, lj)] += v;
            }
        }

        let mut lus = Vec::with_capacity(nb);
        let mut lower_out = Vec::with_capacity(nb);
        let mut upper_out = Vec::with_capacity(nb);
        for k in 0..nb {
            let lu = diag[k].partial_piv_lu();
            diag[k] = Mat::zeros(0, 0);
            let col = std::mem::take(&mut lower[k]);
            let row = std::mem::take(&mut upper[k]);
            let w: Vec<(usize, Mat<C>)> = row
                .into_iter()
                .map(|(j, akj)| (j, lu.solve(&akj)))
                .collect();
            let col: Vec<(usize, Mat<C>)> = col.into_iter().collect();
            for (i, aik) in &col {
                for (j, wkj) in &w {
                    let (i, j) = (*i, *j);
                    let (ri, rj) = (groups[i].len(), groups[j].len());
                    let target = if i == j {
                        &mut diag[i]
                    } else if i > j {
                        lower[j].entry(i).or_insert_with(|| Mat::zeros(ri, rj))
                    } else {
                        upper[i].entry(j).or_insert_with(|| Mat::zeros(ri, rj))
                    };
                    faer::linalg::matmul::matmul(
                        target.as_mut(),
                        Accum::Add,
                        aik.as_ref(),
                        wkj.as_ref(),
                        C::new(-1.0, 0.0),
                        Par::Seq,
                    );
                }
            }
            lus.push(lu);
            lower_out.push(col);
            upper_out.push(w);
        }
        Ok(Self {
            n,
            groups,
            diag: lus,
            lower: lower_out,
            upper: upper_out,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal blocks.
    pub fn off_diagonal_blocks(&self) -> usize {
        self.lower.iter().map(Vec::len).sum::<usize>()
            + self.upper.iter().map(Vec::len).sum::<usize>()
    }

    /// `(A - σI)⁻¹ b`.
    pub fn solve(&self, b: &[C]) -> Vec<C> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut seg: Vec<Mat<C>> = self
            .groups
            .iter()
            .map(|m| Mat::from_fn(m.len(), 1, |l, _| b[m[l]]))
            .collect();
        for k in 0..self.groups.len() {
            let c = self.diag[k].solve(&seg[k]);
            for (i, aik) in &self.lower[k] {
                faer::linalg::matmul::matmul(
                    seg[*i].as_mut(),
                    Accum::Add,
                    aik.as_ref(),
                    c.as_ref(),
                    C::new(-1.0, 0.0),
                    Par::Seq,
                );
            }
            seg[k] = c;
        }
        for k in (0..self.groups.len()).rev() {
            let mut x = std::mem::replace(&mut seg[k], Mat::zeros(0, 0));
            for (j, wkj) in &self.upper[k] {
                faer::linalg::matmul::matmul(
                    x.as_mut(),
                    Accum::Add,
                    wkj.as_ref(),
                    seg[*j].as_ref(),
                    C::new(-1.0, 0.0),
                    Par::Seq,
                );
            }
            seg[k] = x;
        }
        let mut out = vec![C::new(0.0, 0.0); self.n];
        for (m, x) in self.groups.iter().zip(&seg) {
            for (l, &i) in m.iter().enumerate() {
                out[i] = x[(l, 0)];
            }
        }
        out
    }
}

/// Elimination order of the nodes of `adj`: each connected piece is split by
/// a small breadth-first level, the two sides are ordered recursively and the
/// separator comes last.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut stamp = vec![usize::MAX; n];
    let mut level = vec![usize::MAX; n];
    let mut epoch = 0usize;
    let all: Vec<usize> = (0..n).collect();
    dissect(adj, all, &mut order, &mut stamp, &mut level, &mut epoch);
    order
}

fn bfs(
    adj: &[Vec<usize>],
    start: usize,
    stamp: &[usize],
    epoch: usize,
    level: &mut [usize],
) -> Vec<usize> {
    let mut seen = vec![start];
    level[start] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if stamp[v] == epoch && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                seen.push(v);
                q.push_back(v);
            }
        }
    }
    seen
}

fn dissect(
    adj: &[Vec<usize>],
    nodes: Vec<usize>,
    order: &mut Vec<usize>,
    stamp: &mut [usize],
    level: &mut [usize],
    epoch: &mut usize,
) {
    if nodes.len() <= LEAF {
        order.extend(nodes);
        return;
    }
    *epoch += 1;
    let ep = *epoch;
    for &u in &nodes {
        stamp[u] = ep;
        level[u] = usize::MAX;
    }
    // Split into connected components first.
    let mut comps = Vec::new();
    for &u in &nodes {
        if level[u] == usize::MAX {
            comps.push(bfs(adj, u, stamp, ep, level));
        }
    }
    if comps.len() > 1 {
        for c in comps {
            dissect(adj, c, order, stamp, level, epoch);
        }
        return;
    }
    let comp = comps.pop().unwrap_or_default();
    // Pseudo-peripheral start: two sweeps from the first node.
    let mut start = comp[0];
    for _ in 0..2 {
        for &u in &comp {
            level[u] = usize::MAX;
        }
        let reach = bfs(adj, start, stamp, ep, level);
        start = *reach.last().unwrap();
    }
    for &u in &comp {
        level[u] = usize::MAX;
    }
    let reach = bfs(adj, start, stamp, ep, level);
    let depth = level[*reach.last().unwrap()] + 1;
    if depth < 3 {
        order.extend(comp);
        return;
    }
    let mut counts = vec![0usize; depth];
    for &u in &reach {
        counts[level[u]] += 1;
    }
    let total = reach.len();
    let mut best = depth / 2;
    let mut before = 0usize;
    let mut best_size = usize::MAX;
    for (l, &c) in counts.iter().enumerate() {
        let frac = before as f64 / total as f64;
        if l > 0 && l + 1 < depth && (0.3..=0.7).contains(&frac) && c < best_size {
            best = l;
            best_size = c;
        }
        before += c;
    }
    let lv: Vec<(usize, usize)> = reach.iter().map(|&u| (u, level[u])).collect();
    let left: Vec<usize> = lv.iter().filter(|p| p.1 < best).map(|p| p.0).collect();
    let right: Vec<usize> = lv.iter().filter(|p| p.1 > best).map(|p| p.0).collect();
    let sep: Vec<usize> = lv.iter().filter(|p| p.1 == best).map(|p| p.0).collect();
    dissect(adj, left, order, stamp, level, epoch);
    dissect(adj, right, order, stamp, level, epoch);
    order.extend(sep);
}
