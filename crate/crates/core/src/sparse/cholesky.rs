//! Up-looking sparse Cholesky factorization.
//!
//! The matrix is permuted by a fill-reducing ordering, its elimination tree
//! is computed, the row patterns of `L` are found by walking the tree
//! (`ereach`), and the numeric factor is filled row by row. Factors are
//! immutable once built and can be shared across threads for solves.

use nalgebra::DMatrix;

use super::ordering::reverse_cuthill_mckee;
use super::SparseSym;
use crate::error::{invalid, Error, Result};

const NONE: usize = usize::MAX;

/// Fill-reducing ordering used before factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ordering {
    #[default]
    ReverseCuthillMcKee,
    Natural,
}

/// `P A Pᵀ = L Lᵀ` with `(P A Pᵀ)_ij = A_{perm[i], perm[j]}`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
}

/// Factorizes `a` with the default (reverse Cuthill–McKee) ordering.
pub fn cholesky(a: &SparseSym) -> Result<CholeskyFactor> {
    cholesky_with(a, Ordering::default())
}

pub fn cholesky_with(a: &SparseSym, ordering: Ordering) -> Result<CholeskyFactor> {
    let perm = match ordering {
        Ordering::ReverseCuthillMcKee => reverse_cuthill_mckee(a),
        Ordering::Natural => (0..a.dim()).collect(),
    };
    CholeskyFactor::with_permutation(a, perm)
}

struct Permuted {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

// upper triangle (row <= col) of P A Pᵀ
fn permute_upper(a: &SparseSym, perm: &[usize]) -> Permuted {
    let n = a.dim();
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in a.triplets() {
        let (pi, pj) = (inv[i], inv[j]);
        if pi <= pj {
            cols[pj].push((pi, v));
        }
    }
    let mut col_ptr = vec![0];
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    for mut c in cols {
        c.sort_by_key(|e| e.0);
        for (r, v) in c {
            row_idx.push(r);
            values.push(v);
        }
        col_ptr.push(row_idx.len());
    }
    Permuted { col_ptr, row_idx, values }
}

fn etree(c: &Permuted, n: usize) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &row in &c.row_idx[c.col_ptr[k]..c.col_ptr[k + 1]] {
            let mut i = row;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

// Pattern of row k of L (off-diagonal), written to stack[top..n] in
// topological order. `mark[i] == k` flags nodes already visited.
fn ereach(c: &Permuted, k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for &row in &c.row_idx[c.col_ptr[k]..c.col_ptr[k + 1]] {
        let mut i = row;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl CholeskyFactor {
    /// Factorizes `a` under the given permutation (`perm[new] = old`).
    pub fn with_permutation(a: &SparseSym, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return invalid(format!("permutation of length {} for dimension {n}", perm.len()));
        }
        let c = permute_upper(a, &perm);
        let parent = etree(&c, n);

        let mut stack = vec![0; n];
        let mut mark = vec![NONE; n];

        // symbolic: column counts from the row patterns
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for j in 0..n {
            l_ptr[j + 1] = l_ptr[j] + counts[j];
        }
        let nnz = l_ptr[n];
        let mut l_idx = vec![0; nnz];
        let mut l_val = vec![0.0; nnz];

        // numeric
        let mut next = l_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.fill(NONE);
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            for p in c.col_ptr[k]..c.col_ptr[k + 1] {
                x[c.row_idx[p]] = c.values[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / l_val[l_ptr[i]];
                x[i] = 0.0;
                for p in l_ptr[i] + 1..next[i] {
                    x[l_idx[p]] -= l_val[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                l_idx[p] = k;
                l_val[p] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k] });
            }
            let p = next[k];
            l_idx[p] = k;
            l_val[p] = d.sqrt();
            next[k] += 1;
        }
        Ok(Self { n, perm, l_ptr, l_idx, l_val })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn nnz(&self) -> usize {
        self.l_val.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if b.len() != self.n {
            return invalid(format!("right-hand side of length {} for dimension {}", b.len(), self.n));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.lsolve(&mut y);
        self.ltsolve(&mut y);
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Column-by-column solve of `A X = B`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.n {
            return invalid(format!("right-hand side with {} rows for dimension {}", b.nrows(), self.n));
        }
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice())?;
        }
        Ok(x)
    }

    /// Returns `Pᵀ L z`, a vector with covariance `A` when `z` is standard normal.
    pub fn mul_l(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.n {
            return invalid(format!("vector of length {} for dimension {}", z.len(), self.n));
        }
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let zj = z[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                y[self.l_idx[p]] += self.l_val[p] * zj;
            }
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = y[new];
        }
        Ok(out)
    }

    /// The factor `L` of the permuted matrix as a dense matrix.
    pub fn l_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                l[(self.l_idx[p], j)] = self.l_val[p];
            }
        }
        l
    }

    fn lsolve(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let lo = self.l_ptr[j];
            x[j] /= self.l_val[lo];
            let xj = x[j];
            for p in lo + 1..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
    }

    fn ltsolve(&self, x: &mut [f64]) {
        for j in (0..self.n).rev() {
            let lo = self.l_ptr[j];
            let mut s = x[j];
            for p in lo + 1..self.l_ptr[j + 1] {
                s -= self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = s / self.l_val[lo];
        }
    }
}
