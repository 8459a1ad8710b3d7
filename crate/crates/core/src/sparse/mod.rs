//! Sparse and dense linear algebra kernels.
//!
//! Assembled operators are stored in compressed sparse column form with
//! sorted row indices. Symmetric operators are wrapped in [`SparseSym`], which
//! keeps both triangles so products and transposes need no special casing.

mod cholesky;
mod eigen;
mod ordering;
mod rng;

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

pub use cholesky::{cholesky, cholesky_with, CholeskyFactor, Ordering};
pub use eigen::{jacobi_eig, sym_eig, sym_eig_with, EigenMethod, SymEig, JACOBI_MAX_SWEEPS};
pub use ordering::reverse_cuthill_mckee;
pub use rng::{gaussian_vector, NormalStream};

/// General sparse matrix in compressed sparse column form.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed by [`Triplets::to_csc`].
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: Triplets) {
        self.entries.extend(other.entries);
    }

    pub fn to_csc(&self) -> CscMatrix {
        CscMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

impl CscMatrix {
    /// Builds a matrix from `(row, col, value)` entries, summing duplicates.
    ///
    /// Summation within a slot follows the input order, so identical inputs
    /// give bitwise identical matrices.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        // bucket by column, stable in input order
        let mut next = counts.clone();
        let mut rows = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            let slot = next[c];
            rows[slot] = r;
            vals[slot] = v;
            next[c] += 1;
        }

        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        col_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for c in 0..ncols {
            let (lo, hi) = (counts[c], counts[c + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| rows[k]);
            let mut last = usize::MAX;
            for &k in &order {
                if rows[k] == last {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    row_idx.push(rows[k]);
                    values.push(vals[k]);
                    last = rows[k];
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    /// Assembles from raw parts, validating the structure.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
            return invalid("column pointer array has the wrong length or start");
        }
        if row_idx.len() != values.len() || *col_ptr.last().unwrap() != row_idx.len() {
            return invalid("row index and value arrays disagree with column pointers");
        }
        for c in 0..ncols {
            if col_ptr[c] > col_ptr[c + 1] {
                return invalid("column pointers are not monotone");
            }
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            if rows.iter().any(|&r| r >= nrows) || rows.windows(2).any(|w| w[0] >= w[1]) {
                return invalid(format!("column {c} has unsorted or out-of-range rows"));
            }
        }
        Ok(Self { nrows, ncols, col_ptr, row_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, col_ptr: vec![0; ncols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Triplets::new(a.nrows(), a.ncols());
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                if a[(i, j)] != 0.0 {
                    t.push(i, j, a[(i, j)]);
                }
            }
        }
        t.to_csc()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "dimension mismatch in tr_mul_vec");
        (0..self.ncols)
            .map(|j| {
                let (rows, vals) = self.col(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum()
            })
            .collect()
    }

    pub fn mul_dvec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.mul_vec(x.as_slice()))
    }

    pub fn tr_mul_dvec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.tr_mul_vec(x.as_slice()))
    }

    /// Sparse times dense.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, b.ncols());
        for c in 0..b.ncols() {
            let y = self.mul_vec(b.column(c).as_slice());
            out.column_mut(c).copy_from_slice(&y);
        }
        out
    }

    /// Sparse transpose times dense.
    pub fn tr_mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.nrows);
        let mut out = DMatrix::zeros(self.ncols, b.ncols());
        for c in 0..b.ncols() {
            let y = self.tr_mul_vec(b.column(c).as_slice());
            out.column_mut(c).copy_from_slice(&y);
        }
        out
    }

    pub fn transpose(&self) -> CscMatrix {
        let entries: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        CscMatrix::from_triplets(self.ncols, self.nrows, &entries)
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &CscMatrix) -> CscMatrix {
        assert_eq!(self.ncols, rhs.nrows, "dimension mismatch in matmul");
        let mut acc = vec![0.0; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut pattern = Vec::new();
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..rhs.ncols {
            pattern.clear();
            let (brows, bvals) = rhs.col(j);
            for (&k, &bkj) in brows.iter().zip(bvals) {
                let (arows, avals) = self.col(k);
                for (&i, &aik) in arows.iter().zip(avals) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        pattern.push(i);
                    }
                    acc[i] += aik * bkj;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix { nrows: self.nrows, ncols: rhs.ncols, col_ptr, row_idx, values }
    }

    /// `alpha * self + beta * other`
    pub fn add_scaled(&self, alpha: f64, other: &CscMatrix, beta: f64) -> CscMatrix {
        assert_eq!(self.shape(), other.shape(), "dimension mismatch in add_scaled");
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        for j in 0..self.ncols {
            let (ar, av) = self.col(j);
            let (br, bv) = other.col(j);
            let (mut p, mut q) = (0, 0);
            while p < ar.len() || q < br.len() {
                let ra = ar.get(p).copied().unwrap_or(usize::MAX);
                let rb = br.get(q).copied().unwrap_or(usize::MAX);
                if ra == rb {
                    row_idx.push(ra);
                    values.push(alpha * av[p] + beta * bv[q]);
                    p += 1;
                    q += 1;
                } else if ra < rb {
                    row_idx.push(ra);
                    values.push(alpha * av[p]);
                    p += 1;
                } else {
                    row_idx.push(rb);
                    values.push(beta * bv[q]);
                    q += 1;
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix { nrows: self.nrows, ncols: self.ncols, col_ptr, row_idx, values }
    }

    pub fn scaled(&self, s: f64) -> CscMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Selects the rows and columns listed (in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CscMatrix {
        let mut row_map = vec![usize::MAX; self.nrows];
        for (new, &old) in rows.iter().enumerate() {
            row_map[old] = new;
        }
        let mut t = Triplets::new(rows.len(), cols.len());
        for (new_j, &j) in cols.iter().enumerate() {
            let (r, v) = self.col(j);
            for (&i, &x) in r.iter().zip(v) {
                if row_map[i] != usize::MAX {
                    t.push(row_map[i], new_j, x);
                }
            }
        }
        t.to_csc()
    }

    /// Expands every scalar entry into a `k × k` identity block with
    /// interleaved component ordering: `(i, j) ↦ (k i + c, k j + c)`.
    pub fn expand_blocks(&self, k: usize) -> CscMatrix {
        if k == 1 {
            return self.clone();
        }
        let mut t = Triplets::with_capacity(self.nrows * k, self.ncols * k, self.nnz() * k);
        for (i, j, v) in self.triplets() {
            for c in 0..k {
                t.push(k * i + c, k * j + c, v);
            }
        }
        t.to_csc()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] += v;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` over the stored pattern of both triangles.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.triplets().fold(0.0, |m, (i, j, v)| m.max((v - self.get(j, i)).abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Sums of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.nrows];
        for (i, _, v) in self.triplets() {
            s[i] += v;
        }
        s
    }

    /// Drops explicitly stored zeros.
    pub fn pruned(&self) -> CscMatrix {
        let entries: Vec<_> = self.triplets().filter(|&(_, _, v)| v != 0.0).collect();
        CscMatrix::from_triplets(self.nrows, self.ncols, &entries)
    }

    /// Writes one `row col value` line per stored entry (zero-based indices).
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Square sparse matrix whose stored pattern and values are symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym(CscMatrix);

/// Relative tolerance used when checking assembled operators for symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl SparseSym {
    /// Wraps `a` after checking it is square and symmetric to within
    /// `SYMMETRY_TOL` relative to its largest entry.
    pub fn new(a: CscMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return invalid(format!("matrix of shape {:?} is not square", a.shape()));
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let defect = a.symmetry_defect();
        if defect > SYMMETRY_TOL * scale {
            return invalid(format!("matrix is not symmetric (defect {defect:.3e})"));
        }
        Ok(Self(a))
    }

    /// Averages `a` with its transpose, so the result is exactly symmetric.
    pub fn symmetrize(a: &CscMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return invalid(format!("matrix of shape {:?} is not square", a.shape()));
        }
        Ok(Self(a.add_scaled(0.5, &a.transpose(), 0.5)))
    }

    pub fn identity(n: usize) -> Self {
        Self(CscMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows
    }

    pub fn as_csc(&self) -> &CscMatrix {
        &self.0
    }

    pub fn into_csc(self) -> CscMatrix {
        self.0
    }

    pub fn scaled(&self, s: f64) -> SparseSym {
        SparseSym(self.0.scaled(s))
    }

    /// `alpha * self + beta * other`
    pub fn add_scaled(&self, alpha: f64, other: &SparseSym, beta: f64) -> SparseSym {
        SparseSym(self.0.add_scaled(alpha, &other.0, beta))
    }

    /// `Bᵀ A B` for symmetric `A = self`.
    pub fn congruence(&self, b: &CscMatrix) -> Result<SparseSym> {
        if b.nrows() != self.dim() {
            return invalid(format!(
                "congruence with a {}x{} matrix needs {} rows",
                b.nrows(),
                b.ncols(),
                self.dim()
            ));
        }
        let ab = self.0.matmul(b);
        SparseSym::symmetrize(&b.transpose().matmul(&ab))
    }
}

impl Deref for SparseSym {
    type Target = CscMatrix;

    fn deref(&self) -> &CscMatrix {
        &self.0
    }
}

/// Relative max-norm deviation `max|a - b| / max(max|b|, tiny)`.
pub fn rel_max_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = b.amax().max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CscMatrix {
        CscMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.0), (2, 0, 2.0), (1, 1, 3.0), (0, 0, 0.5), (2, 1, -1.0)],
        )
    }

    #[test]
    fn triplets_sum_duplicates_and_sort_rows() {
        let a = sample();
        assert_eq!(a.col_ptr(), &[0, 2, 4]);
        assert_eq!(a.row_idx(), &[0, 2, 1, 2]);
        assert_eq!(a.values(), &[1.5, 2.0, 3.0, -1.0]);
    }

    #[test]
    fn from_parts_rejects_bad_structure() {
        assert!(CscMatrix::from_parts(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::from_parts(2, 1, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CscMatrix::from_parts(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::from_parts(2, 1, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let b = CscMatrix::from_triplets(2, 3, &[(0, 0, 2.0), (1, 2, 1.0), (0, 1, -3.0)]);
        let dense = a.to_dense() * b.to_dense();
        assert_eq!(a.matmul(&b).to_dense(), dense);
        let x = [1.0, -2.0];
        assert_eq!(a.mul_vec(&x), (a.to_dense() * DVector::from_row_slice(&x)).as_slice());
        let y = [1.0, 2.0, 3.0];
        assert_eq!(
            a.tr_mul_vec(&y),
            (a.to_dense().transpose() * DVector::from_row_slice(&y)).as_slice()
        );
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn add_scaled_merges_patterns() {
        let a = sample();
        let b = CscMatrix::from_triplets(3, 2, &[(1, 0, 4.0), (1, 1, 1.0)]);
        let c = a.add_scaled(2.0, &b, -1.0);
        assert_eq!(c.to_dense(), a.to_dense() * 2.0 - b.to_dense());
    }

    #[test]
    fn block_expansion_interleaves_components() {
        let a = CscMatrix::from_triplets(2, 1, &[(0, 0, 0.5), (1, 0, 1.0)]);
        let b = a.expand_blocks(2);
        assert_eq!(b.shape(), (4, 2));
        assert_eq!(b.get(0, 0), 0.5);
        assert_eq!(b.get(1, 1), 0.5);
        assert_eq!(b.get(2, 0), 1.0);
        assert_eq!(b.get(3, 1), 1.0);
        assert_eq!(b.get(1, 0), 0.0);
    }

    #[test]
    fn submatrix_selects_in_order() {
        let a = CscMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        ));
        let s = a.submatrix(&[2, 0], &[1]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 1, &[8.0, 2.0]));
    }

    #[test]
    fn sparse_sym_rejects_asymmetry() {
        let a = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        assert!(SparseSym::new(a.clone()).is_err());
        let s = SparseSym::symmetrize(&a).unwrap();
        assert_eq!(s.get(1, 0), 0.5);
        assert!(SparseSym::new(CscMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn congruence_matches_dense() {
        let a = SparseSym::new(CscMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 2.0],
        )))
        .unwrap();
        let b = CscMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5), (2, 1, 1.0)]);
        let c = a.congruence(&b).unwrap();
        let dense = b.to_dense().transpose() * a.to_dense() * b.to_dense();
        assert!(rel_max_deviation(&c.to_dense(), &dense) < 1e-15);
    }
}
