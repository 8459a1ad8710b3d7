//! Dense symmetric eigendecomposition.
//!
//! Small matrices use cyclic Jacobi rotations. Above [`JACOBI_LIMIT`] the
//! decomposition is delegated to faer's tridiagonal solver, since Jacobi's
//! cost per sweep makes plate-scale covariances impractical. Both paths share
//! the same output convention: eigenvalues in descending order (ties keep the
//! original index order) and each eigenvector's largest-magnitude entry
//! positive.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Off-diagonal Frobenius norm target, relative to the full norm.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Largest dimension handled by Jacobi under [`EigenMethod::Auto`].
pub const JACOBI_LIMIT: usize = 128;
/// Relative symmetry tolerance for inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EigenMethod {
    #[default]
    Auto,
    Jacobi,
    Tridiagonal,
}

/// `A = Q diag(values) Qᵀ` with `values` descending.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        scaled * self.vectors.transpose()
    }
}

pub fn sym_eig(a: &DMatrix<f64>, cap: usize) -> Result<SymEig> {
    sym_eig_with(a, cap, EigenMethod::Auto)
}

pub fn sym_eig_with(a: &DMatrix<f64>, cap: usize, method: EigenMethod) -> Result<SymEig> {
    let n = a.nrows();
    if a.ncols() != n {
        return invalid(format!("eigendecomposition of a non-square {}x{} matrix", n, a.ncols()));
    }
    if n > cap {
        return Err(Error::Capacity { dim: n, cap });
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let defect = (a - a.transpose()).amax();
    if defect > SYMMETRY_TOL * scale {
        return invalid(format!("matrix is not symmetric (defect {defect:.3e})"));
    }
    let use_jacobi = match method {
        EigenMethod::Jacobi => true,
        EigenMethod::Tridiagonal => false,
        EigenMethod::Auto => n <= JACOBI_LIMIT,
    };
    let (values, vectors) = if use_jacobi { jacobi_raw(a) } else { tridiagonal_raw(a)? };
    Ok(normalize(values, vectors))
}

/// Cyclic Jacobi without the capacity or symmetry checks.
pub fn jacobi_eig(a: &DMatrix<f64>) -> SymEig {
    let (values, vectors) = jacobi_raw(a);
    normalize(values, vectors)
}

fn jacobi_raw(a0: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a0.nrows();
    // work on the exactly symmetric part
    let mut a = (a0 + a0.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm();
    if total == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

fn tridiagonal_raw(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Unsupported(format!("eigensolver failed to converge: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

fn normalize(values: Vec<f64>, vectors: DMatrix<f64>) -> SymEig {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their original index order
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut q = DMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        let mut col = vectors.column(old).clone_owned();
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if n > 0 && col[lead] < 0.0 {
            col.neg_mut();
        }
        q.set_column(new, &col);
    }
    SymEig { values: DVector::from_iterator(n, order.iter().map(|&i| values[i])), vectors: q }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthogonality_error(q: &DMatrix<f64>) -> f64 {
        (q.transpose() * q - DMatrix::identity(q.ncols(), q.ncols())).amax()
    }

    fn test_matrix(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { (i % 5) as f64 } else { 0.0 }
        })
    }

    #[test]
    fn diagonal_matrix_gives_sorted_permutation() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        for method in [EigenMethod::Jacobi, EigenMethod::Tridiagonal] {
            let e = sym_eig_with(&a, 10, method).unwrap();
            assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
            let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
            assert!((e.vectors.abs() - expected).amax() < 1e-14);
        }
    }

    #[test]
    fn rank_one_matrix() {
        let v = DVector::from_vec(vec![1.0, -2.0, 2.0, 0.5]);
        let a = &v * v.transpose();
        let e = sym_eig(&a, 10).unwrap();
        assert!((e.values[0] - v.norm_squared()).abs() < 1e-12);
        assert!(e.values.iter().skip(1).all(|x| x.abs() < 1e-12));
        let u = v.normalize();
        let c = e.vectors.column(0);
        assert!((c - &u).amax() < 1e-12 || (c + &u).amax() < 1e-12);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        for method in [EigenMethod::Jacobi, EigenMethod::Tridiagonal] {
            let a = test_matrix(40);
            let e = sym_eig_with(&a, 100, method).unwrap();
            assert!((e.reconstruct() - &a).amax() <= 1e-8 * a.amax());
            assert!(orthogonality_error(&e.vectors) <= 1e-10);
            assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn jacobi_and_tridiagonal_agree() {
        let a = test_matrix(60);
        let j = sym_eig_with(&a, 100, EigenMethod::Jacobi).unwrap();
        let t = sym_eig_with(&a, 100, EigenMethod::Tridiagonal).unwrap();
        assert!((&j.values - &t.values).amax() < 1e-10);
        // same sign convention, so simple eigenvectors agree entrywise
        for k in 0..60 {
            let gap_lo = if k > 0 { j.values[k - 1] - j.values[k] } else { f64::INFINITY };
            let gap_hi = if k + 1 < 60 { j.values[k] - j.values[k + 1] } else { f64::INFINITY };
            if gap_lo.min(gap_hi) > 1e-6 {
                assert!((j.vectors.column(k) - t.vectors.column(k)).amax() < 1e-7, "vector {k}");
            }
        }
    }

    #[test]
    fn capacity_and_symmetry_errors() {
        let a = test_matrix(5);
        assert!(matches!(sym_eig(&a, 4), Err(Error::Capacity { dim: 5, cap: 4 })));
        let mut b = a.clone();
        b[(0, 1)] += 1e-3;
        assert!(matches!(sym_eig(&b, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ties_keep_index_order_and_sign_is_fixed() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 2.0]));
        let e = sym_eig_with(&a, 10, EigenMethod::Jacobi).unwrap();
        assert_eq!(e.values.as_slice(), &[2.0, 2.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
        assert_eq!(e.vectors[(2, 1)], 1.0);
        assert_eq!(e.vectors[(0, 2)], 1.0);
    }
}
