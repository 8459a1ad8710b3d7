use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::sparse::{sym_eig, SymEig};

/// Eigen-rescaled posterior covariance `Σ̂* = Q E Qᵀ` with
/// `E = diag(|λ_k (Qᵀ f)_k|)`.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub eig: SymEig,
    /// `Qᵀ f`
    pub f_tilde: DVector<f64>,
    /// `λ ∘ f̃`
    pub e_tilde: DVector<f64>,
    /// Diagonal of `E`.
    pub e_abs: DVector<f64>,
}

impl Rescaled {
    pub fn q(&self) -> &DMatrix<f64> {
        &self.eig.vectors
    }

    /// Dense `Σ̂*`, exactly symmetrized.
    pub fn sigma_hat(&self) -> DMatrix<f64> {
        let q = &self.eig.vectors;
        let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * self.e_abs[j]);
        let out = scaled * q.transpose();
        (&out + out.transpose()) * 0.5
    }

    /// `diag(Σ̂*)` without forming `Σ̂*`.
    pub fn variance(&self) -> Vec<f64> {
        rescaled_variance(&self.eig, &self.e_abs)
    }

    /// `Q ẽ`, which equals `Σ* f`.
    pub fn recovered(&self) -> DVector<f64> {
        &self.eig.vectors * &self.e_tilde
    }
}

/// `diag(Q E Qᵀ)_j = Σ_k Q_jk² E_k`
pub fn rescaled_variance(eig: &SymEig, e_abs: &DVector<f64>) -> Vec<f64> {
    let q = &eig.vectors;
    (0..q.nrows()).map(|j| (0..q.ncols()).map(|k| q[(j, k)] * q[(j, k)] * e_abs[k]).sum()).collect()
}

/// Eigendecomposes `Σ*` and rescales its eigenvalues by the load.
pub fn rescale_eigenvalues(sigma_star: &DMatrix<f64>, f: &[f64], cap: usize) -> Result<Rescaled> {
    if f.len() != sigma_star.nrows() {
        return invalid(format!("load of length {} for a {}x{} covariance", f.len(), sigma_star.nrows(), sigma_star.ncols()));
    }
    let eig = sym_eig(sigma_star, cap)?;
    let f_tilde = eig.vectors.tr_mul(&DVector::from_column_slice(f));
    let e_tilde = eig.values.component_mul(&f_tilde);
    let e_abs = e_tilde.abs();
    Ok(Rescaled { eig, f_tilde, e_tilde, e_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn diagonal_example() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let r = rescale_eigenvalues(&s, &[1.0, -1.0], 10).unwrap();
        assert!((r.sigma_hat() - &s).amax() < 1e-15);
        assert_eq!(r.variance(), vec![2.0, 3.0]);
        let zero = rescale_eigenvalues(&s, &[0.0, 0.0], 10).unwrap();
        assert_eq!(zero.sigma_hat().amax(), 0.0);
    }

    #[test]
    fn recovery_and_errors() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.7]);
        let f = [0.3, -1.0, 2.0];
        let r = rescale_eigenvalues(&s, &f, 10).unwrap();
        let direct = &s * DVector::from_column_slice(&f);
        assert!((r.recovered() - direct).amax() < 1e-12);
        let dense = r.sigma_hat();
        let v = r.variance();
        for i in 0..3 {
            assert!((dense[(i, i)] - v[i]).abs() < 1e-12);
        }
        let mut asym = s.clone();
        asym[(0, 2)] = 1.0;
        assert!(matches!(rescale_eigenvalues(&asym, &f, 10), Err(Error::InvalidArgument(_))));
        assert!(rescale_eigenvalues(&s, &f[..2], 10).is_err());
    }
}
