//! Priors for inhomogeneous boundary conditions.
//!
//! Dirichlet values `u_d ~ N(m_d, β² Σ_d)` and extra Neumann/point loads
//! `f_n ~ N(m_n, γ² Σ_n)` enter the interior force vector as
//! `f_i - K_id u_d + f_n`, which shifts the prior force moments to
//!
//! ```text
//! m̃_f = m_n - K_id m_d
//! Σ̃_f = Σf + β² K_id Σ_d K_idᵀ + γ² Σ_n
//! ```
//!
//! The coarse observation becomes `Φᵀ (f - K_id m_d)`.

use super::{prior_covariance_f, Conditioning, PosteriorMoments, PriorSpec, Route};
use crate::assembly::AssembledSystem;
use crate::error::{invalid, Result};
use crate::sparse::{CscMatrix, SparseSym};

/// Boundary-condition prior. Absent parts are zero.
///
/// `m_d`, `sigma_d` live on the fine Dirichlet DOFs; `m_n`, `sigma_n` on the
/// fine interior DOFs.
#[derive(Clone, Debug, Default)]
pub struct BoundaryPrior {
    pub m_d: Option<Vec<f64>>,
    pub sigma_d: Option<SparseSym>,
    pub beta: f64,
    pub m_n: Option<Vec<f64>>,
    pub sigma_n: Option<SparseSym>,
    pub gamma: f64,
}

impl BoundaryPrior {
    /// Homogeneous Dirichlet conditions, no extra loads.
    pub fn homogeneous() -> Self {
        Self { beta: 1.0, gamma: 1.0, ..Default::default() }
    }

    /// Known Dirichlet values with no uncertainty.
    pub fn strong_dirichlet(values: Vec<f64>) -> Self {
        Self { m_d: Some(values), ..Self::homogeneous() }
    }

    /// Uncertain point load of unit variance at interior DOF `j`.
    pub fn point_load(n_interior: usize, j: usize, gamma: f64) -> Result<Self> {
        if j >= n_interior {
            return invalid(format!("point load at DOF {j} of {n_interior}"));
        }
        let sigma = CscMatrix::from_triplets(n_interior, n_interior, &[(j, j, 1.0)]);
        Ok(Self { sigma_n: Some(SparseSym::new(sigma)?), gamma, ..Self::homogeneous() })
    }
}

/// `(m̃_f, Σ̃_f)`. Zero terms are skipped, so the homogeneous prior returns
/// `Σf` unchanged.
pub fn boundary_prior_moments(bp: &BoundaryPrior, k_id: &CscMatrix, sigma_f: &SparseSym) -> Result<(Vec<f64>, SparseSym)> {
    let (n_i, n_d) = k_id.shape();
    if sigma_f.dim() != n_i {
        return invalid(format!("force covariance of size {} for {n_i} interior DOFs", sigma_f.dim()));
    }
    let mut mean = vec![0.0; n_i];
    if let Some(m_n) = &bp.m_n {
        if m_n.len() != n_i {
            return invalid(format!("Neumann mean of length {} for {n_i} interior DOFs", m_n.len()));
        }
        mean.copy_from_slice(m_n);
    }
    if let Some(m_d) = &bp.m_d {
        if m_d.len() != n_d {
            return invalid(format!("Dirichlet mean of length {} for {n_d} Dirichlet DOFs", m_d.len()));
        }
        let shift = k_id.mul_vec(m_d);
        mean.iter_mut().zip(&shift).for_each(|(m, s)| *m -= s);
    }
    let mut cov = sigma_f.clone();
    if let Some(sd) = &bp.sigma_d {
        if sd.dim() != n_d {
            return invalid(format!("Dirichlet covariance of size {} for {n_d} Dirichlet DOFs", sd.dim()));
        }
        if bp.beta != 0.0 {
            let term = sd.congruence(&k_id.transpose())?;
            cov = cov.add_scaled(1.0, &term, bp.beta * bp.beta);
        }
    }
    if let Some(sn) = &bp.sigma_n {
        if sn.dim() != n_i {
            return invalid(format!("Neumann covariance of size {} for {n_i} interior DOFs", sn.dim()));
        }
        if bp.gamma != 0.0 {
            cov = cov.add_scaled(1.0, sn, bp.gamma * bp.gamma);
        }
    }
    Ok((mean, cov))
}

/// Posterior of the interior displacements under a boundary prior.
pub fn boundary_posterior(prior: &PriorSpec, system: &AssembledSystem, bp: &BoundaryPrior) -> Result<PosteriorMoments> {
    let sigma_f = prior_covariance_f(prior, &system.k, &system.m);
    let (mean_f, cov_f) = boundary_prior_moments(bp, &system.k_id, &sigma_f)?;
    let specialized = prior.is_greens() && cov_f == sigma_f;
    let mut g_obs = system.g.clone();
    if let Some(m_d) = &bp.m_d {
        let lift = system.phi.tr_mul_vec(&system.k_id.mul_vec(m_d));
        g_obs.iter_mut().zip(&lift).for_each(|(g, l)| *g -= l);
    }
    let has_mean = bp.m_d.is_some() || bp.m_n.is_some();
    let cond = Conditioning::with_sigma_f(prior, system, cov_f, specialized)?;
    PosteriorMoments::from_conditioning(cond, &g_obs, has_mean.then_some(mean_f.as_slice()), Route::Auto)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::posterior_moments;
    use crate::problems::bar_system;

    #[test]
    fn homogeneous_prior_is_unchanged() {
        let s = bar_system(16, 4).unwrap();
        let sigma_f = s.m.clone();
        let (m, c) = boundary_prior_moments(&BoundaryPrior::homogeneous(), &s.k_id, &sigma_f).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
        assert_eq!(c, sigma_f);
        let a = boundary_posterior(&PriorSpec::greens(), &s, &BoundaryPrior::homogeneous()).unwrap();
        let b = posterior_moments(&PriorSpec::greens(), &s).unwrap();
        assert_eq!(a.mean(), b.mean());
    }

    #[test]
    fn point_load_adds_rank_one() {
        let s = bar_system(16, 4).unwrap();
        let bp = BoundaryPrior::point_load(s.n_interior(), 5, 2.0).unwrap();
        let (_, c) = boundary_prior_moments(&bp, &s.k_id, &s.k).unwrap();
        let diff = c.add_scaled(1.0, &s.k, -1.0).pruned();
        let entries: Vec<_> = diff.triplets().collect();
        assert_eq!(entries.len(), 1);
        assert_eq!((entries[0].0, entries[0].1), (5, 5));
        assert!((entries[0].2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_checks() {
        let s = bar_system(16, 4).unwrap();
        let bad = BoundaryPrior::strong_dirichlet(vec![0.0; 3]);
        assert!(boundary_prior_moments(&bad, &s.k_id, &s.k).is_err());
        assert!(BoundaryPrior::point_load(4, 4, 1.0).is_err());
    }
}
