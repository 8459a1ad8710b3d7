//! Gaussian priors on the fine force vector and their posteriors given the
//! coarse force vector.
//!
//! With a prior `f ~ N(0, Σf)` the solution prior is `u ~ N(0, Σ)` with
//! `Σ = K⁻¹ Σf K⁻¹`. Observing `g = Φᵀ f` with noise `σ_e` gives
//!
//! ```text
//! S  = Φᵀ Σf Φ + σ_e² I
//! m* = K⁻¹ Σf Φ S⁻¹ g
//! Σ* = K⁻¹ (Σf - Σf Φ S⁻¹ Φᵀ Σf) K⁻¹
//! ```
//!
//! `Σ*` is never formed unless asked for: [`PosteriorMoments::cov_action`]
//! applies it through sparse solves. For the Green's-function prior
//! (`Σf = K`) the formulas simplify to `m* = Φ S⁻¹ g` and
//! `Σ* = K⁻¹ - Φ S⁻¹ Φᵀ`, which is the default route for that prior.

mod boundary;
mod rescale;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::AssembledSystem;
use crate::error::{invalid, Error, Result};
use crate::sparse::{cholesky, CholeskyFactor, CscMatrix, SparseSym};
use crate::DEFAULT_DENSE_CAP;

pub use boundary::{boundary_posterior, boundary_prior_moments, BoundaryPrior};
pub use rescale::{rescale_eigenvalues, rescaled_variance, Rescaled};

/// Default observation noise (standard deviation) for the white-noise prior.
pub const WHITE_NOISE_SIGMA_E: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `Σf = α² M`
    WhiteNoise {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "white_noise_sigma")]
        sigma_e: f64,
    },
    /// `Σf = K`
    Greens {
        #[serde(default)]
        sigma_e: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn white_noise_sigma() -> f64 {
    WHITE_NOISE_SIGMA_E
}

impl PriorSpec {
    pub fn white_noise(alpha: f64) -> Self {
        PriorSpec::WhiteNoise { alpha, sigma_e: WHITE_NOISE_SIGMA_E }
    }

    pub fn greens() -> Self {
        PriorSpec::Greens { sigma_e: 0.0 }
    }

    pub fn with_sigma_e(self, sigma_e: f64) -> Self {
        match self {
            PriorSpec::WhiteNoise { alpha, .. } => PriorSpec::WhiteNoise { alpha, sigma_e },
            PriorSpec::Greens { .. } => PriorSpec::Greens { sigma_e },
        }
    }

    pub fn sigma_e(&self) -> f64 {
        match *self {
            PriorSpec::WhiteNoise { sigma_e, .. } | PriorSpec::Greens { sigma_e } => sigma_e,
        }
    }

    pub fn is_greens(&self) -> bool {
        matches!(self, PriorSpec::Greens { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let PriorSpec::WhiteNoise { alpha, .. } = *self {
            if !(alpha > 0.0) {
                return invalid(format!("alpha = {alpha} must be positive"));
            }
        }
        let s = self.sigma_e();
        if !(s >= 0.0) || !s.is_finite() {
            return invalid(format!("sigma_e = {s} must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Prior covariance of the fine force vector: `α² M` or `K`.
pub fn prior_covariance_f(prior: &PriorSpec, k: &SparseSym, m: &SparseSym) -> SparseSym {
    match *prior {
        PriorSpec::WhiteNoise { alpha, .. } => m.scaled(alpha * alpha),
        PriorSpec::Greens { .. } => k.clone(),
    }
}

/// How the posterior mean and covariance action are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Route {
    /// Simplified formulas for `Σf = K` where applicable, general otherwise.
    #[default]
    Auto,
    /// Always use `K⁻¹ (Σf - Σf Φ S⁻¹ Φᵀ Σf) K⁻¹`.
    General,
}

/// Shared factors for conditioning on the coarse force vector.
#[derive(Debug)]
pub struct Conditioning {
    pub k_factor: CholeskyFactor,
    pub sigma_f: SparseSym,
    pub phi: CscMatrix,
    /// Factor of `S = Φᵀ Σf Φ + σ_e² I`.
    pub s_factor: CholeskyFactor,
    pub sigma_e: f64,
    /// `Σf` is exactly `K`, so the simplified formulas hold.
    pub greens: bool,
    specialized: bool,
}

impl Conditioning {
    pub fn new(prior: &PriorSpec, system: &AssembledSystem) -> Result<Self> {
        prior.validate()?;
        let sigma_f = prior_covariance_f(prior, &system.k, &system.m);
        Self::with_sigma_f(prior, system, sigma_f, prior.is_greens())
    }

    pub(crate) fn with_sigma_f(
        prior: &PriorSpec,
        system: &AssembledSystem,
        sigma_f: SparseSym,
        specialized: bool,
    ) -> Result<Self> {
        prior.validate()?;
        let k_factor = cholesky(&system.k)?;
        let sigma_e = prior.sigma_e();
        let mut s = sigma_f.congruence(&system.phi)?;
        if sigma_e > 0.0 {
            s = s.add_scaled(1.0, &SparseSym::identity(s.dim()), sigma_e * sigma_e);
        }
        let s_factor = cholesky(&s)?;
        Ok(Self {
            k_factor,
            sigma_f,
            phi: system.phi.clone(),
            s_factor,
            sigma_e,
            greens: specialized,
            specialized,
        })
    }

    pub fn n(&self) -> usize {
        self.k_factor.dim()
    }

    pub fn m(&self) -> usize {
        self.s_factor.dim()
    }

    /// `Σf Φ S⁻¹ r`, the force-space Kalman gain applied to an innovation.
    pub fn force_gain(&self, r: &[f64]) -> Result<Vec<f64>> {
        let w = self.s_factor.solve(r)?;
        Ok(self.sigma_f.mul_vec(&self.phi.mul_vec(&w)))
    }

    pub fn solve_k(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.k_factor.solve(b)
    }
}

/// Posterior mean and an implicit posterior covariance.
#[derive(Debug)]
pub struct PosteriorMoments {
    mean: Vec<f64>,
    cond: Conditioning,
    route: Route,
    dense_cap: usize,
}

pub fn posterior_moments(prior: &PriorSpec, system: &AssembledSystem) -> Result<PosteriorMoments> {
    posterior_moments_with(prior, system, Route::Auto)
}

pub fn posterior_moments_with(prior: &PriorSpec, system: &AssembledSystem, route: Route) -> Result<PosteriorMoments> {
    let cond = Conditioning::new(prior, system)?;
    PosteriorMoments::from_conditioning(cond, &system.g, None, route)
}

impl PosteriorMoments {
    /// Conditions on `Φᵀ f = g_obs` given the prior force mean (zero if
    /// `None`).
    pub(crate) fn from_conditioning(
        cond: Conditioning,
        g_obs: &[f64],
        prior_mean_f: Option<&[f64]>,
        route: Route,
    ) -> Result<Self> {
        if g_obs.len() != cond.m() {
            return invalid(format!("observation of length {} for {} coarse DOFs", g_obs.len(), cond.m()));
        }
        let innovation: Vec<f64> = match prior_mean_f {
            Some(mf) => {
                let pm = cond.phi.tr_mul_vec(mf);
                g_obs.iter().zip(&pm).map(|(g, p)| g - p).collect()
            }
            None => g_obs.to_vec(),
        };
        let w = cond.s_factor.solve(&innovation)?;
        let mut mean = if cond.specialized && route == Route::Auto {
            cond.phi.mul_vec(&w)
        } else {
            cond.k_factor.solve(&cond.sigma_f.mul_vec(&cond.phi.mul_vec(&w)))?
        };
        if let Some(mf) = prior_mean_f {
            let shift = cond.k_factor.solve(mf)?;
            mean.iter_mut().zip(&shift).for_each(|(m, s)| *m += s);
        }
        Ok(Self { mean, cond, route, dense_cap: DEFAULT_DENSE_CAP })
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn conditioning(&self) -> &Conditioning {
        &self.cond
    }

    pub fn is_greens(&self) -> bool {
        self.cond.greens
    }

    pub fn dim(&self) -> usize {
        self.cond.n()
    }

    fn specialized(&self) -> bool {
        self.cond.specialized && self.route == Route::Auto
    }

    /// `Σ* v`
    pub fn cov_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        let c = &self.cond;
        if v.len() != c.n() {
            return invalid(format!("vector of length {} for dimension {}", v.len(), c.n()));
        }
        if self.specialized() {
            let a = c.k_factor.solve(v)?;
            let b = c.phi.mul_vec(&c.s_factor.solve(&c.phi.tr_mul_vec(v))?);
            return Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect());
        }
        let w = c.k_factor.solve(v)?;
        let sw = c.sigma_f.mul_vec(&w);
        let corr = c.force_gain(&c.phi.tr_mul_vec(&sw))?;
        let diff: Vec<f64> = sw.iter().zip(&corr).map(|(a, b)| a - b).collect();
        c.k_factor.solve(&diff)
    }

    /// `Σ v` with the prior solution covariance `Σ = K⁻¹ Σf K⁻¹`.
    pub fn prior_cov_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        let c = &self.cond;
        if self.specialized() {
            return c.k_factor.solve(v);
        }
        let w = c.k_factor.solve(v)?;
        c.k_factor.solve(&c.sigma_f.mul_vec(&w))
    }

    fn check_cap(&self) -> Result<()> {
        let n = self.dim();
        if n > self.dense_cap {
            return Err(Error::Capacity { dim: n, cap: self.dense_cap });
        }
        Ok(())
    }

    fn dense_k_inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.cond.k_factor.solve(&e)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    /// Dense `Σ*`, exactly symmetrized. Fails above the dense cap.
    pub fn dense_cov(&self) -> Result<DMatrix<f64>> {
        self.check_cap()?;
        let c = &self.cond;
        let kinv = self.dense_k_inverse()?;
        let out = if self.specialized() {
            let phi = c.phi.to_dense();
            let w = c.s_factor.solve_matrix(&phi.transpose())?;
            kinv - phi * w
        } else {
            let a = c.sigma_f.mul_dense(&c.phi.to_dense());
            let w = c.s_factor.solve_matrix(&a.transpose())?;
            let inner = c.sigma_f.to_dense() - &a * w;
            &kinv * inner * &kinv
        };
        Ok((&out + out.transpose()) * 0.5)
    }

    /// Dense prior covariance `Σ`.
    pub fn prior_dense_cov(&self) -> Result<DMatrix<f64>> {
        self.check_cap()?;
        let kinv = self.dense_k_inverse()?;
        if self.specialized() {
            return Ok(kinv);
        }
        let out = &kinv * self.cond.sigma_f.to_dense() * &kinv;
        Ok((&out + out.transpose()) * 0.5)
    }

    /// Diagonal of `Σ*` from one covariance action per unit vector.
    pub fn variance(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                Ok(self.cov_action(&e)?[j])
            })
            .collect()
    }

    /// Posterior standard deviations; tiny negative variances from rounding
    /// are clamped to zero.
    pub fn std(&self) -> Result<Vec<f64>> {
        Ok(self.variance()?.into_iter().map(|v| v.max(0.0).sqrt()).collect())
    }

    /// Diagonal of the prior covariance `Σ`.
    pub fn prior_variance(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                Ok(self.prior_cov_action(&e)?[j])
            })
            .collect()
    }
}

/// `Σf Φ (Φᵀ Σf Φ + σ_e² I)⁻¹ Φᵀ f`, the weighted projection of the load
/// onto the coarse space.
pub fn force_projection(sigma_f: &SparseSym, phi: &CscMatrix, f: &[f64], sigma_e: f64) -> Result<Vec<f64>> {
    if phi.nrows() != sigma_f.dim() || f.len() != sigma_f.dim() {
        return invalid("projection operands have inconsistent sizes");
    }
    let mut s = sigma_f.congruence(phi)?;
    if sigma_e > 0.0 {
        s = s.add_scaled(1.0, &SparseSym::identity(s.dim()), sigma_e * sigma_e);
    }
    let w = cholesky(&s)?.solve(&phi.tr_mul_vec(f))?;
    Ok(sigma_f.mul_vec(&phi.mul_vec(&w)))
}

/// `f̂ = M Φ (Φᵀ M Φ + σ_e² I)⁻¹ Φᵀ f`
pub fn f_hat_projection(m: &SparseSym, phi: &CscMatrix, f: &[f64], sigma_e: f64) -> Result<Vec<f64>> {
    force_projection(m, phi, f, sigma_e)
}

/// Fine solution, prolonged coarse solution and their difference.
#[derive(Clone, Debug)]
pub struct Solutions {
    pub fine: Vec<f64>,
    pub coarse: Vec<f64>,
    pub prolonged: Vec<f64>,
    pub error: Vec<f64>,
}

pub fn solve_levels(system: &AssembledSystem) -> Result<Solutions> {
    let fine = cholesky(&system.k)?.solve(&system.f)?;
    let coarse = cholesky(&system.kc)?.solve(&system.g)?;
    let prolonged = system.phi.mul_vec(&coarse);
    let error = fine.iter().zip(&prolonged).map(|(a, b)| a - b).collect();
    Ok(Solutions { fine, coarse, prolonged, error })
}

/// `e = K⁻¹ f - Φ Kc⁻¹ g`
pub fn discretization_error(system: &AssembledSystem) -> Result<Vec<f64>> {
    Ok(solve_levels(system)?.error)
}

/// `Σ* f`, which equals the discretization error for the Green's-function
/// prior without observation noise, for any load `f`.
pub fn error_recovery(post: &PosteriorMoments, f: &[f64]) -> Result<Vec<f64>> {
    if !post.cond.greens || post.cond.sigma_e != 0.0 {
        return Err(Error::Unsupported(
            "error recovery needs the Green's-function prior with sigma_e = 0".to_string(),
        ));
    }
    post.cov_action(f)
}

/// `‖Σ* Σ⁻¹ û - (û - m*)‖ / ‖û‖` evaluated with dense matrices.
pub fn contraction_check(prior: &PriorSpec, system: &AssembledSystem, cap: usize) -> Result<f64> {
    let post = posterior_moments(prior, system)?.with_dense_cap(cap);
    let sigma_star = post.dense_cov()?;
    let sigma = post.prior_dense_cov()?;
    let u_hat = DVector::from_vec(post.cond.k_factor.solve(&system.f)?);
    let x = sigma
        .clone()
        .lu()
        .solve(&u_hat)
        .ok_or_else(|| Error::Unsupported("prior covariance is singular".to_string()))?;
    let lhs = sigma_star * x;
    let rhs = &u_hat - DVector::from_column_slice(post.mean());
    let scale = u_hat.norm().max(f64::MIN_POSITIVE);
    Ok((lhs - rhs).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::bar_system;

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        d / s.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn prior_covariances() {
        let s = bar_system(16, 4).unwrap();
        assert_eq!(prior_covariance_f(&PriorSpec::white_noise(1.0), &s.k, &s.m), s.m);
        let two = prior_covariance_f(&PriorSpec::white_noise(2.0), &s.k, &s.m);
        assert_eq!(two.values(), s.m.scaled(4.0).values());
        assert_eq!(prior_covariance_f(&PriorSpec::greens(), &s.k, &s.m), s.k);
    }

    #[test]
    fn routes_agree() {
        let s = bar_system(32, 4).unwrap();
        let a = posterior_moments_with(&PriorSpec::greens(), &s, Route::Auto).unwrap();
        let b = posterior_moments_with(&PriorSpec::greens(), &s, Route::General).unwrap();
        assert!(rel(a.mean(), b.mean()) < 1e-10);
        let d = a.dense_cov().unwrap() - b.dense_cov().unwrap();
        assert!(d.amax() < 1e-10 * a.prior_dense_cov().unwrap().amax());
    }

    #[test]
    fn zero_load_gives_zero_mean() {
        let mut s = bar_system(16, 4).unwrap();
        s.f.iter_mut().for_each(|v| *v = 0.0);
        s.g.iter_mut().for_each(|v| *v = 0.0);
        for prior in [PriorSpec::greens(), PriorSpec::white_noise(1.0)] {
            let p = posterior_moments(&prior, &s).unwrap();
            assert!(p.mean().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn recovery_needs_greens() {
        let s = bar_system(16, 4).unwrap();
        let p = posterior_moments(&PriorSpec::white_noise(1.0), &s).unwrap();
        assert!(matches!(error_recovery(&p, &s.f), Err(Error::Unsupported(_))));
    }

    #[test]
    fn variance_matches_dense_diagonal() {
        let s = bar_system(16, 4).unwrap();
        let p = posterior_moments(&PriorSpec::white_noise(1.0), &s).unwrap();
        let dense = p.dense_cov().unwrap();
        let v = p.variance().unwrap();
        for i in 0..v.len() {
            assert!((v[i] - dense[(i, i)]).abs() <= 1e-12 * dense.amax());
        }
        let capped = posterior_moments(&PriorSpec::greens(), &s).unwrap().with_dense_cap(4);
        assert!(matches!(capped.dense_cov(), Err(Error::Capacity { dim: 15, cap: 4 })));
    }

    #[test]
    fn prior_spec_validation() {
        assert!(PriorSpec::white_noise(0.0).validate().is_err());
        assert!(PriorSpec::greens().with_sigma_e(-1.0).validate().is_err());
        assert_eq!(PriorSpec::white_noise(1.0).sigma_e(), 1e-6);
        assert_eq!(PriorSpec::greens().sigma_e(), 0.0);
        let parsed: PriorSpec = serde_json::from_str(r#"{"kind":"white_noise"}"#).unwrap();
        assert_eq!(parsed, PriorSpec::white_noise(1.0));
    }
}
