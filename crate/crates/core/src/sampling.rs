//! Ensemble sampling of the prior and posterior.
//!
//! Prior force samples are `f̃ = L z` with `Σf = L Lᵀ` (sparse Cholesky) and
//! `z` standard normal; displacement samples follow from `K ũ = f̃`.
//! Posterior samples use the perturbed-observation update, either in force
//! space (one fine solve per sample) or in displacement space (two).
//!
//! Column `j` of an `N`-member ensemble draws `z` from stream `j` of the seed
//! and the observation noise from stream `NOISE_STREAMS + j`, so results do
//! not depend on thread scheduling and a shorter ensemble is a prefix of a
//! longer one.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::AssembledSystem;
use crate::bayes::{posterior_moments, Conditioning, PosteriorMoments, PriorSpec};
use crate::error::{invalid, Error, Result};
use crate::sparse::{cholesky, CholeskyFactor, NormalStream, SparseSym};

/// First stream index used for observation noise.
pub const NOISE_STREAMS: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Prior,
    PosteriorViaF,
    PosteriorViaU,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Prior => "prior",
            Provenance::PosteriorViaF => "posterior_via_f",
            Provenance::PosteriorViaU => "posterior_via_u",
        }
    }
}

/// `n × N` matrix of samples stored as columns.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub data: DMatrix<f64>,
    pub seed: u64,
    pub provenance: Provenance,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn mean(&self) -> DVector<f64> {
        self.data.column_mean()
    }

    /// One row per DOF, one column per sample, with a `sample_k` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.len()).map(|k| format!("sample_{k}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.data.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Sample mean, residual matrix `F̂ = X - m̂ 1ᵀ` and the factored sample
/// covariance `Σ̂ = F̂ F̂ᵀ / (N - 1)`.
#[derive(Clone, Debug)]
pub struct SampleStats {
    pub mean: DVector<f64>,
    pub residuals: DMatrix<f64>,
}

impl SampleStats {
    pub fn n_samples(&self) -> usize {
        self.residuals.ncols()
    }

    fn denom(&self) -> f64 {
        (self.n_samples() - 1) as f64
    }

    pub fn cov_diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.residuals.nrows(),
            self.residuals.row_iter().map(|r| r.norm_squared() / self.denom()),
        )
    }

    /// `Σ̂ v` without forming `Σ̂`.
    pub fn cov_action(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.residuals * (self.residuals.tr_mul(v)) / self.denom()
    }

    pub fn cov_dense(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = self.residuals.nrows();
        if n > cap {
            return Err(Error::Capacity { dim: n, cap });
        }
        Ok(&self.residuals * self.residuals.transpose() / self.denom())
    }
}

pub fn ensemble_stats(x: &Ensemble) -> Result<SampleStats> {
    if x.len() < 2 {
        return invalid(format!("sample covariance needs at least 2 samples, got {}", x.len()));
    }
    let mean = x.mean();
    let mut residuals = x.data.clone();
    for mut col in residuals.column_iter_mut() {
        col -= &mean;
    }
    Ok(SampleStats { mean, residuals })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SamplingOptions {
    /// Replace `Σf` by its row-sum lumped diagonal when drawing prior force
    /// samples.
    pub diagonal_approximation: bool,
}

enum ForceFactor {
    // the Green's prior shares the stiffness factor
    Stiffness,
    Sparse(CholeskyFactor),
    Diagonal(Vec<f64>),
}

/// Prior and posterior sampler holding the factors shared by all columns.
pub struct Sampler {
    post: PosteriorMoments,
    force: ForceFactor,
    k: SparseSym,
    g: Vec<f64>,
}

impl Sampler {
    pub fn new(prior: &PriorSpec, system: &AssembledSystem, options: SamplingOptions) -> Result<Self> {
        Self::from_posterior(posterior_moments(prior, system)?, system, options)
    }

    /// `post` must have been computed from `system`.
    pub fn from_posterior(post: PosteriorMoments, system: &AssembledSystem, options: SamplingOptions) -> Result<Self> {
        let cond = post.conditioning();
        let force = if options.diagonal_approximation {
            let lumped = cond.sigma_f.row_sums();
            if let Some(i) = lumped.iter().position(|&v| !(v > 0.0)) {
                return invalid(format!("lumped force covariance is not positive at DOF {i}"));
            }
            ForceFactor::Diagonal(lumped.into_iter().map(f64::sqrt).collect())
        } else if cond.greens {
            ForceFactor::Stiffness
        } else {
            ForceFactor::Sparse(cholesky(&cond.sigma_f)?)
        };
        Ok(Self { post, force, k: system.k.clone(), g: system.g.clone() })
    }

    pub fn posterior(&self) -> &PosteriorMoments {
        &self.post
    }

    fn cond(&self) -> &Conditioning {
        self.post.conditioning()
    }

    fn force_sample(&self, seed: u64, j: usize) -> Result<Vec<f64>> {
        let z = NormalStream::new(seed, j as u64).vector(self.cond().n());
        match &self.force {
            ForceFactor::Stiffness => self.cond().k_factor.mul_l(&z),
            ForceFactor::Sparse(l) => l.mul_l(&z),
            ForceFactor::Diagonal(d) => Ok(z.iter().zip(d).map(|(a, b)| a * b).collect()),
        }
    }

    // perturbed observation g + ẽ
    fn observation(&self, seed: u64, j: usize) -> Vec<f64> {
        let s = self.cond().sigma_e;
        if s == 0.0 {
            return self.g.clone();
        }
        let noise = NormalStream::new(seed, NOISE_STREAMS + j as u64).vector(self.g.len());
        self.g.iter().zip(&noise).map(|(g, e)| g + s * e).collect()
    }

    fn run<F>(&self, n_samples: usize, seed: u64, provenance: Provenance, column: F) -> Result<Ensemble>
    where
        F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
    {
        if n_samples == 0 {
            return invalid("ensemble size must be positive");
        }
        let cols: Vec<Vec<f64>> = (0..n_samples).into_par_iter().map(column).collect::<Result<_>>()?;
        let n = self.cond().n();
        let data = DMatrix::from_fn(n, n_samples, |i, j| cols[j][i]);
        Ok(Ensemble { data, seed, provenance })
    }

    /// `ũ = K⁻¹ f̃` with `f̃ ~ N(0, Σf)`.
    pub fn sample_prior(&self, n_samples: usize, seed: u64) -> Result<Ensemble> {
        self.run(n_samples, seed, Provenance::Prior, |j| self.cond().solve_k(&self.force_sample(seed, j)?))
    }

    /// `f̃* = f̃ + Σf Φ S⁻¹ (g + ẽ - Φᵀ f̃)`, then `ũ* = K⁻¹ f̃*`.
    pub fn sample_posterior_via_f(&self, n_samples: usize, seed: u64) -> Result<Ensemble> {
        self.run(n_samples, seed, Provenance::PosteriorViaF, |j| {
            let c = self.cond();
            let mut f = self.force_sample(seed, j)?;
            let mut r = self.observation(seed, j);
            let pf = c.phi.tr_mul_vec(&f);
            r.iter_mut().zip(&pf).for_each(|(a, b)| *a -= b);
            let gain = c.force_gain(&r)?;
            f.iter_mut().zip(&gain).for_each(|(a, b)| *a += b);
            c.solve_k(&f)
        })
    }

    /// `ũ* = ũ + K⁻¹ Σf Φ S⁻¹ (g + ẽ - Φᵀ K ũ)` with `ũ = K⁻¹ f̃`.
    pub fn sample_posterior_via_u(&self, n_samples: usize, seed: u64) -> Result<Ensemble> {
        self.run(n_samples, seed, Provenance::PosteriorViaU, |j| {
            let c = self.cond();
            let mut u = c.solve_k(&self.force_sample(seed, j)?)?;
            let ku = self.k.mul_vec(&u);
            let mut r = self.observation(seed, j);
            let hu = c.phi.tr_mul_vec(&ku);
            r.iter_mut().zip(&hu).for_each(|(a, b)| *a -= b);
            let du = c.solve_k(&c.force_gain(&r)?)?;
            u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
            Ok(u)
        })
    }
}

pub fn sample_prior(prior: &PriorSpec, system: &AssembledSystem, n_samples: usize, seed: u64) -> Result<Ensemble> {
    Sampler::new(prior, system, SamplingOptions::default())?.sample_prior(n_samples, seed)
}

pub fn sample_posterior_via_f(
    prior: &PriorSpec,
    system: &AssembledSystem,
    n_samples: usize,
    seed: u64,
) -> Result<Ensemble> {
    Sampler::new(prior, system, SamplingOptions::default())?.sample_posterior_via_f(n_samples, seed)
}

pub fn sample_posterior_via_u(
    prior: &PriorSpec,
    system: &AssembledSystem,
    n_samples: usize,
    seed: u64,
) -> Result<Ensemble> {
    Sampler::new(prior, system, SamplingOptions::default())?.sample_posterior_via_u(n_samples, seed)
}
