//! Builds the configured problem and computes every field the outputs need.

use std::time::Instant;

use bfem::assembly::{assemble_system, AssembledSystem, OperatorSpec};
use bfem::bayes::{
    boundary_posterior, posterior_moments, rescale_eigenvalues, solve_levels, BoundaryPrior, PosteriorMoments,
    PriorSpec, Solutions,
};
use bfem::mesh::{parse_mesh_file, refine_hierarchical, MeshHierarchy};
use bfem::problems::{bar_hierarchy, PLATE_MESH};
use bfem::sampling::{Ensemble, Sampler, SamplingOptions};
use bfem::sparse::cholesky;

use crate::config::{LoadedConfig, ProblemConfig, SamplingMethod};
use crate::error::{CliError, Stage};

pub struct Problem {
    pub kind: &'static str,
    pub hierarchy: MeshHierarchy,
    pub op: OperatorSpec,
    pub load: [f64; 2],
    pub dirichlet_tags: Vec<String>,
    pub system: AssembledSystem,
    /// Prescribed values on the fine Dirichlet DOFs.
    pub dirichlet_values: Vec<f64>,
}

impl Problem {
    pub fn dofs_per_node(&self) -> usize {
        self.op.dofs_per_node()
    }

    pub fn homogeneous(&self) -> bool {
        self.dirichlet_values.iter().all(|&v| v == 0.0)
    }

    /// The same problem assembled directly on the coarse mesh.
    pub fn direct_coarse(&self) -> Result<AssembledSystem, CliError> {
        let id = MeshHierarchy::identity(self.hierarchy.coarse().clone());
        let load = self.load;
        assemble_system(&id, &self.op, |_, c| load[c], &self.dirichlet_tags).setup("coarse assembly")
    }

    /// Full fine-DOF vector from interior values plus the Dirichlet data.
    pub fn scatter(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = self.system.fine.scatter(interior, 0.0);
        for (&d, &v) in self.system.fine.dirichlet.iter().zip(&self.dirichlet_values) {
            full[d] = v;
        }
        full
    }
}

pub fn build_problem(cfg: &LoadedConfig) -> Result<Problem, CliError> {
    match &cfg.config.problem {
        ProblemConfig::Bar { n, m, coefficient, load, left_value, right_value } => {
            let hierarchy = bar_hierarchy(*n, *m).setup("problem")?;
            let op = OperatorSpec::Poisson1D { coefficient: coefficient.clone() };
            let tags = vec!["left".to_string(), "right".to_string()];
            let f = *load;
            let system = assemble_system(&hierarchy, &op, |_, _| f, &tags).setup("assembly")?;
            let right = hierarchy.fine().tag("right").cloned().unwrap_or_default();
            let dirichlet_values = system
                .fine
                .dirichlet
                .iter()
                .map(|d| if right.contains(d) { *right_value } else { *left_value })
                .collect();
            Ok(Problem { kind: "bar", hierarchy, op, load: [f, 0.0], dirichlet_tags: tags, system, dirichlet_values })
        }
        ProblemConfig::Plate { mesh, levels, youngs_modulus, poisson_ratio, thickness, load, dirichlet } => {
            let coarse = match mesh {
                Some(p) => {
                    let path = cfg.resolve(p);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Config(format!("problem.mesh: cannot read {}: {e}", path.display())))?;
                    parse_mesh_file(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
                }
                None => parse_mesh_file(PLATE_MESH).setup("bundled mesh")?,
            };
            let hierarchy = refine_hierarchical(&coarse, *levels).setup("refinement")?;
            let op = OperatorSpec::PlaneStress {
                youngs_modulus: *youngs_modulus,
                poisson_ratio: *poisson_ratio,
                thickness: *thickness,
            };
            let l = *load;
            let system = assemble_system(&hierarchy, &op, |_, c| l[c], dirichlet).setup("assembly")?;
            let dirichlet_values = vec![0.0; system.fine.dirichlet.len()];
            Ok(Problem {
                kind: "plate",
                hierarchy,
                op,
                load: l,
                dirichlet_tags: dirichlet.clone(),
                system,
                dirichlet_values,
            })
        }
    }
}

pub struct RescaleSummary {
    pub std: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max|Q Λ Qᵀ - Σ*| / max|Σ*|`, skipped for large problems.
    pub reconstruction: Option<f64>,
    /// `‖Q ẽ - Σ* f‖ / ‖Σ* f‖`
    pub recovery_consistency: f64,
}

pub struct Analysis {
    pub prior: PriorSpec,
    pub solutions: Solutions,
    pub post: PosteriorMoments,
    pub std: Vec<f64>,
    pub prior_std: Vec<f64>,
    pub recovered: Option<Vec<f64>>,
    pub rescaled: Option<RescaleSummary>,
    pub dense_posterior_max: Option<f64>,
    pub dense_prior_max: Option<f64>,
    pub ensemble: Option<Ensemble>,
    pub timings: Vec<(&'static str, f64)>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

pub fn analyze(cfg: &LoadedConfig, problem: &Problem) -> Result<Analysis, CliError> {
    let c = &cfg.config;
    let sys = &problem.system;
    let prior = c.prior;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let mut solutions = solve_levels(sys).stage("reference solutions")?;
    let lifting = if problem.homogeneous() {
        vec![0.0; sys.n_interior()]
    } else {
        let rhs: Vec<f64> = sys.k_id.mul_vec(&problem.dirichlet_values).iter().map(|v| -v).collect();
        cholesky(&sys.k).stage("lifting")?.solve(&rhs).stage("lifting")?
    };
    for (u, l) in solutions.fine.iter_mut().zip(&lifting) {
        *u += l;
    }
    for (u, l) in solutions.prolonged.iter_mut().zip(&lifting) {
        *u += l;
    }
    lap("solutions", &mut timings);

    let post = if problem.homogeneous() {
        posterior_moments(&prior, sys)
    } else {
        boundary_posterior(&prior, sys, &BoundaryPrior::strong_dirichlet(problem.dirichlet_values.clone()))
    }
    .stage("posterior")?
    .with_dense_cap(c.dense_cap);
    let std = post.std().stage("posterior std")?;
    let prior_std: Vec<f64> =
        post.prior_variance().stage("prior std")?.into_iter().map(|v| v.max(0.0).sqrt()).collect();
    let recovered = if post.is_greens() && prior.sigma_e() == 0.0 {
        Some(bfem::bayes::error_recovery(&post, &sys.f).stage("error recovery")?)
    } else {
        None
    };
    lap("posterior", &mut timings);

    let n = sys.n_interior();
    let mut dense_posterior_max = None;
    let mut dense_prior_max = None;
    let mut rescaled = None;
    if n <= c.dense_cap {
        let dense = post.dense_cov().stage("dense posterior")?;
        dense_posterior_max = Some(dense.amax());
        dense_prior_max = Some(post.prior_dense_cov().stage("dense prior")?.amax());
        if c.outputs.rescaled {
            let r = rescale_eigenvalues(&dense, &sys.f, c.dense_cap).stage("rescaling")?;
            let direct = post.cov_action(&sys.f).stage("rescaling")?;
            let recovery_consistency = rel_diff(r.recovered().as_slice(), &direct);
            // the explicit product is cubic; only worth it at small sizes
            let reconstruction =
                (n <= 512).then(|| (r.eig.reconstruct() - &dense).amax() / dense.amax().max(f64::MIN_POSITIVE));
            rescaled = Some(RescaleSummary {
                std: r.variance().into_iter().map(|v| v.max(0.0).sqrt()).collect(),
                min_eigenvalue: r.eig.values.min(),
                max_eigenvalue: r.eig.values.max(),
                reconstruction,
                recovery_consistency,
            });
        }
        lap("dense analysis", &mut timings);
    }

    let ensemble = match &c.ensemble {
        Some(e) => {
            let opts = SamplingOptions { diagonal_approximation: e.diagonal_approximation };
            let sampler = Sampler::new(&prior, sys, opts).stage("sampling setup")?;
            let mut ens = match e.method {
                SamplingMethod::ViaF => sampler.sample_posterior_via_f(e.samples, e.seed),
                SamplingMethod::ViaU => sampler.sample_posterior_via_u(e.samples, e.seed),
            }
            .stage("sampling")?;
            for mut col in ens.data.column_iter_mut() {
                col.iter_mut().zip(&lifting).for_each(|(u, l)| *u += l);
            }
            lap("sampling", &mut timings);
            Some(ens)
        }
        None => None,
    };

    Ok(Analysis {
        prior,
        solutions,
        post,
        std,
        prior_std,
        recovered,
        rescaled,
        dense_posterior_max,
        dense_prior_max,
        ensemble,
        timings,
    })
}
