//! Invariant checks for a configured instance.

use bfem::bayes::{contraction_check, force_projection, posterior_moments, prior_covariance_f, PriorSpec};
use bfem::problems::{HOLE_CENTER, HOLE_RADIUS};
use bfem::sparse::{cholesky, gaussian_vector, CscMatrix};
use serde::Serialize;

use crate::config::{LoadedConfig, ProblemConfig};
use crate::error::{CliError, Stage};
use crate::experiment::{rel_diff, Analysis, Problem};

/// Largest problem for which the dense brute-force checks run.
const BRUTE_FORCE_CAP: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Upper bound for `value`, or lower bound when `lower` is set.
    pub bound: f64,
    pub lower: bool,
    /// Reported only, never fails.
    pub info: bool,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), value, bound, lower: false, info: false, passed: value <= bound }
    }

    fn above(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), value, bound, lower: true, info: false, passed: value > bound }
    }

    fn info(name: &str, value: f64) -> Self {
        Self { name: name.to_string(), value, bound: f64::NAN, lower: false, info: true, passed: true }
    }

    pub fn line(&self) -> String {
        if self.info {
            return format!("INFO {}: {:.3e}", self.name, self.value);
        }
        let op = if self.lower { ">" } else { "<=" };
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {:.3e} {op} {:.1e}", self.name, self.value, self.bound)
    }
}

fn max_rel(a: &CscMatrix, b: &CscMatrix) -> f64 {
    let diff = a.add_scaled(1.0, b, -1.0);
    diff.max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

fn max_rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    d / b.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(f64::MIN_POSITIVE)
}

/// Deviations of the restricted coarse system from a direct coarse assembly.
pub fn galerkin_deviation(problem: &Problem) -> Result<(f64, f64), CliError> {
    let direct = problem.direct_coarse()?;
    Ok((max_rel(&problem.system.kc, &direct.k), max_rel_vec(&problem.system.g, &direct.f)))
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Exact solution of `-(EA u')' = q` on (0, 1) with `u(0) = u(1) = 0` for
/// `EA(x) = a - b x`, `b != 0`.
pub fn tapered_bar_exact(a: f64, b: f64, q: f64, x: f64) -> f64 {
    let l = (a / (a - b)).ln();
    q * (x / b + ((a - b * x) / a).ln() / (b * l))
}

/// Relative L2 error of the piecewise-linear interpolant of `nodal` against
/// `exact`, integrated with 5-point Gauss rules per element.
pub fn relative_l2(xs: &[f64], nodal: &[f64], exact: impl Fn(f64) -> f64) -> f64 {
    const GAUSS: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let (mut err, mut norm) = (0.0, 0.0);
    for i in 0..xs.len() - 1 {
        let (x0, x1) = (xs[i], xs[i + 1]);
        let h = x1 - x0;
        for (t, w) in GAUSS {
            let s = 0.5 * (t + 1.0);
            let uh = nodal[i] * (1.0 - s) + nodal[i + 1] * s;
            let u = exact(x0 + s * h);
            err += 0.5 * h * w * (uh - u).powi(2);
            norm += 0.5 * h * w * u * u;
        }
    }
    (err / norm).sqrt()
}

/// Node-averaged `|e|` in the strips below and above the hole.
pub fn hole_strip_means(problem: &Problem, error: &[f64]) -> (f64, f64) {
    let mesh = problem.hierarchy.fine();
    let full = problem.system.fine.scatter(error, 0.0);
    let k = problem.dofs_per_node();
    let (mut below, mut nb, mut above, mut na) = (0.0, 0, 0.0, 0);
    for (v, p) in mesh.nodes().iter().enumerate() {
        if (p[0] - HOLE_CENTER[0]).abs() > HOLE_RADIUS {
            continue;
        }
        let mag = full[k * v..k * v + k].iter().map(|x| x * x).sum::<f64>().sqrt();
        if p[1] < HOLE_CENTER[1] - HOLE_RADIUS {
            below += mag;
            nb += 1;
        } else if p[1] > HOLE_CENTER[1] + HOLE_RADIUS {
            above += mag;
            na += 1;
        }
    }
    (below / nb.max(1) as f64, above / na.max(1) as f64)
}

// two-sided normal tail bound: P(|Z| > z) <= exp(-z²/2)
fn simultaneous_band(n: usize, level: f64) -> f64 {
    (2.0 * (n as f64 / level).ln()).sqrt().max(3.0)
}

pub fn run_checks(cfg: &LoadedConfig, problem: &Problem, a: &Analysis) -> Result<Vec<Check>, CliError> {
    let sys = &problem.system;
    let prior = a.prior;
    let n = sys.n_interior();
    let mut checks = Vec::new();

    let (kc_dev, g_dev) = galerkin_deviation(problem)?;
    checks.push(Check::at_most("galerkin_kc_deviation", kc_dev, 1e-12));
    checks.push(Check::at_most("galerkin_g_deviation", g_dev, 1e-12));
    checks.push(Check::at_most("kc_symmetry_defect", sys.kc.symmetry_defect() / sys.kc.max_abs(), 1e-12));

    if prior.is_greens() && prior.sigma_e() == 0.0 {
        checks.push(Check::at_most("mean_vs_coarse_relative", rel_diff(a.post.mean(), &a.solutions.prolonged), 1e-10));
        if let Some(r) = &a.recovered {
            if a.solutions.error.iter().any(|&v| v != 0.0) {
                checks.push(Check::at_most("error_recovery_relative", rel_diff(r, &a.solutions.error), 1e-8));
            }
        }
        let k = cholesky(&sys.k).stage("random loads")?;
        let kc = cholesky(&sys.kc).stage("random loads")?;
        let mut worst = 0.0f64;
        for seed in 0..5 {
            let f = gaussian_vector(seed, n);
            let fine = k.solve(&f).stage("random loads")?;
            let coarse = sys.phi.mul_vec(&kc.solve(&sys.phi.tr_mul_vec(&f)).stage("random loads")?);
            let e: Vec<f64> = fine.iter().zip(&coarse).map(|(x, y)| x - y).collect();
            if e.iter().all(|&v| v == 0.0) {
                continue;
            }
            let rec = a.post.cov_action(&f).stage("random loads")?;
            worst = worst.max(rel_diff(&rec, &e));
        }
        checks.push(Check::at_most("error_recovery_random_loads", worst, 1e-8));
    }

    if let PriorSpec::WhiteNoise { alpha, .. } = prior {
        let sigma_f = prior_covariance_f(&prior, &sys.k, &sys.m);
        let f_hat = force_projection(&sigma_f, &sys.phi, &sys.f, 0.0).stage("projection")?;
        let resid: Vec<f64> = sys.f.iter().zip(&f_hat).map(|(x, y)| x - y).collect();
        let g_norm = sys.g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let orth = sys.phi.tr_mul_vec(&resid).iter().map(|x| x * x).sum::<f64>().sqrt() / g_norm;
        checks.push(Check::at_most("projection_orthogonality", orth, 1e-10));

        let scaled = posterior_moments(&PriorSpec::white_noise(2.0 * alpha).with_sigma_e(0.0), sys)
            .stage("alpha scaling")?
            .with_dense_cap(cfg.config.dense_cap);
        let base = posterior_moments(&PriorSpec::white_noise(alpha).with_sigma_e(0.0), sys)
            .stage("alpha scaling")?
            .with_dense_cap(cfg.config.dense_cap);
        checks.push(Check::at_most("alpha_mean_invariance", rel_diff(scaled.mean(), base.mean()), 1e-12));
        if n <= BRUTE_FORCE_CAP.min(cfg.config.dense_cap) {
            let sb = base.dense_cov().stage("alpha scaling")?;
            let ss = scaled.dense_cov().stage("alpha scaling")?;
            let dev = (ss - &sb * 4.0).amax() / (4.0 * sb.amax()).max(f64::MIN_POSITIVE);
            checks.push(Check::at_most("alpha_covariance_scaling", dev, 1e-10));
        } else {
            let vb = base.variance().stage("alpha scaling")?;
            let vs: Vec<f64> = scaled.variance().stage("alpha scaling")?.iter().map(|v| v / 4.0).collect();
            checks.push(Check::at_most("alpha_covariance_scaling", max_rel_vec(&vs, &vb), 1e-10));
        }
    }

    if let Some(r) = &a.rescaled {
        let scale = r.max_eigenvalue.abs().max(f64::MIN_POSITIVE);
        checks.push(Check::above("psd_min_eigenvalue_relative", r.min_eigenvalue / scale, -1e-10));
        if let Some(rec) = r.reconstruction {
            checks.push(Check::at_most("rescaling_reconstruction", rec, 1e-8));
        }
        checks.push(Check::at_most("rescaling_recovery_consistency", r.recovery_consistency, 1e-8));
    }

    if n <= BRUTE_FORCE_CAP.min(cfg.config.dense_cap) {
        let res = contraction_check(&prior.with_sigma_e(0.0), sys, cfg.config.dense_cap).stage("contraction")?;
        checks.push(Check::at_most("contraction_residual", res, 1e-8));
    }

    match &cfg.config.problem {
        ProblemConfig::Bar { n: nf, m, coefficient, load, left_value, right_value } => {
            if nf == m {
                let e = a.solutions.error.iter().map(|x| x * x).sum::<f64>().sqrt();
                checks.push(Check::at_most("limit_error_norm", e, 1e-12));
                if prior.sigma_e() == 0.0 {
                    if let (Some(p), Some(q)) = (a.dense_posterior_max, a.dense_prior_max) {
                        checks.push(Check::at_most("limit_posterior_to_prior_max", p / q, 1e-10));
                    }
                }
            }
            let c = &coefficient.0;
            if c.len() == 2 && c[1] != 0.0 && *left_value == 0.0 && *right_value == 0.0 {
                let exact = |x: f64| tapered_bar_exact(c[0], -c[1], *load, x);
                let l2 = |sys: &bfem::assembly::AssembledSystem, mesh: &bfem::mesh::Mesh, u: &[f64]| {
                    let full = sys.fine.scatter(u, 0.0);
                    let mut order: Vec<usize> = (0..mesh.num_nodes()).collect();
                    order.sort_by(|&i, &j| mesh.node(i)[0].total_cmp(&mesh.node(j)[0]));
                    let xs: Vec<f64> = order.iter().map(|&v| mesh.node(v)[0]).collect();
                    let us: Vec<f64> = order.iter().map(|&v| full[v]).collect();
                    relative_l2(&xs, &us, exact)
                };
                let e_n = l2(sys, problem.hierarchy.fine(), &a.solutions.fine);
                // the steep layer at x = 1 keeps coarse meshes pre-asymptotic,
                // so the absolute error is reported and the rate is checked
                checks.push(Check::info("bar_analytic_l2", e_n));
                let h2 = bfem::problems::bar_hierarchy(2 * nf, *m).setup("refined bar")?;
                let q = *load;
                let sys2 = bfem::assembly::assemble_system(&h2, &problem.op, |_, _| q, &problem.dirichlet_tags)
                    .setup("refined bar")?;
                let u2 = cholesky(&sys2.k).stage("refined bar")?.solve(&sys2.f).stage("refined bar")?;
                let e_2n = l2(&sys2, h2.fine(), &u2);
                checks.push(Check::above("bar_analytic_convergence_order", (e_n / e_2n).log2(), 1.0));
            }
        }
        ProblemConfig::Plate { mesh: None, .. } => {
            let (below, above) = hole_strip_means(problem, &a.solutions.error);
            checks.push(Check::above("plate_error_below_minus_above", below - above, 0.0));
            if let (Some(r), true) = (&a.rescaled, prior.is_greens()) {
                let abs_e: Vec<f64> = a.solutions.error.iter().map(|x| x.abs()).collect();
                checks.push(Check::above("rescaled_std_error_correlation", pearson(&r.std, &abs_e), 0.5));
            }
        }
        ProblemConfig::Plate { .. } => {}
    }

    if let Some(ens) = &a.ensemble {
        if ens.len() >= 2 {
            let n_s = ens.len() as f64;
            let mean = ens.mean();
            let dev = mean
                .iter()
                .zip(a.post.mean())
                .zip(&a.std)
                .map(|((x, y), s)| if *s > 0.0 { (x - y).abs() * n_s.sqrt() / s } else { 0.0 })
                .fold(0.0, f64::max);
            checks.push(Check::at_most("ensemble_mean_standardized", dev, simultaneous_band(n, 1e-3)));
        }
    }

    Ok(checks)
}
