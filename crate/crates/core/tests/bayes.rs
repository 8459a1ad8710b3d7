use bfem::bayes::{
    error_recovery, posterior_moments, posterior_moments_with, solve_levels, PriorSpec, Route, WHITE_NOISE_SIGMA_E,
};
use bfem::problems::{bar_system, plate_system};
use bfem::sparse::gaussian_vector;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

#[test]
fn default_noise_levels() {
    assert_eq!(PriorSpec::white_noise(1.0).sigma_e(), WHITE_NOISE_SIGMA_E);
    assert_eq!(PriorSpec::greens().sigma_e(), 0.0);
    let parsed: PriorSpec = serde_json::from_str(r#"{"kind": "white_noise"}"#).unwrap();
    assert_eq!(parsed, PriorSpec::white_noise(1.0));
    assert!(PriorSpec::white_noise(-1.0).validate().is_err());
}

#[test]
fn specialized_and_general_routes_agree() {
    let s = bar_system(32, 4).unwrap();
    let fast = posterior_moments(&PriorSpec::greens(), &s).unwrap();
    let general = posterior_moments_with(&PriorSpec::greens(), &s, Route::General).unwrap();
    assert!(rel(fast.mean(), general.mean()) < 1e-10);
    let a = fast.dense_cov().unwrap();
    let b = general.dense_cov().unwrap();
    assert!((&a - &b).amax() < 1e-10 * b.amax());
}

#[test]
fn variance_matches_dense_diagonal() {
    let s = bar_system(32, 8).unwrap();
    for prior in [PriorSpec::greens(), PriorSpec::white_noise(1.5)] {
        let post = posterior_moments(&prior, &s).unwrap();
        let dense = post.dense_cov().unwrap();
        let var = post.variance().unwrap();
        for (i, v) in var.iter().enumerate() {
            assert!((v - dense[(i, i)]).abs() <= 1e-12 * dense.amax());
        }
        assert_eq!(dense, dense.transpose());
        let prior_dense = post.prior_dense_cov().unwrap();
        // conditioning never increases the variance
        for i in 0..var.len() {
            assert!(dense[(i, i)] <= prior_dense[(i, i)] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn recovery_needs_noise_free_greens_prior() {
    let s = bar_system(16, 4).unwrap();
    let noisy = posterior_moments(&PriorSpec::greens().with_sigma_e(1e-3), &s).unwrap();
    assert!(matches!(error_recovery(&noisy, &s.f), Err(bfem::Error::Unsupported(_))));
    let wn = posterior_moments(&PriorSpec::white_noise(1.0), &s).unwrap();
    assert!(error_recovery(&wn, &s.f).is_err());
}

#[test]
fn dense_cap_is_enforced() {
    let s = plate_system().unwrap();
    let post = posterior_moments(&PriorSpec::greens(), &s).unwrap().with_dense_cap(100);
    assert!(matches!(post.dense_cov(), Err(bfem::Error::Capacity { .. })));
}

#[test]
fn white_noise_mean_sits_between_coarse_and_fine() {
    // the white-noise posterior mean is a better estimate of the fine
    // solution than the prolonged coarse solution
    let s = bar_system(64, 4).unwrap();
    let sol = solve_levels(&s).unwrap();
    let post = posterior_moments(&PriorSpec::white_noise(1.0), &s).unwrap();
    assert!(rel(post.mean(), &sol.fine) < rel(&sol.prolonged, &sol.fine));
}

#[test]
fn posterior_covariance_is_psd() {
    let s = bar_system(64, 16).unwrap();
    for prior in [PriorSpec::greens(), PriorSpec::white_noise(1.0)] {
        let dense = posterior_moments(&prior, &s).unwrap().dense_cov().unwrap();
        let eig = DMatrix::symmetric_eigenvalues(&dense);
        assert!(eig.min() >= -1e-10 * eig.max());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn recovery_holds_for_random_loads(seed in 0u64..100_000, m in prop::sample::select(vec![2usize, 4, 8, 16])) {
        let s = bar_system(32, m).unwrap();
        let post = posterior_moments(&PriorSpec::greens(), &s).unwrap();
        let f = gaussian_vector(seed, s.n_interior());
        let mut t = s.clone();
        t.f = f.clone();
        t.g = s.phi.tr_mul_vec(&f);
        let e = solve_levels(&t).unwrap().error;
        let r = error_recovery(&post, &f).unwrap();
        prop_assert!(rel(&r, &e) < 1e-9);
    }

    #[test]
    fn alpha_only_scales_the_covariance(alpha in 0.1f64..10.0) {
        let s = bar_system(16, 4).unwrap();
        let one = posterior_moments(&PriorSpec::white_noise(1.0).with_sigma_e(0.0), &s).unwrap();
        let a = posterior_moments(&PriorSpec::white_noise(alpha).with_sigma_e(0.0), &s).unwrap();
        prop_assert!(rel(a.mean(), one.mean()) < 1e-12);
        let v1 = one.variance().unwrap();
        let va = a.variance().unwrap();
        for (x, y) in va.iter().zip(&v1) {
            prop_assert!((x - alpha * alpha * y).abs() <= 1e-10 * alpha * alpha * y.abs().max(1e-300));
        }
    }
}
