use bfem::assembly::{assemble_mass, assemble_stiffness, assemble_system, OperatorSpec, Polynomial};
use bfem::mesh::generate_interval_mesh;
use bfem::problems::{bar_hierarchy, bar_operator, bar_system, plate_coarse_mesh, plate_operator, plate_system};
use bfem::sparse::cholesky;
use proptest::prelude::*;

#[test]
fn bar_stiffness_matches_element_integrals() {
    let mesh = generate_interval_mesh(64, 0.0, 1.0).unwrap();
    let op = OperatorSpec::Poisson1D { coefficient: Polynomial(vec![0.1, -0.099]) };
    let k = assemble_stiffness(&mesh, &op).unwrap();
    let h = 1.0 / 64.0;
    for e in 0..64 {
        let (a, b) = (e as f64 * h, (e + 1) as f64 * h);
        // ∫ EA dx over the element, divided by h²
        let ea = (0.1 * (b - a) - 0.099 * (b * b - a * a) / 2.0) / (h * h);
        if e > 0 && e < 63 {
            assert!((k.get(e, e + 1) + ea).abs() < 1e-12 * ea);
        }
    }
}

#[test]
fn plate_patch_test() {
    // a linear displacement field has constant strain, so its discrete
    // residual vanishes at every node not touching the boundary
    let mesh = plate_coarse_mesh();
    let k = assemble_stiffness(&mesh, &plate_operator()).unwrap();
    let u: Vec<f64> = mesh.nodes().iter().flat_map(|p| [0.3 * p[0] - 0.1 * p[1] + 1.0, 0.2 * p[0] + 0.5 * p[1]]).collect();
    let r = k.mul_vec(&u);
    let on_boundary: std::collections::BTreeSet<usize> =
        mesh.boundary_edges().into_iter().flat_map(|(a, b)| [a, b]).collect();
    let scale = k.max_abs();
    for v in 0..mesh.num_nodes() {
        if !on_boundary.contains(&v) {
            assert!(r[2 * v].abs() < 1e-12 * scale && r[2 * v + 1].abs() < 1e-12 * scale, "node {v}");
        }
    }
}

#[test]
fn plate_mass_integrates_area() {
    let mesh = plate_coarse_mesh();
    let m = assemble_mass(&mesh, 2).unwrap();
    let ones: Vec<f64> = vec![1.0; 2 * mesh.num_nodes()];
    let total: f64 = m.mul_vec(&ones).iter().sum();
    assert!((total - 2.0 * mesh.total_measure()).abs() < 1e-12);
}

#[test]
fn assembled_systems_are_spd() {
    for s in [bar_system(64, 4).unwrap(), plate_system().unwrap()] {
        assert_eq!(s.k.symmetry_defect(), 0.0);
        assert!(cholesky(&s.k).is_ok());
        assert!(cholesky(&s.kc).is_ok());
        assert!(cholesky(&s.m).is_ok());
        assert_eq!(s.k.dim(), s.n_interior());
        assert_eq!(s.phi.shape(), (s.n_interior(), s.m_interior()));
    }
}

#[test]
fn bar_fine_solution_converges_at_second_order() {
    let (a, b) = (0.1f64, 0.099f64);
    let log_ratio = (a / (a - b)).ln();
    let exact = |x: f64| x / b + ((a - b * x) / a).ln() / (b * log_ratio);
    let nodal_error = |n: usize| {
        let h = bar_hierarchy(n, 2).unwrap();
        let s = assemble_system(&h, &bar_operator(), |_, _| 1.0, &["left", "right"]).unwrap();
        let u = cholesky(&s.k).unwrap().solve(&s.f).unwrap();
        let nodes = h.fine().nodes();
        s.fine.interior.iter().zip(&u).map(|(&d, v)| (v - exact(nodes[d][0])).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (nodal_error(1024), nodal_error(2048));
    assert!(e1 < 1e-3, "{e1}");
    assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stiffness_scales_linearly_with_modulus(e in 0.1f64..10.0, nu in 0.0f64..0.45) {
        let mesh = plate_coarse_mesh();
        let unit = OperatorSpec::PlaneStress { youngs_modulus: 1.0, poisson_ratio: nu, thickness: 1.0 };
        let scaled = OperatorSpec::PlaneStress { youngs_modulus: e, poisson_ratio: nu, thickness: 1.0 };
        let k1 = assemble_stiffness(&mesh, &unit).unwrap();
        let ke = assemble_stiffness(&mesh, &scaled).unwrap();
        let diff = ke.add_scaled(1.0, &k1, -e);
        prop_assert!(diff.max_abs() <= 1e-12 * ke.max_abs());
    }
}
