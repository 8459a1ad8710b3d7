use bfem::mesh::{
    generate_interval_mesh, parse_mesh_file, parse_mesh_file_with_stats, partition_dofs, refine_hierarchical,
    subdivide_interval, write_mesh_file,
};
use bfem::problems::{plate_hierarchy, plate_system, PLATE_MESH};
use bfem::sparse::NormalStream;
use proptest::prelude::*;

fn uniform(s: &mut NormalStream) -> f64 {
    // normal CDF through erf is overkill here; a squashed normal is enough
    // to spread points over the element
    1.0 / (1.0 + (-s.next_normal()).exp())
}

#[test]
fn bundled_plate_mesh_counts() {
    let (mesh, stats) = parse_mesh_file_with_stats(PLATE_MESH).unwrap();
    assert_eq!(mesh.num_nodes(), 240);
    assert_eq!(mesh.num_elements(), 389);
    assert_eq!(stats.triangles, 389);
    for tag in ["left", "right", "top", "bottom", "hole"] {
        assert!(mesh.tag(tag).is_some_and(|s| !s.is_empty()), "{tag}");
    }
    let area = 4.0 * 2.0 - std::f64::consts::PI * 0.8 * 0.8;
    // the polygonal hole is inscribed, so the mesh area is slightly larger
    assert!(mesh.total_measure() > area && mesh.total_measure() < area * 1.01);
}

#[test]
fn msh_round_trip() {
    let mesh = parse_mesh_file(PLATE_MESH).unwrap();
    let mut buf = Vec::new();
    write_mesh_file(&mesh, &mut buf).unwrap();
    let again = parse_mesh_file(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(again.num_nodes(), mesh.num_nodes());
    assert_eq!(again.num_elements(), mesh.num_elements());
    for (a, b) in mesh.nodes().iter().zip(again.nodes()) {
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
    assert_eq!(again.boundary_tags(), mesh.boundary_tags());
}

#[test]
fn refined_plate_interpolates_coarse_functions() {
    let h = plate_hierarchy();
    let (coarse, fine) = (h.coarse(), h.fine());
    assert_eq!(fine.num_elements(), 4 * coarse.num_elements());
    let phi = h.prolongation();
    let mut s = NormalStream::new(3, 0);
    let c = s.vector(coarse.num_nodes());
    let fine_values = phi.mul_vec(&c);
    for _ in 0..200 {
        let e = (uniform(&mut s) * fine.num_elements() as f64) as usize % fine.num_elements();
        let (u, v) = (uniform(&mut s), uniform(&mut s));
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        let w = [1.0 - u - v, u, v];
        let x = fine.map_point(e, &w);
        let fine_val: f64 = fine.element(e).iter().zip(&w).map(|(&n, w)| w * fine_values[n]).sum();
        let p = h.parent()[e];
        let psi = coarse.shape_values(p, x);
        assert!(psi.iter().all(|&l| l > -1e-12 && l < 1.0 + 1e-12), "point outside parent");
        let coarse_val: f64 = coarse.element(p).iter().zip(&psi).map(|(&n, l)| l * c[n]).sum();
        assert!((fine_val - coarse_val).abs() < 1e-12 * (1.0 + coarse_val.abs()));
    }
}

#[test]
fn prolongation_rows_sum_to_one() {
    let h = refine_hierarchical(&parse_mesh_file(PLATE_MESH).unwrap(), 2).unwrap();
    let sums = h.prolongation().row_sums();
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-14));
    assert_eq!(h.fine().num_elements(), 16 * 389);
}

#[test]
fn plate_interior_prolongation_has_no_dirichlet_weight() {
    let h = plate_hierarchy();
    let full = h.prolongation_dofs(2);
    let sys = plate_system().unwrap();
    for &d in &sys.fine.dirichlet {
        for &i in &sys.coarse.interior {
            assert_eq!(full.get(d, i), 0.0);
        }
    }
}

#[test]
fn bar_partition() {
    let mesh = generate_interval_mesh(64, 0.0, 1.0).unwrap();
    let p = partition_dofs(&mesh, &["left", "right"], 1).unwrap();
    assert_eq!(p.dirichlet, vec![0, 64]);
    assert_eq!(p.interior, (1..64).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interval_subdivision_is_nested(m in 1usize..12, factor in 1usize..6, seed in 0u64..1000) {
        let coarse = generate_interval_mesh(m, 0.0, 1.0).unwrap();
        let h = subdivide_interval(&coarse, factor).unwrap();
        prop_assert_eq!(h.fine().num_elements(), m * factor);
        let c = NormalStream::new(seed, 0).vector(m + 1);
        let f = h.prolongation().mul_vec(&c);
        for (i, x) in h.fine().nodes().iter().enumerate() {
            let e = h.parent()[h.fine().num_elements().min(
                (0..h.fine().num_elements()).find(|&e| h.fine().element(e).contains(&i)).unwrap(),
            )];
            let psi = coarse.shape_values(e, *x);
            let expect: f64 = coarse.element(e).iter().zip(&psi).map(|(&n, l)| l * c[n]).sum();
            prop_assert!((f[i] - expect).abs() < 1e-12);
        }
        let sums = h.prolongation().row_sums();
        prop_assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-14));
    }
}
