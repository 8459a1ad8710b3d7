//! Stiffness, mass and load assembly for P1 elements, Galerkin restriction to
//! the coarse space and elimination of Dirichlet degrees of freedom.
//!
//! All integrals use one quadrature rule per element type: 2-point Gauss on
//! intervals and the 3-point interior rule of order 2 on triangles. Vector
//! problems use interleaved DOFs (`2 v`, `2 v + 1` for node `v`).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{partition_dofs, DofPartition, Mesh, MeshHierarchy, Point};
use crate::sparse::{CscMatrix, SparseSym, Triplets};

/// Barycentric quadrature points and weights (relative to element measure).
fn quadrature(dim: usize) -> Vec<(Vec<f64>, f64)> {
    if dim == 1 {
        let s = 0.5 / 3f64.sqrt();
        vec![(vec![0.5 + s, 0.5 - s], 0.5), (vec![0.5 - s, 0.5 + s], 0.5)]
    } else {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        vec![(vec![a, b, b], 1.0 / 3.0), (vec![b, a, b], 1.0 / 3.0), (vec![b, b, a], 1.0 / 3.0)]
    }
}

/// Polynomial coefficient `c[0] + c[1] x + c[2] x² + ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `-(EA(x) u')'` on an interval mesh.
    Poisson1D { coefficient: Polynomial },
    /// Plane-stress linear elasticity on a triangle mesh.
    PlaneStress { youngs_modulus: f64, poisson_ratio: f64, thickness: f64 },
}

impl OperatorSpec {
    pub fn dofs_per_node(&self) -> usize {
        match self {
            OperatorSpec::Poisson1D { .. } => 1,
            OperatorSpec::PlaneStress { .. } => 2,
        }
    }

    fn mesh_dim(&self) -> usize {
        self.dofs_per_node()
    }

    /// Checks material parameters, and for the bar positivity of `EA` at the
    /// nodes and quadrature points of `mesh`.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if mesh.dim() != self.mesh_dim() {
            return invalid(format!("operator needs a {}D mesh, got {}D", self.mesh_dim(), mesh.dim()));
        }
        match self {
            OperatorSpec::Poisson1D { coefficient } => {
                let q = quadrature(1);
                for e in 0..mesh.num_elements() {
                    let xs = [0.0, 1.0, q[0].0[1], q[1].0[1]];
                    for t in xs {
                        let x = mesh.map_point(e, &[1.0 - t, t])[0];
                        let v = coefficient.eval(x);
                        if !(v > 0.0) {
                            return invalid(format!("coefficient EA({x}) = {v} is not positive"));
                        }
                    }
                }
            }
            &OperatorSpec::PlaneStress { youngs_modulus, poisson_ratio, thickness } => {
                if !(youngs_modulus > 0.0) {
                    return invalid(format!("Young's modulus {youngs_modulus} must be positive"));
                }
                if !(0.0..0.5).contains(&poisson_ratio) {
                    return invalid(format!("Poisson's ratio {poisson_ratio} must lie in [0, 0.5)"));
                }
                if !(thickness > 0.0) {
                    return invalid(format!("thickness {thickness} must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Plane-stress constitutive matrix (engineering shear strain).
pub fn plane_stress_matrix(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e / (1.0 - nu * nu);
    [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]]
}

/// Gradients of the three P1 shape functions of triangle `e`.
pub fn triangle_gradients(mesh: &Mesh, e: usize) -> [[f64; 2]; 3] {
    let el = mesh.element(e);
    let [p0, p1, p2] = [mesh.node(el[0]), mesh.node(el[1]), mesh.node(el[2])];
    let two_a = 2.0 * mesh.element_measure_signed(e);
    [
        [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
        [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
        [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
    ]
}

fn element_stiffness(mesh: &Mesh, e: usize, op: &OperatorSpec) -> Vec<Vec<f64>> {
    match op {
        OperatorSpec::Poisson1D { coefficient } => {
            let h = mesh.element_measure(e);
            let ea: f64 = quadrature(1)
                .iter()
                .map(|(w, qw)| qw * coefficient.eval(mesh.map_point(e, w)[0]))
                .sum();
            let k = ea / h;
            vec![vec![k, -k], vec![-k, k]]
        }
        &OperatorSpec::PlaneStress { youngs_modulus, poisson_ratio, thickness } => {
            let d = plane_stress_matrix(youngs_modulus, poisson_ratio);
            let g = triangle_gradients(mesh, e);
            let area = mesh.element_measure(e);
            // strain-displacement matrix, columns (u0, v0, u1, v1, u2, v2)
            let mut b = [[0.0; 6]; 3];
            for a in 0..3 {
                b[0][2 * a] = g[a][0];
                b[1][2 * a + 1] = g[a][1];
                b[2][2 * a] = g[a][1];
                b[2][2 * a + 1] = g[a][0];
            }
            let mut ke = vec![vec![0.0; 6]; 6];
            for i in 0..6 {
                for j in i..6 {
                    let mut s = 0.0;
                    for r in 0..3 {
                        for c in 0..3 {
                            s += b[r][i] * d[r][c] * b[c][j];
                        }
                    }
                    ke[i][j] = thickness * area * s;
                    ke[j][i] = ke[i][j];
                }
            }
            ke
        }
    }
}

fn element_dofs(el: &[usize], k: usize) -> Vec<usize> {
    el.iter().flat_map(|&v| (0..k).map(move |c| k * v + c)).collect()
}

/// Stiffness matrix over all DOFs of `mesh`.
pub fn assemble_stiffness(mesh: &Mesh, op: &OperatorSpec) -> Result<SparseSym> {
    op.validate(mesh)?;
    let k = op.dofs_per_node();
    let n = mesh.num_nodes() * k;
    let per = (mesh.nodes_per_element() * k).pow(2);
    let mut t = Triplets::with_capacity(n, n, mesh.num_elements() * per);
    for (e, el) in mesh.elements().enumerate() {
        let ke = element_stiffness(mesh, e, op);
        let dofs = element_dofs(el, k);
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                t.push(i, j, ke[a][b]);
            }
        }
    }
    SparseSym::new(t.to_csc())
}

/// Consistent mass matrix, block diagonal over the `dofs_per_node` components.
pub fn assemble_mass(mesh: &Mesh, dofs_per_node: usize) -> Result<SparseSym> {
    if dofs_per_node == 0 {
        return invalid("mass matrix needs at least one DOF per node");
    }
    let k = dofs_per_node;
    let n = mesh.num_nodes() * k;
    let q = quadrature(mesh.dim());
    let npe = mesh.nodes_per_element();
    let mut t = Triplets::with_capacity(n, n, mesh.num_elements() * npe * npe * k);
    for (e, el) in mesh.elements().enumerate() {
        let meas = mesh.element_measure(e);
        for a in 0..npe {
            for b in 0..npe {
                let v: f64 = q.iter().map(|(w, qw)| qw * w[a] * w[b]).sum::<f64>() * meas;
                for c in 0..k {
                    t.push(k * el[a] + c, k * el[b] + c, v);
                }
            }
        }
    }
    SparseSym::new(t.to_csc())
}

/// Load vector `f_j = ∫ load(x, component) φ_j dx` over all DOFs.
pub fn assemble_load<F>(mesh: &Mesh, dofs_per_node: usize, load: F) -> Vec<f64>
where
    F: Fn(Point, usize) -> f64,
{
    let k = dofs_per_node;
    let q = quadrature(mesh.dim());
    let mut f = vec![0.0; mesh.num_nodes() * k];
    for (e, el) in mesh.elements().enumerate() {
        let meas = mesh.element_measure(e);
        for (w, qw) in &q {
            let x = mesh.map_point(e, w);
            for c in 0..k {
                let val = load(x, c);
                if val == 0.0 {
                    continue;
                }
                for (a, &v) in el.iter().enumerate() {
                    f[k * v + c] += qw * meas * val * w[a];
                }
            }
        }
    }
    f
}

/// `(ΦᵀKΦ, ΦᵀMΦ, Φᵀf)`.
pub fn restrict_to_coarse(
    k: &SparseSym,
    m: &SparseSym,
    f: &[f64],
    phi: &CscMatrix,
) -> Result<(SparseSym, SparseSym, Vec<f64>)> {
    if phi.nrows() != k.dim() || phi.nrows() != m.dim() || phi.nrows() != f.len() {
        return invalid(format!(
            "prolongation has {} rows but K, M, f have sizes {}, {}, {}",
            phi.nrows(),
            k.dim(),
            m.dim(),
            f.len()
        ));
    }
    Ok((k.congruence(phi)?, m.congruence(phi)?, phi.tr_mul_vec(f)))
}

/// Interior-block system after eliminating Dirichlet DOFs.
///
/// `phi` is the interior block `Φ_ii` (fine interior × coarse interior);
/// `k_id` couples fine interior rows to fine Dirichlet columns.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub k: SparseSym,
    pub m: SparseSym,
    pub f: Vec<f64>,
    pub phi: CscMatrix,
    pub kc: SparseSym,
    pub g: Vec<f64>,
    pub k_id: CscMatrix,
    pub fine: DofPartition,
    pub coarse: DofPartition,
}

impl AssembledSystem {
    pub fn n_interior(&self) -> usize {
        self.fine.interior.len()
    }

    pub fn m_interior(&self) -> usize {
        self.coarse.interior.len()
    }

    /// `H = ΦᵀK`, the coarse-test / fine-trial stiffness block.
    pub fn h(&self) -> CscMatrix {
        self.phi.transpose().matmul(&self.k)
    }
}

/// Extracts interior blocks and forms `Kc`, `g` from them.
///
/// Fails if either interior set is empty or if a coarse interior function
/// has weight at a fine Dirichlet DOF (`Φ_di ≠ 0`).
pub fn eliminate_dirichlet(
    k: &SparseSym,
    m: &SparseSym,
    f: &[f64],
    phi: &CscMatrix,
    fine: DofPartition,
    coarse: DofPartition,
) -> Result<AssembledSystem> {
    if fine.interior.is_empty() || coarse.interior.is_empty() {
        return invalid("no interior degrees of freedom remain after elimination");
    }
    if phi.shape() != (fine.n_dofs, coarse.n_dofs) || k.dim() != fine.n_dofs {
        return invalid(format!(
            "prolongation shape {:?} does not match {} fine and {} coarse DOFs",
            phi.shape(),
            fine.n_dofs,
            coarse.n_dofs
        ));
    }
    let phi_di = phi.submatrix(&fine.dirichlet, &coarse.interior);
    if phi_di.max_abs() != 0.0 {
        return invalid("coarse interior functions do not vanish on the fine Dirichlet boundary");
    }
    let (ii, id) = (&fine.interior, &fine.dirichlet);
    let k_ii = SparseSym::new(k.submatrix(ii, ii))?;
    let m_ii = SparseSym::new(m.submatrix(ii, ii))?;
    let phi_ii = phi.submatrix(ii, &coarse.interior);
    let f_i: Vec<f64> = ii.iter().map(|&d| f[d]).collect();
    let kc = k_ii.congruence(&phi_ii)?;
    let g = phi_ii.tr_mul_vec(&f_i);
    Ok(AssembledSystem { k_id: k.submatrix(ii, id), k: k_ii, m: m_ii, f: f_i, phi: phi_ii, kc, g, fine, coarse })
}

/// Full pipeline: assemble on the fine mesh, expand `Φ`, eliminate the DOFs
/// on the named boundary tags of both meshes.
pub fn assemble_system<F, S>(
    hierarchy: &MeshHierarchy,
    op: &OperatorSpec,
    load: F,
    dirichlet_tags: &[S],
) -> Result<AssembledSystem>
where
    F: Fn(Point, usize) -> f64,
    S: AsRef<str>,
{
    let k = op.dofs_per_node();
    let fine = hierarchy.fine();
    let kk = assemble_stiffness(fine, op)?;
    let mm = assemble_mass(fine, k)?;
    let f = assemble_load(fine, k, load);
    let phi = hierarchy.prolongation_dofs(k);
    let fine_part = partition_dofs(fine, dirichlet_tags, k)?;
    let coarse_part = partition_dofs(hierarchy.coarse(), dirichlet_tags, k)?;
    eliminate_dirichlet(&kk, &mm, &f, &phi, fine_part, coarse_part).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::InvalidArgument(format!("Dirichlet elimination: {msg}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_interval_mesh;
    use std::collections::BTreeMap;

    fn unit_ea() -> OperatorSpec {
        OperatorSpec::Poisson1D { coefficient: Polynomial(vec![1.0]) }
    }

    #[test]
    fn two_element_bar() {
        let mesh = generate_interval_mesh(2, 0.0, 1.0).unwrap();
        let k = assemble_stiffness(&mesh, &unit_ea()).unwrap();
        assert!((k.get(1, 1) - 4.0).abs() < 1e-14);
        let m = assemble_mass(&mesh, 1).unwrap();
        assert!((m.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(0, 1) - 1.0 / 12.0).abs() < 1e-15);
        let f = assemble_load(&mesh, 1, |_, _| 1.0);
        assert!((f[1] - 0.5).abs() < 1e-15);
        assert_eq!(assemble_load(&mesh, 1, |_, _| 0.0), vec![0.0; 3]);
    }

    #[test]
    fn triangle_mass_pattern() {
        let mesh = Mesh::new(2, vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]], vec![vec![0, 1, 2]], BTreeMap::new())
            .unwrap();
        let m = assemble_mass(&mesh, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 / 12.0 } else { 1.0 / 12.0 };
                assert!((m.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coefficient_scaling_and_dimension_checks() {
        let mesh = generate_interval_mesh(5, 0.0, 1.0).unwrap();
        let a = assemble_stiffness(&mesh, &OperatorSpec::Poisson1D { coefficient: Polynomial(vec![0.3, 0.2]) })
            .unwrap();
        let b = assemble_stiffness(&mesh, &OperatorSpec::Poisson1D { coefficient: Polynomial(vec![0.9, 0.6]) })
            .unwrap();
        assert!(a.scaled(3.0).add_scaled(1.0, &b, -1.0).max_abs() < 1e-14);
        let plate = OperatorSpec::PlaneStress { youngs_modulus: 1.0, poisson_ratio: 0.3, thickness: 1.0 };
        assert!(assemble_stiffness(&mesh, &plate).is_err());
        let negative = OperatorSpec::Poisson1D { coefficient: Polynomial(vec![0.1, -0.2]) };
        assert!(assemble_stiffness(&mesh, &negative).is_err());
    }

    #[test]
    fn rigid_modes_in_plane_stress_kernel() {
        let mesh = Mesh::new(2, vec![[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]], vec![vec![0, 1, 2]], BTreeMap::new())
            .unwrap();
        let op = OperatorSpec::PlaneStress { youngs_modulus: 3.0, poisson_ratio: 0.2, thickness: 1.0 };
        let k = assemble_stiffness(&mesh, &op).unwrap();
        let mut modes = vec![vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]];
        // infinitesimal rotation u = (-y, x)
        modes.push(mesh.nodes().iter().flat_map(|p| [-p[1], p[0]]).collect());
        for mode in modes {
            assert!(k.mul_vec(&mode).iter().all(|v| v.abs() < 1e-13));
        }
    }
}
