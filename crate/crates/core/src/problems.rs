//! The two benchmark problems: a tapered bar under a constant load and a
//! perforated plate under a constant horizontal body load.

use crate::assembly::{assemble_system, AssembledSystem, OperatorSpec, Polynomial};
use crate::error::{invalid, Result};
use crate::mesh::{generate_interval_mesh, parse_mesh_file, refine_hierarchical, subdivide_interval, Mesh, MeshHierarchy};

/// Coarse plate mesh: a 4 × 2 rectangle with a hole of radius 0.8 centred at
/// (2, 1). Boundary tags: `left`, `right`, `bottom`, `top`, `hole`.
pub const PLATE_MESH: &str = include_str!("../../../assets/plate.msh");

pub const PLATE_LENGTH: f64 = 4.0;
pub const PLATE_HEIGHT: f64 = 2.0;
pub const HOLE_CENTER: [f64; 2] = [2.0, 1.0];
pub const HOLE_RADIUS: f64 = 0.8;

/// `EA(x) = 0.1 - 0.099 x`
pub fn bar_coefficient() -> Polynomial {
    Polynomial(vec![0.1, -0.099])
}

pub fn bar_operator() -> OperatorSpec {
    OperatorSpec::Poisson1D { coefficient: bar_coefficient() }
}

/// Uniform `m`-element coarse mesh on (0, 1) with each element split into
/// `n / m` fine elements.
pub fn bar_hierarchy(n: usize, m: usize) -> Result<MeshHierarchy> {
    if m == 0 || n % m != 0 {
        return invalid(format!("fine size {n} is not a multiple of coarse size {m}"));
    }
    let coarse = generate_interval_mesh(m, 0.0, 1.0)?;
    subdivide_interval(&coarse, n / m)
}

/// Bar with `EA(x) = 0.1 - 0.099 x`, unit load and both ends clamped.
pub fn bar_system(n: usize, m: usize) -> Result<AssembledSystem> {
    let h = bar_hierarchy(n, m)?;
    assemble_system(&h, &bar_operator(), |_, _| 1.0, &["left", "right"])
}

pub fn plate_coarse_mesh() -> Mesh {
    parse_mesh_file(PLATE_MESH).expect("bundled plate mesh is valid")
}

pub fn plate_operator() -> OperatorSpec {
    OperatorSpec::PlaneStress { youngs_modulus: 3.0, poisson_ratio: 0.2, thickness: 1.0 }
}

pub fn plate_hierarchy() -> MeshHierarchy {
    refine_hierarchical(&plate_coarse_mesh(), 1).expect("one refinement level")
}

/// Plate clamped on its left edge under the body load `(1, 0)`.
pub fn plate_system() -> Result<AssembledSystem> {
    plate_system_on(&plate_hierarchy())
}

pub fn plate_system_on(h: &MeshHierarchy) -> Result<AssembledSystem> {
    assemble_system(h, &plate_operator(), |_, c| if c == 0 { 1.0 } else { 0.0 }, &["left"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_sizes() {
        let s = bar_system(64, 4).unwrap();
        assert_eq!(s.n_interior(), 63);
        assert_eq!(s.m_interior(), 3);
        assert!(bar_hierarchy(64, 5).is_err());
        let same = bar_system(64, 64).unwrap();
        assert_eq!(same.m_interior(), 63);
    }

    #[test]
    fn plate_mesh_geometry() {
        let mesh = plate_coarse_mesh();
        let hole = std::f64::consts::PI * HOLE_RADIUS * HOLE_RADIUS;
        // polygonal hole boundary makes the area slightly larger
        let area = mesh.total_measure();
        let exact = PLATE_LENGTH * PLATE_HEIGHT - hole;
        assert!(area > exact && area < exact + 0.01, "area {area}");
        for name in ["left", "right", "bottom", "top", "hole"] {
            assert!(mesh.tag(name).is_some_and(|s| !s.is_empty()), "{name}");
        }
    }
}
