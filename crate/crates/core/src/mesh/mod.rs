//! Meshes, hierarchical refinement and the coarse-to-fine prolongation.

mod msh;
mod refine;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{invalid, Result};

pub use msh::{parse_mesh_file, parse_mesh_file_with_stats, write_mesh_file, MshStats};
pub use refine::{refine_hierarchical, subdivide_interval, MeshHierarchy};

/// Node coordinates; the second component is zero for interval meshes.
pub type Point = [f64; 2];

/// A conforming mesh of 2-node segments (dim 1) or 3-node triangles (dim 2).
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Point>,
    // flat connectivity, `dim + 1` nodes per element
    cells: Vec<usize>,
    boundary_tags: BTreeMap<String, BTreeSet<usize>>,
}

impl Mesh {
    /// Validates and builds a mesh. Triangles must be counterclockwise.
    pub fn new(
        dim: usize,
        nodes: Vec<Point>,
        elements: Vec<Vec<usize>>,
        boundary_tags: BTreeMap<String, BTreeSet<usize>>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return invalid(format!("mesh dimension {dim} is not 1 or 2"));
        }
        let per = dim + 1;
        let mut cells = Vec::with_capacity(elements.len() * per);
        for (e, el) in elements.iter().enumerate() {
            if el.len() != per {
                return invalid(format!("element {e} has {} nodes, expected {per}", el.len()));
            }
            cells.extend_from_slice(el);
        }
        let mesh = Self { dim, nodes, cells, boundary_tags };
        mesh.validate()?;
        Ok(mesh)
    }

    pub(crate) fn from_parts_unchecked(
        dim: usize,
        nodes: Vec<Point>,
        cells: Vec<usize>,
        boundary_tags: BTreeMap<String, BTreeSet<usize>>,
    ) -> Self {
        Self { dim, nodes, cells, boundary_tags }
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for e in 0..self.num_elements() {
            let el = self.element(e);
            if let Some(&bad) = el.iter().find(|&&v| v >= n) {
                return invalid(format!("element {e} references node {bad} of {n}"));
            }
            for i in 0..el.len() {
                if el[i + 1..].contains(&el[i]) {
                    return invalid(format!("element {e} repeats node {}", el[i]));
                }
            }
            let size = self.element_measure_signed(e);
            if !(size > 0.0) {
                return invalid(format!("element {e} has non-positive measure {size:e}"));
            }
        }
        for (name, set) in &self.boundary_tags {
            if let Some(&bad) = set.iter().find(|&&v| v >= n) {
                return invalid(format!("boundary tag '{name}' references node {bad} of {n}"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let per = self.dim + 1;
        &self.cells[e * per..(e + 1) * per]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks_exact(self.dim + 1)
    }

    pub fn boundary_tags(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.boundary_tags
    }

    pub fn tag(&self, name: &str) -> Option<&BTreeSet<usize>> {
        self.boundary_tags.get(name)
    }

    /// Length (dim 1) or signed area (dim 2) of element `e`.
    pub fn element_measure_signed(&self, e: usize) -> f64 {
        let el = self.element(e);
        match self.dim {
            1 => self.nodes[el[1]][0] - self.nodes[el[0]][0],
            _ => {
                let [a, b, c] = [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]];
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            }
        }
    }

    pub fn element_measure(&self, e: usize) -> f64 {
        self.element_measure_signed(e).abs()
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_measure(e)).sum()
    }

    /// Values of the element's shape functions at `x` (barycentric
    /// coordinates). Entries lie in `[0, 1]` iff `x` is inside the element.
    pub fn shape_values(&self, e: usize, x: Point) -> Vec<f64> {
        let el = self.element(e);
        match self.dim {
            1 => {
                let (a, b) = (self.nodes[el[0]][0], self.nodes[el[1]][0]);
                let t = (x[0] - a) / (b - a);
                vec![1.0 - t, t]
            }
            _ => {
                let [a, b, c] = [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]];
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
                let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
                vec![1.0 - l1 - l2, l1, l2]
            }
        }
    }

    /// Maps reference coordinates (barycentric weights) to a physical point.
    pub fn map_point(&self, e: usize, weights: &[f64]) -> Point {
        let mut p = [0.0; 2];
        for (&v, &w) in self.element(e).iter().zip(weights) {
            p[0] += w * self.nodes[v][0];
            p[1] += w * self.nodes[v][1];
        }
        p
    }

    /// Node pairs that belong to exactly one element (dim 2) or the two end
    /// nodes (dim 1, returned as degenerate pairs).
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        if self.dim == 1 {
            let mut count = vec![0usize; self.num_nodes()];
            for el in self.elements() {
                count[el[0]] += 1;
                count[el[1]] += 1;
            }
            return (0..self.num_nodes()).filter(|&i| count[i] == 1).map(|i| (i, i)).collect();
        }
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for el in self.elements() {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                *seen.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        seen.into_iter().filter(|&(_, c)| c == 1).map(|(e, _)| e).collect()
    }
}

/// Builds a uniform interval mesh on `[a, b]` with tags `left` and `right`.
pub fn generate_interval_mesh(n_elems: usize, a: f64, b: f64) -> Result<Mesh> {
    if n_elems == 0 {
        return invalid("interval mesh needs at least one element");
    }
    if !(a < b) {
        return invalid(format!("interval [{a}, {b}] is empty"));
    }
    let h = (b - a) / n_elems as f64;
    let mut nodes: Vec<Point> = (0..=n_elems).map(|k| [a + k as f64 * h, 0.0]).collect();
    // pin the right end exactly
    nodes[n_elems][0] = b;
    let cells = (0..n_elems).flat_map(|k| [k, k + 1]).collect();
    let mut tags = BTreeMap::new();
    tags.insert("left".to_string(), BTreeSet::from([0]));
    tags.insert("right".to_string(), BTreeSet::from([n_elems]));
    Ok(Mesh::from_parts_unchecked(1, nodes, cells, tags))
}

/// Interior / Dirichlet split of the scalar degrees of freedom.
///
/// DOF numbering is interleaved: node `v` owns DOFs `k v .. k v + k - 1` for
/// `k` DOFs per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofPartition {
    pub n_dofs: usize,
    pub dofs_per_node: usize,
    pub interior: Vec<usize>,
    pub dirichlet: Vec<usize>,
}

impl DofPartition {
    /// Position of each DOF within the interior list (`None` for Dirichlet).
    pub fn interior_position(&self) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.n_dofs];
        for (k, &d) in self.interior.iter().enumerate() {
            pos[d] = Some(k);
        }
        pos
    }

    /// Scatters an interior vector into a full DOF vector (Dirichlet entries
    /// set to `fill`).
    pub fn scatter(&self, interior: &[f64], fill: f64) -> Vec<f64> {
        assert_eq!(interior.len(), self.interior.len());
        let mut out = vec![fill; self.n_dofs];
        for (&d, &v) in self.interior.iter().zip(interior) {
            out[d] = v;
        }
        out
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&d| full[d]).collect()
    }
}

pub fn partition_dofs<S: AsRef<str>>(
    mesh: &Mesh,
    dirichlet_tags: &[S],
    dofs_per_node: usize,
) -> Result<DofPartition> {
    if dofs_per_node == 0 || dofs_per_node > 2 {
        return invalid(format!("{dofs_per_node} DOFs per node is not supported"));
    }
    let mut fixed = vec![false; mesh.num_nodes()];
    for tag in dirichlet_tags {
        let tag = tag.as_ref();
        let set = mesh
            .tag(tag)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown boundary tag '{tag}'")))?;
        for &v in set {
            fixed[v] = true;
        }
    }
    let n_dofs = mesh.num_nodes() * dofs_per_node;
    let (mut interior, mut dirichlet) = (Vec::new(), Vec::new());
    for dof in 0..n_dofs {
        if fixed[dof / dofs_per_node] {
            dirichlet.push(dof);
        } else {
            interior.push(dof);
        }
    }
    Ok(DofPartition { n_dofs, dofs_per_node, interior, dirichlet })
}
