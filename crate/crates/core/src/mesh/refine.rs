use std::collections::{BTreeSet, HashMap};

use super::{Mesh, Point};
use crate::error::{invalid, Result};
use crate::sparse::{CscMatrix, Triplets};

/// A coarse mesh, its hierarchical refinement and the prolongation `Φ`.
///
/// `Φ` is `n_fine × n_coarse` over all nodes (scalar DOFs) and satisfies
/// `Φ[j, i] = ψ_i(x_j)`: column `i` holds the coarse hat function `i`
/// sampled at the fine nodes. Coarse node `k` is fine node `k`.
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    coarse: Mesh,
    fine: Mesh,
    prolongation: CscMatrix,
    parent: Vec<usize>,
}

impl MeshHierarchy {
    /// The trivial hierarchy (`fine == coarse`, `Φ = I`).
    pub fn identity(mesh: Mesh) -> Self {
        let n = mesh.num_nodes();
        let parent = (0..mesh.num_elements()).collect();
        Self { coarse: mesh.clone(), fine: mesh, prolongation: CscMatrix::identity(n), parent }
    }

    pub fn coarse(&self) -> &Mesh {
        &self.coarse
    }

    pub fn fine(&self) -> &Mesh {
        &self.fine
    }

    /// Scalar prolongation over all nodes.
    pub fn prolongation(&self) -> &CscMatrix {
        &self.prolongation
    }

    /// Prolongation expanded to `dofs_per_node` interleaved components.
    pub fn prolongation_dofs(&self, dofs_per_node: usize) -> CscMatrix {
        self.prolongation.expand_blocks(dofs_per_node)
    }

    /// Coarse parent element of every fine element.
    pub fn parent(&self) -> &[usize] {
        &self.parent
    }
}

// A mesh whose elements remember their coarse ancestor and the barycentric
// weights of their vertices with respect to that ancestor.
struct Tracked {
    mesh: Mesh,
    ancestor: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl Tracked {
    fn start(mesh: &Mesh) -> Self {
        let per = mesh.nodes_per_element();
        let mut weights = Vec::with_capacity(mesh.num_elements() * per);
        for _ in 0..mesh.num_elements() {
            for k in 0..per {
                let mut w = vec![0.0; per];
                w[k] = 1.0;
                weights.push(w);
            }
        }
        Self { mesh: mesh.clone(), ancestor: (0..mesh.num_elements()).collect(), weights }
    }

    fn w(&self, e: usize, k: usize) -> &[f64] {
        &self.weights[e * self.mesh.nodes_per_element() + k]
    }
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn average(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

// One 1:2 (interval) or 1:4 (triangle) split. New nodes are appended in
// (element, local edge) order; edges are deduplicated by node pair.
fn split(t: &Tracked) -> Tracked {
    let mesh = &t.mesh;
    let mut nodes = mesh.nodes().to_vec();
    let mut cells = Vec::new();
    let mut ancestor = Vec::new();
    let mut weights = Vec::new();
    let mut tags = mesh.boundary_tags().clone();

    if mesh.dim() == 1 {
        for (e, el) in mesh.elements().enumerate() {
            let (a, b) = (el[0], el[1]);
            let m = nodes.len();
            nodes.push(midpoint(mesh.node(a), mesh.node(b)));
            let wm = average(t.w(e, 0), t.w(e, 1));
            cells.extend_from_slice(&[a, m, m, b]);
            ancestor.extend_from_slice(&[t.ancestor[e]; 2]);
            weights.extend([t.w(e, 0).to_vec(), wm.clone(), wm, t.w(e, 1).to_vec()]);
        }
        let fine = Mesh::from_parts_unchecked(1, nodes, cells, tags);
        return Tracked { mesh: fine, ancestor, weights };
    }

    let boundary: BTreeSet<(usize, usize)> = mesh.boundary_edges().into_iter().collect();
    let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
    let mut new_tagged: Vec<(String, usize)> = Vec::new();
    for (e, el) in mesh.elements().enumerate() {
        let mut mids = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (el[k], el[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            mids[k] = *edge_node.entry(key).or_insert_with(|| {
                let m = nodes.len();
                nodes.push(midpoint(mesh.node(a), mesh.node(b)));
                if boundary.contains(&key) {
                    for (name, set) in mesh.boundary_tags() {
                        if set.contains(&a) && set.contains(&b) {
                            new_tagged.push((name.clone(), m));
                        }
                    }
                }
                m
            });
        }
        let [v0, v1, v2] = [el[0], el[1], el[2]];
        let [m01, m12, m20] = mids;
        let w = |k: usize| t.w(e, k).to_vec();
        let (w01, w12, w20) = (average(t.w(e, 0), t.w(e, 1)), average(t.w(e, 1), t.w(e, 2)), average(t.w(e, 2), t.w(e, 0)));
        let children = [
            ([v0, m01, m20], [w(0), w01.clone(), w20.clone()]),
            ([m01, v1, m12], [w01.clone(), w(1), w12.clone()]),
            ([m20, m12, v2], [w20.clone(), w12.clone(), w(2)]),
            ([m01, m12, m20], [w01, w12, w20]),
        ];
        for (c, cw) in children {
            cells.extend_from_slice(&c);
            ancestor.push(t.ancestor[e]);
            weights.extend(cw);
        }
    }
    for (name, m) in new_tagged {
        tags.get_mut(&name).expect("tag exists").insert(m);
    }
    let fine = Mesh::from_parts_unchecked(2, nodes, cells, tags);
    Tracked { mesh: fine, ancestor, weights }
}

fn finish(coarse: &Mesh, t: Tracked) -> MeshHierarchy {
    let fine = t.mesh;
    let per = fine.nodes_per_element();
    let mut filled = vec![false; fine.num_nodes()];
    let mut trip = Triplets::new(fine.num_nodes(), coarse.num_nodes());
    for (e, el) in fine.elements().enumerate() {
        let coarse_el = coarse.element(t.ancestor[e]);
        for (k, &v) in el.iter().enumerate() {
            if filled[v] {
                continue;
            }
            filled[v] = true;
            for (j, &w) in t.weights[e * per + k].iter().enumerate() {
                if w != 0.0 {
                    trip.push(v, coarse_el[j], w);
                }
            }
        }
    }
    MeshHierarchy { coarse: coarse.clone(), fine, prolongation: trip.to_csc(), parent: t.ancestor }
}

/// Refines `coarse` `levels` times (1:2 intervals, 1:4 triangles).
pub fn refine_hierarchical(coarse: &Mesh, levels: usize) -> Result<MeshHierarchy> {
    if levels == 0 {
        return invalid("refinement needs at least one level");
    }
    let mut t = Tracked::start(coarse);
    for _ in 0..levels {
        t = split(&t);
    }
    Ok(finish(coarse, t))
}

/// Splits every interval element into `factor` equal pieces in one step.
///
/// New nodes are appended element by element, left to right.
pub fn subdivide_interval(coarse: &Mesh, factor: usize) -> Result<MeshHierarchy> {
    if coarse.dim() != 1 {
        return Err(crate::Error::UnsupportedElement(
            "interval subdivision needs a 1D mesh".to_string(),
        ));
    }
    if factor == 0 {
        return invalid("subdivision factor must be positive");
    }
    if factor == 1 {
        return Ok(MeshHierarchy::identity(coarse.clone()));
    }
    let mut nodes = coarse.nodes().to_vec();
    let mut cells = Vec::new();
    let mut ancestor = Vec::new();
    let mut weights = Vec::new();
    for (e, el) in coarse.elements().enumerate() {
        let (a, b) = (coarse.node(el[0])[0], coarse.node(el[1])[0]);
        let mut prev = el[0];
        let mut prev_w = vec![1.0, 0.0];
        for k in 1..=factor {
            let (idx, w) = if k == factor {
                (el[1], vec![0.0, 1.0])
            } else {
                let s = k as f64 / factor as f64;
                nodes.push([a + s * (b - a), 0.0]);
                (nodes.len() - 1, vec![1.0 - s, s])
            };
            cells.extend_from_slice(&[prev, idx]);
            ancestor.push(e);
            weights.push(prev_w);
            weights.push(w.clone());
            prev = idx;
            prev_w = w;
        }
    }
    let fine = Mesh::from_parts_unchecked(1, nodes, cells, coarse.boundary_tags().clone());
    Ok(finish(coarse, Tracked { mesh: fine, ancestor, weights }))
}
