use std::collections::VecDeque;

use super::CscMatrix;

/// Reverse Cuthill–McKee ordering of the (symmetric) pattern of `a`.
///
/// Returns `perm` with `perm[new] = old`. Each connected component is started
/// from a pseudo-peripheral node of minimum degree; neighbours are visited in
/// order of increasing degree, ties by index. The result is deterministic.
pub fn reverse_cuthill_mckee(a: &CscMatrix) -> Vec<usize> {
    let n = a.ncols();
    assert_eq!(a.nrows(), n, "ordering needs a square matrix");
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|j| a.col(j).0.iter().copied().filter(|&i| i != j).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();

    loop {
        let seed = match (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)) {
            Some(s) => pseudo_peripheral(s, &adj, &degree, &visited),
            None => break,
        };
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

// George–Liu: repeat BFS from the farthest minimum-degree node while the
// eccentricity grows.
fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], degree: &[usize], blocked: &[bool]) -> usize {
    let mut root = start;
    let (mut ecc, mut last) = bfs_levels(root, adj, blocked);
    loop {
        let cand = last.iter().copied().min_by_key(|&i| (degree[i], i)).unwrap_or(root);
        let (e, l) = bfs_levels(cand, adj, blocked);
        if e > ecc {
            root = cand;
            ecc = e;
            last = l;
        } else {
            return root;
        }
    }
}

fn bfs_levels(root: usize, adj: &[Vec<usize>], blocked: &[bool]) -> (usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !blocked[w] && level[w] == usize::MAX {
                    level[w] = depth + 1;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandwidth(a: &CscMatrix, perm: &[usize]) -> usize {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        a.triplets().map(|(i, j, _)| inv[i].abs_diff(inv[j])).max().unwrap_or(0)
    }

    fn shuffled_path(n: usize) -> CscMatrix {
        // path graph with scrambled labels
        let label: Vec<usize> = (0..n).map(|k| (k * 7) % n).collect();
        let mut e = Vec::new();
        for k in 0..n {
            e.push((label[k], label[k], 2.0));
            if k + 1 < n {
                e.push((label[k], label[k + 1], -1.0));
                e.push((label[k + 1], label[k], -1.0));
            }
        }
        CscMatrix::from_triplets(n, n, &e)
    }

    #[test]
    fn recovers_banded_order_of_a_path() {
        let a = shuffled_path(20);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        assert_eq!(bandwidth(&a, &perm), 1);
        assert!(bandwidth(&a, &(0..20).collect::<Vec<_>>()) > 1);
    }

    #[test]
    fn handles_disconnected_components() {
        let a = CscMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0), (0, 3, 1.0), (3, 0, 1.0)],
        );
        let perm = reverse_cuthill_mckee(&a);
        assert_eq!(perm.len(), 4);
        assert_eq!(bandwidth(&a, &perm), 1);
    }
}
