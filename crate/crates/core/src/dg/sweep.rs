//! Element orderings for the transport sweep of one direction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::angular::Direction;
use crate::mesh::SimplicialMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Ascending centroid projection `c_K . Omega`, ties by element index.
    Centroid,
    /// Dependency-respecting topological order; cycles are broken at the
    /// element with the smallest centroid projection.
    Topological,
}

/// Ordering plus the number of upwind dependencies it fails to respect.
#[derive(Debug, Clone)]
pub struct SweepOrder {
    pub order: Vec<usize>,
    pub violations: usize,
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // Reversed so that BinaryHeap pops the smallest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

fn projections(mesh: &SimplicialMesh, dir: &Direction) -> Vec<f64> {
    (0..mesh.n_elements())
        .map(|k| dir.dot(mesh.centroid(k)))
        .collect()
}

/// Upwind neighbours of `k`: elements across faces with `Omega . n < 0`.
fn upwind<'a>(
    mesh: &'a SimplicialMesh,
    dir: &Direction,
    k: usize,
) -> impl Iterator<Item = usize> + 'a {
    let dir = *dir;
    (0..=mesh.dim).filter_map(move |f| {
        let nb = mesh.neighbor(k, f)?;
        (dir.dot(mesh.face_normal(k, f).0) < 0.0).then_some(nb.element)
    })
}

pub fn sweep_order(mesh: &SimplicialMesh, dir: &Direction, kind: SweepKind) -> SweepOrder {
    let proj = projections(mesh, dir);
    let n = mesh.n_elements();
    let order = match kind {
        SweepKind::Centroid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
            order
        }
        SweepKind::Topological => {
            let mut indeg = vec![0usize; n];
            let mut downwind: Vec<Vec<usize>> = vec![Vec::new(); n];
            for k in 0..n {
                for u in upwind(mesh, dir, k) {
                    indeg[k] += 1;
                    downwind[u].push(k);
                }
            }
            let mut heap: BinaryHeap<Key> = (0..n)
                .filter(|&k| indeg[k] == 0)
                .map(|k| Key(proj[k], k))
                .collect();
            let mut done = vec![false; n];
            let mut order = Vec::with_capacity(n);
            // Remaining elements sorted by projection, for cycle breaking.
            let mut fallback: Vec<usize> = (0..n).collect();
            fallback.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
            let mut fb = 0;
            while order.len() < n {
                let k = match heap.pop() {
                    Some(Key(_, k)) if !done[k] => k,
                    Some(_) => continue,
                    None => {
                        while done[fallback[fb]] {
                            fb += 1;
                        }
                        fallback[fb]
                    }
                };
                done[k] = true;
                order.push(k);
                for &d in &downwind[k] {
                    if indeg[d] > 0 {
                        indeg[d] -= 1;
                        if indeg[d] == 0 && !done[d] {
                            heap.push(Key(proj[d], d));
                        }
                    }
                }
            }
            order
        }
    };
    let violations = count_violations(mesh, dir, &order);
    SweepOrder { order, violations }
}

/// Number of (element, upwind neighbour) pairs where the neighbour comes
/// later in `order`.
pub fn count_violations(mesh: &SimplicialMesh, dir: &Direction, order: &[usize]) -> usize {
    let mut pos = vec![0usize; order.len()];
    for (i, &k) in order.iter().enumerate() {
        pos[k] = i;
    }
    (0..mesh.n_elements())
        .map(|k| upwind(mesh, dir, k).filter(|&u| pos[u] > pos[k]).count())
        .sum()
}
