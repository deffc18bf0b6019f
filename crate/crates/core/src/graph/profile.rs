use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{Graph, NodeId};

/// Relative slack for true-parent membership: `j ∈ P(i)` iff
/// `x_j + w_ij <= min * (1 + PARENT_TOLERANCE)`.
pub const PARENT_TOLERANCE: f64 = 1e-9;

/// Shortest-path fixed point of the protocol and the structure derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    /// Distance of each node to its nearest source.
    pub distances: Vec<f64>,
    /// Neighbours attaining the Bellman minimum; empty for sources.
    pub true_parents: Vec<Vec<NodeId>>,
    /// Longest-chain depth in the true-parent DAG (sources have depth 0).
    pub depth: Vec<usize>,
    /// `layers[l]` holds the nodes of depth `l`.
    pub layers: Vec<Vec<NodeId>>,
    /// Node count of the longest true-parent chain, i.e. `1 + max depth`.
    pub effective_diameter: usize,
    /// Tight bound on `x_i / (x_l + w_il)` over non-parent neighbours `l`.
    pub zeta: f64,
    /// No non-source node has a non-parent neighbour; `zeta` is then 0.
    pub zeta_unconstrained: bool,
    /// The `(i, l)` pair attaining `zeta`, if any.
    pub zeta_witness: Option<(NodeId, NodeId)>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: NodeId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn multi_source_dijkstra(g: &Graph) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut heap = BinaryHeap::new();
    for &s in g.sources() {
        dist[s] = 0.0;
        heap.push(Entry { dist: 0.0, node: s });
    }
    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for arc in g.neighbors(u) {
            let cand = d + arc.weight;
            if cand < dist[arc.to] {
                dist[arc.to] = cand;
                heap.push(Entry { dist: cand, node: arc.to });
            }
        }
    }
    dist
}

pub fn stationary_profile(g: &Graph) -> StationaryProfile {
    let n = g.node_count();
    let distances = multi_source_dijkstra(g);

    let mut true_parents = vec![Vec::new(); n];
    for i in (0..n).filter(|&i| !g.is_source(i)) {
        let best = g
            .neighbors(i)
            .iter()
            .map(|a| distances[a.to] + a.weight)
            .fold(f64::INFINITY, f64::min);
        let cutoff = best * (1.0 + PARENT_TOLERANCE);
        true_parents[i] = g
            .neighbors(i)
            .iter()
            .filter(|a| distances[a.to] + a.weight <= cutoff)
            .map(|a| a.to)
            .collect();
        true_parents[i].sort_unstable();
    }

    // Parents are strictly closer to the source set, so visiting nodes by
    // increasing distance finalises every parent before its children.
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut depth = vec![0usize; n];
    for &i in &order {
        depth[i] = true_parents[i]
            .iter()
            .map(|&p| depth[p] + 1)
            .max()
            .unwrap_or(0);
    }
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); max_depth + 1];
    for i in 0..n {
        layers[depth[i]].push(i);
    }

    let mut zeta = 0.0;
    let mut zeta_witness = None;
    let mut constrained = false;
    for i in (0..n).filter(|&i| !g.is_source(i)) {
        for arc in g.neighbors(i) {
            if true_parents[i].binary_search(&arc.to).is_ok() {
                continue;
            }
            constrained = true;
            let ratio = distances[i] / (distances[arc.to] + arc.weight);
            if zeta_witness.is_none() || ratio > zeta {
                zeta = ratio;
                zeta_witness = Some((i, arc.to));
            }
        }
    }

    StationaryProfile {
        distances,
        true_parents,
        depth,
        layers,
        effective_diameter: max_depth + 1,
        zeta,
        zeta_unconstrained: !constrained,
        zeta_witness,
    }
}

impl StationaryProfile {
    /// Largest `|x_i - min_j (x_j + w_ij)|` over non-sources, relative to `max(1, x_i)`.
    pub fn bellman_residual(&self, g: &Graph) -> f64 {
        (0..g.node_count())
            .map(|i| {
                if g.is_source(i) {
                    return self.distances[i].abs();
                }
                let best = g
                    .neighbors(i)
                    .iter()
                    .map(|a| self.distances[a.to] + a.weight)
                    .fold(f64::INFINITY, f64::min);
                (self.distances[i] - best).abs() / self.distances[i].max(1.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn layer_of(&self, i: NodeId) -> usize {
        self.depth[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{line, LineSource};

    #[test]
    fn nine_node_quantities() {
        let g = fixtures::nine_node();
        let p = stationary_profile(&g);
        let node = |label: usize| label - 1;
        assert_eq!(p.distances[node(4)], 2.0);
        assert_eq!(p.true_parents[node(4)], vec![node(2), node(3)]);
        assert_eq!(p.effective_diameter, 3);
        assert!(p.layers[2].contains(&node(6)));
        assert!(!p.layers[1].contains(&node(6)));
        assert_eq!(p.true_parents[node(6)], vec![node(8), node(9)]);
        assert_eq!(p.true_parents[node(8)], vec![node(9)]);
        let x = &p.distances;
        assert_eq!(x[node(8)] / (x[node(6)] + 1.0), 1.0 / 3.0);
        assert_eq!(x[node(8)] / (x[node(7)] + 1.0), 1.0 / 3.0);
        assert_eq!(p.zeta, 1.0 / 3.0);
        assert!(!p.zeta_unconstrained);
    }

    #[test]
    fn line_distances_and_diameter() {
        let g = line(50, LineSource::Rightmost).unwrap();
        let p = stationary_profile(&g);
        for i in 0..50 {
            // node label i + 1 sits 50 - (i + 1) hops from the source
            assert_eq!(p.distances[i], (49 - i) as f64);
        }
        assert_eq!(p.effective_diameter, 50);
        assert_eq!(stationary_profile(&line(100, LineSource::Rightmost).unwrap()).effective_diameter, 100);
    }

    #[test]
    fn two_node_graph_is_unconstrained() {
        let p = stationary_profile(&fixtures::two_node(1.0));
        assert_eq!(p.zeta, 0.0);
        assert!(p.zeta_unconstrained);
        assert_eq!(p.effective_diameter, 2);
        assert_eq!(p.layers, vec![vec![0], vec![1]]);
    }
}
