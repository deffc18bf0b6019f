//! Undirected weighted graphs with a designated source set.
//!
//! Node ids are 0-based everywhere inside the crate. The on-disk format and
//! the command line use 1-based ids; conversion happens at the boundary
//! ([`Graph::from_one_based`] and the `io` module).

mod generate;
mod io;
mod profile;

pub use generate::{line, LineSource, RandomGeometric, DESK_FIELD_HEIGHT_KM, DESK_FIELD_WIDTH_KM};
pub use io::{read_graph_file, GraphFile};
pub use profile::{stationary_profile, StationaryProfile, PARENT_TOLERANCE};

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has {components} connected components; a single component is required")]
    DisconnectedGraph { components: usize },
    #[error("edge ({0}, {1}) has non-positive or non-finite weight {2}")]
    NonPositiveWeight(NodeId, NodeId, f64),
    #[error("bad source set: {0}")]
    BadSourceSet(String),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("no connected placement after {attempts} attempts starting at seed {seed}")]
    ConnectivityFailure { attempts: u32, seed: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph file: {0}")]
    Io(#[from] std::io::Error),
    #[error("graph file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A directed view of an undirected edge, as seen from its tail node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub to: NodeId,
    pub weight: f64,
    /// Dense index over all 2|E| directed arcs; keys per-direction weight models.
    pub id: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(NodeId, NodeId, f64)>,
    adj: Vec<Vec<Arc>>,
    sources: Vec<NodeId>,
    is_source: Vec<bool>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Graph {
    /// Builds and validates a graph from 0-based edges and sources.
    pub fn new(
        n: usize,
        edges: &[(NodeId, NodeId, f64)],
        sources: &[NodeId],
        positions: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidParameter(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        if let Some(p) = &positions {
            if p.len() != n {
                return Err(GraphError::InvalidParameter(format!(
                    "{} positions for {n} nodes",
                    p.len()
                )));
            }
        }

        let mut seen = BTreeSet::new();
        let mut canonical = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            for node in [i, j] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::NonPositiveWeight(i, j, w));
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            canonical.push((key.0, key.1, w));
        }

        let source_set: BTreeSet<NodeId> = sources.iter().copied().collect();
        if source_set.len() != sources.len() {
            return Err(GraphError::BadSourceSet("repeated source".into()));
        }
        if source_set.is_empty() || source_set.len() >= n {
            return Err(GraphError::BadSourceSet(format!(
                "need 1 <= |S| < n, got |S| = {} with n = {n}",
                source_set.len()
            )));
        }
        if let Some(&s) = source_set.iter().find(|&&s| s >= n) {
            return Err(GraphError::NodeOutOfRange { node: s, n });
        }

        let mut adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in &canonical {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut next_id = 0;
        let adj: Vec<Vec<Arc>> = adj
            .into_iter()
            .map(|list| {
                list.into_iter()
                    .map(|(to, weight)| {
                        let arc = Arc { to, weight, id: next_id };
                        next_id += 1;
                        arc
                    })
                    .collect()
            })
            .collect();

        let mut is_source = vec![false; n];
        for &s in &source_set {
            is_source[s] = true;
        }

        let graph = Graph {
            n,
            edges: canonical,
            adj,
            sources: source_set.into_iter().collect(),
            is_source,
            positions,
        };
        let components = graph.component_count();
        if components != 1 {
            return Err(GraphError::DisconnectedGraph { components });
        }
        Ok(graph)
    }

    /// Same as [`Graph::new`] with 1-based node ids, as used in files and on the CLI.
    pub fn from_one_based(
        n: usize,
        edges: &[(usize, usize, f64)],
        sources: &[usize],
        positions: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, GraphError> {
        let shift = |v: usize| {
            v.checked_sub(1)
                .ok_or(GraphError::NodeOutOfRange { node: 0, n })
        };
        let edges = edges
            .iter()
            .map(|&(i, j, w)| Ok((shift(i)?, shift(j)?, w)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        let sources = sources
            .iter()
            .map(|&s| shift(s))
            .collect::<Result<Vec<_>, _>>()?;
        Graph::new(n, &edges, &sources, positions)
    }

    /// A copy of this graph with a different source set.
    pub fn with_sources(&self, sources: &[NodeId]) -> Result<Self, GraphError> {
        Graph::new(self.n, &self.edges, sources, self.positions.clone())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn arc_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Undirected edges as `(i, j, w)` with `i < j`, in insertion order.
    pub fn edges(&self) -> &[(NodeId, NodeId, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, i: NodeId) -> &[Arc] {
        &self.adj[i]
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn is_source(&self, i: NodeId) -> bool {
        self.is_source[i]
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    pub fn weight(&self, i: NodeId, j: NodeId) -> Option<f64> {
        self.adj[i].iter().find(|a| a.to == j).map(|a| a.weight)
    }

    pub fn min_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for arc in &self.adj[u] {
                    if !seen[arc.to] {
                        seen[arc.to] = true;
                        queue.push_back(arc.to);
                    }
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_legal_instance() {
        let g = Graph::from_one_based(2, &[(1, 2, 1.0)], &[1], None).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.sources(), &[0]);
        assert_eq!(g.weight(1, 0), Some(1.0));
    }

    #[test]
    fn isolated_node_is_rejected() {
        let err = Graph::from_one_based(3, &[(1, 2, 1.0)], &[1], None).unwrap_err();
        assert!(matches!(err, GraphError::DisconnectedGraph { components: 2 }));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(
            Graph::new(2, &[(0, 1, 0.0)], &[0], None),
            Err(GraphError::NonPositiveWeight(..))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 1, -1.0)], &[0], None),
            Err(GraphError::NonPositiveWeight(..))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 1, 1.0), (1, 0, 2.0)], &[0], None),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 1, 1.0)], &[0, 1], None),
            Err(GraphError::BadSourceSet(_))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 1, 1.0)], &[], None),
            Err(GraphError::BadSourceSet(_))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 0, 1.0)], &[0], None),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 2, 1.0)], &[0], None),
            Err(GraphError::NodeOutOfRange { node: 2, n: 2 })
        ));
    }

    #[test]
    fn arcs_are_densely_numbered() {
        let g = Graph::new(3, &[(0, 1, 1.0), (1, 2, 2.0)], &[0], None).unwrap();
        let mut ids: Vec<usize> = (0..3)
            .flat_map(|i| g.neighbors(i).iter().map(|a| a.id))
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert_eq!(g.arc_count(), 4);
    }

    #[test]
    fn source_swap_keeps_topology() {
        let g = Graph::new(3, &[(0, 1, 1.0), (1, 2, 2.0)], &[0], None).unwrap();
        let h = g.with_sources(&[2]).unwrap();
        assert_eq!(h.sources(), &[2]);
        assert_eq!(h.edges(), g.edges());
    }
}
