//! Small hand-checkable graphs.

use crate::graph::Graph;

/// Nine-node example with sources 1 and 9 (labels are 1-based).
///
/// Stationary distances are `(0, 1, 1, 2, 1, 2, 2, 1, 0)`, `P(4) = {2, 3}`,
/// `P(6) = {8, 9}`, the effective diameter is 3 and `zeta = 1/3`.
pub fn nine_node() -> Graph {
    let edges = [
        (1, 2, 1.0),
        (1, 3, 1.0),
        (2, 4, 1.0),
        (3, 4, 1.0),
        (1, 5, 1.0),
        (5, 7, 1.0),
        (6, 8, 1.0),
        (7, 8, 1.0),
        (8, 9, 1.0),
        (6, 9, 2.0),
    ];
    Graph::from_one_based(9, &edges, &[1, 9], None).expect("fixture is valid")
}

/// Source 1 joined to node 2 by a single edge of weight `w`.
pub fn two_node(w: f64) -> Graph {
    Graph::from_one_based(2, &[(1, 2, w)], &[1], None).expect("fixture is valid")
}
