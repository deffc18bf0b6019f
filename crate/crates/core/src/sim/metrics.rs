use crate::graph::NodeId;

/// Absolute tolerance for membership in the active sets.
pub const ACTIVE_TOLERANCE: f64 = 1e-9;

/// Largest overestimate, `max(0, max_i e_i)`.
pub fn v_plus(e: &[f64]) -> f64 {
    e.iter().copied().fold(0.0, f64::max)
}

/// Largest underestimate, `max(0, -min_i e_i)`.
pub fn v_minus(e: &[f64]) -> f64 {
    e.iter().map(|v| -v).fold(0.0, f64::max)
}

pub fn max_abs(e: &[f64]) -> f64 {
    e.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Nodes attaining `V+` and `-V-` respectively.
pub fn active_sets(e: &[f64]) -> (Vec<NodeId>, Vec<NodeId>) {
    let vp = v_plus(e);
    let vm = v_minus(e);
    let plus = (0..e.len()).filter(|&i| (e[i] - vp).abs() <= ACTIVE_TOLERANCE).collect();
    let minus = (0..e.len()).filter(|&i| (e[i] + vm).abs() <= ACTIVE_TOLERANCE).collect();
    (plus, minus)
}
