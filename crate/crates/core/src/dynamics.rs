//! Protocol right-hand sides as pure functions of `(t, x)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gain::{pt_gain, tbg_gain, GainSchedule, RhoParams, TbgParams};
use crate::graph::{Arc, Graph, NodeId, PARENT_TOLERANCE};

/// Node states at a time instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub time: f64,
}

impl StateVector {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        Self { values, time }
    }
}

/// Seeded sinusoid per directed arc: `w (c + a sin(omega t + phi))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub omega: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Time-varying edge weights, keyed by directed arc `(receiver, neighbour)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightModel {
    #[default]
    Nominal,
    Band(Band),
    /// Fixed weight per directed arc, indexed by [`Arc::id`].
    Custom { weights: Vec<f64> },
}

impl WeightModel {
    /// Multiplicative band `[lo, hi]` around the nominal weights.
    ///
    /// Each arc gets its own frequency in `[0.5, 2]` rad/s and phase in `[0, 2 pi)`.
    pub fn band(g: &Graph, lo: f64, hi: f64, seed: u64) -> Result<Self, String> {
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(format!("band [{lo}, {hi}] must satisfy 0 < lo <= 1 <= hi"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = g.arc_count();
        let mut omega = Vec::with_capacity(m);
        let mut phase = Vec::with_capacity(m);
        for _ in 0..m {
            omega.push(rng.gen_range(0.5..=2.0));
            phase.push(rng.gen_range(0.0..TAU));
        }
        Ok(WeightModel::Band(Band { lo, hi, omega, phase }))
    }

    pub fn evaluate(&self, arc: &Arc, t: f64) -> f64 {
        match self {
            WeightModel::Nominal => arc.weight,
            WeightModel::Band(b) => {
                let c = 0.5 * (b.lo + b.hi);
                let a = 0.5 * (b.hi - b.lo);
                arc.weight * (c + a * (b.omega[arc.id] * t + b.phase[arc.id]).sin())
            }
            WeightModel::Custom { weights } => weights[arc.id],
        }
    }

    /// Guaranteed `(w_min, w_max)` over all arcs and all times.
    pub fn bounds(&self, g: &Graph) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..g.node_count() {
            for arc in g.neighbors(i) {
                let (a, b) = match self {
                    WeightModel::Nominal => (arc.weight, arc.weight),
                    WeightModel::Band(band) => (arc.weight * band.lo, arc.weight * band.hi),
                    WeightModel::Custom { weights } => (weights[arc.id], weights[arc.id]),
                };
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    }

    /// `sup_t max_arcs |w_ij(t) - w_ij|`.
    pub fn sup_deviation(&self, g: &Graph) -> f64 {
        let mut sup: f64 = 0.0;
        for i in 0..g.node_count() {
            for arc in g.neighbors(i) {
                let dev = match self {
                    WeightModel::Nominal => 0.0,
                    WeightModel::Band(b) => arc.weight * (b.hi - 1.0).max(1.0 - b.lo),
                    WeightModel::Custom { weights } => (weights[arc.id] - arc.weight).abs(),
                };
                sup = sup.max(dev);
            }
        }
        sup
    }

    pub fn validate(&self, g: &Graph) -> Result<(), String> {
        let arcs = g.arc_count();
        match self {
            WeightModel::Nominal => Ok(()),
            WeightModel::Band(b) if b.omega.len() != arcs || b.phase.len() != arcs => {
                Err(format!("band model covers {} arcs, graph has {arcs}", b.omega.len()))
            }
            WeightModel::Band(_) => Ok(()),
            WeightModel::Custom { weights } if weights.len() != arcs => {
                Err(format!("custom table has {} entries, graph has {arcs} arcs", weights.len()))
            }
            WeightModel::Custom { weights } => match weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                Some(w) => Err(format!("custom weight {w} is not positive")),
                None => Ok(()),
            },
        }
    }
}

/// `min_j (x_j + w_ij(t))` over neighbours, with `|x_j|` when `abs` is set.
#[inline]
fn neighbour_min(g: &Graph, x: &[f64], i: NodeId, t: f64, weights: &WeightModel, abs: bool) -> f64 {
    let mut best = f64::INFINITY;
    for arc in g.neighbors(i) {
        let xj = if abs { x[arc.to].abs() } else { x[arc.to] };
        let v = xj + weights.evaluate(arc, t);
        if v < best {
            best = v;
        }
    }
    best
}

fn rhs_generic(
    g: &Graph,
    x: &[f64],
    t: f64,
    gain: f64,
    weights: &WeightModel,
    abs: bool,
    out: &mut [f64],
) {
    for i in 0..g.node_count() {
        out[i] = if g.is_source(i) || gain == 0.0 {
            0.0
        } else {
            -gain * (x[i] - neighbour_min(g, x, i, t, weights, abs))
        };
    }
}

/// Which protocol variant drives the states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum Protocol {
    Nominal { eta: f64 },
    Ppt { tbg: TbgParams },
    Pt { rho: RhoParams },
    Perturbed { eta: f64, weights: WeightModel },
    Abs { eta: f64, weights: WeightModel },
}

impl Protocol {
    pub fn gain_schedule(&self) -> GainSchedule {
        match self {
            Protocol::Nominal { eta } | Protocol::Perturbed { eta, .. } | Protocol::Abs { eta, .. } => {
                GainSchedule::Constant { eta: *eta }
            }
            Protocol::Ppt { tbg } => GainSchedule::Tbg(*tbg),
            Protocol::Pt { rho } => GainSchedule::Rho(*rho),
        }
    }

    pub fn weights(&self) -> &WeightModel {
        const NOMINAL: &WeightModel = &WeightModel::Nominal;
        match self {
            Protocol::Perturbed { weights, .. } | Protocol::Abs { weights, .. } => weights,
            _ => NOMINAL,
        }
    }

    pub fn rhs_into(&self, t: f64, x: &[f64], g: &Graph, out: &mut [f64]) {
        let gain = self.gain_schedule().value_at(t);
        let abs = matches!(self, Protocol::Abs { .. });
        rhs_generic(g, x, t, gain, self.weights(), abs, out);
    }

    pub fn rhs(&self, t: f64, x: &[f64], g: &Graph) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.rhs_into(t, x, g, &mut out);
        out
    }
}

pub fn rhs_nominal(t: f64, x: &[f64], g: &Graph, eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    rhs_generic(g, x, t, eta, &WeightModel::Nominal, false, &mut out);
    out
}

pub fn rhs_ppt(t: f64, x: &[f64], g: &Graph, p: &TbgParams) -> Vec<f64> {
    rhs_nominal(t, x, g, tbg_gain(t, p))
}

pub fn rhs_pt(t: f64, x: &[f64], g: &Graph, p: &RhoParams) -> Vec<f64> {
    rhs_nominal(t, x, g, pt_gain(t, p))
}

pub fn rhs_perturbed(t: f64, x: &[f64], g: &Graph, eta: f64, weights: &WeightModel) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    rhs_generic(g, x, t, eta, weights, false, &mut out);
    out
}

pub fn rhs_abs(t: f64, x: &[f64], g: &Graph, eta: f64, weights: &WeightModel) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    rhs_generic(g, x, t, eta, weights, true, &mut out);
    out
}

/// Neighbours attaining `min_j (x_j + w_ij(t))` within relative tolerance 1e-9.
pub fn current_parents(t: f64, x: &[f64], g: &Graph, weights: &WeightModel) -> Vec<Vec<NodeId>> {
    (0..g.node_count())
        .map(|i| {
            if g.is_source(i) {
                return Vec::new();
            }
            let best = neighbour_min(g, x, i, t, weights, false);
            let slack = PARENT_TOLERANCE * best.abs().max(1.0);
            let mut set: Vec<NodeId> = g
                .neighbors(i)
                .iter()
                .filter(|a| x[a.to] + weights.evaluate(a, t) <= best + slack)
                .map(|a| a.to)
                .collect();
            set.sort_unstable();
            set
        })
        .collect()
}

/// One round of `z_i <- min_{j in N(i)} z_j` (the node's own value excluded).
pub fn discrete_min_consensus_step(z: &[f64], g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| g.neighbors(i).iter().map(|a| z[a.to]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// `(||f(t,x) - f(t,y)||_inf, 2 L ||x - y||_inf)` for the TBG right-hand side.
pub fn lipschitz_witness(t: f64, x: &[f64], y: &[f64], g: &Graph, p: &TbgParams, gain_bound: f64) -> (f64, f64) {
    let fx = rhs_ppt(t, x, g, p);
    let fy = rhs_ppt(t, y, g, p);
    let lhs = fx.iter().zip(&fy).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dist = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (lhs, 2.0 * gain_bound * dist)
}

/// Time after which a node started at `x0` is non-negative under the
/// absolute-value protocol: `ln((w_min - x0) / w_min) / eta`, or 0 if `x0 >= 0`.
pub fn nonnegative_after(eta: f64, w_min: f64, x0: f64) -> f64 {
    if x0 >= 0.0 {
        0.0
    } else {
        ((w_min - x0) / w_min).ln() / eta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gain::tbg_gain_supremum;
    use crate::graph::stationary_profile;

    fn tbg4() -> TbgParams {
        TbgParams::new(4.0, 1e-4).unwrap()
    }

    #[test]
    fn two_node_nominal() {
        let g = fixtures::two_node(1.0);
        assert_eq!(rhs_nominal(0.0, &[0.0, 5.0], &g, 1.0), vec![0.0, -4.0]);
    }

    #[test]
    fn stationary_profile_is_fixed_point() {
        let g = fixtures::nine_node();
        let x = stationary_profile(&g).distances;
        let rho = RhoParams::new(4.0, 2, 1.0).unwrap();
        for t in [0.0, 0.3, 2.0, 3.99] {
            for f in [
                rhs_nominal(t, &x, &g, 1.2),
                rhs_ppt(t, &x, &g, &tbg4()),
                rhs_pt(t, &x, &g, &rho),
                rhs_perturbed(t, &x, &g, 1.2, &WeightModel::Nominal),
            ] {
                assert!(f.iter().all(|v| v.abs() <= 1e-12));
            }
        }
    }

    #[test]
    fn offset_above_source_parent_decays_at_eta() {
        let g = fixtures::nine_node();
        let p = stationary_profile(&g);
        let c = 0.7;
        let x: Vec<f64> = (0..9).map(|i| if g.is_source(i) { 0.0 } else { p.distances[i] + c }).collect();
        let f = rhs_nominal(0.0, &x, &g, 1.2);
        for (i, fi) in f.iter().enumerate() {
            if !g.is_source(i) && p.true_parents[i].iter().all(|&j| g.is_source(j)) {
                assert!((fi + 1.2 * c).abs() < 1e-12, "node {}", i + 1);
            }
        }
    }

    #[test]
    fn ppt_and_pt_examples() {
        let g = fixtures::two_node(1.0);
        let x = [0.0, 5.0];
        assert_eq!(rhs_ppt(0.0, &x, &g, &tbg4()), vec![0.0, 0.0]);
        assert_eq!(rhs_ppt(8.0, &x, &g, &tbg4()), vec![0.0, 0.0]);
        assert_eq!(rhs_ppt(2.0, &x, &g, &tbg4())[1], -tbg_gain(2.0, &tbg4()) * 4.0);
        let rho = RhoParams::new(4.0, 2, 1.0).unwrap();
        assert_eq!(rhs_pt(0.0, &x, &g, &rho), vec![0.0, -10.0]);
        assert_eq!(rhs_pt(4.0, &x, &g, &rho), vec![0.0, 0.0]);
        assert_eq!(rhs_pt(17.0, &[0.0, -2.0], &g, &rho), vec![0.0, 0.0]);
    }

    #[test]
    fn ppt_rhs_continuous_across_window_boundary() {
        let g = fixtures::nine_node();
        let x: Vec<f64> = (0..9).map(|i| if g.is_source(i) { 0.0 } else { 3.0 + i as f64 }).collect();
        let at = rhs_ppt(4.0, &x, &g, &tbg4());
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
            let before = rhs_ppt(4.0 - eps, &x, &g, &tbg4());
            let gap = before.iter().zip(&at).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn perturbed_nominal_matches_bitwise() {
        let g = fixtures::nine_node();
        let x = [0.0, 3.0, -1.0, 2.5, 0.2, 9.0, 1.0, 4.0, 0.0];
        assert_eq!(rhs_perturbed(1.3, &x, &g, 1.2, &WeightModel::Nominal), rhs_nominal(1.3, &x, &g, 1.2));
    }

    #[test]
    fn band_stays_in_range() {
        let g = fixtures::nine_node();
        let m = WeightModel::band(&g, 0.9, 1.1, 5).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.173;
            for i in 0..9 {
                for arc in g.neighbors(i) {
                    let w = m.evaluate(arc, t);
                    assert!(w >= 0.9 * arc.weight - 1e-15 && w <= 1.1 * arc.weight + 1e-15);
                    assert!((w - arc.weight).abs() <= 0.1 * arc.weight + 1e-15);
                }
            }
        }
        assert!((m.sup_deviation(&g) - 0.2).abs() < 1e-12);
        assert_eq!(m.bounds(&g), (0.9, 2.2));
        assert!(WeightModel::band(&g, 1.2, 1.1, 0).is_err());
    }

    #[test]
    fn abs_variant() {
        let g = fixtures::two_node(1.0);
        assert_eq!(rhs_abs(0.0, &[0.0, -3.0], &g, 1.0, &WeightModel::Nominal), vec![0.0, 4.0]);
        let x = [0.0, 2.0];
        assert_eq!(
            rhs_abs(0.5, &x, &g, 1.0, &WeightModel::Nominal),
            rhs_perturbed(0.5, &x, &g, 1.0, &WeightModel::Nominal)
        );
        assert!((nonnegative_after(1.0, 1.0, -3.0) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(nonnegative_after(1.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn discrete_step_examples() {
        let g = fixtures::two_node(1.0);
        let z1 = discrete_min_consensus_step(&[5.0, 10.0], &g);
        assert_eq!(z1, vec![10.0, 5.0]);
        assert_eq!(discrete_min_consensus_step(&z1, &g), vec![5.0, 10.0]);
        let k3 = Graph::new(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], &[0], None).unwrap();
        assert_eq!(discrete_min_consensus_step(&[1.0, 2.0, 3.0], &k3), vec![2.0, 1.0, 1.0]);
        assert_eq!(discrete_min_consensus_step(&[4.0; 3], &k3), vec![4.0; 3]);
    }

    #[test]
    fn lipschitz_examples() {
        let g = fixtures::two_node(1.0);
        let l = tbg_gain_supremum(&tbg4(), 10_000);
        assert_eq!(lipschitz_witness(1.0, &[0.0, 5.0], &[0.0, 5.0], &g, &tbg4(), l), (0.0, 0.0));
        let (lhs, rhs) = lipschitz_witness(2.0, &[0.0, 5.0], &[0.0, 7.0], &g, &tbg4(), l);
        assert!(lhs <= rhs);
        assert!((rhs - 4.0 * l).abs() < 1e-12);
    }

    #[test]
    fn current_parents_include_ties() {
        let g = fixtures::nine_node();
        let x = stationary_profile(&g).distances;
        let cp = current_parents(0.0, &x, &g, &WeightModel::Nominal);
        assert_eq!(cp, stationary_profile(&g).true_parents);
    }
}
