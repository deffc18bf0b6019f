//! Gain matrix of the perturbed protocol, the max-linear map it induces, and
//! two ways of certifying the cycle small-gain condition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{current_parents, rhs_perturbed, WeightModel};
use crate::graph::{Graph, NodeId, StationaryProfile};
use crate::sim::{rk4_step, Trajectory};

/// Replacement for `zeta = 0` so that parent entries stay strictly positive.
pub const ZETA_FLOOR: f64 = 1e-12;

/// Largest matrix the brute-force cycle enumeration accepts by default.
pub const BRUTE_FORCE_MAX_N: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum SmallGainError {
    #[error("{n} nodes exceed the enumeration cap of {max_n}")]
    TooLarge { n: usize, max_n: usize },
    #[error("input component {index} is negative ({value})")]
    NegativeInput { index: usize, value: f64 },
    #[error("diagonal factor must exceed 1, got {0}")]
    InvalidFactor(f64),
    #[error("invalid gain matrix: {0}")]
    InvalidMatrix(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    pub n: usize,
    /// Row-major `n x n` entries.
    pub entries: Vec<f64>,
    pub eta: f64,
    pub zeta: f64,
    /// `zeta` was 0 and [`ZETA_FLOOR`] was used for the parent entries.
    pub zeta_floored: bool,
    pub source_row_value: f64,
}

impl GainMatrix {
    /// Row `i` outside the sources: `zeta eta` on true parents, `eta` elsewhere.
    /// Source rows: `0.5 / eta^(D - 1)` everywhere.
    pub fn build(g: &Graph, profile: &StationaryProfile, eta: f64) -> Result<Self, SmallGainError> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(SmallGainError::InvalidMatrix(format!("eta = {eta}")));
        }
        let n = g.node_count();
        let zeta_floored = profile.zeta == 0.0;
        let zeta = profile.zeta.max(ZETA_FLOOR);
        let source_row_value = 0.5 / eta.powi(profile.effective_diameter as i32 - 1);
        let mut entries = vec![eta; n * n];
        for i in 0..n {
            let row = &mut entries[i * n..(i + 1) * n];
            if g.is_source(i) {
                row.fill(source_row_value);
            } else {
                for &j in &profile.true_parents[i] {
                    row[j] = zeta * eta;
                }
            }
        }
        Ok(GainMatrix { n, entries, eta, zeta, zeta_floored, source_row_value })
    }

    /// Arbitrary non-negative matrix, for hand-built examples.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self, SmallGainError> {
        if entries.len() != n * n {
            return Err(SmallGainError::InvalidMatrix(format!("{} entries for n = {n}", entries.len())));
        }
        if entries.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SmallGainError::InvalidMatrix("entries must be finite and non-negative".into()));
        }
        Ok(GainMatrix { n, entries, eta: f64::NAN, zeta: f64::NAN, zeta_floored: false, source_row_value: f64::NAN })
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: NodeId) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// 0/1 pattern: 1 where the entry is nonzero.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|&v| u8::from(v != 0.0)).collect())
            .collect()
    }

    /// `s -> (max_k lambda_ik s_k)_i`.
    pub fn gamma_oplus(&self, s: &[f64]) -> Result<Vec<f64>, SmallGainError> {
        if s.len() != self.n {
            return Err(SmallGainError::InvalidMatrix(format!("vector of length {} for n = {}", s.len(), self.n)));
        }
        if let Some((index, &value)) = s.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
            return Err(SmallGainError::NegativeInput { index, value });
        }
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(s).map(|(l, v)| l * v).fold(0.0, f64::max))
            .collect())
    }

    /// `D(Gamma_oplus(s))` in one pass.
    pub fn scaled_gamma_oplus(&self, d: f64, s: &[f64]) -> Result<Vec<f64>, SmallGainError> {
        check_factor(d)?;
        Ok(self.gamma_oplus(s)?.into_iter().map(|v| d * v).collect())
    }

    /// `prod_k d lambda(c_k, c_{k+1})` around the closed cycle `c`.
    pub fn cycle_product(&self, cycle: &[NodeId], d: f64) -> f64 {
        let len = cycle.len();
        (0..len).map(|k| d * self.get(cycle[k], cycle[(k + 1) % len])).product()
    }
}

fn check_factor(d: f64) -> Result<(), SmallGainError> {
    if d > 1.0 && d.is_finite() {
        Ok(())
    } else {
        Err(SmallGainError::InvalidFactor(d))
    }
}

/// Componentwise `d s`.
pub fn apply_d(d: f64, s: &[f64]) -> Result<Vec<f64>, SmallGainError> {
    check_factor(d)?;
    Ok(s.iter().map(|v| d * v).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Certificate {
    CertifiedContractive { d: f64 },
    SufficientConditionFailed { reason: String },
    BruteForceRefuted { d: f64, cycle: Vec<NodeId>, product: f64 },
}

impl Certificate {
    pub fn factor(&self) -> Option<f64> {
        match self {
            Certificate::CertifiedContractive { d } => Some(*d),
            _ => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::CertifiedContractive { .. })
    }
}

/// `1 < eta < 1/zeta` (just `eta > 1` when `zeta = 0`), with
/// `d = min((1 + 1/(eta zeta)) / 2, 0.5^(-1/D) (1 - 1e-12))`.
pub fn sufficient_condition(eta: f64, zeta: f64, diameter: usize) -> Certificate {
    let fail = |reason: String| Certificate::SufficientConditionFailed { reason };
    if !(0.0..1.0).contains(&zeta) {
        return fail(format!("zeta = {zeta} is not in [0, 1)"));
    }
    if diameter < 2 {
        return fail(format!("effective diameter {diameter} < 2"));
    }
    if eta.is_nan() || eta <= 1.0 {
        return fail(format!("eta = {eta} is not above 1"));
    }
    if zeta > 0.0 && eta >= 1.0 / zeta {
        return fail(format!("eta = {eta} is not below 1/zeta = {}", 1.0 / zeta));
    }
    let d1 = if zeta > 0.0 { 0.5 * (1.0 + 1.0 / (eta * zeta)) } else { 2.0 };
    let d2 = 0.5f64.powf(-1.0 / diameter as f64) * (1.0 - 1e-12);
    Certificate::CertifiedContractive { d: d1.min(d2) }
}

/// Enumerates every simple cycle of length >= 2 of the complete pattern
/// (each cycle once, starting from its smallest node) and reports the first
/// whose `d`-scaled product reaches 1.
pub fn cycle_contraction_bruteforce(m: &GainMatrix, d: f64, max_n: usize) -> Result<Certificate, SmallGainError> {
    if m.n > max_n {
        return Err(SmallGainError::TooLarge { n: m.n, max_n });
    }
    check_factor(d)?;
    let mut path = Vec::with_capacity(m.n);
    let mut used = vec![false; m.n];
    for start in 0..m.n {
        path.clear();
        path.push(start);
        used[start] = true;
        if let Some((cycle, product)) = extend(m, d, start, 1.0, &mut path, &mut used) {
            return Ok(Certificate::BruteForceRefuted { d, cycle, product });
        }
        used[start] = false;
    }
    Ok(Certificate::CertifiedContractive { d })
}

fn extend(
    m: &GainMatrix,
    d: f64,
    start: NodeId,
    acc: f64,
    path: &mut Vec<NodeId>,
    used: &mut [bool],
) -> Option<(Vec<NodeId>, f64)> {
    let last = *path.last().expect("path starts non-empty");
    for next in (start + 1)..m.n {
        if used[next] || m.get(last, next) == 0.0 {
            continue;
        }
        let acc_next = acc * d * m.get(last, next);
        path.push(next);
        if m.get(next, start) != 0.0 {
            let product = acc_next * d * m.get(next, start);
            if product >= 1.0 {
                return Some((path.clone(), product));
            }
        }
        used[next] = true;
        let found = extend(m, d, start, acc_next, path, used);
        used[next] = false;
        path.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub counterexamples: usize,
    /// First vector `x > 0` with `D(Gamma_oplus(x)) >= x`.
    pub first_counterexample: Option<Vec<f64>>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.counterexamples == 0
    }
}

/// `true` when some component of `D(Gamma_oplus(x))` is strictly below `x`.
pub fn decreases_somewhere(m: &GainMatrix, d: f64, x: &[f64]) -> Result<bool, SmallGainError> {
    let y = m.scaled_gamma_oplus(d, x)?;
    Ok(y.iter().zip(x).any(|(a, b)| a < b))
}

/// Random positive probes, log-uniform on `[1e-3, 1e3]` per component.
pub fn no_increase_probe(m: &GainMatrix, d: f64, trials: usize, seed: u64) -> Result<ProbeReport, SmallGainError> {
    check_factor(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProbeReport { trials, counterexamples: 0, first_counterexample: None };
    let mut x = vec![0.0; m.n];
    for _ in 0..trials {
        for v in x.iter_mut() {
            *v = 10f64.powf(rng.gen_range(-3.0..3.0));
        }
        if !decreases_somewhere(m, d, &x)? {
            report.counterexamples += 1;
            if report.first_counterexample.is_none() {
                report.first_counterexample = Some(x.clone());
            }
        }
    }
    Ok(report)
}

/// Positive vector concentrated on `cycle`; when the cycle's scaled product
/// is at least 1 no component of `D(Gamma_oplus(x))` falls below `x`.
pub fn cycle_supported_vector(m: &GainMatrix, d: f64, cycle: &[NodeId]) -> Result<Vec<f64>, SmallGainError> {
    check_factor(d)?;
    let mut x = vec![0.0; m.n];
    let len = cycle.len();
    x[cycle[0]] = 1.0;
    for k in (1..len).rev() {
        let next = cycle[(k + 1) % len];
        x[cycle[k]] = d * m.get(cycle[k], next) * x[next];
    }
    let y = m.scaled_gamma_oplus(d, &x)?;
    for i in 0..m.n {
        if !cycle.contains(&i) {
            x[i] = 0.5 * y[i];
        }
    }
    Ok(x)
}

/// Cycles that descend from a non-source node through true parents to a
/// source and close through the source row. At most `limit` are returned.
pub fn parent_chain_cycles(g: &Graph, profile: &StationaryProfile, limit: usize) -> Vec<Vec<NodeId>> {
    fn walk(
        g: &Graph,
        profile: &StationaryProfile,
        path: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        let last = *path.last().expect("non-empty path");
        if g.is_source(last) {
            out.push(path.clone());
            return;
        }
        for &p in &profile.true_parents[last] {
            path.push(p);
            walk(g, profile, path, out, limit);
            path.pop();
        }
    }
    let mut out = Vec::new();
    for i in (0..g.node_count()).filter(|&i| !g.is_source(i)) {
        walk(g, profile, &mut vec![i], &mut out, limit);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayViolation {
    pub node: NodeId,
    pub t: f64,
    /// Finite-difference derivative of `|e_i|`.
    pub derivative: f64,
    /// `-(eta - 1) |e_i| + slack`.
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayImplicationReport {
    pub input_sup: f64,
    pub slack: f64,
    pub checked: usize,
    pub fired: usize,
    pub violations: Vec<DecayViolation>,
    /// Largest `|e_i|` over sources; must be 0.
    pub source_error: f64,
}

impl DecayImplicationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.source_error == 0.0
    }
}

const FD_STEP: f64 = 1e-6;

/// Per-node implication check along a perturbed-protocol trajectory: if
/// `|e_i| >= lambda_ij |e_j| + eta ||u||` then `d|e_i|/dt <= -(eta - 1)|e_i|`,
/// with `j` a true parent (`lambda = eta`) when `e_i > 0` and a current
/// parent (`lambda = zeta eta`) when `e_i < 0`. Samples with `|e_i| < 1e-9`
/// are skipped.
pub fn decay_implication_check(tr: &Trajectory, g: &Graph, eta: f64, weights: &WeightModel) -> DecayImplicationReport {
    let input_sup = weights.sup_deviation(g);
    let slack = 1e-6 + 10.0 * tr.dt.powi(4);
    let mut report = DecayImplicationReport { input_sup, slack, checked: 0, fired: 0, violations: Vec::new(), source_error: 0.0 };
    let mut graphs: Vec<Graph> = Vec::new();
    for seg in &tr.segments {
        graphs.push(g.with_sources(&seg.sources).unwrap_or_else(|_| g.clone()));
    }
    for k in 0..tr.len() {
        let seg_idx = tr.segments.partition_point(|s| s.start <= k) - 1;
        let seg = &tr.segments[seg_idx];
        let gk = &graphs[seg_idx];
        let profile = &seg.profile;
        let (t, x, e) = (tr.times[k], &tr.states[k], &tr.errors[k]);
        let pinned: Vec<bool> = (0..gk.node_count()).map(|i| gk.is_source(i)).collect();
        for &s in gk.sources() {
            report.source_error = report.source_error.max(e[s].abs());
        }
        let f = |tt: f64, xx: &[f64], out: &mut [f64]| out.copy_from_slice(&rhs_perturbed(tt, xx, gk, eta, weights));
        let mut fwd = x.clone();
        rk4_step(f, t, FD_STEP, &mut fwd, &pinned);
        let mut bwd = x.clone();
        rk4_step(f, t, -FD_STEP, &mut bwd, &pinned);
        let parents_now = current_parents(t, x, gk, weights);

        for i in (0..gk.node_count()).filter(|&i| !gk.is_source(i)) {
            if e[i].abs() < 1e-9 {
                continue;
            }
            report.checked += 1;
            let (candidates, lambda) = if e[i] > 0.0 {
                (&profile.true_parents[i], eta)
            } else {
                (&parents_now[i], profile.zeta * eta)
            };
            let fires = candidates
                .iter()
                .any(|&j| e[i].abs() >= lambda * e[j].abs() + eta * input_sup);
            if !fires {
                continue;
            }
            report.fired += 1;
            let xs = profile.distances[i];
            let derivative = ((fwd[i] - xs).abs() - (bwd[i] - xs).abs()) / (2.0 * FD_STEP);
            let limit = -(eta - 1.0) * e[i].abs() + slack;
            if derivative > limit {
                report.violations.push(DecayViolation { node: i, t, derivative, limit });
            }
        }
    }
    report
}
