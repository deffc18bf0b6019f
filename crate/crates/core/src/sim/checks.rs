use serde::{Deserialize, Serialize};

use super::{max_abs, SimError, Trajectory};
use crate::gain::TbgParams;
use crate::graph::NodeId;

const MAX_REPORTED: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: NodeId,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PptBoundReport {
    pub effective_diameter: usize,
    /// `(D - 1) delta / (1 + delta) e_max0`.
    pub bound: f64,
    /// `(D - 1) T_s`.
    pub deadline: f64,
    pub tolerance: f64,
    pub bound_ok: bool,
    pub layers_ok: bool,
    /// No error below `-tolerance` at any sample.
    pub nonnegative_ok: bool,
    pub min_error: f64,
    /// Per node: earliest sample time from which `|e_i| <= bound + tol` holds.
    pub first_satisfaction: Vec<Option<f64>>,
    /// Earliest sample time from which every node satisfies the bound.
    pub all_bounded_time: Option<f64>,
    pub violations: Vec<Violation>,
}

impl PptBoundReport {
    pub fn passed(&self) -> bool {
        self.bound_ok && self.layers_ok && self.nonnegative_ok
    }
}

/// Checks the window-count bound of the TBG protocol, its per-layer
/// refinement and non-negativity of the errors on the first segment.
pub fn ppt_bound_check(tr: &Trajectory, p: &TbgParams, tolerance: f64) -> PptBoundReport {
    let profile = &tr.segments[0].profile;
    let end = tr.segments.get(1).map_or(tr.len(), |s| s.start);
    let d = profile.effective_diameter;
    let f = p.window_factor();
    let bound = (d - 1) as f64 * f * tr.e_max0;
    let deadline = (d - 1) as f64 * p.period;
    let n = profile.distances.len();

    let mut violations = Vec::new();
    let mut bound_ok = true;
    let mut layers_ok = true;
    let mut min_error = f64::INFINITY;
    let mut first_satisfaction = vec![Some(0.0); n];
    for k in 0..end {
        let t = tr.times[k];
        for (i, &e) in tr.errors[k].iter().enumerate() {
            min_error = min_error.min(e);
            if e.abs() > bound + tolerance {
                first_satisfaction[i] = tr.times.get(k + 1).copied().filter(|_| k + 1 < end);
                if t >= deadline {
                    bound_ok = false;
                    if violations.len() < MAX_REPORTED {
                        violations.push(Violation { node: i, t, value: e, bound });
                    }
                }
            }
            let layer = profile.depth[i];
            let layer_bound = layer as f64 * f * tr.e_max0;
            if t >= layer as f64 * p.period && e > layer_bound + tolerance {
                layers_ok = false;
                if violations.len() < MAX_REPORTED {
                    violations.push(Violation { node: i, t, value: e, bound: layer_bound });
                }
            }
        }
    }
    let all_bounded_time = first_satisfaction
        .iter()
        .try_fold(0.0f64, |acc, v| v.map(|t| acc.max(t)));
    PptBoundReport {
        effective_diameter: d,
        bound,
        deadline,
        tolerance,
        bound_ok,
        layers_ok,
        nonnegative_ok: min_error >= -tolerance,
        min_error,
        first_satisfaction,
        all_bounded_time,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepIncrease {
    pub index: usize,
    pub t: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    pub plus_ok: bool,
    pub minus_ok: bool,
    pub first_plus_increase: Option<StepIncrease>,
    pub first_minus_increase: Option<StepIncrease>,
    /// Largest `V(t_{k+1}) - V(t_k)` seen for either function.
    pub max_increase: f64,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.plus_ok && self.minus_ok
    }
}

/// `V+` and `V-` may not grow by more than `1e-9 (1 + V(t_k)) + slack`
/// between consecutive samples from index `from` on. Pairs straddling a
/// source change are skipped.
pub fn monotonicity_check_from(tr: &Trajectory, from: usize, slack: f64) -> MonotonicityReport {
    let boundaries = tr.event_boundaries();
    let mut report = MonotonicityReport {
        pairs_checked: 0,
        plus_ok: true,
        minus_ok: true,
        first_plus_increase: None,
        first_minus_increase: None,
        max_increase: f64::NEG_INFINITY,
    };
    for k in from..tr.len().saturating_sub(1) {
        if boundaries.contains(&(k + 1)) {
            continue;
        }
        report.pairs_checked += 1;
        for (series, ok, first) in [
            (&tr.v_plus, &mut report.plus_ok, &mut report.first_plus_increase),
            (&tr.v_minus, &mut report.minus_ok, &mut report.first_minus_increase),
        ] {
            let (a, b) = (series[k], series[k + 1]);
            report.max_increase = report.max_increase.max(b - a);
            if b > a + 1e-9 * (1.0 + a) + slack {
                *ok = false;
                if first.is_none() {
                    *first = Some(StepIncrease { index: k, t: tr.times[k], before: a, after: b });
                }
            }
        }
    }
    report
}

pub fn monotonicity_check(tr: &Trajectory) -> MonotonicityReport {
    monotonicity_check_from(tr, 0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Decay rate `p` of `m(t) - floor ~ c e^(-p t)`.
    pub rate: f64,
    /// Intercept of the log-linear fit, `ln c`.
    pub offset: f64,
    pub r_squared: f64,
    pub floor: f64,
    pub points: usize,
}

const MIN_FIT_POINTS: usize = 5;

/// Least-squares fit of `ln(m(t) - floor)` against `t` on `[t0, t1]`, where
/// `m(t) = max_i |e_i(t)|` and `floor` is the median of `m` over the last
/// 10% of the window, but never below the round-off level of the states.
pub fn decay_fit(tr: &Trajectory, window: (f64, f64)) -> Result<DecayFit, SimError> {
    let idx: Vec<usize> = (0..tr.len())
        .filter(|&k| tr.times[k] >= window.0 && tr.times[k] <= window.1)
        .collect();
    let too_short = |points| SimError::WindowTooShort { points, needed: MIN_FIT_POINTS };
    if idx.len() < MIN_FIT_POINTS {
        return Err(too_short(idx.len()));
    }
    let m: Vec<f64> = idx.iter().map(|&k| max_abs(&tr.errors[k])).collect();
    let tail = (m.len() / 10).max(1);
    let floor = median(&m[m.len() - tail..]);
    let scale = tr.segment_of(idx[0]).profile.distances.iter().copied().fold(1.0, f64::max);
    let floor = floor.max(1e3 * f64::EPSILON * scale);

    let pts: Vec<(f64, f64)> = idx
        .iter()
        .zip(&m)
        .filter(|(_, &v)| v > 2.0 * floor)
        .map(|(&k, &v)| (tr.times[k], (v - floor).ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(too_short(pts.len()));
    }
    let nf = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(too_short(1));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit { rate: -slope, offset: my - slope * mt, r_squared, floor, points: pts.len() })
}

/// Median of `max_i |e_i|` over the final `fraction` of the samples.
pub fn ultimate_error(tr: &Trajectory, fraction: f64) -> f64 {
    let m = tr.max_abs();
    let tail = ((m.len() as f64 * fraction).ceil() as usize).clamp(1, m.len().max(1));
    median(&m[m.len() - tail..])
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Protocol;
    use crate::fixtures;
    use crate::graph::stationary_profile;
    use crate::sim::{integrate, InitialPolicy, SimConfig};

    #[test]
    fn two_node_decay_rate() {
        let g = fixtures::two_node(1.0);
        let p = stationary_profile(&g);
        let cfg = SimConfig::new(
            Protocol::Nominal { eta: 1.0 },
            40.0,
            InitialPolicy::Explicit { values: vec![0.0, 5.0] },
        );
        let tr = integrate(&cfg, &g, &p).unwrap();
        let fit = decay_fit(&tr, (0.0, 40.0)).unwrap();
        assert!((fit.rate - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn stationary_start_cannot_be_fitted() {
        let g = fixtures::nine_node();
        let p = stationary_profile(&g);
        let cfg = SimConfig::new(
            Protocol::Nominal { eta: 1.2 },
            5.0,
            InitialPolicy::Explicit { values: p.distances.clone() },
        );
        let tr = integrate(&cfg, &g, &p).unwrap();
        assert!(matches!(decay_fit(&tr, (0.0, 5.0)), Err(SimError::WindowTooShort { .. })));
        let mono = monotonicity_check(&tr);
        assert!(mono.passed());
        assert!(tr.v_plus.iter().chain(&tr.v_minus).all(|&v| v == 0.0));
    }

    #[test]
    fn overestimate_run_keeps_v_minus_zero() {
        let g = fixtures::nine_node();
        let p = stationary_profile(&g);
        let cfg = SimConfig::new(
            Protocol::Nominal { eta: 1.2 },
            10.0,
            InitialPolicy::Overestimate { lo: 0.0, hi: 10.0, seed: 9 },
        );
        let tr = integrate(&cfg, &g, &p).unwrap();
        assert!(tr.v_minus.iter().all(|&v| v == 0.0));
        assert!(monotonicity_check(&tr).passed());
    }

    #[test]
    fn theorem_bound_arithmetic() {
        let f = TbgParams::new(4.0, 1e-4).unwrap().window_factor();
        let bound = 19.0 * f * 10.0;
        assert!((bound - 0.019).abs() < 1e-4);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
