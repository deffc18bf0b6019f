use std::path::Path;

use anyhow::{Context, Result};
use dbmc::dynamics::{nonnegative_after, Protocol};
use dbmc::graph::{stationary_profile, Graph, StationaryProfile};
use dbmc::sim::{
    decay_fit, integrate, max_abs, monotonicity_check, monotonicity_check_from, ppt_bound_check, ultimate_error,
    InitialPolicy, Trajectory,
};
use dbmc::small_gain::{
    cycle_contraction_bruteforce, no_increase_probe, sufficient_condition, Certificate, GainMatrix,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::write_trajectory_file;
use crate::spec::{ExperimentSpec, ProtocolKind};

pub const BOUND_TOLERANCE: f64 = 1e-6;
pub const TERMINAL_FRACTION: f64 = 1e-3;
pub const NONNEGATIVE_MARGIN: f64 = 0.05;
pub const REFIT_R2: f64 = 0.99;
pub const FINAL_OVER_ULTIMATE: f64 = 1.5;
/// Largest graph the certificate command also checks by cycle enumeration.
pub const BRUTE_FORCE_NODES: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct GraphReport {
    pub n: usize,
    pub edges: usize,
    /// 1-based.
    pub sources: Vec<usize>,
    pub effective_diameter: usize,
    pub zeta: f64,
    pub zeta_unconstrained: bool,
    pub layer_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GraphReport {
    pub fn new(g: &Graph, p: &StationaryProfile, seed: Option<u64>) -> Self {
        GraphReport {
            n: g.node_count(),
            edges: g.edge_count(),
            sources: g.sources().iter().map(|s| s + 1).collect(),
            effective_diameter: p.effective_diameter,
            zeta: p.zeta,
            zeta_unconstrained: p.zeta_unconstrained,
            layer_sizes: p.layers.iter().map(Vec::len).collect(),
            seed,
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "nodes {}  edges {}  sources {:?}\neffective diameter D(G) = {}\nzeta = {}{}\nlayer sizes {:?}",
            self.n,
            self.edges,
            self.sources,
            self.effective_diameter,
            self.zeta,
            if self.zeta_unconstrained { " (unconstrained)" } else { "" },
            self.layer_sizes
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("\nseed used {seed}"));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub graph: GraphReport,
    pub t_end: f64,
    pub dt: f64,
    pub samples: usize,
    pub e_max0: f64,
    pub final_max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_gain: Option<Certificate>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Summary {
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

pub struct RunOutput {
    pub summary: Summary,
    pub trajectory: Trajectory,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunOutput> {
    let (g, graph_seed) = spec.graph.build(spec.seed)?;
    let profile = stationary_profile(&g);
    let cfg = spec.sim_config(&g, profile.effective_diameter)?;
    let tr = integrate(&cfg, &g, &profile)?;

    let mut checks = Vec::new();
    let mut decay = None;
    let mut small_gain = None;
    match &cfg.protocol {
        Protocol::Ppt { tbg } => {
            if matches!(cfg.initial, InitialPolicy::Overestimate { .. }) {
                let r = ppt_bound_check(&tr, tbg, BOUND_TOLERANCE);
                checks.push(Check {
                    name: "ppt_bound".into(),
                    passed: r.passed(),
                    detail: json!({
                        "bound": r.bound,
                        "deadline": r.deadline,
                        "tolerance": r.tolerance,
                        "bound_ok": r.bound_ok,
                        "layers_ok": r.layers_ok,
                        "nonnegative_ok": r.nonnegative_ok,
                        "min_error": r.min_error,
                        "all_bounded_time": r.all_bounded_time,
                        "first_satisfaction": r.first_satisfaction,
                        "violations": r.violations.iter().map(|v| json!({
                            "node": v.node + 1, "t": v.t, "value": v.value, "bound": v.bound
                        })).collect::<Vec<_>>(),
                    }),
                });
            }
            checks.push(monotonicity(&tr));
        }
        Protocol::Pt { .. } => {
            checks.push(pt_terminal(&tr));
            checks.push(monotonicity(&tr));
        }
        Protocol::Nominal { .. } => {
            checks.push(monotonicity(&tr));
            decay = fit_first_segment(&tr).ok();
        }
        Protocol::Perturbed { eta, .. } => {
            small_gain = Some(sufficient_condition(*eta, profile.zeta, profile.effective_diameter));
            let fit = fit_first_segment(&tr);
            let u = ultimate_error(&first_segment(&tr), 0.2);
            checks.push(Check {
                name: "decay_fit".into(),
                passed: matches!(&fit, Ok(v) if v["rate"].as_f64().is_some_and(|p| p > 0.0)),
                detail: fit.as_ref().map_or_else(|e| json!({ "error": e.to_string() }), Clone::clone),
            });
            checks.push(Check {
                name: "ultimate_bound".into(),
                passed: u.is_finite(),
                detail: json!({ "median_max_error_final_20pct": u }),
            });
            decay = fit.ok();
            if tr.segments.len() > 1 {
                checks.push(reconvergence(&tr));
            }
        }
        Protocol::Abs { eta, weights } => {
            let (w_min, _) = weights.bounds(&g);
            checks.push(abs_nonnegative(&tr, *eta, w_min));
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    let summary = Summary {
        name: spec.name.clone(),
        protocol: spec.protocol,
        seed: spec.seed,
        graph: GraphReport::new(&g, &profile, graph_seed),
        t_end: cfg.t_end,
        dt: cfg.dt,
        samples: tr.len(),
        e_max0: tr.e_max0,
        final_max_error: tr.errors.last().map_or(0.0, |e| max_abs(e)),
        decay,
        small_gain,
        checks,
        passed,
    };
    Ok(RunOutput { summary, trajectory: tr })
}

fn monotonicity(tr: &Trajectory) -> Check {
    let r = monotonicity_check(tr);
    Check { name: "monotonicity".into(), passed: r.passed(), detail: serde_json::to_value(&r).unwrap_or(Value::Null) }
}

fn pt_terminal(tr: &Trajectory) -> Check {
    let (Some(pre), Some(term)) = (tr.last_pre_horizon, tr.pt_terminal) else {
        return Check {
            name: "pt_terminal".into(),
            passed: false,
            detail: json!({ "error": "run ended before the prescribed time" }),
        };
    };
    let err = max_abs(&tr.errors[pre]);
    let frozen = tr.states[term..]
        .iter()
        .all(|x| x.iter().zip(&tr.states[term]).all(|(a, b)| a.to_bits() == b.to_bits()));
    Check {
        name: "pt_terminal".into(),
        passed: err <= TERMINAL_FRACTION * tr.e_max0 && frozen,
        detail: json!({
            "t_last_before_horizon": tr.times[pre],
            "max_error": err,
            "limit": TERMINAL_FRACTION * tr.e_max0,
            "held_constant": frozen,
        }),
    }
}

fn first_segment(tr: &Trajectory) -> Trajectory {
    let end = tr.segments.get(1).map_or(tr.len(), |s| s.start);
    let mut t = tr.clone();
    t.times.truncate(end);
    t.states.truncate(end);
    t.errors.truncate(end);
    t.v_plus.truncate(end);
    t.v_minus.truncate(end);
    t.segments.truncate(1);
    t
}

fn fit_first_segment(tr: &Trajectory) -> Result<Value> {
    let seg = first_segment(tr);
    let window = (0.0, *seg.times.last().unwrap_or(&0.0));
    let fit = decay_fit(&seg, window)?;
    Ok(json!({
        "rate": fit.rate,
        "offset": fit.offset,
        "r_squared": fit.r_squared,
        "floor": fit.floor,
        "points": fit.points,
        "good_fit": fit.r_squared >= REFIT_R2,
    }))
}

/// After the first source change: V+ jumps at the event, does not grow by
/// more than the pre-event ultimate error afterwards, and the final error is
/// within 1.5 times that ultimate error.
fn reconvergence(tr: &Trajectory) -> Check {
    let b = tr.segments[1].start;
    let t_event = tr.times[b];
    let m = tr.max_abs();
    let mut pre: Vec<f64> = (0..b).filter(|&k| tr.times[k] >= 0.8 * t_event).map(|k| m[k]).collect();
    pre.sort_by(f64::total_cmp);
    let pre_ultimate = pre.get(pre.len() / 2).copied().unwrap_or(f64::NAN);
    let spike = tr.v_plus[b] > tr.v_plus[b - 1];
    let mono = monotonicity_check_from(tr, b, pre_ultimate);
    let final_err = *m.last().unwrap();
    Check {
        name: "reconvergence".into(),
        passed: spike && mono.plus_ok && final_err <= FINAL_OVER_ULTIMATE * pre_ultimate,
        detail: json!({
            "event_time": t_event,
            "vplus_before": tr.v_plus[b - 1],
            "vplus_after": tr.v_plus[b],
            "pre_event_ultimate": pre_ultimate,
            "final_max_error": final_err,
            "post_event_vplus_monotone": mono.plus_ok,
        }),
    }
}

fn abs_nonnegative(tr: &Trajectory, eta: f64, w_min: f64) -> Check {
    let x0 = &tr.states[0];
    let mut bad = Vec::new();
    for (i, &start) in x0.iter().enumerate() {
        let after = nonnegative_after(eta, w_min, start) + NONNEGATIVE_MARGIN;
        if let Some(k) = (0..tr.len()).find(|&k| tr.times[k] >= after && tr.states[k][i] < 0.0) {
            bad.push(json!({ "node": i + 1, "t": tr.times[k], "value": tr.states[k][i] }));
        }
    }
    Check { name: "nonnegative_after".into(), passed: bad.is_empty(), detail: json!({ "violations": bad }) }
}

pub fn write_outputs(spec: &ExperimentSpec, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(&spec.output_dir)
        .with_context(|| format!("creating {}", spec.output_dir.display()))?;
    write_trajectory_file(&out.trajectory, &spec.csv_path())?;
    write_json(&spec.summary_path(), &out.summary)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallGainReport {
    pub eta: f64,
    pub zeta: f64,
    pub zeta_floored: bool,
    pub effective_diameter: usize,
    pub sufficient_condition: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brute_force: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_counterexamples: Option<usize>,
    pub probe_trials: usize,
    pub certified: bool,
}

pub fn check_small_gain(g: &Graph, eta: f64, probes: usize, seed: u64) -> Result<SmallGainReport> {
    let p = stationary_profile(g);
    let m = GainMatrix::build(g, &p, eta)?;
    let sufficient = sufficient_condition(eta, p.zeta, p.effective_diameter);
    let (brute_force, probe) = match sufficient.factor() {
        Some(d) if g.node_count() <= BRUTE_FORCE_NODES => {
            let cert = cycle_contraction_bruteforce(&m, d, BRUTE_FORCE_NODES)?;
            let probe = no_increase_probe(&m, d, probes, seed)?;
            // Cycles in 1-based ids, like every other report.
            let cert = match cert {
                Certificate::BruteForceRefuted { d, cycle, product } => Certificate::BruteForceRefuted {
                    d,
                    cycle: cycle.into_iter().map(|i| i + 1).collect(),
                    product,
                },
                other => other,
            };
            (Some(cert), Some(probe.counterexamples))
        }
        _ => (None, None),
    };
    // The probe is reported but does not vote: diagonal entries equal eta,
    // so with d * eta > 1 it finds increasing vectors on every graph.
    let certified = sufficient.is_certified() && brute_force.as_ref().is_none_or(Certificate::is_certified);
    Ok(SmallGainReport {
        eta,
        zeta: p.zeta,
        zeta_floored: m.zeta_floored,
        effective_diameter: p.effective_diameter,
        sufficient_condition: sufficient,
        brute_force,
        probe_counterexamples: probe,
        probe_trials: if probe.is_some() { probes } else { 0 },
        certified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub seed: u64,
    pub passed: bool,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs `spec` once per seed on the rayon pool; each run writes its own files.
pub fn sweep(spec: &ExperimentSpec, seeds: &[u64]) -> Vec<SweepEntry> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut s = spec.clone();
            s.seed = seed;
            s.name = format!("{}-seed{seed}", spec.name);
            match run_experiment(&s).and_then(|out| write_outputs(&s, &out).map(|_| out)) {
                Ok(out) => SweepEntry {
                    seed,
                    passed: out.summary.passed,
                    failures: out.summary.failures().into_iter().map(String::from).collect(),
                    error: None,
                },
                Err(e) => SweepEntry { seed, passed: false, failures: Vec::new(), error: Some(format!("{e:#}")) },
            }
        })
        .collect()
}
