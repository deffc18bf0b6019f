//! Fixed-step RK4 integration of the protocols, with source-change events and
//! the metrics and bound checks evaluated on the resulting trajectories.

mod checks;
mod metrics;

pub use checks::{
    decay_fit, monotonicity_check, monotonicity_check_from, ppt_bound_check, ultimate_error, DecayFit,
    MonotonicityReport, StepIncrease,
    PptBoundReport, Violation,
};
pub use metrics::{active_sets, max_abs, v_minus, v_plus, ACTIVE_TOLERANCE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Protocol;
use crate::graph::{stationary_profile, Graph, GraphError, NodeId, StationaryProfile};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state became non-finite at t = {t} (node {node})")]
    NonFiniteState { t: f64, node: NodeId },
    #[error("event at t = {0} is not after the start of the run")]
    EventBeforeStart(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fit window holds {points} usable samples, need at least {needed}")]
    WindowTooShort { points: usize, needed: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InitialPolicy {
    /// `x_i(0) = x_i* + U[lo, hi]` for non-sources.
    Overestimate { lo: f64, hi: f64, seed: u64 },
    /// `x_i(0) = U[lo, hi]` for non-sources.
    RandomBand { lo: f64, hi: f64, seed: u64 },
    /// Given states; source entries must be 0.
    Explicit { values: Vec<f64> },
}

impl InitialPolicy {
    pub fn build(&self, g: &Graph, profile: &StationaryProfile) -> Result<Vec<f64>, SimError> {
        let n = g.node_count();
        let draw = |lo: f64, hi: f64, seed: u64, base: &dyn Fn(usize) -> f64| {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(SimError::InvalidConfig(format!("initial band [{lo}, {hi}]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|i| {
                    let u = lo + (hi - lo) * rng.gen::<f64>();
                    if g.is_source(i) {
                        0.0
                    } else {
                        base(i) + u
                    }
                })
                .collect())
        };
        match self {
            InitialPolicy::Overestimate { lo, hi, seed } => {
                if *lo < 0.0 {
                    return Err(SimError::InvalidConfig(format!("overestimate offset {lo} < 0")));
                }
                draw(*lo, *hi, *seed, &|i| profile.distances[i])
            }
            InitialPolicy::RandomBand { lo, hi, seed } => draw(*lo, *hi, *seed, &|_| 0.0),
            InitialPolicy::Explicit { values } => {
                if values.len() != n {
                    return Err(SimError::InvalidConfig(format!("{} initial values for {n} nodes", values.len())));
                }
                if let Some(&s) = g.sources().iter().find(|&&s| values[s] != 0.0) {
                    return Err(SimError::InvalidConfig(format!("source {} must start at 0", s + 1)));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::InvalidConfig("non-finite initial value".into()));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Switch the source set at `time` (0-based ids).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceChange {
    pub time: f64,
    pub sources: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(flatten)]
    pub protocol: Protocol,
    pub t_end: f64,
    pub dt: f64,
    /// Step-shrink factor for the prescribed-time endgame.
    pub pt_shrink: f64,
    pub sample_every: usize,
    pub initial: InitialPolicy,
    #[serde(default)]
    pub events: Vec<SourceChange>,
}

impl SimConfig {
    /// Defaults: `dt = 1e-3 min(1, window)`, `pt_shrink = 0.5`, every 10th step sampled.
    pub fn new(protocol: Protocol, t_end: f64, initial: InitialPolicy) -> Self {
        let window = match &protocol {
            Protocol::Ppt { tbg } => tbg.period,
            Protocol::Pt { rho } => rho.horizon,
            _ => 1.0,
        };
        SimConfig {
            protocol,
            t_end,
            dt: 1e-3 * window.min(1.0),
            pt_shrink: 0.5,
            sample_every: 10,
            initial,
            events: Vec::new(),
        }
    }

    pub fn validate(&self, g: &Graph) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt = {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::InvalidConfig(format!("t_end = {}", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(SimError::InvalidConfig("sample_every = 0".into()));
        }
        if !(self.pt_shrink > 0.0 && self.pt_shrink < 1.0) {
            return Err(SimError::InvalidConfig(format!("pt_shrink = {}", self.pt_shrink)));
        }
        self.protocol
            .gain_schedule()
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.protocol.weights().validate(g).map_err(SimError::InvalidConfig)?;
        let mut last = 0.0;
        for ev in &self.events {
            if ev.time <= 0.0 {
                return Err(SimError::EventBeforeStart(ev.time));
            }
            if ev.time >= self.t_end || ev.time < last {
                return Err(SimError::InvalidConfig(format!(
                    "event at t = {} must lie in (0, t_end) in increasing order",
                    ev.time
                )));
            }
            last = ev.time;
        }
        Ok(())
    }
}

/// Stretch of samples measured against one source set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Index of the first sample of this segment.
    pub start: usize,
    pub sources: Vec<NodeId>,
    pub profile: StationaryProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `x_i(t) - x_i*` against the profile of the sample's segment.
    pub errors: Vec<Vec<f64>>,
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub e_max0: f64,
    pub segments: Vec<Segment>,
    /// Base step of the run.
    pub dt: f64,
    /// Last sample strictly before the prescribed time, for PT runs.
    pub last_pre_horizon: Option<usize>,
    /// First sample at the prescribed time, for PT runs.
    pub pt_terminal: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs(&self) -> Vec<f64> {
        self.errors.iter().map(|e| max_abs(e)).collect()
    }

    pub fn segment_of(&self, k: usize) -> &Segment {
        let idx = self.segments.partition_point(|s| s.start <= k);
        &self.segments[idx.saturating_sub(1)]
    }

    /// First sample index of every segment after the first.
    pub fn event_boundaries(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    /// Classical RK4 step; entries where `pinned` is set are left untouched.
    #[allow(clippy::needless_range_loop)]
    fn step<F>(&mut self, f: &F, t: f64, h: f64, x: &mut [f64], pinned: &[bool])
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let n = x.len();
        f(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            if !pinned[i] {
                x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
            }
        }
    }
}

/// One RK4 step of `f` from `(t, x)`; `pinned` entries stay fixed.
pub fn rk4_step<F>(f: F, t: f64, h: f64, x: &mut [f64], pinned: &[bool])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    Rk4::new(x.len()).step(&f, t, h, x, pinned);
}

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn push(&mut self, t: f64, x: &[f64], profile: &StationaryProfile) {
        let e: Vec<f64> = x.iter().zip(&profile.distances).map(|(a, b)| a - b).collect();
        self.traj.v_plus.push(v_plus(&e));
        self.traj.v_minus.push(v_minus(&e));
        self.traj.times.push(t);
        self.traj.states.push(x.to_vec());
        self.traj.errors.push(e);
    }
}

fn check_finite(t: f64, x: &[f64]) -> Result<(), SimError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(SimError::NonFiniteState { t, node }),
        None => Ok(()),
    }
}

/// Integrates `cfg.protocol` on `g` from the initial policy, sampling every
/// `sample_every` steps. `profile` must belong to `g`.
pub fn integrate(cfg: &SimConfig, g: &Graph, profile: &StationaryProfile) -> Result<Trajectory, SimError> {
    cfg.validate(g)?;
    if profile.distances.len() != g.node_count() {
        return Err(SimError::InvalidConfig("profile does not match graph".into()));
    }
    let n = g.node_count();
    let mut x = cfg.initial.build(g, profile)?;
    let mut graph = g.clone();
    let mut profile = profile.clone();
    let mut pinned: Vec<bool> = (0..n).map(|i| graph.is_source(i)).collect();

    let mut rec = Recorder {
        traj: Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            errors: Vec::new(),
            v_plus: Vec::new(),
            v_minus: Vec::new(),
            e_max0: 0.0,
            segments: vec![Segment { start: 0, sources: graph.sources().to_vec(), profile: profile.clone() }],
            dt: cfg.dt,
            last_pre_horizon: None,
            pt_terminal: None,
        },
    };
    rec.push(0.0, &x, &profile);
    rec.traj.e_max0 = rec.traj.errors[0].iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (horizon, beta) = match &cfg.protocol {
        Protocol::Pt { rho } => (Some(rho.horizon), pt_beta(cfg.pt_shrink, rho.h)),
        _ => (None, 1.0),
    };
    let mut rk = Rk4::new(n);
    let mut events = cfg.events.iter().peekable();
    let dt = cfg.dt;
    let total_steps = (cfg.t_end / dt).round() as u64;

    // Regular grid t_k = k dt; the PT endgame leaves it temporarily and
    // rejoins at the horizon.
    let mut k: u64 = 0;
    let mut t = 0.0;
    let mut since_sample = 0usize;
    let mut held = false;
    while k < total_steps {
        if let Some(ev) = events.peek() {
            let k_ev = (ev.time / dt).round() as u64;
            if k == k_ev && !held {
                if since_sample != 0 {
                    rec.push(t, &x, &profile);
                }
                graph = graph.with_sources(&ev.sources)?;
                for &s in graph.sources() {
                    x[s] = 0.0;
                }
                pinned = (0..n).map(|i| graph.is_source(i)).collect();
                profile = stationary_profile(&graph);
                rec.traj.segments.push(Segment {
                    start: rec.traj.len(),
                    sources: graph.sources().to_vec(),
                    profile: profile.clone(),
                });
                rec.push(t, &x, &profile);
                since_sample = 0;
                events.next();
                continue;
            }
        }

        if held {
            k += 1;
            t = k as f64 * dt;
        } else if let Some(hz) = horizon.filter(|&hz| beta * (hz - t) < dt) {
            pt_endgame(cfg, &graph, &mut rk, &mut x, &pinned, t, hz, beta, &mut rec, &profile)?;
            held = true;
            // Rejoin the base grid at the first grid point after the horizon.
            k = ((hz / dt) * (1.0 + 1e-12)).floor() as u64;
            t = hz;
            since_sample = 0;
            continue;
        } else {
            let f = |tt: f64, xx: &[f64], out: &mut [f64]| cfg.protocol.rhs_into(tt, xx, &graph, out);
            rk.step(&f, t, dt, &mut x, &pinned);
            k += 1;
            t = k as f64 * dt;
            check_finite(t, &x)?;
        }
        since_sample += 1;
        if since_sample == cfg.sample_every || k == total_steps {
            rec.push(t, &x, &profile);
            since_sample = 0;
        }
    }
    Ok(rec.traj)
}

/// Shrink factor actually used: capped at `1 / (2 (1 + h))` so that
/// `gain * step` stays inside the RK4 stability interval.
pub fn pt_beta(pt_shrink: f64, h: u32) -> f64 {
    pt_shrink.min(0.5 / (1.0 + f64::from(h)))
}

/// Steps of `min(dt, beta (T - t))` up to `T (1 - 1e-9)`, then the state is
/// frozen at `T`.
#[allow(clippy::too_many_arguments)]
fn pt_endgame(
    cfg: &SimConfig,
    g: &Graph,
    rk: &mut Rk4,
    x: &mut [f64],
    pinned: &[bool],
    mut t: f64,
    horizon: f64,
    beta: f64,
    rec: &mut Recorder,
    profile: &StationaryProfile,
) -> Result<(), SimError> {
    let floor = 1e-9 * horizon;
    let f = |tt: f64, xx: &[f64], out: &mut [f64]| cfg.protocol.rhs_into(tt, xx, g, out);
    let mut steps = 0usize;
    while horizon - t > floor {
        let h = cfg.dt.min(beta * (horizon - t)).max(floor.min(horizon - t));
        rk.step(&f, t, h, x, pinned);
        t += h;
        check_finite(t, x)?;
        steps += 1;
        if steps.is_multiple_of(cfg.sample_every) && horizon - t > floor {
            rec.push(t, x, profile);
        }
    }
    rec.push(t, x, profile);
    rec.traj.last_pre_horizon = Some(rec.traj.len() - 1);
    rec.push(horizon, x, profile);
    rec.traj.pt_terminal = Some(rec.traj.len() - 1);
    Ok(())
}
