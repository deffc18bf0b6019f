//! Experiment description shared by config files and command-line flags.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use dbmc::dynamics::{Protocol, WeightModel};
use dbmc::fixtures;
use dbmc::gain::{RhoParams, TbgParams, DEFAULT_DELTA};
use dbmc::graph::{line, read_graph_file, Graph, LineSource, RandomGeometric, DESK_FIELD_HEIGHT_KM, DESK_FIELD_WIDTH_KM};
use dbmc::sim::{InitialPolicy, SimConfig, SourceChange};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    File { path: PathBuf },
    Geometric { n: usize, width: f64, height: f64, radius: f64, sources: Vec<usize> },
    Line { n: usize, source: LineSource },
    NineNode,
    TwoNode,
}

impl GraphSource {
    /// 100 nodes at the 500-node density, radius 0.25 km, source 1.
    pub fn desk() -> Self {
        GraphSource::Geometric {
            n: 100,
            width: DESK_FIELD_WIDTH_KM,
            height: DESK_FIELD_HEIGHT_KM,
            radius: 0.25,
            sources: vec![1],
        }
    }

    /// 500 nodes on 4 km x 1 km, radius 0.25 km, source 1.
    pub fn full() -> Self {
        GraphSource::Geometric { n: 500, width: 4.0, height: 1.0, radius: 0.25, sources: vec![1] }
    }

    /// Builds the graph; returns the seed actually used for geometric graphs.
    pub fn build(&self, seed: u64) -> Result<(Graph, Option<u64>)> {
        Ok(match self {
            GraphSource::File { path } => {
                (read_graph_file(path).with_context(|| format!("reading {}", path.display()))?, None)
            }
            GraphSource::Geometric { n, width, height, radius, sources } => {
                let zero_based = to_zero_based(sources)?;
                let (g, used) = RandomGeometric::new(*n, *width, *height, *radius, zero_based, seed).generate_with_seed()?;
                (g, Some(used))
            }
            GraphSource::Line { n, source } => (line(*n, *source)?, None),
            GraphSource::NineNode => (fixtures::nine_node(), None),
            GraphSource::TwoNode => (fixtures::two_node(1.0), None),
        })
    }
}

pub fn to_zero_based(ids: &[usize]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&i| match i.checked_sub(1) {
            Some(v) => Ok(v),
            None => bail!("node ids are 1-based, got 0"),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Nominal,
    Ppt,
    Pt,
    Perturbed,
    Abs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainSpec {
    pub eta: f64,
    pub ts: f64,
    pub delta: f64,
    pub tbar: f64,
    pub h: u32,
    pub gamma: f64,
}

impl Default for GainSpec {
    fn default() -> Self {
        GainSpec { eta: 1.2, ts: 4.0, delta: DEFAULT_DELTA, tbar: 4.0, h: 2, gamma: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Stationary value plus a uniform offset.
    Overestimate,
    /// Uniform absolute states.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitSpec {
    pub policy: InitKind,
    pub lo: f64,
    pub hi: f64,
    /// Explicit states, overriding `policy` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec { policy: InitKind::Overestimate, lo: 0.0, hi: 10.0, values: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    Nominal,
    Band { lo: f64, hi: f64 },
}

/// Source change with 1-based ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub time: f64,
    pub sources: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub graph: GraphSource,
    pub protocol: ProtocolKind,
    pub gain: GainSpec,
    pub init: InitSpec,
    pub weights: WeightSpec,
    pub events: Vec<EventSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "run".into(),
            graph: GraphSource::desk(),
            protocol: ProtocolKind::Nominal,
            gain: GainSpec::default(),
            init: InitSpec::default(),
            weights: WeightSpec::Nominal,
            events: Vec::new(),
            t_end: None,
            dt: None,
            sample_every: None,
            output_dir: PathBuf::from("."),
            seed: 0,
        }
    }
}

// Independent streams derived from the one run seed.
const INIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const WEIGHT_STREAM: u64 = 0xc2b2_ae3d_27d4_eb4f;

impl ExperimentSpec {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.csv", self.name))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.summary.json", self.name))
    }

    pub fn tbg(&self) -> Result<TbgParams> {
        Ok(TbgParams::new(self.gain.ts, self.gain.delta)?)
    }

    pub fn rho(&self) -> Result<RhoParams> {
        Ok(RhoParams::new(self.gain.tbar, self.gain.h, self.gain.gamma)?)
    }

    pub fn weight_model(&self, g: &Graph) -> Result<WeightModel> {
        match self.weights {
            WeightSpec::Nominal => Ok(WeightModel::Nominal),
            WeightSpec::Band { lo, hi } => {
                WeightModel::band(g, lo, hi, self.seed ^ WEIGHT_STREAM).map_err(anyhow::Error::msg)
            }
        }
    }

    pub fn protocol(&self, g: &Graph) -> Result<Protocol> {
        let eta = self.gain.eta;
        Ok(match self.protocol {
            ProtocolKind::Nominal => Protocol::Nominal { eta },
            ProtocolKind::Ppt => Protocol::Ppt { tbg: self.tbg()? },
            ProtocolKind::Pt => Protocol::Pt { rho: self.rho()? },
            ProtocolKind::Perturbed => Protocol::Perturbed { eta, weights: self.weight_model(g)? },
            ProtocolKind::Abs => Protocol::Abs { eta, weights: self.weight_model(g)? },
        })
    }

    pub fn initial_policy(&self) -> InitialPolicy {
        let seed = self.seed ^ INIT_STREAM;
        if let Some(values) = &self.init.values {
            return InitialPolicy::Explicit { values: values.clone() };
        }
        match self.init.policy {
            InitKind::Overestimate => InitialPolicy::Overestimate { lo: self.init.lo, hi: self.init.hi, seed },
            InitKind::Random => InitialPolicy::RandomBand { lo: self.init.lo, hi: self.init.hi, seed },
        }
    }

    /// Run length when none is given: one window past the bound deadline
    /// for TBG runs, one second past the horizon for PT runs, otherwise 60 s
    /// or 1.6 times the last event time, whichever is longer.
    pub fn default_t_end(&self, diameter: usize) -> f64 {
        match self.protocol {
            ProtocolKind::Ppt => diameter as f64 * self.gain.ts,
            ProtocolKind::Pt => self.gain.tbar + 1.0,
            _ => self.events.iter().map(|e| 1.6 * e.time).fold(60.0, f64::max),
        }
    }

    pub fn sim_config(&self, g: &Graph, diameter: usize) -> Result<SimConfig> {
        let t_end = self.t_end.unwrap_or_else(|| self.default_t_end(diameter));
        let mut cfg = SimConfig::new(self.protocol(g)?, t_end, self.initial_policy());
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(k) = self.sample_every {
            cfg.sample_every = k;
        }
        for ev in &self.events {
            cfg.events.push(SourceChange { time: ev.time, sources: to_zero_based(&ev.sources)? });
        }
        Ok(cfg)
    }
}
