use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dbmc::graph::{stationary_profile, LineSource};
use dbmc_cli::commands::{self, GraphReport};
use dbmc_cli::output::read_error_table;
use dbmc_cli::plot::render_svg;
use dbmc_cli::spec::{EventSpec, ExperimentSpec, GraphSource, InitKind, ProtocolKind, WeightSpec};

#[derive(Parser)]
#[command(name = "dbmc", version, about = "Distributed biased min-consensus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph file and print its structure.
    Gen {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, env = "DBMC_SEED", default_value_t = 0)]
        seed: u64,
        /// Output graph file.
        #[arg(long, short, default_value = "graph.json")]
        out: PathBuf,
    },
    /// Integrate one experiment and check the convergence property it exercises.
    Run(RunArgs),
    /// Small-gain certificate for the perturbed protocol on a graph.
    CheckSmallgain {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, env = "DBMC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.2)]
        eta: f64,
        /// Random vectors tried against the no-increase condition.
        #[arg(long, default_value_t = 2000)]
        probes: usize,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Render a trajectory CSV as an SVG chart of |e_i(t)|.
    Plot {
        csv: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Repeat a run over several seeds in parallel.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Seeds as a list (1,2,3) or a half-open range (0..8).
        #[arg(long, required = true)]
        seeds: String,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args, Default)]
struct GraphArgs {
    /// Graph file in the JSON graph format.
    #[arg(long, group = "graph_source")]
    graph: Option<PathBuf>,
    /// Random geometric graph: node count, field width and height, radius.
    #[arg(long, num_args = 4, value_names = ["N", "W", "H", "R"], group = "graph_source")]
    random_geometric: Option<Vec<f64>>,
    /// Path graph with unit weights.
    #[arg(long, value_name = "N", group = "graph_source")]
    line: Option<usize>,
    /// End of the path graph holding the source.
    #[arg(long, requires = "line")]
    source: Option<LineSource>,
    /// The 9-node example graph with sources 1 and 9.
    #[arg(long, group = "graph_source")]
    nine_node: bool,
    /// Two nodes joined by a unit edge, source 1.
    #[arg(long, group = "graph_source")]
    two_node: bool,
    /// 500-node geometric preset on 4 km x 1 km.
    #[arg(long, group = "graph_source")]
    full: bool,
    /// Source ids (1-based) for geometric graphs.
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    sources: Option<Vec<usize>>,
}

impl GraphArgs {
    fn source(&self) -> Result<Option<GraphSource>> {
        let mut source = if let Some(path) = &self.graph {
            Some(GraphSource::File { path: path.clone() })
        } else if let Some(v) = &self.random_geometric {
            if v[0].fract() != 0.0 || v[0] < 0.0 {
                bail!("node count must be a non-negative integer, got {}", v[0]);
            }
            Some(GraphSource::Geometric { n: v[0] as usize, width: v[1], height: v[2], radius: v[3], sources: vec![1] })
        } else if let Some(n) = self.line {
            Some(GraphSource::Line { n, source: self.source.unwrap_or(LineSource::Rightmost) })
        } else if self.nine_node {
            Some(GraphSource::NineNode)
        } else if self.two_node {
            Some(GraphSource::TwoNode)
        } else if self.full {
            Some(GraphSource::full())
        } else {
            None
        };
        if let Some(ids) = &self.sources {
            match &mut source {
                Some(GraphSource::Geometric { sources, .. }) => *sources = ids.clone(),
                None => {
                    let mut desk = GraphSource::desk();
                    if let GraphSource::Geometric { sources, .. } = &mut desk {
                        *sources = ids.clone();
                    }
                    source = Some(desk);
                }
                Some(_) => bail!("--sources applies to geometric graphs only"),
            }
        }
        Ok(source)
    }
}

#[derive(Args, Default)]
struct RunArgs {
    /// Experiment description (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolKind>,
    #[arg(long)]
    eta: Option<f64>,
    /// Time-base generator period.
    #[arg(long = "Ts")]
    ts: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Prescribed convergence time of the PT gain.
    #[arg(long = "Tbar")]
    tbar: Option<f64>,
    #[arg(long)]
    h: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    /// Range of the initial offsets (overestimate) or states (random).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    init_range: Option<Vec<f64>>,
    /// Per-arc weight multipliers drawn in [LO, HI].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    band: Option<Vec<f64>>,
    /// `source-change T NODE...`; may be repeated.
    #[arg(long, num_args = 3.., value_names = ["KIND", "T", "NODE"], action = clap::ArgAction::Append)]
    event: Vec<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    sample_every: Option<usize>,
    #[arg(long, env = "DBMC_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Base name of the output files.
    #[arg(long)]
    name: Option<String>,
}

impl RunArgs {
    fn spec(&self, matches_events: Vec<Vec<String>>) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(g) = self.graph.source()? {
            spec.graph = g;
        }
        if let Some(p) = self.protocol {
            spec.protocol = p;
        }
        let gain = &mut spec.gain;
        for (field, value) in [
            (&mut gain.eta, self.eta),
            (&mut gain.ts, self.ts),
            (&mut gain.delta, self.delta),
            (&mut gain.tbar, self.tbar),
            (&mut gain.gamma, self.gamma),
        ] {
            if let Some(v) = value {
                *field = v;
            }
        }
        if let Some(h) = self.h {
            gain.h = h;
        }
        if let Some(k) = self.init {
            spec.init.policy = k;
        }
        if let Some(r) = &self.init_range {
            spec.init.lo = r[0];
            spec.init.hi = r[1];
        }
        if let Some(b) = &self.band {
            spec.weights = WeightSpec::Band { lo: b[0], hi: b[1] };
        }
        if !matches_events.is_empty() {
            spec.events = matches_events.iter().map(|e| parse_event(e)).collect::<Result<_>>()?;
        }
        spec.t_end = self.t_end.or(spec.t_end);
        spec.dt = self.dt.or(spec.dt);
        spec.sample_every = self.sample_every.or(spec.sample_every);
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(out) = &self.out {
            spec.output_dir = out.clone();
        }
        if let Some(name) = &self.name {
            spec.name = name.clone();
        }
        Ok(spec)
    }
}

fn parse_event(words: &[String]) -> Result<EventSpec> {
    let [kind, time, nodes @ ..] = words else {
        bail!("--event needs KIND T NODE...");
    };
    if kind != "source-change" {
        bail!("unknown event kind {kind:?}; expected source-change");
    }
    let time: f64 = time.parse().with_context(|| format!("event time {time:?}"))?;
    let sources = nodes
        .iter()
        .flat_map(|n| n.split(','))
        .map(|n| n.parse::<usize>().with_context(|| format!("event node {n:?}")))
        .collect::<Result<Vec<_>>>()?;
    if sources.is_empty() {
        bail!("source-change needs at least one node");
    }
    Ok(EventSpec { time, sources })
}

/// Splits the flat `--event` values back into one group per occurrence.
fn event_groups(matches: &clap::ArgMatches) -> Vec<Vec<String>> {
    let m = match matches.subcommand() {
        Some(("run", m)) | Some(("sweep", m)) => m,
        _ => return Vec::new(),
    };
    m.get_occurrences::<String>("event")
        .map(|occ| occ.map(|o| o.cloned().collect()).collect())
        .unwrap_or_default()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim().parse().context("seed range end")?;
        if a >= b {
            bail!("empty seed range {s}");
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().with_context(|| format!("seed {x:?}"))).collect()
}

fn run(cli: Cli, events: Vec<Vec<String>>) -> Result<bool> {
    match cli.command {
        Command::Gen { graph, seed, out } => {
            let source = graph.source()?.unwrap_or_else(GraphSource::desk);
            let (g, used) = source.build(seed)?;
            let p = stationary_profile(&g);
            g.write_file(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", GraphReport::new(&g, &p, used).text());
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Run(args) => {
            let spec = args.spec(events)?;
            let out = commands::run_experiment(&spec)?;
            commands::write_outputs(&spec, &out)?;
            let s = &out.summary;
            for c in &s.checks {
                println!("{}: {}", c.name, if c.passed { "PASS" } else { "FAIL" });
            }
            println!("wrote {} and {}", spec.csv_path().display(), spec.summary_path().display());
            if !s.passed {
                let failures: Vec<_> = s.checks.iter().filter(|c| !c.passed).collect();
                eprintln!("{}", serde_json::to_string(&serde_json::json!({ "failed": failures }))?);
            }
            Ok(s.passed)
        }
        Command::CheckSmallgain { graph, seed, eta, probes, json } => {
            let source = graph.source()?.unwrap_or(GraphSource::NineNode);
            let (g, _) = source.build(seed)?;
            let r = commands::check_small_gain(&g, eta, probes, seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("eta = {}  zeta = {}  D(G) = {}", r.eta, r.zeta, r.effective_diameter);
                match r.sufficient_condition.factor() {
                    Some(d) => println!("sufficient condition: certified, d = {d}"),
                    None => println!("sufficient condition: failed ({})", serde_json::to_string(&r.sufficient_condition)?),
                }
                if let Some(b) = &r.brute_force {
                    println!("cycle enumeration: {}", serde_json::to_string(b)?);
                }
                if let Some(c) = r.probe_counterexamples {
                    println!("probe (informational): {c} of {} random vectors show no decrease", r.probe_trials);
                }
                println!("verdict: {}", if r.certified { "certified" } else { "not certified" });
            }
            Ok(r.certified)
        }
        Command::Plot { csv, out } => {
            let file = std::fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let table = read_error_table(file).with_context(|| format!("reading {}", csv.display()))?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&out, render_svg(&table)).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Sweep { run, seeds, jobs } => {
            let spec = run.spec(events)?;
            let seeds = parse_seeds(&seeds)?;
            std::fs::create_dir_all(&spec.output_dir)?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
            let entries = pool.install(|| commands::sweep(&spec, &seeds));
            for e in &entries {
                match &e.error {
                    Some(err) => println!("seed {}: ERROR {err}", e.seed),
                    None if e.passed => println!("seed {}: PASS", e.seed),
                    None => println!("seed {}: FAIL {:?}", e.seed, e.failures),
                }
            }
            let path = spec.output_dir.join(format!("{}.sweep.json", spec.name));
            commands::write_json(&path, &entries)?;
            println!("wrote {}", path.display());
            Ok(entries.iter().all(|e| e.passed))
        }
    }
}

fn main() -> ExitCode {
    let matches = <Cli as clap::CommandFactory>::command().get_matches();
    let events = event_groups(&matches);
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli, events) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
