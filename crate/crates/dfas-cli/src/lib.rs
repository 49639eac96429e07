//! Command line front end for the analysis engines.
//!
//! Three subcommands share one pipeline: load a model, validate it, build
//! the product graph, attach a value domain, run an engine. `analyze` prints
//! raw results, `check` evaluates the model's assertions, `compare` runs two
//! engine configurations and relates their precision per node.
//!
//! Exit codes: 0 on success (for `check`, all assertions verified), 1 when
//! `check` leaves an assertion unverified, 2 on any error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dfas::backward::{compute_jofp, BackwardOptions, BackwardStats, JofpOutcome, TraceEvent};
use dfas::domains::eval_bool;
use dfas::forward::{joinmap, kildall, ForwardOptions, ForwardStats, QueueConfigMap};
use dfas::model::engine_disabled;
use dfas::{
    attach_domain, build_vcfg, parse_model, validate, AbstractValue, Analyzable, Attached, CpEnv,
    Diagnostic, DomainKind, EngineKind, Model, TransferFunction, ValueTransfer, Vcfg,
};

// ---------------------------------------------------------------------------
// Argument surface.
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "dfas",
    version,
    about = "Data flow analysis for asynchronous message-passing models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Run one engine over a model and print its results.
    Analyze(AnalyzeArgs),
    /// Evaluate the model's assertions under one engine.
    Check(CheckArgs),
    /// Run two engine configurations and compare their precision.
    Compare(CompareArgs),
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum EngineOpt {
    /// Demand-driven backward engine (exact for distributive domains).
    Backward,
    /// Forward fixpoint over queue configurations bounded by theta.
    Forward,
    /// Join over all paths, ignoring queue feasibility.
    Jop,
}

impl EngineOpt {
    fn kind(self) -> EngineKind {
        match self {
            EngineOpt::Backward => EngineKind::Backward,
            EngineOpt::Forward => EngineKind::Forward,
            EngineOpt::Jop => EngineKind::Jop,
        }
    }

    fn name(self) -> &'static str {
        match self {
            EngineOpt::Backward => "backward",
            EngineOpt::Forward => "forward",
            EngineOpt::Jop => "jop",
        }
    }
}

fn domain_name(d: DomainKind) -> &'static str {
    match d {
        DomainKind::Cp => "cp",
        DomainKind::Lcp => "lcp",
        DomainKind::Ccp => "ccp",
    }
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Model file (JSON).
    pub model: PathBuf,
    /// Analysis engine.
    #[arg(long, value_enum, default_value_t = EngineOpt::Backward)]
    pub engine: EngineOpt,
    /// Value domain. The backward engine needs a function domain (lcp, ccp).
    #[arg(long, default_value = "lcp")]
    pub domain: DomainKind,
    /// Target of the form `process.state`. Required for the backward engine;
    /// may be given more than once.
    #[arg(long)]
    pub target: Vec<String>,
    /// Queue cutoff for the forward engine.
    #[arg(long, default_value_t = 2)]
    pub theta: u32,
    /// Worker threads for the backward engine.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Record covering decisions (backward only; forces --threads 1).
    #[arg(long)]
    pub trace: bool,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Abort when the backward engine retains more than this many paths.
    #[arg(long, default_value_t = 2_000_000)]
    pub max_paths: usize,
    /// Abort when the forward engine visits more than this many nodes.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    /// Refuse product graphs larger than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_nodes: usize,
}

#[derive(Args)]
pub struct CheckArgs {
    /// Model file (JSON).
    pub model: PathBuf,
    /// Analysis engine.
    #[arg(long, value_enum, default_value_t = EngineOpt::Backward)]
    pub engine: EngineOpt,
    /// Value domain. The backward engine needs a function domain (lcp, ccp).
    #[arg(long, default_value = "lcp")]
    pub domain: DomainKind,
    /// Queue cutoff for the forward engine.
    #[arg(long, default_value_t = 2)]
    pub theta: u32,
    /// Worker threads for the backward engine.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Abort when the backward engine retains more than this many paths.
    #[arg(long, default_value_t = 2_000_000)]
    pub max_paths: usize,
    /// Abort when the forward engine visits more than this many nodes.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    /// Refuse product graphs larger than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_nodes: usize,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Model file (JSON).
    pub model: PathBuf,
    /// Left configuration, `engine:domain[:theta]`, e.g. `backward:lcp`.
    pub left: EngineConfig,
    /// Right configuration, e.g. `forward:cp:3`.
    pub right: EngineConfig,
    /// Restrict the comparison to `process.state` targets.
    #[arg(long)]
    pub target: Vec<String>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Abort when the backward engine retains more than this many paths.
    #[arg(long, default_value_t = 2_000_000)]
    pub max_paths: usize,
    /// Abort when the forward engine visits more than this many nodes.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    /// Refuse product graphs larger than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_nodes: usize,
}

/// One engine configuration for `compare`: engine, domain, optional theta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub engine: EngineOpt,
    pub domain: DomainKind,
    pub theta: u32,
}

impl std::str::FromStr for EngineConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let engine = match parts.next() {
            Some("backward") => EngineOpt::Backward,
            Some("forward") => EngineOpt::Forward,
            Some("jop") => EngineOpt::Jop,
            other => {
                return Err(format!(
                    "unknown engine `{}` (expected backward, forward, or jop)",
                    other.unwrap_or("")
                ))
            }
        };
        let domain: DomainKind = parts
            .next()
            .ok_or_else(|| "missing domain: configurations are engine:domain[:theta]".to_string())?
            .parse()?;
        let theta = match parts.next() {
            None => 2,
            Some(t) => t.parse::<u32>().map_err(|_| format!("bad theta `{t}`"))?,
        };
        if parts.next().is_some() {
            return Err(format!("trailing text in configuration `{s}`"));
        }
        Ok(EngineConfig { engine, domain, theta })
    }
}

impl EngineConfig {
    fn label(&self) -> String {
        match self.engine {
            EngineOpt::Forward => {
                format!("{}:{}:{}", self.engine.name(), domain_name(self.domain), self.theta)
            }
            _ => format!("{}:{}", self.engine.name(), domain_name(self.domain)),
        }
    }
}

// ---------------------------------------------------------------------------
// Reports. Field order is the serialization order; everything below must
// stay deterministic for a fixed input, so no maps with hashed iteration.
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct EnvReport {
    pub unreachable: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub vars: BTreeMap<String, String>,
}

fn env_report(env: &CpEnv, names: &[String]) -> EnvReport {
    match env {
        CpEnv::Unreachable => EnvReport { unreachable: true, vars: BTreeMap::new() },
        CpEnv::Env(vals) => EnvReport {
            unreachable: false,
            vars: names
                .iter()
                .zip(vals)
                .map(|(n, v)| {
                    (n.clone(), match v {
                        dfas::CpVal::Const(c) => c.to_string(),
                        dfas::CpVal::Top => "top".to_string(),
                    })
                })
                .collect(),
        },
    }
}

#[derive(Serialize)]
pub struct NodeValue {
    pub node: String,
    pub value: EnvReport,
}

#[derive(Serialize)]
pub struct TargetReport {
    pub target: String,
    pub per_node: Vec<NodeValue>,
    pub value: EnvReport,
}

#[derive(Serialize)]
pub struct QueueEntry {
    pub counts: Vec<u32>,
    pub value: EnvReport,
}

#[derive(Serialize)]
pub struct NodeReport {
    pub node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queues: Option<Vec<QueueEntry>>,
    pub join: EnvReport,
}

#[derive(Serialize)]
pub struct TraceLine {
    pub event: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_demand: Option<Vec<i64>>,
    pub path: String,
    pub demand: Vec<i64>,
    pub ptf: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cover: Vec<String>,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum StatsReport {
    Backward(BackwardStats),
    Forward(ForwardStats),
}

#[derive(Serialize)]
pub struct AnalysisReport {
    pub model: String,
    pub engine: String,
    pub domain: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<u32>,
    pub counters: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<TargetReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeReport>>,
    pub stats: StatsReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceLine>,
}

#[derive(Serialize)]
pub struct AssertionReport {
    pub process: String,
    pub state: String,
    pub expr: String,
    pub nodes: Vec<String>,
    pub value: EnvReport,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Serialize)]
pub struct CheckReport {
    pub model: String,
    pub engine: String,
    pub domain: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<u32>,
    pub assertions: Vec<AssertionReport>,
    pub verified: usize,
    pub total: usize,
    pub ok: bool,
}

#[derive(Serialize)]
pub struct NodeCompare {
    pub node: String,
    pub left: EnvReport,
    pub right: EnvReport,
    pub relation: String,
}

#[derive(Serialize, Default)]
pub struct CompareSummary {
    pub equal: usize,
    pub left_below: usize,
    pub right_below: usize,
    pub incomparable: usize,
}

#[derive(Serialize)]
pub struct CompareReport {
    pub model: String,
    pub left: String,
    pub right: String,
    pub nodes: Vec<NodeCompare>,
    pub summary: CompareSummary,
}

// ---------------------------------------------------------------------------
// Shared pipeline.
// ---------------------------------------------------------------------------

struct Loaded {
    model: Model,
    name: String,
    g: Arc<Vcfg>,
    diags: Vec<Diagnostic>,
}

fn load_model(path: &Path, max_nodes: usize) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model file `{}`", path.display()))?;
    let model = parse_model(&text).with_context(|| format!("in `{}`", path.display()))?;
    let diags = validate(&model);
    let fatal: Vec<&Diagnostic> = diags.iter().filter(|d| d.fatal).collect();
    if !fatal.is_empty() {
        let msgs: Vec<String> =
            fatal.iter().map(|d| format!("[{}] {}", d.code, d.message)).collect();
        bail!("model `{}` is invalid:\n  {}", path.display(), msgs.join("\n  "));
    }
    let g = Arc::new(build_vcfg(&model)?);
    if g.node_count() > max_nodes {
        bail!(
            "product graph has {} nodes, over the --max-nodes limit of {}",
            g.node_count(),
            max_nodes
        );
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Loaded { model, name, g, diags })
}

fn require_engine(loaded: &Loaded, engine: EngineOpt) -> Result<()> {
    if let Some(d) = engine_disabled(&loaded.diags, engine.kind()) {
        bail!("the {} engine cannot run on `{}`: {}", engine.name(), loaded.name, d.message);
    }
    Ok(())
}

/// Resolves a `process.state` target against the product graph.
fn resolve_target(g: &Vcfg, model: &Model, target: &str) -> Result<Vec<usize>> {
    let (pname, sname) = target
        .split_once('.')
        .with_context(|| format!("target `{target}` is not of the form process.state"))?;
    let pi = model
        .process_index(pname)
        .with_context(|| format!("unknown process `{pname}` in target `{target}`"))?;
    let si = model.processes[pi]
        .states
        .iter()
        .position(|s| s == sname)
        .with_context(|| format!("unknown state `{sname}` in process `{pname}`"))?;
    Ok(nodes_for(g, pi, si))
}

/// The product nodes whose component for process `pi` is state `si`. The
/// product only contains structurally reachable nodes, so this can be empty.
fn nodes_for(g: &Vcfg, pi: usize, si: usize) -> Vec<usize> {
    (0..g.node_count())
        .filter(|&v| {
            matches!(&g.node_states[v], Some(st)
                if st.len() == g.process_names.len() && st[pi] == si)
        })
        .collect()
}

fn counter_labels(g: &Vcfg) -> Vec<String> {
    g.counters.iter().map(|(c, m)| format!("{c}!{m}")).collect()
}

macro_rules! with_function_domain {
    ($att:expr, $az:ident => $body:expr) => {
        match $att {
            Attached::Lcp($az) => $body,
            Attached::Ccp($az) => $body,
            Attached::Cp(_) => {
                bail!("the backward engine needs a function domain; use --domain lcp or ccp")
            }
        }
    };
}

macro_rules! with_value_domain {
    ($att:expr, $az:ident => $body:expr) => {
        match $att {
            Attached::Cp($az) => $body,
            Attached::Lcp($az) => $body,
            Attached::Ccp($az) => $body,
        }
    };
}

// ---------------------------------------------------------------------------
// Trace rendering.
// ---------------------------------------------------------------------------

/// Renders an edge sequence as the node walk it induces, or `ε` when empty.
fn render_path(g: &Vcfg, edges: &[usize]) -> String {
    if edges.is_empty() {
        return "ε".to_string();
    }
    let mut out = g.node_names[g.edges[edges[0]].from].clone();
    for &e in edges {
        out.push_str("->");
        out.push_str(&g.node_names[g.edges[e].to]);
    }
    out
}

fn trace_lines(g: &Vcfg, events: &[TraceEvent]) -> Vec<TraceLine> {
    events
        .iter()
        .map(|ev| match ev {
            TraceEvent::Retain { node, path } => TraceLine {
                event: "retain".to_string(),
                node: Some(g.node_names[*node].clone()),
                proc: None,
                table_demand: None,
                path: render_path(g, &path.edges),
                demand: path.demand.clone(),
                ptf: path.ptf.clone(),
                cover: Vec::new(),
            },
            TraceEvent::Reject { node, path, cover } => TraceLine {
                event: "reject".to_string(),
                node: Some(g.node_names[*node].clone()),
                proc: None,
                table_demand: None,
                path: render_path(g, &path.edges),
                demand: path.demand.clone(),
                ptf: path.ptf.clone(),
                cover: cover.iter().map(|p| render_path(g, &p.edges)).collect(),
            },
            TraceEvent::EteRetain { proc, demand, path } => TraceLine {
                event: "summary-retain".to_string(),
                node: None,
                proc: Some(g.procs[*proc].name.clone()),
                table_demand: Some(demand.clone()),
                path: render_path(g, &path.edges),
                demand: path.demand.clone(),
                ptf: path.ptf.clone(),
                cover: Vec::new(),
            },
            TraceEvent::EteReject { proc, demand, path, cover } => TraceLine {
                event: "summary-reject".to_string(),
                node: None,
                proc: Some(g.procs[*proc].name.clone()),
                table_demand: Some(demand.clone()),
                path: render_path(g, &path.edges),
                demand: path.demand.clone(),
                ptf: path.ptf.clone(),
                cover: cover.iter().map(|p| render_path(g, &p.edges)).collect(),
            },
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Engine adapters.
// ---------------------------------------------------------------------------

fn backward_over<F>(
    az: &Analyzable<F>,
    targets: &[usize],
    opts: &BackwardOptions,
) -> Result<JofpOutcome<CpEnv>>
where
    F: TransferFunction<Value = CpEnv> + Send + Sync,
{
    compute_jofp(az, targets, opts).map_err(|e| anyhow::anyhow!("backward engine failed: {e}"))
}

fn forward_over<F>(
    az: &Analyzable<F>,
    theta: u32,
    opts: &ForwardOptions,
) -> Result<(Vec<QueueConfigMap<CpEnv>>, Vec<CpEnv>, ForwardStats)>
where
    F: ValueTransfer<Value = CpEnv>,
{
    let res = kildall(az, az.initial_env(), theta, opts)
        .map_err(|e| anyhow::anyhow!("forward engine failed: {e}"))?;
    let joined: Vec<CpEnv> = res.per_node.iter().map(joinmap).collect();
    Ok((res.per_node, joined, res.stats))
}

fn jop_over<F>(az: &Analyzable<F>, opts: &ForwardOptions) -> Result<(Vec<CpEnv>, ForwardStats)>
where
    F: ValueTransfer<Value = CpEnv>,
{
    let res = kildall(az, az.initial_env(), 0, opts)
        .map_err(|e| anyhow::anyhow!("jop engine failed: {e}"))?;
    let joined: Vec<CpEnv> = res.per_node.iter().map(joinmap).collect();
    Ok((joined, res.stats))
}

// ---------------------------------------------------------------------------
// analyze.
// ---------------------------------------------------------------------------

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport> {
    let loaded = load_model(&args.model, args.max_nodes)?;
    require_engine(&loaded, args.engine)?;
    if args.trace && args.engine != EngineOpt::Backward {
        bail!("--trace is only meaningful for the backward engine");
    }
    let att = attach_domain(loaded.g.clone(), args.domain);
    let g = &loaded.g;
    let names = &g.var_names;

    match args.engine {
        EngineOpt::Backward => {
            if args.target.is_empty() {
                bail!("the backward engine needs at least one --target process.state");
            }
            let bopts = BackwardOptions {
                trace: args.trace,
                threads: if args.trace { 1 } else { args.threads },
                max_paths: args.max_paths,
                ..BackwardOptions::default()
            };
            let mut targets = Vec::new();
            let mut stats = BackwardStats::default();
            let mut trace = Vec::new();
            for sel in &args.target {
                let nodes = resolve_target(g, &loaded.model, sel)?;
                if nodes.is_empty() {
                    bail!("target `{sel}` matches no node in the product graph");
                }
                let out = with_function_domain!(&att, az => backward_over(az, &nodes, &bopts)?);
                targets.push(TargetReport {
                    target: sel.clone(),
                    per_node: out
                        .per_target
                        .iter()
                        .map(|(v, env)| NodeValue {
                            node: g.node_names[*v].clone(),
                            value: env_report(env, names),
                        })
                        .collect(),
                    value: env_report(&out.value, names),
                });
                stats.candidates += out.stats.candidates;
                stats.retained += out.stats.retained;
                stats.rejected += out.stats.rejected;
                stats.summary_tables += out.stats.summary_tables;
                stats.summary_paths += out.stats.summary_paths;
                trace.extend(trace_lines(g, &out.trace));
            }
            Ok(AnalysisReport {
                model: loaded.name,
                engine: args.engine.name().to_string(),
                domain: domain_name(args.domain).to_string(),
                theta: None,
                counters: counter_labels(g),
                targets: Some(targets),
                nodes: None,
                stats: StatsReport::Backward(stats),
                trace,
            })
        }
        EngineOpt::Forward => {
            let fopts = ForwardOptions { max_iters: args.max_iters, ..ForwardOptions::default() };
            let (maps, joined, stats) =
                with_value_domain!(&att, az => forward_over(az, args.theta, &fopts)?);
            let nodes = node_reports(g, names, Some(&maps), &joined);
            let targets = forward_targets(g, &loaded.model, &args.target, &joined, names)?;
            Ok(AnalysisReport {
                model: loaded.name,
                engine: args.engine.name().to_string(),
                domain: domain_name(args.domain).to_string(),
                theta: Some(args.theta),
                counters: counter_labels(g),
                targets,
                nodes: Some(nodes),
                stats: StatsReport::Forward(stats),
                trace: Vec::new(),
            })
        }
        EngineOpt::Jop => {
            let fopts = ForwardOptions { max_iters: args.max_iters, ..ForwardOptions::default() };
            let (joined, stats) = with_value_domain!(&att, az => jop_over(az, &fopts)?);
            let nodes = node_reports(g, names, None, &joined);
            let targets = forward_targets(g, &loaded.model, &args.target, &joined, names)?;
            Ok(AnalysisReport {
                model: loaded.name,
                engine: args.engine.name().to_string(),
                domain: domain_name(args.domain).to_string(),
                theta: None,
                counters: counter_labels(g),
                targets,
                nodes: Some(nodes),
                stats: StatsReport::Forward(stats),
                trace: Vec::new(),
            })
        }
    }
}

fn node_reports(
    g: &Vcfg,
    names: &[String],
    maps: Option<&[QueueConfigMap<CpEnv>]>,
    joined: &[CpEnv],
) -> Vec<NodeReport> {
    (0..g.node_count())
        .map(|v| NodeReport {
            node: g.node_names[v].clone(),
            queues: maps.map(|ms| {
                ms[v]
                    .iter()
                    .map(|(q, env)| QueueEntry {
                        counts: q.clone(),
                        value: env_report(env, names),
                    })
                    .collect()
            }),
            join: env_report(&joined[v], names),
        })
        .collect()
}

fn forward_targets(
    g: &Vcfg,
    model: &Model,
    selectors: &[String],
    joined: &[CpEnv],
    names: &[String],
) -> Result<Option<Vec<TargetReport>>> {
    if selectors.is_empty() {
        return Ok(None);
    }
    let mut out = Vec::new();
    for sel in selectors {
        let nodes = resolve_target(g, model, sel)?;
        if nodes.is_empty() {
            bail!("target `{sel}` matches no node in the product graph");
        }
        let value = nodes
            .iter()
            .fold(CpEnv::Unreachable, |acc, &v| acc.join(&joined[v]));
        out.push(TargetReport {
            target: sel.clone(),
            per_node: nodes
                .iter()
                .map(|&v| NodeValue {
                    node: g.node_names[v].clone(),
                    value: env_report(&joined[v], names),
                })
                .collect(),
            value: env_report(&value, names),
        });
    }
    Ok(Some(out))
}

// ---------------------------------------------------------------------------
// check.
// ---------------------------------------------------------------------------

pub fn cmd_check(args: &CheckArgs) -> Result<CheckReport> {
    let loaded = load_model(&args.model, args.max_nodes)?;
    require_engine(&loaded, args.engine)?;
    let att = attach_domain(loaded.g.clone(), args.domain);
    let g = &loaded.g;
    let names = &g.var_names;

    // Forward engines evaluate every node once; the backward engine runs
    // per assertion on its own target set.
    let forward_joined: Option<Vec<CpEnv>> = match args.engine {
        EngineOpt::Backward => None,
        EngineOpt::Forward => {
            let fopts = ForwardOptions { max_iters: args.max_iters, ..ForwardOptions::default() };
            let (_, joined, _) =
                with_value_domain!(&att, az => forward_over(az, args.theta, &fopts)?);
            Some(joined)
        }
        EngineOpt::Jop => {
            let fopts = ForwardOptions { max_iters: args.max_iters, ..ForwardOptions::default() };
            let (joined, _) = with_value_domain!(&att, az => jop_over(az, &fopts)?);
            Some(joined)
        }
    };

    let mut reports = Vec::new();
    for a in &loaded.model.assertions {
        let pname = loaded.model.processes[a.process].name.clone();
        let sname = loaded.model.processes[a.process].states[a.state].clone();
        let nodes = nodes_for(g, a.process, a.state);
        let value = if nodes.is_empty() {
            CpEnv::Unreachable
        } else {
            match &forward_joined {
                Some(joined) => nodes
                    .iter()
                    .fold(CpEnv::Unreachable, |acc, &v| acc.join(&joined[v])),
                None => {
                    let bopts = BackwardOptions {
                        threads: args.threads,
                        max_paths: args.max_paths,
                        ..BackwardOptions::default()
                    };
                    with_function_domain!(&att, az => backward_over(az, &nodes, &bopts)?).value
                }
            }
        };
        let (verified, reason) = match &value {
            CpEnv::Unreachable => (true, Some("target states are unreachable".to_string())),
            CpEnv::Env(vals) => match eval_bool(&a.expr, vals) {
                Some(true) => (true, None),
                Some(false) => (false, Some("expression evaluates to false".to_string())),
                None => (false, Some("a referenced variable is not constant".to_string())),
            },
        };
        reports.push(AssertionReport {
            process: pname,
            state: sname,
            expr: a.text.clone(),
            nodes: nodes.iter().map(|&v| g.node_names[v].clone()).collect(),
            value: env_report(&value, names),
            verified,
            reason,
        });
    }
    let verified = reports.iter().filter(|r| r.verified).count();
    let total = reports.len();
    Ok(CheckReport {
        model: loaded.name,
        engine: args.engine.name().to_string(),
        domain: domain_name(args.domain).to_string(),
        theta: (args.engine == EngineOpt::Forward).then_some(args.theta),
        assertions: reports,
        verified,
        total,
        ok: verified == total,
    })
}

// ---------------------------------------------------------------------------
// compare.
// ---------------------------------------------------------------------------

pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport> {
    let loaded = load_model(&args.model, args.max_nodes)?;
    let nodes: Vec<usize> = if args.target.is_empty() {
        (0..loaded.g.node_count()).collect()
    } else {
        let mut set = Vec::new();
        for sel in &args.target {
            for v in resolve_target(&loaded.g, &loaded.model, sel)? {
                if !set.contains(&v) {
                    set.push(v);
                }
            }
        }
        set.sort_unstable();
        set
    };
    if nodes.is_empty() {
        bail!("no nodes to compare");
    }

    let left = eval_config(&loaded, &args.left, &nodes, args)?;
    let right = eval_config(&loaded, &args.right, &nodes, args)?;

    let names = &loaded.g.var_names;
    let mut summary = CompareSummary::default();
    let rows: Vec<NodeCompare> = nodes
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let relation = match (left[i].leq(&right[i]), right[i].leq(&left[i])) {
                (true, true) => "equal",
                (true, false) => "left_below",
                (false, true) => "right_below",
                (false, false) => "incomparable",
            };
            match relation {
                "equal" => summary.equal += 1,
                "left_below" => summary.left_below += 1,
                "right_below" => summary.right_below += 1,
                _ => summary.incomparable += 1,
            }
            NodeCompare {
                node: loaded.g.node_names[v].clone(),
                left: env_report(&left[i], names),
                right: env_report(&right[i], names),
                relation: relation.to_string(),
            }
        })
        .collect();

    Ok(CompareReport {
        model: loaded.name,
        left: args.left.label(),
        right: args.right.label(),
        nodes: rows,
        summary,
    })
}

/// Evaluates one configuration at the given nodes. Backward runs one
/// fixpoint per node; covering across unrelated targets is not sound.
fn eval_config(
    loaded: &Loaded,
    cfg: &EngineConfig,
    nodes: &[usize],
    args: &CompareArgs,
) -> Result<Vec<CpEnv>> {
    if let Some(d) = engine_disabled(&loaded.diags, cfg.engine.kind()) {
        bail!("configuration `{}` cannot run on `{}`: {}", cfg.label(), loaded.name, d.message);
    }
    let att = attach_domain(loaded.g.clone(), cfg.domain);
    match cfg.engine {
        EngineOpt::Backward => {
            let bopts = BackwardOptions { max_paths: args.max_paths, ..BackwardOptions::default() };
            let mut out = Vec::with_capacity(nodes.len());
            for &v in nodes {
                let env =
                    with_function_domain!(&att, az => backward_over(az, &[v], &bopts)?).value;
                out.push(env);
            }
            Ok(out)
        }
        EngineOpt::Forward => {
            let fopts = ForwardOptions { max_iters: args.max_iters, ..ForwardOptions::default() };
            let (_, joined, _) =
                with_value_domain!(&att, az => forward_over(az, cfg.theta, &fopts)?);
            Ok(nodes.iter().map(|&v| joined[v].clone()).collect())
        }
        EngineOpt::Jop => {
            let fopts = ForwardOptions { max_iters: args.max_iters, ..ForwardOptions::default() };
            let (joined, _) = with_value_domain!(&att, az => jop_over(az, &fopts)?);
            Ok(nodes.iter().map(|&v| joined[v].clone()).collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Human rendering and the entry point.
// ---------------------------------------------------------------------------

fn env_line(e: &EnvReport) -> String {
    if e.unreachable {
        return "unreachable".to_string();
    }
    e.vars
        .iter()
        .map(|(k, v)| format!("{k}={}", if v == "top" { "⊤" } else { v }))
        .collect::<Vec<_>>()
        .join(",")
}

fn print_analysis(r: &AnalysisReport) {
    let theta = r.theta.map(|t| format!(", theta {t}")).unwrap_or_default();
    println!("model {}: engine {}, domain {}{theta}", r.model, r.engine, r.domain);
    if !r.counters.is_empty() {
        println!("counters: [{}]", r.counters.join(", "));
    }
    if let Some(targets) = &r.targets {
        for t in targets {
            println!("target {}:", t.target);
            for nv in &t.per_node {
                println!("  {}: {}", nv.node, env_line(&nv.value));
            }
            println!("  joined: {}", env_line(&t.value));
        }
    }
    if let Some(nodes) = &r.nodes {
        for n in nodes {
            println!("{}:", n.node);
            if let Some(queues) = &n.queues {
                for q in queues {
                    println!("  {:?}: {}", q.counts, env_line(&q.value));
                }
            }
            println!("  join: {}", env_line(&n.join));
        }
    }
    for line in &r.trace {
        let mut head = format!("{:<15}", line.event);
        if let Some(n) = &line.node {
            head.push_str(&format!(" at {n}"));
        }
        if let Some(p) = &line.proc {
            head.push_str(&format!(" in {p} for demand {:?}", line.table_demand.as_deref().unwrap_or(&[])));
        }
        println!("{head}: {} demand {:?} [{}]", line.path, line.demand, line.ptf);
        if !line.cover.is_empty() {
            println!("{:15}  covered by {{ {} }}", "", line.cover.join(", "));
        }
    }
    match &r.stats {
        StatsReport::Backward(s) => println!(
            "paths: {} candidates, {} retained, {} rejected; summaries: {} tables, {} paths",
            s.candidates, s.retained, s.rejected, s.summary_tables, s.summary_paths
        ),
        StatsReport::Forward(s) => {
            println!("fixpoint: {} node visits, peak worklist {}", s.visits, s.peak_worklist)
        }
    }
}

fn print_check(r: &CheckReport) {
    let theta = r.theta.map(|t| format!(", theta {t}")).unwrap_or_default();
    println!("model {}: engine {}, domain {}{theta}", r.model, r.engine, r.domain);
    for a in &r.assertions {
        let verdict = if a.verified { "VERIFIED" } else { "NOT VERIFIED" };
        println!("{}.{}: {} -- {}", a.process, a.state, a.expr, verdict);
        println!("  value: {}", env_line(&a.value));
        if let Some(reason) = &a.reason {
            println!("  note: {reason}");
        }
    }
    println!("{}/{} assertions verified", r.verified, r.total);
}

fn print_compare(r: &CompareReport) {
    println!("model {}: {} vs {}", r.model, r.left, r.right);
    for n in &r.nodes {
        println!(
            "{}: {} | {} -- {}",
            n.node,
            env_line(&n.left),
            env_line(&n.right),
            n.relation
        );
    }
    println!(
        "summary: {} equal, {} left_below, {} right_below, {} incomparable",
        r.summary.equal, r.summary.left_below, r.summary.right_below, r.summary.incomparable
    );
}

fn emit<T: Serialize>(value: &T, json: bool, human: impl FnOnce(&T)) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        human(value);
    }
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Analyze(args) => {
            let started = Instant::now();
            let report = cmd_analyze(args)?;
            emit(&report, args.json, print_analysis)?;
            if !args.json {
                println!("took {:.1?}", started.elapsed());
            }
            Ok(0)
        }
        Cmd::Check(args) => {
            let started = Instant::now();
            let report = cmd_check(args)?;
            emit(&report, args.json, print_check)?;
            if !args.json {
                println!("took {:.1?}", started.elapsed());
            }
            Ok(if report.ok { 0 } else { 1 })
        }
        Cmd::Compare(args) => {
            let started = Instant::now();
            let report = cmd_compare(args)?;
            emit(&report, args.json, print_compare)?;
            if !args.json {
                println!("took {:.1?}", started.elapsed());
            }
            Ok(0)
        }
    }
}
