//! Control flow graphs with queuing vectors.
//!
//! [`build_vcfg`] turns a validated model into one graph: the reachable
//! product of all process state machines, plus one subgraph per procedure
//! body. Product nodes are named `s1|s2|...` (a bare state name when there
//! is only one process); procedure nodes keep their declared names, which
//! validation guarantees are globally unique.
//!
//! Every edge carries a queuing vector `w` over the counter table, the
//! model's sent (channel, message) pairs sorted by channel then message
//! name: +1 for the sent pair, -1 for the received pair, 0 elsewhere.
//! Feasibility of edge sequences against `w` is an engine concern; the
//! graph itself includes every structural edge.
//!
//! Calls do not expand procedure bodies into the product. A call transition
//! contributes a call edge into the callee entry and a return edge from the
//! callee exit back to the return node, both carrying `skip`. Validation
//! restricts procedure use to single-process models, so body nodes never
//! need product expansion.

use crate::domains::{ccp_from_action, lcp_from_action, CcpFunction, CpAction, LcpFunction};
use crate::lattice::ValueTransfer;
use crate::model::{counter_table, Action, Model, ProcAct};
use num_bigint::BigInt;
use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use thiserror::Error;

pub const NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Intra,
    Call { proc: usize },
    Return { proc: usize },
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub act: Action,
    pub w: Vec<i64>,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct ProcInfo {
    pub name: String,
    pub entry: usize,
    pub exit: usize,
}

#[derive(Debug, Clone)]
pub struct CallSite {
    pub call_node: usize,
    pub return_node: usize,
    pub proc: usize,
    pub call_edge: usize,
    pub return_edge: usize,
}

#[derive(Debug, Clone)]
pub struct Vcfg {
    pub node_names: Vec<String>,
    /// Per-process local state indices for product nodes, `None` for
    /// procedure body nodes.
    pub node_states: Vec<Option<Vec<usize>>>,
    /// Procedure owning each node, `None` for product nodes.
    pub proc_of_node: Vec<Option<usize>>,
    pub edges: Vec<Edge>,
    pub out_edges: Vec<Vec<usize>>,
    pub in_edges: Vec<Vec<usize>>,
    pub start: usize,
    /// Counter table as (channel, message) names, sorted.
    pub counters: Vec<(String, String)>,
    pub channels: Vec<String>,
    pub messages: Vec<String>,
    pub var_names: Vec<String>,
    pub init_vals: Vec<BigInt>,
    pub process_names: Vec<String>,
    /// State name tables per process, parallel to `process_names`.
    pub process_states: Vec<Vec<String>>,
    pub procs: Vec<ProcInfo>,
    pub call_sites: Vec<CallSite>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("reachable product exceeds {cap} nodes")]
    TooLarge { cap: usize },
    #[error("receive of ({chan}, {msg}) has no matching send; validate the model first")]
    UnsentReceive { chan: String, msg: String },
    #[error("procedures require a single-process model; validate the model first")]
    ProcMultiProcess,
}

impl Vcfg {
    pub fn r(&self) -> usize {
        self.counters.len()
    }

    pub fn zero_w(&self) -> Vec<i64> {
        vec![0; self.counters.len()]
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn find_node(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    fn processes_state_index(&self, pi: usize, state: &str) -> Option<usize> {
        self.process_states.get(pi)?.iter().position(|s| s == state)
    }

    pub fn find_edge(&self, from: &str, to: &str) -> Option<usize> {
        let f = self.find_node(from)?;
        let t = self.find_node(to)?;
        self.edges.iter().position(|e| e.from == f && e.to == t)
    }

    /// Resolves a node-name walk into the unique edge sequence along it.
    /// Panics on a missing edge; this is a test construction helper.
    pub fn path_from_nodes(&self, names: &[&str]) -> Vec<usize> {
        names
            .windows(2)
            .map(|w| {
                self.find_edge(w[0], w[1])
                    .unwrap_or_else(|| panic!("no edge {} -> {}", w[0], w[1]))
            })
            .collect()
    }

    /// The call site returned to through `node`, if `node` is a return site.
    pub fn return_site(&self, node: usize) -> Option<&CallSite> {
        self.call_sites.iter().find(|cs| cs.return_node == node)
    }

    /// The procedure entered at `node`, if `node` is a procedure entry.
    pub fn entry_of(&self, node: usize) -> Option<usize> {
        self.procs.iter().position(|p| p.entry == node)
    }

    pub fn call_edges_into(&self, entry: usize) -> Vec<usize> {
        self.in_edges[entry]
            .iter()
            .copied()
            .filter(|&e| matches!(self.edges[e].kind, EdgeKind::Call { .. }))
            .collect()
    }

    pub fn render_action(&self, edge: usize) -> String {
        crate::model::render_action(&self.edges[edge].act, &self.var_names, &self.channels, &self.messages)
    }

    /// Builds a graph directly from parts; used by generators and tests.
    /// Queuing vectors are computed from the actions against `counters`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        node_names: Vec<String>,
        start: usize,
        channels: Vec<String>,
        messages: Vec<String>,
        counters: Vec<(String, String)>,
        var_names: Vec<String>,
        init_vals: Vec<BigInt>,
        edges: Vec<(usize, usize, Action)>,
    ) -> Vcfg {
        let n = node_names.len();
        let counter_index: HashMap<(usize, usize), usize> = counters
            .iter()
            .enumerate()
            .map(|(i, (c, m))| {
                let ci = channels.iter().position(|x| x == c).expect("counter channel");
                let mi = messages.iter().position(|x| x == m).expect("counter message");
                ((ci, mi), i)
            })
            .collect();
        let mut es = Vec::new();
        for (i, (from, to, act)) in edges.into_iter().enumerate() {
            let w = w_of_action(&act, counters.len(), &counter_index)
                .expect("action references an unsent pair");
            es.push(Edge { id: i, from, to, act, w, kind: EdgeKind::Intra });
        }
        let (out_edges, in_edges) = adjacency(n, &es);
        Vcfg {
            node_states: vec![Some(Vec::new()); n],
            proc_of_node: vec![None; n],
            node_names,
            edges: es,
            out_edges,
            in_edges,
            start,
            counters,
            channels,
            messages,
            var_names,
            init_vals,
            process_names: Vec::new(),
            process_states: Vec::new(),
            procs: Vec::new(),
            call_sites: Vec::new(),
        }
    }

    /// Expands procedure calls in place, cloning bodies per call site up to
    /// `depth_cap` nested levels. Calls deeper than the cap are dropped,
    /// which under-approximates; callers compensate by growing the cap
    /// until results stabilize. The result has no call or return edges.
    pub fn inline_procedures(&self, depth_cap: usize) -> Vcfg {
        let mut names = Vec::new();
        let mut states = Vec::new();
        let mut old_to_new: HashMap<usize, usize> = HashMap::new();
        for v in 0..self.node_count() {
            if self.proc_of_node[v].is_none() {
                old_to_new.insert(v, names.len());
                names.push(self.node_names[v].clone());
                states.push(self.node_states[v].clone());
            }
        }
        let mut edges: Vec<(usize, usize, Action, Vec<i64>)> = Vec::new();
        for e in &self.edges {
            if e.kind == EdgeKind::Intra
                && self.proc_of_node[e.from].is_none()
                && self.proc_of_node[e.to].is_none()
            {
                edges.push((old_to_new[&e.from], old_to_new[&e.to], e.act.clone(), e.w.clone()));
            }
        }

        let body_edges: Vec<Vec<&Edge>> = self
            .procs
            .iter()
            .enumerate()
            .map(|(p, _)| {
                self.edges
                    .iter()
                    .filter(|e| {
                        e.kind == EdgeKind::Intra
                            && self.proc_of_node[e.from] == Some(p)
                            && self.proc_of_node[e.to] == Some(p)
                    })
                    .collect()
            })
            .collect();
        let body_calls: Vec<Vec<&CallSite>> = self
            .procs
            .iter()
            .enumerate()
            .map(|(p, _)| {
                self.call_sites
                    .iter()
                    .filter(|cs| self.proc_of_node[cs.call_node] == Some(p))
                    .collect()
            })
            .collect();
        let body_nodes: Vec<Vec<usize>> = self
            .procs
            .iter()
            .enumerate()
            .map(|(p, _)| {
                (0..self.node_count())
                    .filter(|&v| self.proc_of_node[v] == Some(p))
                    .collect()
            })
            .collect();

        struct Ctx<'a> {
            g: &'a Vcfg,
            names: Vec<String>,
            states: Vec<Option<Vec<usize>>>,
            edges: Vec<(usize, usize, Action, Vec<i64>)>,
            instance: usize,
        }
        // Clones one body instance, returning the entry and exit clone ids.
        fn instantiate(
            ctx: &mut Ctx,
            p: usize,
            depth: usize,
            depth_cap: usize,
            body_nodes: &[Vec<usize>],
            body_edges: &[Vec<&Edge>],
            body_calls: &[Vec<&CallSite>],
        ) -> (usize, usize) {
            ctx.instance += 1;
            let tag = ctx.instance;
            let mut local: HashMap<usize, usize> = HashMap::new();
            for &v in &body_nodes[p] {
                local.insert(v, ctx.names.len());
                ctx.names.push(format!("{}#{}", ctx.g.node_names[v], tag));
                ctx.states.push(None);
            }
            for e in &body_edges[p] {
                ctx.edges.push((local[&e.from], local[&e.to], e.act.clone(), e.w.clone()));
            }
            for cs in &body_calls[p] {
                if depth >= depth_cap {
                    continue;
                }
                let (en, ex) = instantiate(ctx, cs.proc, depth + 1, depth_cap, body_nodes, body_edges, body_calls);
                let zero = vec![0; ctx.g.counters.len()];
                ctx.edges.push((local[&cs.call_node], en, Action::Skip, zero.clone()));
                ctx.edges.push((ex, local[&cs.return_node], Action::Skip, zero));
            }
            (local[&ctx.g.procs[p].entry], local[&ctx.g.procs[p].exit])
        }

        let mut ctx = Ctx { g: self, names, states, edges, instance: 0 };
        for cs in &self.call_sites {
            if self.proc_of_node[cs.call_node].is_some() {
                continue;
            }
            if depth_cap == 0 {
                continue;
            }
            let (en, ex) = instantiate(&mut ctx, cs.proc, 1, depth_cap, &body_nodes, &body_edges, &body_calls);
            let zero = self.zero_w();
            ctx.edges.push((old_to_new[&cs.call_node], en, Action::Skip, zero.clone()));
            ctx.edges.push((ex, old_to_new[&cs.return_node], Action::Skip, zero));
        }

        let es: Vec<Edge> = ctx
            .edges
            .into_iter()
            .enumerate()
            .map(|(i, (from, to, act, w))| Edge { id: i, from, to, act, w, kind: EdgeKind::Intra })
            .collect();
        let n = ctx.names.len();
        let (out_edges, in_edges) = adjacency(n, &es);
        Vcfg {
            node_names: ctx.names,
            node_states: ctx.states,
            proc_of_node: vec![None; n],
            edges: es,
            out_edges,
            in_edges,
            start: old_to_new[&self.start],
            counters: self.counters.clone(),
            channels: self.channels.clone(),
            messages: self.messages.clone(),
            var_names: self.var_names.clone(),
            init_vals: self.init_vals.clone(),
            process_names: self.process_names.clone(),
            process_states: self.process_states.clone(),
            procs: Vec::new(),
            call_sites: Vec::new(),
        }
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph vcfg {\n");
        for (i, name) in self.node_names.iter().enumerate() {
            let shape = if i == self.start { "doublecircle" } else { "circle" };
            s.push_str(&format!("  n{i} [label=\"{name}\", shape={shape}];\n"));
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::Intra => "solid",
                EdgeKind::Call { .. } => "dashed",
                EdgeKind::Return { .. } => "dotted",
            };
            let label = if e.w.iter().all(|&x| x == 0) {
                self.render_action(e.id)
            } else {
                format!("{} {:?}", self.render_action(e.id), e.w)
            };
            s.push_str(&format!("  n{} -> n{} [label=\"{}\", style={}];\n", e.from, e.to, label, style));
        }
        s.push_str("}\n");
        s
    }
}

fn adjacency(n: usize, edges: &[Edge]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut out_edges = vec![Vec::new(); n];
    let mut in_edges = vec![Vec::new(); n];
    for e in edges {
        out_edges[e.from].push(e.id);
        in_edges[e.to].push(e.id);
    }
    (out_edges, in_edges)
}

fn w_of_action(
    act: &Action,
    r: usize,
    counter_index: &HashMap<(usize, usize), usize>,
) -> Result<Vec<i64>, (usize, usize)> {
    let mut w = vec![0i64; r];
    for atom in act.atoms() {
        match atom {
            Action::Send(c, m) => {
                let idx = counter_index.get(&(*c, *m)).ok_or((*c, *m))?;
                w[*idx] += 1;
            }
            Action::Receive(c, m) => {
                let idx = counter_index.get(&(*c, *m)).ok_or((*c, *m))?;
                w[*idx] -= 1;
            }
            _ => {}
        }
    }
    Ok(w)
}

/// Builds the product graph of a validated model.
pub fn build_vcfg(m: &Model) -> Result<Vcfg, BuildError> {
    let uses_procedures =
        !m.procedures.is_empty() || m.processes.iter().any(|p| p.transitions.iter().any(|t| matches!(t.act, ProcAct::Call(_))));
    if uses_procedures && m.processes.len() > 1 {
        return Err(BuildError::ProcMultiProcess);
    }

    let table = counter_table(m);
    let counters: Vec<(String, String)> = table
        .iter()
        .map(|(c, msg)| (m.channels[*c].clone(), m.messages[*msg].clone()))
        .collect();
    let counter_index: HashMap<(usize, usize), usize> =
        table.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let r = counters.len();
    let w_of = |act: &Action| {
        w_of_action(act, r, &counter_index).map_err(|(c, msg)| BuildError::UnsentReceive {
            chan: m.channels[c].clone(),
            msg: m.messages[msg].clone(),
        })
    };

    let mut node_names: Vec<String> = Vec::new();
    let mut node_states: Vec<Option<Vec<usize>>> = Vec::new();
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut queue: VecDeque<Vec<usize>> = VecDeque::new();

    let product_name =
        |states: &[usize]| -> String {
            states
                .iter()
                .enumerate()
                .map(|(p, &s)| m.processes[p].states[s].clone())
                .collect::<Vec<_>>()
                .join("|")
        };

    let initial: Vec<usize> = m.processes.iter().map(|p| p.initial).collect();
    ids.insert(initial.clone(), 0);
    node_names.push(product_name(&initial));
    node_states.push(Some(initial.clone()));
    queue.push_back(initial);

    struct PendingCall {
        call_node: usize,
        return_node: usize,
        proc: usize,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut pending_calls: Vec<PendingCall> = Vec::new();

    while let Some(state) = queue.pop_front() {
        let from_id = ids[&state];
        for (pi, proc) in m.processes.iter().enumerate() {
            for t in &proc.transitions {
                if t.from != state[pi] {
                    continue;
                }
                let mut succ = state.clone();
                succ[pi] = t.to;
                let to_id = *ids.entry(succ.clone()).or_insert_with(|| {
                    let id = node_names.len();
                    node_names.push(product_name(&succ));
                    node_states.push(Some(succ.clone()));
                    queue.push_back(succ.clone());
                    id
                });
                if node_names.len() > NODE_CAP {
                    return Err(BuildError::TooLarge { cap: NODE_CAP });
                }
                match &t.act {
                    ProcAct::Act(a) => {
                        let w = w_of(a)?;
                        edges.push(Edge {
                            id: edges.len(),
                            from: from_id,
                            to: to_id,
                            act: a.clone(),
                            w,
                            kind: EdgeKind::Intra,
                        });
                    }
                    ProcAct::Call(p) => {
                        // The callee entry node does not exist yet; fill the
                        // call and return edges in after body nodes are laid
                        // out.
                        pending_calls.push(PendingCall { call_node: from_id, return_node: to_id, proc: *p });
                    }
                }
            }
        }
    }

    let mut proc_of_node = vec![None; node_names.len()];
    let mut procs = Vec::new();
    let mut body_node_id: Vec<Vec<usize>> = Vec::new();
    for (p, proc) in m.procedures.iter().enumerate() {
        let mut local = Vec::new();
        for nname in &proc.nodes {
            local.push(node_names.len());
            node_names.push(nname.clone());
            node_states.push(None);
            proc_of_node.push(Some(p));
        }
        procs.push(ProcInfo { name: proc.name.clone(), entry: local[proc.entry], exit: local[proc.exit] });
        body_node_id.push(local);
    }

    for (p, proc) in m.procedures.iter().enumerate() {
        for t in &proc.edges {
            match &t.act {
                ProcAct::Act(a) => {
                    let w = w_of(a)?;
                    edges.push(Edge {
                        id: edges.len(),
                        from: body_node_id[p][t.from],
                        to: body_node_id[p][t.to],
                        act: a.clone(),
                        w,
                        kind: EdgeKind::Intra,
                    });
                }
                ProcAct::Call(callee) => {
                    pending_calls.push(PendingCall {
                        call_node: body_node_id[p][t.from],
                        return_node: body_node_id[p][t.to],
                        proc: *callee,
                    });
                }
            }
        }
    }

    let mut call_sites = Vec::new();
    for pc in pending_calls {
        let call_edge = edges.len();
        edges.push(Edge {
            id: call_edge,
            from: pc.call_node,
            to: procs[pc.proc].entry,
            act: Action::Skip,
            w: vec![0; r],
            kind: EdgeKind::Call { proc: pc.proc },
        });
        let return_edge = edges.len();
        edges.push(Edge {
            id: return_edge,
            from: procs[pc.proc].exit,
            to: pc.return_node,
            act: Action::Skip,
            w: vec![0; r],
            kind: EdgeKind::Return { proc: pc.proc },
        });
        call_sites.push(CallSite {
            call_node: pc.call_node,
            return_node: pc.return_node,
            proc: pc.proc,
            call_edge,
            return_edge,
        });
    }

    let n = node_names.len();
    let (out_edges, in_edges) = adjacency(n, &edges);
    log::debug!("built graph: {n} nodes, {} edges, {r} counters", edges.len());
    Ok(Vcfg {
        node_names,
        node_states,
        proc_of_node,
        edges,
        out_edges,
        in_edges,
        start: 0,
        counters,
        channels: m.channels.clone(),
        messages: m.messages.clone(),
        var_names: m.var_names(),
        init_vals: m.variables.iter().map(|v| v.init.clone()).collect(),
        process_names: m.processes.iter().map(|p| p.name.clone()).collect(),
        process_states: m.processes.iter().map(|p| p.states.clone()).collect(),
        procs,
        call_sites,
    })
}

/// Resolves a `process.state` target to the product nodes whose component
/// for that process is the given state.
pub fn target_set(g: &Vcfg, target: &str) -> Result<Vec<usize>, String> {
    let (pname, sname) = target
        .split_once('.')
        .ok_or_else(|| format!("target `{target}` is not of the form process.state"))?;
    let pi = g
        .process_names
        .iter()
        .position(|n| n == pname)
        .ok_or_else(|| format!("unknown process `{pname}` in target"))?;
    let want = g
        .processes_state_index(pi, sname)
        .ok_or_else(|| format!("unknown state `{sname}` in process `{pname}`"))?;
    let out: Vec<usize> = (0..g.node_count())
        .filter(|&v| {
            // Product nodes built from models carry full state vectors;
            // graphs built from parts have empty ones and never match.
            matches!(&g.node_states[v], Some(states)
                if states.len() == g.process_names.len() && states[pi] == want)
        })
        .collect();
    if out.is_empty() {
        return Err(format!("target `{target}` matches no reachable node"));
    }
    Ok(out)
}

/// Per-edge transfer functions for one value domain, over a shared graph.
#[derive(Clone)]
pub struct Analyzable<F: ValueTransfer> {
    pub g: Arc<Vcfg>,
    pub fns: Vec<F>,
    pub identity: F,
}

impl<F: ValueTransfer> Analyzable<F> {
    pub fn initial_env(&self) -> crate::domains::CpEnv {
        crate::domains::CpEnv::from_consts(&self.g.init_vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Cp,
    Lcp,
    Ccp,
}

impl std::str::FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cp" => Ok(DomainKind::Cp),
            "lcp" => Ok(DomainKind::Lcp),
            "ccp" => Ok(DomainKind::Ccp),
            other => Err(format!("unknown domain `{other}` (expected cp, lcp, or ccp)")),
        }
    }
}

pub enum Attached {
    Cp(Analyzable<CpAction>),
    Lcp(Analyzable<LcpFunction>),
    Ccp(Analyzable<CcpFunction>),
}

/// Attaches one value domain to a graph, building per-edge transfers.
pub fn attach_domain(g: Arc<Vcfg>, kind: DomainKind) -> Attached {
    let nvars = g.var_names.len();
    match kind {
        DomainKind::Cp => {
            let fns = g.edges.iter().map(|e| CpAction(e.act.clone())).collect();
            Attached::Cp(Analyzable { g, fns, identity: CpAction(Action::Skip) })
        }
        DomainKind::Lcp => {
            let fns = g.edges.iter().map(|e| lcp_from_action(&e.act, nvars)).collect();
            Attached::Lcp(Analyzable { g, fns, identity: LcpFunction::identity(nvars) })
        }
        DomainKind::Ccp => {
            let fns = g.edges.iter().map(|e| ccp_from_action(&e.act, nvars)).collect();
            Attached::Ccp(Analyzable { g, fns, identity: CcpFunction::identity(nvars) })
        }
    }
}

impl Analyzable<LcpFunction> {
    pub fn from_vcfg(g: Arc<Vcfg>) -> Self {
        match attach_domain(g, DomainKind::Lcp) {
            Attached::Lcp(a) => a,
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TransferFunction;
    use crate::model::parse_model;

    fn two_process_model() -> Model {
        parse_model(
            r#"{
                "schema_version": 1,
                "channels": ["q"],
                "messages": ["m"],
                "variables": [{"name": "x", "init": 0}],
                "processes": [
                    {
                        "name": "P",
                        "initial": "a",
                        "states": ["a", "b"],
                        "transitions": [
                            {"from": "a", "to": "b", "action": "q ! m"},
                            {"from": "b", "to": "b", "action": "x := x + 1"}
                        ]
                    },
                    {
                        "name": "Q",
                        "initial": "s",
                        "states": ["s", "t"],
                        "transitions": [
                            {"from": "s", "to": "t", "action": "q ? m"}
                        ]
                    }
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn product_nodes_and_queuing_vectors() {
        let g = build_vcfg(&two_process_model()).unwrap();
        assert_eq!(g.r(), 1);
        assert_eq!(g.counters, vec![("q".to_string(), "m".to_string())]);
        let mut names = g.node_names.clone();
        names.sort();
        assert_eq!(names, vec!["a|s", "a|t", "b|s", "b|t"]);
        assert_eq!(g.node_names[g.start], "a|s");
        let send = g.find_edge("a|s", "b|s").unwrap();
        assert_eq!(g.edges[send].w, vec![1]);
        let recv = g.find_edge("a|s", "a|t").unwrap();
        assert_eq!(g.edges[recv].w, vec![-1]);
        let local = g.find_edge("b|s", "b|s").unwrap();
        assert_eq!(g.edges[local].w, vec![0]);
    }

    #[test]
    fn target_set_matches_components() {
        let g = build_vcfg(&two_process_model()).unwrap();
        let ts = target_set(&g, "Q.t").unwrap();
        let mut names: Vec<&str> = ts.iter().map(|&v| g.node_names[v].as_str()).collect();
        names.sort();
        assert_eq!(names, vec!["a|t", "b|t"]);
        assert!(target_set(&g, "Q.zzz").is_err());
        assert!(target_set(&g, "nodot").is_err());
    }

    fn proc_model() -> Model {
        parse_model(
            r#"{
                "schema_version": 1,
                "channels": ["c"],
                "messages": ["m"],
                "variables": [{"name": "x", "init": 0}],
                "processes": [
                    {
                        "name": "P",
                        "initial": "a",
                        "states": ["a", "b", "k"],
                        "transitions": [
                            {"from": "a", "to": "b", "call": "foo"},
                            {"from": "b", "to": "k", "action": "c ? m"}
                        ]
                    }
                ],
                "procedures": [
                    {
                        "name": "foo",
                        "entry": "en",
                        "exit": "ex",
                        "nodes": ["en", "mid", "rs", "ex"],
                        "edges": [
                            {"from": "en", "to": "ex", "action": "skip"},
                            {"from": "en", "to": "mid", "action": "c ! m"},
                            {"from": "mid", "to": "rs", "call": "foo"},
                            {"from": "rs", "to": "ex", "action": "x := x + 1"}
                        ]
                    }
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn procedures_join_the_graph_without_expansion() {
        let m = proc_model();
        assert!(crate::model::validate(&m).iter().all(|d| !d.fatal));
        let g = build_vcfg(&m).unwrap();
        // 3 product states plus 4 body nodes.
        assert_eq!(g.node_count(), 7);
        assert_eq!(g.call_sites.len(), 2);
        let top = g.call_sites.iter().find(|cs| g.node_names[cs.call_node] == "a").unwrap();
        assert_eq!(g.node_names[top.return_node], "b");
        assert_eq!(g.node_names[g.procs[top.proc].entry], "en");
        let nested = g.call_sites.iter().find(|cs| g.node_names[cs.call_node] == "mid").unwrap();
        assert_eq!(g.node_names[nested.return_node], "rs");
        assert!(matches!(g.edges[top.call_edge].kind, EdgeKind::Call { .. }));
        assert!(matches!(g.edges[top.return_edge].kind, EdgeKind::Return { .. }));
        assert_eq!(g.call_edges_into(g.procs[0].entry).len(), 2);
        assert!(g.return_site(g.find_node("b").unwrap()).is_some());
        assert_eq!(g.entry_of(g.find_node("en").unwrap()), Some(0));
    }

    #[test]
    fn inlining_replaces_calls_with_body_clones() {
        let g = build_vcfg(&proc_model()).unwrap();
        let flat = g.inline_procedures(2);
        assert!(flat.call_sites.is_empty());
        assert!(flat.edges.iter().all(|e| e.kind == EdgeKind::Intra));
        // Depth 1 instance plus one nested instance: 3 product nodes and
        // two body clones of 4 nodes each.
        assert_eq!(flat.node_count(), 3 + 8);
        // The nested call inside the deepest instance was dropped, so its
        // return-site node has no incoming edges.
        let dangling = (0..flat.node_count())
            .filter(|&v| flat.in_edges[v].is_empty() && v != flat.start)
            .count();
        assert_eq!(dangling, 1);
        let deeper = g.inline_procedures(3);
        assert_eq!(deeper.node_count(), 3 + 12);
    }

    #[test]
    fn attach_domain_builds_per_edge_transfers() {
        let g = Arc::new(build_vcfg(&two_process_model()).unwrap());
        match attach_domain(g.clone(), DomainKind::Lcp) {
            Attached::Lcp(a) => {
                assert_eq!(a.fns.len(), g.edges.len());
                let inc = g.find_edge("b|s", "b|s").unwrap();
                assert_eq!(a.fns[inc].render(&g.var_names), "x'=x+1");
                assert_eq!(a.initial_env().render(&g.var_names), "x=0");
            }
            _ => panic!("expected lcp attachment"),
        }
    }
}
