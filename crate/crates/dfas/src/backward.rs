//! Backward feasible-path engine.
//!
//! Computes the join over feasible paths from the start node to a target,
//! in a function domain. Paths grow backward from the target one edge at a
//! time; a candidate is kept only if it is not covered, where a path is
//! covered when its transfer is dominated by already retained paths at the
//! same node whose demands are no larger. Domination is the domain's
//! [`TransferFunction::covered_by`] test and must stay valid under prefix
//! extension. The demand of a path is the smallest counter vector that lets
//! the whole path execute without a receive blocking, so a covering path is
//! feasible in every context the covered one is.
//!
//! Procedures are summarized: when a path's head is a return site, the
//! engine splices in end-to-end summary paths of the callee computed at the
//! path's current demand, instead of walking the body edge by edge. Summary
//! retention additionally filters by supply, the number of messages a
//! receive-free body can contribute toward the demand at its exit.
//!
//! Node heads fall into exactly three classes. Return sites only receive
//! return edges, entries only receive call edges, and every other node only
//! receives intra edges; the builder and validation enforce this, which
//! keeps the backward case analysis total.

use crate::domains::CpEnv;
use crate::lattice::{AbstractValue, TransferFunction};
use crate::vcfg::{Analyzable, Vcfg};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("covering failed to stabilize at node `{node}`: {count} join increases exceed the bound {bound}")]
    Watchdog { node: String, count: usize, bound: usize },
    #[error("path budget exhausted after {limit} candidate paths")]
    PathBudget { limit: usize },
    #[error("summary budget exhausted for procedure `{proc}` at {limit} paths")]
    SummaryBudget { proc: String, limit: usize },
}

#[derive(Debug, Clone)]
pub struct BackwardOptions {
    pub trace: bool,
    pub threads: usize,
    pub max_paths: usize,
    pub max_summary_paths: usize,
    /// Overrides the per-node join ascent bound; `None` selects
    /// `4 * nvars + 8`.
    pub watchdog_bound: Option<usize>,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        BackwardOptions {
            trace: false,
            threads: 1,
            max_paths: 2_000_000,
            max_summary_paths: 100_000,
            watchdog_bound: None,
        }
    }
}

/// A path in a trace or cover report: edge ids from head to target, the
/// path's demand, and its rendered transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDesc {
    pub edges: Vec<usize>,
    pub demand: Vec<i64>,
    pub ptf: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Retain { node: usize, path: PathDesc },
    Reject { node: usize, path: PathDesc, cover: Vec<PathDesc> },
    EteRetain { proc: usize, demand: Vec<i64>, path: PathDesc },
    EteReject { proc: usize, demand: Vec<i64>, path: PathDesc, cover: Vec<PathDesc> },
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct BackwardStats {
    pub candidates: usize,
    pub retained: usize,
    pub rejected: usize,
    pub summary_tables: usize,
    pub summary_paths: usize,
}

pub struct JofpOutcome<V> {
    pub value: V,
    pub per_target: Vec<(usize, V)>,
    pub stats: BackwardStats,
    pub trace: Vec<TraceEvent>,
}

// ---------------------------------------------------------------------------
// Demand, supply, covering.
// ---------------------------------------------------------------------------

fn mu(mut v: Vec<i64>) -> Vec<i64> {
    for x in &mut v {
        if *x < 0 {
            *x = 0;
        }
    }
    v
}

fn demand_step(d: &[i64], w: &[i64]) -> Vec<i64> {
    mu(d.iter().zip(w).map(|(a, b)| a - b).collect())
}

/// The demand of an edge sequence for exit demand `d`: the least counter
/// vector from which the path runs without blocking and leaves at least `d`.
pub fn demand(g: &Vcfg, edges: &[usize], d: &[i64]) -> Vec<i64> {
    let mut cur = d.to_vec();
    for &e in edges.iter().rev() {
        cur = demand_step(&cur, &g.edges[e].w);
    }
    cur
}

/// The supply of a receive-free edge sequence toward exit demand `d`: what
/// the path contributes per counter, capped at the demand.
pub fn supply(g: &Vcfg, edges: &[usize], d: &[i64]) -> Vec<i64> {
    let mut total = vec![0i64; d.len()];
    for &e in edges {
        for (t, w) in total.iter_mut().zip(&g.edges[e].w) {
            debug_assert!(*w >= 0, "supply is defined for receive-free paths");
            *t += w;
        }
    }
    total.iter().zip(d).map(|(t, cap)| (*t).min(*cap)).collect()
}

fn vec_leq(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Checks whether a candidate is covered by paths whose demand is no
/// larger. Returns the indices of the comparison set when the candidate's
/// transfer is dominated by it under [`TransferFunction::covered_by`],
/// `None` otherwise. Retentions and rejections made with this test stay
/// valid when every path involved is extended by the same prefix.
pub fn covered<F: TransferFunction>(
    cand_demand: &[i64],
    cand_ptf: &F,
    others: &[(Vec<i64>, F)],
) -> Option<Vec<usize>> {
    let set: Vec<usize> = others
        .iter()
        .enumerate()
        .filter(|(_, (d, _))| vec_leq(d, cand_demand))
        .map(|(i, _)| i)
        .collect();
    let refs: Vec<&F> = set.iter().map(|&i| &others[i].1).collect();
    if cand_ptf.covered_by(&refs) {
        Some(set)
    } else {
        None
    }
}

/// Demand and supply aware covering for end-to-end summaries. The
/// comparison set is restricted to paths that demand no more and supply no
/// less, so a cover stays adequate in every calling context.
pub fn ds_covered<F: TransferFunction>(
    cand: (&[i64], &[i64], &F),
    others: &[(Vec<i64>, Vec<i64>, F)],
) -> Option<Vec<usize>> {
    let (cd, cs, cf) = cand;
    let set: Vec<usize> = others
        .iter()
        .enumerate()
        .filter(|(_, (d, s, _))| vec_leq(d, cd) && vec_leq(cs, s))
        .map(|(i, _)| i)
        .collect();
    let refs: Vec<&F> = set.iter().map(|&i| &others[i].2).collect();
    if cf.covered_by(&refs) {
        Some(set)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// End-to-end summaries (receive-free, loop-free procedure bodies).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EtePath<F> {
    pub edges: Vec<usize>,
    pub demand: Vec<i64>,
    pub supply: Vec<i64>,
    pub ptf: F,
}

#[derive(Debug, Clone)]
pub struct EteTable<F> {
    /// Retained entry-to-exit paths per procedure, in retention order.
    pub per_proc: Vec<Vec<EtePath<F>>>,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Edge(usize),
    Hole(usize),
}

/// Entry-to-exit skeletons per procedure: intra body edges interleaved with
/// call-site holes. Bodies are loop-free, so the sets are finite.
fn skeletons(g: &Vcfg, proc: usize) -> Vec<Vec<Step>> {
    let entry = g.procs[proc].entry;
    let exit = g.procs[proc].exit;
    let mut out = Vec::new();
    let mut stack: Vec<Step> = Vec::new();
    fn dfs(
        g: &Vcfg,
        proc: usize,
        node: usize,
        exit: usize,
        stack: &mut Vec<Step>,
        out: &mut Vec<Vec<Step>>,
    ) {
        if node == exit {
            out.push(stack.clone());
            return;
        }
        for &e in &g.out_edges[node] {
            let edge = &g.edges[e];
            match edge.kind {
                crate::vcfg::EdgeKind::Intra if g.proc_of_node[edge.to] == Some(proc) => {
                    stack.push(Step::Edge(e));
                    dfs(g, proc, edge.to, exit, stack, out);
                    stack.pop();
                }
                _ => {}
            }
        }
        for (cs_id, cs) in g.call_sites.iter().enumerate() {
            if cs.call_node == node {
                stack.push(Step::Hole(cs_id));
                dfs(g, proc, cs.return_node, exit, stack, out);
                stack.pop();
            }
        }
    }
    dfs(g, proc, entry, exit, &mut stack, &mut out);
    out
}

/// Computes the end-to-end summary tables of every procedure for exit
/// demand `d`. Zero-depth skeletons seed the tables; repeated sweeps fill
/// call-site holes with already retained callee paths until nothing new
/// survives the demand and supply aware covering check.
pub fn compute_end_to_end<F>(
    az: &Analyzable<F>,
    d: &[i64],
    opts: &BackwardOptions,
) -> Result<EteTable<F>, EngineError>
where
    F: TransferFunction,
{
    let g = &az.g;
    let nprocs = g.procs.len();
    let mut retained: Vec<Vec<EtePath<F>>> = vec![Vec::new(); nprocs];
    let mut considered: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); nprocs];
    let mut events = Vec::new();
    let skels: Vec<Vec<Vec<Step>>> = (0..nprocs).map(|p| skeletons(g, p)).collect();

    let ptf_of_edges = |edges: &[usize]| -> F {
        edges
            .iter()
            .fold(az.identity.clone(), |acc, &e| acc.then(&az.fns[e]))
    };

    let consider = |proc: usize,
                        edges: Vec<usize>,
                        retained: &mut Vec<Vec<EtePath<F>>>,
                        considered: &mut Vec<BTreeSet<Vec<usize>>>,
                        events: &mut Vec<TraceEvent>|
     -> Result<bool, EngineError> {
        if !considered[proc].insert(edges.clone()) {
            return Ok(false);
        }
        let dem = demand(g, &edges, d);
        let sup = supply(g, &edges, d);
        let ptf = ptf_of_edges(&edges);
        let triples: Vec<(Vec<i64>, Vec<i64>, F)> = retained[proc]
            .iter()
            .map(|p| (p.demand.clone(), p.supply.clone(), p.ptf.clone()))
            .collect();
        if let Some(set) = ds_covered((&dem, &sup, &ptf), &triples) {
            events.push(TraceEvent::EteReject {
                proc,
                demand: d.to_vec(),
                path: PathDesc {
                    edges,
                    demand: dem,
                    ptf: ptf.render(&g.var_names),
                },
                cover: set
                    .iter()
                    .map(|&i| {
                        let p = &retained[proc][i];
                        PathDesc {
                            edges: p.edges.clone(),
                            demand: p.demand.clone(),
                            ptf: p.ptf.render(&g.var_names),
                        }
                    })
                    .collect(),
            });
            return Ok(false);
        }
        events.push(TraceEvent::EteRetain {
            proc,
            demand: d.to_vec(),
            path: PathDesc {
                edges: edges.clone(),
                demand: dem.clone(),
                ptf: ptf.render(&g.var_names),
            },
        });
        retained[proc].push(EtePath { edges, demand: dem, supply: sup, ptf });
        if retained[proc].len() > opts.max_summary_paths {
            return Err(EngineError::SummaryBudget {
                proc: g.procs[proc].name.clone(),
                limit: opts.max_summary_paths,
            });
        }
        Ok(true)
    };

    for p in 0..nprocs {
        for skel in &skels[p] {
            if skel.iter().all(|s| matches!(s, Step::Edge(_))) {
                let edges: Vec<usize> = skel
                    .iter()
                    .map(|s| match s {
                        Step::Edge(e) => *e,
                        Step::Hole(_) => unreachable!(),
                    })
                    .collect();
                consider(p, edges, &mut retained, &mut considered, &mut events)?;
            }
        }
    }

    loop {
        let snapshot: Vec<Vec<Vec<usize>>> = retained
            .iter()
            .map(|paths| paths.iter().map(|p| p.edges.clone()).collect())
            .collect();
        let mut changed = false;
        for p in 0..nprocs {
            for skel in &skels[p] {
                let holes: Vec<usize> = skel
                    .iter()
                    .filter_map(|s| match s {
                        Step::Hole(cs) => Some(*cs),
                        Step::Edge(_) => None,
                    })
                    .collect();
                if holes.is_empty() {
                    continue;
                }
                // Odometer over filler choices, one per hole.
                let sizes: Vec<usize> = holes
                    .iter()
                    .map(|&cs| snapshot[g.call_sites[cs].proc].len())
                    .collect();
                if sizes.iter().any(|&s| s == 0) {
                    continue;
                }
                let mut idx = vec![0usize; holes.len()];
                loop {
                    let mut edges = Vec::new();
                    let mut hole_no = 0;
                    for s in skel {
                        match s {
                            Step::Edge(e) => edges.push(*e),
                            Step::Hole(cs_id) => {
                                let cs = &g.call_sites[*cs_id];
                                edges.push(cs.call_edge);
                                edges.extend(snapshot[cs.proc][idx[hole_no]].iter().copied());
                                edges.push(cs.return_edge);
                                hole_no += 1;
                            }
                        }
                    }
                    if consider(p, edges, &mut retained, &mut considered, &mut events)? {
                        changed = true;
                    }
                    let mut carry = 0;
                    loop {
                        if carry == idx.len() {
                            break;
                        }
                        idx[carry] += 1;
                        if idx[carry] < sizes[carry] {
                            break;
                        }
                        idx[carry] = 0;
                        carry += 1;
                    }
                    if carry == idx.len() {
                        break;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    log::debug!(
        "end-to-end table at demand {:?}: {} paths across {} procedures",
        d,
        retained.iter().map(Vec::len).sum::<usize>(),
        retained.len()
    );
    Ok(EteTable { per_proc: retained, events })
}

// ---------------------------------------------------------------------------
// The worklist engine.
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Cell {
    edge: usize,
    parent: Option<Arc<Cell>>,
}

fn cell_edges(cell: &Option<Arc<Cell>>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = cell.as_ref();
    while let Some(c) = cur {
        out.push(c.edge);
        cur = c.parent.as_ref();
    }
    out
}

#[derive(Clone)]
struct RPath<F> {
    cell: Option<Arc<Cell>>,
    head: usize,
    demand: Vec<i64>,
    ptf: F,
}

struct NodeStore<F> {
    paths: Vec<RPath<F>>,
    /// Join of retained transfers, `None` while the node has no paths.
    join: Option<F>,
    ascents: usize,
}

struct Shared<F: TransferFunction> {
    az: Arc<AnalyzableView<F>>,
    stores: Vec<Mutex<NodeStore<F>>>,
    queue: Mutex<WorkState<F>>,
    cv: Condvar,
    threads: usize,
    watchdog_bound: usize,
    max_paths: usize,
    candidates: AtomicUsize,
    retained: AtomicUsize,
    rejected: AtomicUsize,
    trace: Option<Mutex<Vec<TraceEvent>>>,
    ete: Mutex<EteMemo<F>>,
    opts: BackwardOptions,
}

struct EteMemo<F> {
    tables: HashMap<Vec<i64>, Arc<EteTable<F>>>,
    computed: usize,
}

struct WorkState<F> {
    items: VecDeque<RPath<F>>,
    idle: usize,
    error: Option<EngineError>,
    done: bool,
}

/// The pieces of an `Analyzable` the workers need, held by value so worker
/// threads can share one `Arc`.
struct AnalyzableView<F> {
    g: Arc<Vcfg>,
    fns: Vec<F>,
    identity: F,
}

impl<F: TransferFunction> Shared<F> {
    fn desc(&self, rp: &RPath<F>) -> PathDesc {
        PathDesc {
            edges: cell_edges(&rp.cell),
            demand: rp.demand.clone(),
            ptf: rp.ptf.render(&self.az.g.var_names),
        }
    }

    fn record(&self, ev: TraceEvent) {
        if let Some(t) = &self.trace {
            t.lock().unwrap().push(ev);
        }
    }

    fn ete_table(&self, d: &[i64]) -> Result<Arc<EteTable<F>>, EngineError> {
        let mut memo = self.ete.lock().unwrap();
        if let Some(t) = memo.tables.get(d) {
            return Ok(t.clone());
        }
        let az = Analyzable {
            g: self.az.g.clone(),
            fns: self.az.fns.clone(),
            identity: self.az.identity.clone(),
        };
        let table = Arc::new(compute_end_to_end(&az, d, &self.opts)?);
        memo.computed += 1;
        if self.trace.is_some() {
            for ev in &table.events {
                self.record(ev.clone());
            }
        }
        memo.tables.insert(d.to_vec(), table.clone());
        Ok(table)
    }

    /// Covering check and retention at one node, atomically.
    fn offer(&self, rp: RPath<F>) -> Result<Option<RPath<F>>, EngineError> {
        let n = self.candidates.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.max_paths {
            return Err(EngineError::PathBudget { limit: self.max_paths });
        }
        let mut store = self.stores[rp.head].lock().unwrap();
        let pairs: Vec<(Vec<i64>, F)> = store
            .paths
            .iter()
            .map(|p| (p.demand.clone(), p.ptf.clone()))
            .collect();
        if let Some(set) = covered(&rp.demand, &rp.ptf, &pairs) {
            self.rejected.fetch_add(1, Ordering::Relaxed);
            if self.trace.is_some() {
                let cover = set.iter().map(|&i| self.desc(&store.paths[i])).collect();
                let path = self.desc(&rp);
                drop(store);
                self.record(TraceEvent::Reject { node: rp.head, path, cover });
            }
            return Ok(None);
        }
        let raised = match &store.join {
            None => Some(rp.ptf.clone()),
            Some(j) => {
                let new_join = j.fjoin(&rp.ptf);
                if new_join.feq(j) {
                    None
                } else {
                    Some(new_join)
                }
            }
        };
        if let Some(new_join) = raised {
            store.ascents += 1;
            if store.ascents > self.watchdog_bound {
                return Err(EngineError::Watchdog {
                    node: self.az.g.node_names[rp.head].clone(),
                    count: store.ascents,
                    bound: self.watchdog_bound,
                });
            }
            store.join = Some(new_join);
        }
        store.paths.push(rp.clone());
        self.retained.fetch_add(1, Ordering::Relaxed);
        drop(store);
        if self.trace.is_some() {
            self.record(TraceEvent::Retain { node: rp.head, path: self.desc(&rp) });
        }
        Ok(Some(rp))
    }

    fn prepend(&self, rp: &RPath<F>, edge: usize) -> RPath<F> {
        let e = &self.az.g.edges[edge];
        RPath {
            cell: Some(Arc::new(Cell { edge, parent: rp.cell.clone() })),
            head: e.from,
            demand: demand_step(&rp.demand, &e.w),
            ptf: self.az.fns[edge].then(&rp.ptf),
        }
    }

    /// Backward extension: return sites splice in callee summaries, entries
    /// step to every call edge, all other nodes step over incoming intra
    /// edges.
    fn extensions(&self, rp: &RPath<F>) -> Result<Vec<RPath<F>>, EngineError> {
        let g = &self.az.g;
        let h = rp.head;
        let mut out = Vec::new();
        if let Some(cs) = g.return_site(h) {
            let cs = cs.clone();
            let table = self.ete_table(&rp.demand)?;
            for p1 in &table.per_proc[cs.proc] {
                let mut cur = self.prepend(rp, cs.return_edge);
                for &e in p1.edges.iter().rev() {
                    cur = self.prepend(&cur, e);
                }
                out.push(self.prepend(&cur, cs.call_edge));
            }
        } else if g.entry_of(h).is_some() {
            for e in g.call_edges_into(h) {
                out.push(self.prepend(rp, e));
            }
        } else {
            for &e in &g.in_edges[h] {
                out.push(self.prepend(rp, e));
            }
        }
        Ok(out)
    }

    fn process(&self, rp: RPath<F>) -> Result<Vec<RPath<F>>, EngineError> {
        let mut retained = Vec::new();
        for cand in self.extensions(&rp)? {
            if let Some(kept) = self.offer(cand)? {
                retained.push(kept);
            }
        }
        Ok(retained)
    }
}

fn worker<F: TransferFunction>(sh: &Shared<F>) {
    loop {
        let item = {
            let mut st = sh.queue.lock().unwrap();
            loop {
                if st.error.is_some() || st.done {
                    return;
                }
                if let Some(it) = st.items.pop_front() {
                    break it;
                }
                st.idle += 1;
                if st.idle == sh.threads {
                    st.done = true;
                    sh.cv.notify_all();
                    return;
                }
                st = sh.cv.wait(st).unwrap();
                st.idle -= 1;
            }
        };
        match sh.process(item) {
            Ok(new) => {
                if !new.is_empty() {
                    let mut st = sh.queue.lock().unwrap();
                    for rp in new {
                        st.items.push_back(rp);
                    }
                    drop(st);
                    sh.cv.notify_all();
                }
            }
            Err(e) => {
                let mut st = sh.queue.lock().unwrap();
                st.error = Some(e);
                sh.cv.notify_all();
                return;
            }
        }
    }
}

/// Computes the join over feasible paths value at each target node: the
/// join of `ptf(p)` applied to the initial environment over retained paths
/// from the start with zero demand. Targets are analyzed independently and
/// the returned `value` joins them.
pub fn compute_jofp<F>(
    az: &Analyzable<F>,
    targets: &[usize],
    opts: &BackwardOptions,
) -> Result<JofpOutcome<CpEnv>, EngineError>
where
    F: TransferFunction<Value = CpEnv> + Send + Sync,
{
    assert!(
        !opts.trace || opts.threads <= 1,
        "tracing requires the single-threaded engine"
    );
    let nvars = az.g.var_names.len();
    let watchdog_bound = opts.watchdog_bound.unwrap_or(4 * nvars + 8);
    let threads = opts.threads.max(1);
    let mut per_target = Vec::new();
    let mut stats = BackwardStats::default();
    let mut trace = Vec::new();
    let initial = az.initial_env();

    for &target in targets {
        let sh = Shared {
            az: Arc::new(AnalyzableView {
                g: az.g.clone(),
                fns: az.fns.clone(),
                identity: az.identity.clone(),
            }),
            stores: (0..az.g.node_count())
                .map(|_| Mutex::new(NodeStore { paths: Vec::new(), join: None, ascents: 0 }))
                .collect(),
            queue: Mutex::new(WorkState {
                items: VecDeque::new(),
                idle: 0,
                error: None,
                done: false,
            }),
            cv: Condvar::new(),
            threads,
            watchdog_bound,
            max_paths: opts.max_paths,
            candidates: AtomicUsize::new(0),
            retained: AtomicUsize::new(0),
            rejected: AtomicUsize::new(0),
            trace: if opts.trace { Some(Mutex::new(Vec::new())) } else { None },
            ete: Mutex::new(EteMemo { tables: HashMap::new(), computed: 0 }),
            opts: opts.clone(),
        };
        // Seed with the empty path at the target; every extension then
        // passes through the same covering gate.
        {
            let empty = RPath {
                cell: None,
                head: target,
                demand: vec![0; az.g.r()],
                ptf: az.identity.clone(),
            };
            let seeded = sh
                .offer(empty)
                .expect("seeding cannot exceed a positive budget")
                .expect("the empty path is never covered in an empty store");
            sh.queue.lock().unwrap().items.push_back(seeded);
        }

        if threads <= 1 {
            worker(&sh);
        } else {
            std::thread::scope(|scope| {
                for _ in 0..threads {
                    scope.spawn(|| worker(&sh));
                }
            });
        }
        if let Some(err) = sh.queue.lock().unwrap().error.take() {
            return Err(err);
        }

        // The answer joins applied values, not representations: each ptf is
        // evaluated on the initial environment first.
        let start_store = sh.stores[az.g.start].lock().unwrap();
        let zero = vec![0i64; az.g.r()];
        let mut value = CpEnv::Unreachable;
        for p in &start_store.paths {
            if p.demand == zero {
                value = value.join(&p.ptf.apply(&initial));
            }
        }
        drop(start_store);
        per_target.push((target, value));

        stats.candidates += sh.candidates.load(Ordering::Relaxed);
        stats.retained += sh.retained.load(Ordering::Relaxed);
        stats.rejected += sh.rejected.load(Ordering::Relaxed);
        let memo = sh.ete.lock().unwrap();
        stats.summary_tables += memo.computed;
        stats.summary_paths += memo
            .tables
            .values()
            .map(|t| t.per_proc.iter().map(Vec::len).sum::<usize>())
            .sum::<usize>();
        drop(memo);
        if let Some(t) = sh.trace {
            trace.extend(t.into_inner().unwrap());
        }
    }

    let value = per_target
        .iter()
        .fold(CpEnv::Unreachable, |acc, (_, v)| acc.join(v));
    log::debug!(
        "backward fixpoint over {} targets: {} candidates, {} retained, {} rejected",
        per_target.len(),
        stats.candidates,
        stats.retained,
        stats.rejected
    );
    Ok(JofpOutcome { value, per_target, stats, trace })
}
