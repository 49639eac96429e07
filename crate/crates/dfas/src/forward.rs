//! Forward fixpoint engine over abstract queue configurations.
//!
//! Node values are sparse maps from queue configurations to domain values.
//! A configuration component counts the in-flight messages of one counter
//! pair exactly up to the threshold; the threshold component stands for
//! "that many or more". Missing keys are bottom. The threshold 0 collapses
//! the map to a single key, which ignores queue feasibility entirely and
//! yields the plain join over paths.
//!
//! Procedure bodies are not part of the product graph, so graphs with
//! procedures are rejected here; the backward engine handles them.

use crate::lattice::{AbstractValue, ValueTransfer};
use crate::vcfg::{Analyzable, Vcfg};
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("the forward engine does not support procedures; use the backward engine")]
    ProceduresUnsupported,
    #[error("iteration budget exhausted after {limit} node visits")]
    IterBudget { limit: usize },
}

#[derive(Debug, Clone)]
pub struct ForwardOptions {
    pub max_iters: usize,
    /// Number of joins at a node before the widening hook engages. The
    /// bundled domains widen by joining, which already stabilizes on the
    /// finite key space.
    pub widen_after: usize,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions { max_iters: 10_000_000, widen_after: 1 }
    }
}

/// Sparse map from queue configurations to values; absent keys are bottom
/// and stored values are never bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueConfigMap<V> {
    entries: BTreeMap<Vec<u32>, V>,
}

impl<V: AbstractValue> QueueConfigMap<V> {
    pub fn new() -> Self {
        QueueConfigMap { entries: BTreeMap::new() }
    }

    pub fn singleton(key: Vec<u32>, v: V) -> Self {
        let mut m = Self::new();
        m.insert_join(key, v);
        m
    }

    pub fn insert_join(&mut self, key: Vec<u32>, v: V) -> bool {
        if v.is_bottom() {
            return false;
        }
        match self.entries.entry(key) {
            Entry::Vacant(e) => {
                e.insert(v);
                true
            }
            Entry::Occupied(mut e) => {
                let joined = e.get().join(&v);
                if joined == *e.get() {
                    false
                } else {
                    e.insert(joined);
                    true
                }
            }
        }
    }

    pub fn get(&self, key: &[u32]) -> Option<&V> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &V)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<V: AbstractValue> Default for QueueConfigMap<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: AbstractValue> AbstractValue for QueueConfigMap<V> {
    fn bottom() -> Self {
        Self::new()
    }

    fn join(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.insert_join(k.clone(), v.clone());
        }
        out
    }

    fn leq(&self, other: &Self) -> bool {
        self.entries.iter().all(|(k, v)| match other.entries.get(k) {
            Some(o) => v.leq(o),
            None => false,
        })
    }
}

/// Joins every configuration's value into one, discarding the queue
/// dimension.
pub fn joinmap<V: AbstractValue>(m: &QueueConfigMap<V>) -> V {
    m.entries
        .values()
        .fold(V::bottom(), |acc, v| acc.join(v))
}

fn component_succs(p: u32, w: i64, theta: u32) -> Vec<u32> {
    if w >= 0 {
        let s = (p as i64 + w).min(theta as i64);
        vec![s as u32]
    } else if p == theta {
        let lo = (theta as i64 + w).max(0) as u32;
        (lo..=theta).collect()
    } else {
        let s = p as i64 + w;
        if s >= 0 {
            vec![s as u32]
        } else {
            Vec::new()
        }
    }
}

fn component_preds(s: u32, w: i64, theta: u32) -> Vec<u32> {
    let mut out = Vec::new();
    for q in 0..=theta {
        if component_succs(q, w, theta).contains(&s) {
            out.push(q);
        }
    }
    out
}

fn cartesian(parts: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::with_capacity(parts.len())];
    for p in parts {
        let mut next = Vec::with_capacity(out.len() * p.len());
        for prefix in &out {
            for &x in p {
                let mut v = prefix.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Abstract successor configurations of `q` under queuing vector `w`. A
/// receive out of the saturated component forks, because "theta or more"
/// covers counts that stay saturated and counts that drop below.
pub fn bm_succs(q: &[u32], w: &[i64], theta: u32) -> Vec<Vec<u32>> {
    debug_assert_eq!(q.len(), w.len());
    let parts: Vec<Vec<u32>> = q
        .iter()
        .zip(w)
        .map(|(&p, &wi)| component_succs(p, wi, theta))
        .collect();
    if parts.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    cartesian(&parts)
}

/// Abstract predecessor configurations: every `q` with `s` among its
/// successors under `w`.
pub fn bm_preds(s: &[u32], w: &[i64], theta: u32) -> Vec<Vec<u32>> {
    debug_assert_eq!(s.len(), w.len());
    let parts: Vec<Vec<u32>> = s
        .iter()
        .zip(w)
        .map(|(&p, &wi)| component_preds(p, wi, theta))
        .collect();
    if parts.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    cartesian(&parts)
}

/// Pushes a node value across one edge: applies the transfer to each
/// configuration's value and scatters it over the successor
/// configurations.
pub fn fun_edge<F: ValueTransfer>(
    f: &F,
    w: &[i64],
    theta: u32,
    m: &QueueConfigMap<F::Value>,
) -> QueueConfigMap<F::Value> {
    let mut out = QueueConfigMap::new();
    for (q, v) in m.iter() {
        let v2 = f.apply(v);
        if v2.is_bottom() {
            continue;
        }
        for s in bm_succs(q, w, theta) {
            out.insert_join(s, v2.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ForwardStats {
    pub visits: usize,
    pub peak_worklist: usize,
}

pub struct ForwardResult<V> {
    pub per_node: Vec<QueueConfigMap<V>>,
    pub stats: ForwardStats,
}

/// Worklist fixpoint over nodes. Values start at bottom everywhere except
/// the start node, which holds `init` at the all-zero configuration.
pub fn kildall<F>(
    az: &Analyzable<F>,
    init: F::Value,
    theta: u32,
    opts: &ForwardOptions,
) -> Result<ForwardResult<F::Value>, ForwardError>
where
    F: ValueTransfer,
{
    let g: &Vcfg = &az.g;
    if !g.procs.is_empty() {
        return Err(ForwardError::ProceduresUnsupported);
    }
    let n = g.node_count();
    let mut store: Vec<QueueConfigMap<F::Value>> = vec![QueueConfigMap::new(); n];
    let mut joins: Vec<usize> = vec![0; n];
    store[g.start] = QueueConfigMap::singleton(vec![0; g.r()], init);
    let mut queued = vec![false; n];
    let mut wl = VecDeque::new();
    wl.push_back(g.start);
    queued[g.start] = true;
    let mut stats = ForwardStats::default();

    while let Some(node) = wl.pop_front() {
        queued[node] = false;
        stats.visits += 1;
        if stats.visits > opts.max_iters {
            return Err(ForwardError::IterBudget { limit: opts.max_iters });
        }
        let current = store[node].clone();
        for &e in &g.out_edges[node] {
            let edge = &g.edges[e];
            let delta = fun_edge(&az.fns[e], &edge.w, theta, &current);
            if delta.is_empty() {
                continue;
            }
            let t = edge.to;
            let old = &store[t];
            let mut new = old.join(&delta);
            if new != *old {
                joins[t] += 1;
                if joins[t] > opts.widen_after {
                    new = old.widen(&new);
                }
                store[t] = new;
                if !queued[t] {
                    queued[t] = true;
                    wl.push_back(t);
                    stats.peak_worklist = stats.peak_worklist.max(wl.len());
                }
            }
        }
    }
    log::debug!(
        "forward fixpoint at threshold {theta}: {} node visits, peak worklist {}",
        stats.visits,
        stats.peak_worklist
    );
    Ok(ForwardResult { per_node: store, stats })
}

/// The join over all paths, with queue feasibility ignored: the forward
/// fixpoint at threshold 0 collapsed to plain values.
pub fn jop<F>(az: &Analyzable<F>, init: F::Value, opts: &ForwardOptions) -> Result<Vec<F::Value>, ForwardError>
where
    F: ValueTransfer,
{
    let res = kildall(az, init, 0, opts)?;
    Ok(res.per_node.iter().map(joinmap).collect())
}

/// Renders one node's configuration map, one `[q]: env` line per
/// configuration in key order.
pub fn render_qmap<V: AbstractValue>(
    m: &QueueConfigMap<V>,
    render_value: impl Fn(&V) -> String,
) -> String {
    let mut out = String::new();
    for (k, v) in m.iter() {
        let key: Vec<String> = k.iter().map(u32::to_string).collect();
        out.push_str(&format!("[{}]: {}\n", key.join(","), render_value(v)));
    }
    out
}

impl<V: AbstractValue + fmt::Debug> fmt::Display for QueueConfigMap<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render_qmap(self, |v| format!("{v:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{CpEnv, CpVal};
    use crate::model::parse_action_str;
    use crate::vcfg::{attach_domain, Attached, DomainKind, Vcfg};
    use num_bigint::BigInt;
    use std::sync::Arc;

    #[test]
    fn succs_saturate_and_fork() {
        // Send into a saturated component stays saturated.
        assert_eq!(bm_succs(&[2], &[1], 2), vec![vec![2]]);
        // Send below the threshold is exact.
        assert_eq!(bm_succs(&[0], &[1], 2), vec![vec![1]]);
        // Receive from the saturated component forks.
        assert_eq!(bm_succs(&[2], &[-1], 2), vec![vec![1], vec![2]]);
        // Receive from an exact positive count is exact.
        assert_eq!(bm_succs(&[1], &[-1], 2), vec![vec![0]]);
        // Receive from an exact zero is infeasible.
        assert_eq!(bm_succs(&[0], &[-1], 2), Vec::<Vec<u32>>::new());
        // Threshold zero never blocks and never forks.
        assert_eq!(bm_succs(&[0], &[-1], 0), vec![vec![0]]);
        assert_eq!(bm_succs(&[0], &[1], 0), vec![vec![0]]);
    }

    #[test]
    fn preds_invert_succs_exhaustively() {
        for theta in 0..=3u32 {
            for w0 in -1i64..=1 {
                for w1 in -1i64..=1 {
                    let w = vec![w0, w1];
                    for q0 in 0..=theta {
                        for q1 in 0..=theta {
                            let q = vec![q0, q1];
                            for s in bm_succs(&q, &w, theta) {
                                assert!(
                                    bm_preds(&s, &w, theta).contains(&q),
                                    "preds missed q={q:?} for s={s:?} w={w:?} theta={theta}"
                                );
                            }
                        }
                    }
                    // And nothing extra: every claimed predecessor really
                    // steps to s.
                    for s0 in 0..=theta {
                        for s1 in 0..=theta {
                            let s = vec![s0, s1];
                            for q in bm_preds(&s, &w, theta) {
                                assert!(bm_succs(&q, &w, theta).contains(&s));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_simulation_on_one_component() {
        // Concrete counts simulate: any feasible concrete step lands in the
        // abstraction of some listed successor.
        for theta in 0..=3u32 {
            for m in 0..=(theta + 3) as i64 {
                for w in -1i64..=1 {
                    let m2 = m + w;
                    if m2 < 0 {
                        continue;
                    }
                    let alpha = |x: i64| (x.min(theta as i64)) as u32;
                    let succs = component_succs(alpha(m), w, theta);
                    assert!(
                        succs.contains(&alpha(m2)),
                        "theta={theta} m={m} w={w}: {:?} missing {}",
                        succs,
                        alpha(m2)
                    );
                }
            }
        }
    }

    fn send_recv_graph() -> Vcfg {
        let vars = vec!["x".to_string()];
        let act = |s: &str| parse_action_str(s, &vars, &["c".into()], &["m".into()]).unwrap();
        Vcfg::from_parts(
            vec!["s".into(), "a".into(), "t".into()],
            0,
            vec!["c".into()],
            vec!["m".into()],
            vec![("c".into(), "m".into())],
            vars.clone(),
            vec![BigInt::from(0)],
            vec![
                (0, 1, act("c ! m")),
                (1, 2, act("c ? m")),
                (2, 0, act("x := x + 1")),
            ],
        )
    }

    #[test]
    fn kildall_respects_feasibility_at_positive_theta() {
        // Without the send first, the receive cannot fire: t sees exactly
        // the post-send values.
        let g = send_recv_graph();
        let az = match attach_domain(Arc::new(g), DomainKind::Cp) {
            Attached::Cp(a) => a,
            _ => unreachable!(),
        };
        let init = az.initial_env();
        let res = kildall(&az, init, 2, &ForwardOptions::default()).unwrap();
        let at_t = joinmap(&res.per_node[2]);
        // x increments once per loop; values join to top at every node.
        assert_eq!(at_t.render(&["x".into()]), "x=⊤");
        // The zero-configuration at the start only ever holds x values that
        // arrived with an empty queue.
        let at_s = &res.per_node[0];
        assert!(at_s.get(&[0]).is_some());
    }

    #[test]
    fn theta_zero_is_jop() {
        let g = send_recv_graph();
        let az = match attach_domain(Arc::new(g), DomainKind::Cp) {
            Attached::Cp(a) => a,
            _ => unreachable!(),
        };
        let init = az.initial_env();
        let res = kildall(&az, init.clone(), 0, &ForwardOptions::default()).unwrap();
        for m in &res.per_node {
            // One key at most, the all-zero configuration.
            assert!(m.len() <= 1);
        }
        let via_jop = jop(&az, init, &ForwardOptions::default()).unwrap();
        for (m, v) in res.per_node.iter().zip(&via_jop) {
            assert_eq!(&joinmap(m), v);
        }
    }

    #[test]
    fn blocked_receive_keeps_nodes_bottom() {
        // A receive that can never be preceded by a send leaves the
        // successor unreachable for positive theta.
        let vars = vec!["x".to_string()];
        let act = |s: &str| parse_action_str(s, &vars, &["c".into()], &["m".into()]).unwrap();
        let g = Vcfg::from_parts(
            vec!["s".into(), "t".into(), "u".into()],
            0,
            vec!["c".into()],
            vec!["m".into()],
            vec![("c".into(), "m".into())],
            vars.clone(),
            vec![BigInt::from(0)],
            vec![(0, 1, act("c ? m")), (2, 2, act("c ! m"))],
        );
        let az = match attach_domain(Arc::new(g), DomainKind::Cp) {
            Attached::Cp(a) => a,
            _ => unreachable!(),
        };
        let init = az.initial_env();
        let res = kildall(&az, init.clone(), 1, &ForwardOptions::default()).unwrap();
        assert!(res.per_node[1].is_empty());
        // At threshold zero the same receive spuriously fires.
        let res0 = kildall(&az, init, 0, &ForwardOptions::default()).unwrap();
        assert!(!res0.per_node[1].is_empty());
    }

    #[test]
    fn qmap_lattice_basics() {
        let v1 = CpEnv::Env(vec![CpVal::Const(BigInt::from(1))]);
        let v2 = CpEnv::Env(vec![CpVal::Const(BigInt::from(2))]);
        let a = QueueConfigMap::singleton(vec![0], v1.clone());
        let b = QueueConfigMap::singleton(vec![1], v2.clone());
        let j = a.join(&b);
        assert_eq!(j.len(), 2);
        assert!(a.leq(&j) && b.leq(&j));
        assert!(!j.leq(&a));
        assert!(QueueConfigMap::<CpEnv>::bottom().leq(&a));
        // Bottom values are not stored.
        let mut m = QueueConfigMap::<CpEnv>::new();
        assert!(!m.insert_join(vec![0], CpEnv::Unreachable));
        assert!(m.is_empty());
        // Same-key joins collapse.
        let mut m2 = QueueConfigMap::singleton(vec![0], v1);
        m2.insert_join(vec![0], v2);
        assert_eq!(m2.len(), 1);
        assert_eq!(m2.get(&[0]).unwrap().render(&["x".into()]), "x=⊤");
    }
}
