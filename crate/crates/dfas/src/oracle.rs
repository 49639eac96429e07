//! Reference enumerator for cross-checking the engines.
//!
//! Walks concrete executions breadth first, tracking the exact counter
//! vector of every reachable (node, counters) pair and joining domain
//! values that meet at the same pair. With transfers that distribute over
//! the join, the per-node join over all pairs equals the join over feasible
//! paths; the bundled test corpora stay inside that fragment.
//!
//! Enumeration is depth bounded. The result is flagged saturated when the
//! per-node joins stop changing over a trailing window, or exact when the
//! frontier empties first. Graphs with procedures must be inlined before
//! enumeration.

use crate::domains::CpEnv;
use crate::lattice::{AbstractValue, ValueTransfer};
use crate::vcfg::Analyzable;
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub max_depth: usize,
    /// Trailing depth window that must leave every per-node join unchanged
    /// for the result to count as saturated.
    pub window: usize,
    pub max_states: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { max_depth: 120, window: 16, max_states: 4_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct EnumerationResult {
    pub per_node: Vec<CpEnv>,
    /// Joins were stable across the trailing window (or the frontier was
    /// exhausted).
    pub saturated: bool,
    /// Every reachable configuration was visited.
    pub exhausted: bool,
    pub states: usize,
}

/// Join over enumerated feasible paths at every node.
pub fn enumerate_jofp<F>(az: &Analyzable<F>, opts: &OracleOptions) -> EnumerationResult
where
    F: ValueTransfer<Value = CpEnv>,
{
    let g = &az.g;
    assert!(
        g.procs.is_empty(),
        "inline procedures before enumeration"
    );
    let n = g.node_count();
    let r = g.r();
    let mut map: HashMap<(usize, Vec<i64>), CpEnv> = HashMap::new();
    let init = az.initial_env();
    let start_key = (g.start, vec![0i64; r]);
    map.insert(start_key.clone(), init);
    let mut frontier: Vec<(usize, Vec<i64>)> = vec![start_key];
    let mut exhausted = false;
    let mut truncated = false;

    let per_node_join = |map: &HashMap<(usize, Vec<i64>), CpEnv>| -> Vec<CpEnv> {
        let mut out = vec![CpEnv::Unreachable; n];
        for ((node, _), v) in map {
            out[*node] = out[*node].join(v);
        }
        out
    };

    let mut snapshot: Option<Vec<CpEnv>> = None;
    for depth in 0..(opts.max_depth + opts.window) {
        if frontier.is_empty() {
            exhausted = true;
            break;
        }
        if depth == opts.max_depth {
            snapshot = Some(per_node_join(&map));
        }
        let mut next: Vec<(usize, Vec<i64>)> = Vec::new();
        let mut queued: HashSet<(usize, Vec<i64>)> = HashSet::new();
        for key in frontier.drain(..) {
            let v = map.get(&key).expect("frontier keys are mapped").clone();
            let (node, counters) = key;
            for &e in &g.out_edges[node] {
                let edge = &g.edges[e];
                let mut c2 = counters.clone();
                let mut feasible = true;
                for (c, w) in c2.iter_mut().zip(&edge.w) {
                    *c += w;
                    if *c < 0 {
                        feasible = false;
                        break;
                    }
                }
                if !feasible {
                    continue;
                }
                let v2 = az.fns[e].apply(&v);
                if v2.is_bottom() {
                    continue;
                }
                let k2 = (edge.to, c2);
                let changed = match map.get(&k2) {
                    Some(old) => {
                        let joined = old.join(&v2);
                        if joined == *old {
                            false
                        } else {
                            map.insert(k2.clone(), joined);
                            true
                        }
                    }
                    None => {
                        map.insert(k2.clone(), v2);
                        true
                    }
                };
                if changed && queued.insert(k2.clone()) {
                    next.push(k2);
                }
            }
            if map.len() > opts.max_states {
                truncated = true;
                break;
            }
        }
        if truncated {
            break;
        }
        frontier = next;
    }

    let per_node = per_node_join(&map);
    let saturated = if exhausted {
        true
    } else if truncated {
        false
    } else {
        match snapshot {
            Some(s) => s == per_node,
            // The frontier outlived max_depth but the snapshot was never
            // taken; only possible when max_depth is 0.
            None => false,
        }
    };
    EnumerationResult { per_node, saturated, exhausted, states: map.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_action_str;
    use crate::vcfg::Vcfg;
    use num_bigint::BigInt;
    use std::sync::Arc;

    fn lcp(g: Vcfg) -> Analyzable<crate::domains::LcpFunction> {
        Analyzable::from_vcfg(Arc::new(g))
    }

    #[test]
    fn finite_graph_is_exhausted_and_exact() {
        let vars = vec!["x".to_string()];
        let act = |s: &str| parse_action_str(s, &vars, &[], &[]).unwrap();
        let g = Vcfg::from_parts(
            vec!["s".into(), "a".into(), "t".into()],
            0,
            vec![],
            vec![],
            vec![],
            vars.clone(),
            vec![BigInt::from(0)],
            vec![(0, 1, act("x := x + 1")), (1, 2, act("x := x * 2"))],
        );
        let res = enumerate_jofp(&lcp(g), &OracleOptions::default());
        assert!(res.exhausted && res.saturated);
        assert_eq!(res.per_node[2].render(&["x".into()]), "x=2");
    }

    #[test]
    fn receive_feasibility_is_exact() {
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
        let res = enumerate_jofp(&lcp(g), &OracleOptions::default());
        assert!(res.exhausted);
        assert_eq!(res.per_node[1], CpEnv::Unreachable);
    }

    #[test]
    fn looping_sends_saturate_without_exhausting() {
        // The counter grows forever, so enumeration cannot exhaust, but the
        // constant environment stabilizes immediately.
        let vars = vec!["x".to_string()];
        let act = |s: &str| parse_action_str(s, &vars, &["c".into()], &["m".into()]).unwrap();
        let g = Vcfg::from_parts(
            vec!["s".into()],
            0,
            vec!["c".into()],
            vec!["m".into()],
            vec![("c".into(), "m".into())],
            vars.clone(),
            vec![BigInt::from(3)],
            vec![(0, 0, act("c ! m"))],
        );
        let res = enumerate_jofp(&lcp(g), &OracleOptions::default());
        assert!(!res.exhausted);
        assert!(res.saturated);
        assert_eq!(res.per_node[0].render(&["x".into()]), "x=3");
    }

    #[test]
    fn matches_backward_engine_on_a_mixed_graph() {
        let vars = vec!["x".to_string(), "y".to_string()];
        let act = |s: &str| parse_action_str(s, &vars, &["c".into()], &["m".into()]).unwrap();
        let g = Vcfg::from_parts(
            vec!["s".into(), "a".into(), "b".into(), "t".into()],
            0,
            vec!["c".into()],
            vec!["m".into()],
            vec![("c".into(), "m".into())],
            vars.clone(),
            vec![BigInt::from(0), BigInt::from(0)],
            vec![
                (0, 1, act("c ! m")),
                (1, 1, act("x := x + 2")),
                (1, 2, act("c ? m")),
                (2, 3, act("y := y + 1")),
                (3, 1, act("c ! m")),
            ],
        );
        let az = lcp(g);
        let res = enumerate_jofp(&az, &OracleOptions::default());
        assert!(res.saturated);
        for t in 0..az.g.node_count() {
            let back = crate::backward::compute_jofp(
                &az,
                &[t],
                &crate::backward::BackwardOptions::default(),
            )
            .unwrap();
            assert_eq!(back.value, res.per_node[t], "node {t}");
        }
    }
}
