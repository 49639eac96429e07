//! Random generators for exercising the dfas engines against each other.
//!
//! Graph generation sticks to the shift fragment: assignments of the form
//! `x := x + b` next to skips, sends, and receives. Within that fragment
//! every edge transfer is a per-variable shift, compositions and joins stay
//! exact, and the enumerating reference computes the same join the engines
//! do, so disagreements are real bugs rather than precision artifacts.

pub mod checks;

use dfas::backward::{demand, TraceEvent};
use dfas::domains::{CpEnv, CpVal, Formula, LcpFunction};
use dfas::model::{parse_action_str, Action};
use dfas::oracle::{enumerate_jofp, EnumerationResult, OracleOptions};
use dfas::vcfg::{Analyzable, Vcfg};
use num_bigint::BigInt;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_nodes: usize,
    pub max_extra_edges: usize,
    pub max_vars: usize,
    pub max_counters: usize,
    /// Magnitude bound for shift offsets and initial values.
    pub max_shift: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_nodes: 8,
            max_extra_edges: 6,
            max_vars: 3,
            max_counters: 2,
            max_shift: 3,
        }
    }
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn var_names(n: usize) -> Vec<String> {
    ["x", "y", "z"].iter().take(n).map(|s| s.to_string()).collect()
}

/// A random graph in the shift fragment. Every node is reachable from the
/// start; receives only name pairs some edge sends.
pub fn random_vcfg(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Vcfg {
    let n = rng.gen_range(2..=cfg.max_nodes.max(2));
    let nvars = rng.gen_range(1..=cfg.max_vars.max(1));
    let vars = var_names(nvars);
    let n_msgs = rng.gen_range(1..=cfg.max_counters.max(1));
    let channels = vec!["c".to_string()];
    let messages: Vec<String> = (0..n_msgs).map(|i| format!("m{i}")).collect();

    #[derive(Clone)]
    enum Raw {
        Skip,
        Shift(usize, i64),
        Send(usize),
        Receive(usize),
    }

    let pick = |rng: &mut ChaCha8Rng| -> Raw {
        match rng.gen_range(0..100) {
            0..=19 => Raw::Skip,
            20..=54 => {
                let v = rng.gen_range(0..nvars);
                let b = rng.gen_range(-cfg.max_shift..=cfg.max_shift);
                Raw::Shift(v, b)
            }
            55..=79 => Raw::Send(rng.gen_range(0..n_msgs)),
            _ => Raw::Receive(rng.gen_range(0..n_msgs)),
        }
    };

    // Spanning edges keep every node reachable; extras add joins and
    // cycles.
    let mut raw_edges: Vec<(usize, usize, Raw)> = Vec::new();
    for to in 1..n {
        let from = rng.gen_range(0..to);
        let act = pick(rng);
        raw_edges.push((from, to, act));
    }
    for _ in 0..rng.gen_range(0..=cfg.max_extra_edges) {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(0..n);
        raw_edges.push((from, to, pick(rng)));
    }

    // The counter table lists exactly the sent pairs; receives of unsent
    // pairs degrade to skips so every edge stays expressible.
    let mut sent: Vec<usize> = raw_edges
        .iter()
        .filter_map(|(_, _, a)| match a {
            Raw::Send(m) => Some(*m),
            _ => None,
        })
        .collect();
    sent.sort_unstable();
    sent.dedup();
    let counters: Vec<(String, String)> = sent
        .iter()
        .map(|&m| ("c".to_string(), messages[m].clone()))
        .collect();

    let edges: Vec<(usize, usize, Action)> = raw_edges
        .into_iter()
        .map(|(f, t, a)| {
            let text = match a {
                Raw::Skip => "skip".to_string(),
                Raw::Shift(v, 0) => format!("{0} := {0} + 0", vars[v]),
                Raw::Shift(v, b) if b < 0 => format!("{0} := {0} - {1}", vars[v], -b),
                Raw::Shift(v, b) => format!("{0} := {0} + {1}", vars[v], b),
                Raw::Send(m) => format!("c ! {}", messages[m]),
                Raw::Receive(m) if sent.contains(&m) => format!("c ? {}", messages[m]),
                Raw::Receive(_) => "skip".to_string(),
            };
            (f, t, parse_action_str(&text, &vars, &channels, &messages).unwrap())
        })
        .collect();

    let node_names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let init_vals: Vec<BigInt> = (0..nvars)
        .map(|_| BigInt::from(rng.gen_range(-cfg.max_shift..=cfg.max_shift)))
        .collect();
    Vcfg::from_parts(
        node_names,
        0,
        channels,
        messages,
        counters,
        vars,
        init_vals,
        edges,
    )
}

pub struct CorpusCase {
    pub g: Arc<Vcfg>,
    pub target: usize,
    pub oracle: EnumerationResult,
}

/// Generates graphs until `count` of them saturate under enumeration,
/// pairing each with a random target node and the enumeration itself.
/// Deterministic in the seed.
pub fn saturated_corpus(seed: u64, count: usize) -> Vec<CorpusCase> {
    let mut rng = rng_for(seed);
    let cfg = GenConfig::default();
    let opts = OracleOptions::default();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(
            attempts <= count * 200,
            "saturation rate collapsed: {} cases after {attempts} attempts",
            out.len()
        );
        let g = Arc::new(random_vcfg(&mut rng, &cfg));
        let target = rng.gen_range(0..g.node_count());
        let az: Analyzable<LcpFunction> = Analyzable::from_vcfg(g.clone());
        let oracle = enumerate_jofp(&az, &opts);
        if !oracle.saturated {
            continue;
        }
        out.push(CorpusCase { g, target, oracle });
    }
    out
}

/// A random transfer function whose slots shift their own variable, pin a
/// constant (when allowed), or are top. Shift-only functions (with
/// `allow_consts` false) compose and join without ever conflating distinct
/// formulas.
pub fn random_lcp(rng: &mut ChaCha8Rng, nvars: usize, allow_consts: bool) -> LcpFunction {
    let formulas: Vec<Formula> = (0..nvars)
        .map(|i| {
            let roll = rng.gen_range(0..100);
            if roll < 60 {
                Formula::affine(BigInt::from(1), i, BigInt::from(rng.gen_range(-4i64..=4)))
            } else if allow_consts && roll < 85 {
                Formula::Const(BigInt::from(rng.gen_range(-4i64..=4)))
            } else if roll < 95 {
                Formula::Top
            } else {
                Formula::var(i)
            }
        })
        .collect();
    LcpFunction::Fn(formulas)
}

pub fn random_env(rng: &mut ChaCha8Rng, nvars: usize) -> CpEnv {
    CpEnv::Env(
        (0..nvars)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    CpVal::Top
                } else {
                    CpVal::Const(BigInt::from(rng.gen_range(-5i64..=5)))
                }
            })
            .collect(),
    )
}

pub fn random_demand(rng: &mut ChaCha8Rng, r: usize, max: i64) -> Vec<i64> {
    (0..r).map(|_| rng.gen_range(0..=max)).collect()
}

/// A random forward walk of at most `len` edges, starting anywhere.
pub fn random_path(rng: &mut ChaCha8Rng, g: &Vcfg, len: usize) -> Vec<usize> {
    let mut node = rng.gen_range(0..g.node_count());
    let mut out = Vec::new();
    for _ in 0..len {
        let outs = &g.out_edges[node];
        if outs.is_empty() {
            break;
        }
        let e = outs[rng.gen_range(0..outs.len())];
        out.push(e);
        node = g.edges[e].to;
    }
    out
}

/// Like `random_path` but never traverses a receive, so the result suits
/// the supply lemmas.
pub fn random_receive_free_path(rng: &mut ChaCha8Rng, g: &Vcfg, len: usize) -> Vec<usize> {
    let mut node = rng.gen_range(0..g.node_count());
    let mut out = Vec::new();
    for _ in 0..len {
        let outs: Vec<usize> = g.out_edges[node]
            .iter()
            .copied()
            .filter(|&e| g.edges[e].w.iter().all(|&w| w >= 0))
            .collect();
        if outs.is_empty() {
            break;
        }
        let e = outs[rng.gen_range(0..outs.len())];
        out.push(e);
        node = g.edges[e].to;
    }
    out
}

/// Runs an edge sequence concretely from counter vector `c0`. Returns the
/// final counters, or `None` when a receive blocks.
pub fn simulate(g: &Vcfg, edges: &[usize], c0: &[i64]) -> Option<Vec<i64>> {
    let mut c = c0.to_vec();
    for &e in edges {
        for (ci, w) in c.iter_mut().zip(&g.edges[e].w) {
            *ci += w;
            if *ci < 0 {
                return None;
            }
        }
    }
    Some(c)
}

/// Convenience wrapper so lemma suites can state the demand of a path
/// without importing the engine crate's module paths.
pub fn path_demand(g: &Vcfg, edges: &[usize], d: &[i64]) -> Vec<i64> {
    demand(g, edges, d)
}

/// Renders an edge sequence as the node walk it traverses, `ε` when empty.
pub fn render_walk(g: &Vcfg, edges: &[usize]) -> String {
    match edges.first() {
        None => "ε".to_string(),
        Some(&e0) => {
            let mut s = g.node_names[g.edges[e0].from].clone();
            for &e in edges {
                s.push_str("->");
                s.push_str(&g.node_names[g.edges[e].to]);
            }
            s
        }
    }
}

/// One line per covering decision, in event order. The format is stable on
/// purpose: golden tests diff it verbatim.
pub fn render_trace(g: &Vcfg, events: &[TraceEvent]) -> String {
    let mut out = String::new();
    let path = |p: &dfas::backward::PathDesc| {
        format!("{} demand {:?} [{}]", render_walk(g, &p.edges), p.demand, p.ptf)
    };
    let covers = |c: &[dfas::backward::PathDesc]| {
        c.iter()
            .map(|p| render_walk(g, &p.edges))
            .collect::<Vec<_>>()
            .join(", ")
    };
    for ev in events {
        let line = match ev {
            TraceEvent::Retain { node, path: p } => {
                format!("retain at {}: {}", g.node_names[*node], path(p))
            }
            TraceEvent::Reject { node, path: p, cover } => format!(
                "reject at {}: {} covered by {{ {} }}",
                g.node_names[*node],
                path(p),
                covers(cover)
            ),
            TraceEvent::EteRetain { proc, demand, path: p } => format!(
                "summary-retain in {} for demand {:?}: {}",
                g.procs[*proc].name,
                demand,
                path(p)
            ),
            TraceEvent::EteReject { proc, demand, path: p, cover } => format!(
                "summary-reject in {} for demand {:?}: {} covered by {{ {} }}",
                g.procs[*proc].name,
                demand,
                path(p),
                covers(cover)
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = random_vcfg(&mut rng_for(7), &GenConfig::default());
        let b = random_vcfg(&mut rng_for(7), &GenConfig::default());
        assert_eq!(a.node_names, b.node_names);
        assert_eq!(a.edges.len(), b.edges.len());
        for (ea, eb) in a.edges.iter().zip(&b.edges) {
            assert_eq!((ea.from, ea.to, &ea.w), (eb.from, eb.to, &eb.w));
        }
    }

    #[test]
    fn receives_only_name_sent_pairs() {
        let mut rng = rng_for(42);
        for _ in 0..50 {
            let g = random_vcfg(&mut rng, &GenConfig::default());
            for e in &g.edges {
                for w in &e.w {
                    assert!(w.abs() <= 1);
                }
            }
            // Receives index into the counter table, so an unsent pair
            // would have panicked in from_parts already; spot check the
            // width.
            assert!(g.r() <= 2);
        }
    }

    #[test]
    fn corpus_saturates_quickly() {
        let corpus = saturated_corpus(11, 5);
        assert_eq!(corpus.len(), 5);
        for case in &corpus {
            assert!(case.oracle.saturated);
            assert!(case.target < case.g.node_count());
        }
    }

    #[test]
    fn simulate_blocks_exactly_when_demand_says_so() {
        let mut rng = rng_for(3);
        let cfg = GenConfig::default();
        for _ in 0..100 {
            let g = random_vcfg(&mut rng, &cfg);
            let p = random_path(&mut rng, &g, 6);
            let d0 = vec![0i64; g.r()];
            let dem = path_demand(&g, &p, &d0);
            assert!(simulate(&g, &p, &dem).is_some());
            for i in 0..dem.len() {
                if dem[i] > 0 {
                    let mut short = dem.clone();
                    short[i] -= 1;
                    assert!(simulate(&g, &p, &short).is_none());
                }
            }
        }
    }
}
