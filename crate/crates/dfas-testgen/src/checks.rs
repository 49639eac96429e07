//! Randomized and exhaustive checkers for the quantities the backward
//! engine's pruning relies on, plus the counter abstraction of the forward
//! engine. Each randomized checker derives its instances from a seed, panics
//! with the offending instance on the first violation, and returns the
//! number of instances it actually checked, so callers can assert the run
//! was not vacuous.

use dfas::backward::supply;
use dfas::domains::{CcpFormula, CcpFunction, CpEnv, Formula, LcpFunction};
use dfas::forward::{bm_preds, bm_succs};
use dfas::{AbstractValue, TransferFunction, Vcfg};
use num_bigint::BigInt;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::{
    path_demand, random_env, random_lcp, random_path, random_receive_free_path, random_vcfg,
    rng_for, GenConfig,
};

fn leq(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn cat(p: &[usize], q: &[usize]) -> Vec<usize> {
    p.iter().chain(q).copied().collect()
}

fn graph_with_counters(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Vcfg {
    loop {
        let g = random_vcfg(rng, cfg);
        if g.r() > 0 {
            return g;
        }
    }
}

/// Demand composes: the demand of a concatenation is the demand of the
/// prefix toward the demand of the suffix.
pub fn check_demand_composition(seed: u64, instances: usize) -> usize {
    let mut rng = rng_for(seed);
    let cfg = GenConfig::default();
    for _ in 0..instances {
        let g = graph_with_counters(&mut rng, &cfg);
        let walk = random_path(&mut rng, &g, 10);
        let cut = if walk.is_empty() { 0 } else { rng.gen_range(0..=walk.len()) };
        let (p, q) = walk.split_at(cut);
        let d: Vec<i64> = (0..g.r()).map(|_| rng.gen_range(0..=4)).collect();
        let whole = path_demand(&g, &walk, &d);
        let nested = path_demand(&g, p, &path_demand(&g, q, &d));
        assert_eq!(
            whole, nested,
            "demand composition violated: prefix {p:?}, suffix {q:?}, exit demand {d:?}"
        );
    }
    instances
}

/// Demand coverage: a suffix that demands no more than another keeps
/// demanding no more after both gain the same prefix.
pub fn check_demand_coverage(seed: u64, instances: usize) -> usize {
    let mut rng = rng_for(seed);
    let cfg = GenConfig::default();
    let mut checked = 0;
    let mut attempts = 0;
    while checked < instances {
        attempts += 1;
        assert!(attempts < instances * 60, "hypothesis hit rate collapsed");
        let g = graph_with_counters(&mut rng, &cfg);
        let q_big = random_path(&mut rng, &g, 8);
        let q_small = random_path(&mut rng, &g, 8);
        let d: Vec<i64> = (0..g.r()).map(|_| rng.gen_range(0..=3)).collect();
        if !leq(&path_demand(&g, &q_small, &d), &path_demand(&g, &q_big, &d)) {
            continue;
        }
        let p = random_path(&mut rng, &g, 6);
        assert!(
            leq(
                &path_demand(&g, &cat(&p, &q_small), &d),
                &path_demand(&g, &cat(&p, &q_big), &d)
            ),
            "demand coverage violated: prefix {p:?}, small {q_small:?}, big {q_big:?}, d {d:?}"
        );
        checked += 1;
    }
    checked
}

/// Supply limit: between two receive-free prefixes of a common suffix, the
/// one supplying more toward the suffix's demand yields the smaller total
/// demand.
pub fn check_supply_limit(seed: u64, instances: usize) -> usize {
    let mut rng = rng_for(seed);
    let cfg = GenConfig::default();
    let mut checked = 0;
    let mut attempts = 0;
    while checked < instances {
        attempts += 1;
        assert!(attempts < instances * 60, "hypothesis hit rate collapsed");
        let g = graph_with_counters(&mut rng, &cfg);
        let pb = random_path(&mut rng, &g, 8);
        let exit: Vec<i64> = (0..g.r()).map(|_| rng.gen_range(0..=3)).collect();
        let d = path_demand(&g, &pb, &exit);
        let p2 = random_receive_free_path(&mut rng, &g, 6);
        // Half the instances extend p2, which can only raise supply; the
        // rest draw an independent prefix and keep it only when the
        // hypothesis happens to hold.
        let p1 = if rng.gen_bool(0.5) {
            let mut ext = p2.clone();
            let tail_start = ext.last().map(|&e| g.edges[e].to).unwrap_or(0);
            let mut node = tail_start;
            for _ in 0..rng.gen_range(0..4) {
                let outs: Vec<usize> = g.out_edges[node]
                    .iter()
                    .copied()
                    .filter(|&e| g.edges[e].w.iter().all(|&w| w >= 0))
                    .collect();
                if outs.is_empty() {
                    break;
                }
                let e = outs[rng.gen_range(0..outs.len())];
                ext.push(e);
                node = g.edges[e].to;
            }
            ext
        } else {
            random_receive_free_path(&mut rng, &g, 6)
        };
        if !leq(&supply(&g, &p2, &d), &supply(&g, &p1, &d)) {
            continue;
        }
        assert!(
            leq(
                &path_demand(&g, &cat(&p1, &pb), &exit),
                &path_demand(&g, &cat(&p2, &pb), &exit)
            ),
            "supply limit violated: p1 {p1:?}, p2 {p2:?}, pb {pb:?}, exit {exit:?}"
        );
        checked += 1;
    }
    checked
}

/// Slot mixture: a function whose every slot is drawn from one of the cover
/// functions, so the cover's join dominates it by construction.
fn lcp_mixture(rng: &mut ChaCha8Rng, cover: &[LcpFunction], nvars: usize) -> LcpFunction {
    let formulas: Vec<Formula> = (0..nvars)
        .map(|v| {
            let pick = &cover[rng.gen_range(0..cover.len())];
            pick.formulas().expect("generators never produce bottom")[v].clone()
        })
        .collect();
    LcpFunction::Fn(formulas)
}

fn random_ccp(rng: &mut ChaCha8Rng, nvars: usize) -> CcpFunction {
    let formulas: Vec<CcpFormula> = (0..nvars)
        .map(|_| match rng.gen_range(0..100) {
            0..=44 => CcpFormula::Copy(rng.gen_range(0..nvars)),
            45..=79 => CcpFormula::Const(BigInt::from(rng.gen_range(-4i64..=4))),
            _ => CcpFormula::Top,
        })
        .collect();
    CcpFunction::Fn(formulas)
}

fn ccp_mixture(rng: &mut ChaCha8Rng, cover: &[CcpFunction], nvars: usize) -> CcpFunction {
    let formulas: Vec<CcpFormula> = (0..nvars)
        .map(|v| {
            let pick = &cover[rng.gen_range(0..cover.len())];
            match pick {
                CcpFunction::Fn(fs) => fs[v].clone(),
                CcpFunction::BotFn(_) => unreachable!("generators never produce bottom"),
            }
        })
        .collect();
    CcpFunction::Fn(formulas)
}

/// One semantic function-coverage instance: with `cand` dominated by the
/// join of `cover`, the same must hold pointwise after wrapping everything
/// in a shared prefix and suffix.
fn function_coverage_instance<F>(cover: &[F], cand: &F, h1: &F, h3: &F, envs: &[CpEnv])
where
    F: TransferFunction<Value = CpEnv>,
{
    let join = cover
        .iter()
        .skip(1)
        .fold(cover[0].clone(), |acc, f| acc.fjoin(f));
    assert!(cand.fleq(&join), "mixture construction must be dominated");

    let wrapped: Vec<F> = cover.iter().map(|f| h1.then(f).then(h3)).collect();
    let wrapped_join = wrapped
        .iter()
        .skip(1)
        .fold(wrapped[0].clone(), |acc, f| acc.fjoin(f));
    let wrapped_cand = h1.then(cand).then(h3);
    for env in envs {
        let lhs = wrapped_cand.apply(env);
        let rhs = wrapped_join.apply(env);
        assert!(
            lhs.leq(&rhs),
            "function coverage violated pointwise on {env:?}: {lhs:?} vs {rhs:?}"
        );
    }
}

/// Function coverage at the semantic level, for both function domains.
pub fn check_function_coverage(seed: u64, instances: usize) -> usize {
    let mut rng = rng_for(seed);
    for _ in 0..instances {
        let nvars = rng.gen_range(1..=3);
        let envs: Vec<CpEnv> = (0..6).map(|_| random_env(&mut rng, nvars)).collect();
        let k = rng.gen_range(1..=3);
        if rng.gen_bool(0.5) {
            let cover: Vec<LcpFunction> =
                (0..k).map(|_| random_lcp(&mut rng, nvars, true)).collect();
            let cand = lcp_mixture(&mut rng, &cover, nvars);
            let h1 = random_lcp(&mut rng, nvars, true);
            let h3 = random_lcp(&mut rng, nvars, true);
            function_coverage_instance(&cover, &cand, &h1, &h3, &envs);
        } else {
            let cover: Vec<CcpFunction> = (0..k).map(|_| random_ccp(&mut rng, nvars)).collect();
            let cand = ccp_mixture(&mut rng, &cover, nvars);
            let h1 = random_ccp(&mut rng, nvars);
            let h3 = random_ccp(&mut rng, nvars);
            function_coverage_instance(&cover, &cand, &h1, &h3, &envs);
        }
    }
    instances
}

fn in_gamma(concrete: i64, abstract_p: u32, theta: u32) -> bool {
    if abstract_p < theta {
        concrete == abstract_p as i64
    } else {
        concrete >= theta as i64
    }
}

/// Exhaustive soundness of the bounded counter step: every concrete
/// successor of every concretization is covered by some abstract successor.
/// Also checks that `bm_preds` is the exact inverse relation of `bm_succs`
/// and that multi-counter steps are componentwise products.
pub fn check_counter_abstraction(max_theta: u32, window: i64) -> usize {
    let mut checked = 0;
    for theta in 0..=max_theta {
        for p in 0..=theta {
            for w in -window..=window {
                let succs = bm_succs(&[p], &[w], theta);
                let concretes: Vec<i64> = if p < theta {
                    vec![p as i64]
                } else {
                    (theta as i64..=theta as i64 + window).collect()
                };
                for q in concretes {
                    let stepped = q + w;
                    if stepped < 0 {
                        continue;
                    }
                    checked += 1;
                    assert!(
                        succs.iter().any(|s| in_gamma(stepped, s[0], theta)),
                        "no abstract successor covers theta {theta}, p {p}, w {w}, q {q}"
                    );
                }
            }
        }
        // Inversion: p steps to s exactly when s lists p as a predecessor.
        for p in 0..=theta {
            for s in 0..=theta {
                for w in -window..=window {
                    checked += 1;
                    let forward = bm_succs(&[p], &[w], theta).iter().any(|v| v[0] == s);
                    let backward = bm_preds(&[s], &[w], theta).iter().any(|v| v[0] == p);
                    assert_eq!(
                        forward, backward,
                        "succ/pred inversion broken at theta {theta}, p {p}, s {s}, w {w}"
                    );
                }
            }
        }
    }
    // Componentwise product structure on a two-counter slice.
    let theta = 2;
    for p0 in 0..=theta {
        for p1 in 0..=theta {
            for w0 in -2..=2i64 {
                for w1 in -2..=2i64 {
                    checked += 1;
                    let joint = bm_succs(&[p0, p1], &[w0, w1], theta);
                    let left = bm_succs(&[p0], &[w0], theta);
                    let right = bm_succs(&[p1], &[w1], theta);
                    let mut expect: Vec<Vec<u32>> = Vec::new();
                    for a in &left {
                        for b in &right {
                            expect.push(vec![a[0], b[0]]);
                        }
                    }
                    assert_eq!(joint, expect, "product structure at {p0},{p1} / {w0},{w1}");
                }
            }
        }
    }
    checked
}
