//! Release acceptance checks. Each test covers one numbered criterion and
//! prints a single `criterion N: PASS` line once every assertion in it has
//! held; a panic anywhere in a test marks that criterion failed.
//!
//! Run `cargo test --test acceptance -- --nocapture` to see the lines.

use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use dfas::backward::{
    compute_end_to_end, compute_jofp, covered, demand, BackwardOptions, TraceEvent,
};
use dfas::forward::{joinmap, kildall, ForwardOptions};
use dfas::{
    attach_domain, build_vcfg, parse_model, target_set, validate, AbstractValue, Analyzable,
    Attached, CpEnv, CpVal, DomainKind, LcpFunction, Model, TransferFunction, Vcfg,
};
use dfas_testgen::checks::{
    check_counter_abstraction, check_demand_composition, check_demand_coverage,
    check_function_coverage, check_supply_limit,
};
use dfas_testgen::{render_trace, render_walk, saturated_corpus, CorpusCase};

fn model_path(name: &str) -> String {
    format!("{}/../../models/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn load(name: &str) -> (Model, Arc<Vcfg>) {
    let path = model_path(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path}: {e}"));
    let model = parse_model(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"));
    let diags = validate(&model);
    assert!(diags.iter().all(|d| !d.fatal), "{name}: {diags:?}");
    let g = Arc::new(build_vcfg(&model).unwrap_or_else(|e| panic!("building {name}: {e}")));
    (model, g)
}

fn lcp(g: &Arc<Vcfg>) -> Analyzable<LcpFunction> {
    Analyzable::from_vcfg(g.clone())
}

fn backward_at(g: &Arc<Vcfg>, nodes: &[usize]) -> CpEnv {
    compute_jofp(&lcp(g), nodes, &BackwardOptions::default())
        .expect("backward engine")
        .value
}

/// Forward results under the plain constant propagation value domain.
fn forward_joined(g: &Arc<Vcfg>, theta: u32) -> Vec<CpEnv> {
    let az = match attach_domain(g.clone(), DomainKind::Cp) {
        Attached::Cp(az) => az,
        _ => unreachable!(),
    };
    let res =
        kildall(&az, az.initial_env(), theta, &ForwardOptions::default()).expect("forward engine");
    res.per_node.iter().map(joinmap).collect()
}

fn join_over(envs: &[CpEnv], nodes: &[usize]) -> CpEnv {
    nodes
        .iter()
        .fold(CpEnv::Unreachable, |acc, &v| acc.join(&envs[v]))
}

/// True when the engine proved the variable takes at most one value at the
/// node: a constant, or bottom because the node is unreachable.
fn at_most_one_value(env: &CpEnv, var: usize) -> bool {
    match env.get(var) {
        None => true,
        Some(CpVal::Const(_)) => true,
        Some(CpVal::Top) => false,
    }
}

/// Shared random corpus with saturated enumeration results, generated once
/// and reused by the criteria that consume it.
fn corpus() -> &'static [CorpusCase] {
    static CORPUS: OnceLock<Vec<CorpusCase>> = OnceLock::new();
    CORPUS.get_or_init(|| saturated_corpus(0xACCE55, 100))
}

#[test]
fn criterion_1_example_a_backward_and_forward_joins() {
    let started = Instant::now();
    let (_, g) = load("example_a");
    let k = target_set(&g, "P.k").expect("target P.k");

    let backward = backward_at(&g, &k);
    assert_eq!(backward.render(&g.var_names), "t=1,x=⊤,y=⊤,z=1");

    let at_theta_3 = join_over(&forward_joined(&g, 3), &k);
    assert_eq!(at_theta_3, backward, "theta 3 must reach the backward join");

    let at_theta_2 = join_over(&forward_joined(&g, 2), &k);
    assert_eq!(
        at_theta_2.render(&g.var_names),
        "t=⊤,x=⊤,y=⊤,z=1",
        "theta 2 keeps z only"
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 1: PASS example A joins match at k (backward, theta 3, theta 2) in {elapsed:?}");
}

#[test]
fn criterion_2_example_b_summaries_and_join() {
    let started = Instant::now();
    let (_, g) = load("example_b");
    let k = target_set(&g, "M.k").expect("target M.k");

    let backward = backward_at(&g, &k);
    assert_eq!(backward.render(&g.var_names), "t=1,x=⊤,y=⊤,z=1");

    let az = lcp(&g);
    let opts = BackwardOptions { trace: true, ..BackwardOptions::default() };
    let table = compute_end_to_end(&az, &[3], &opts).expect("summary tables");
    let foo = g.procs.iter().position(|p| p.name == "foo").expect("proc foo");

    let rows: Vec<(Vec<i64>, Vec<i64>, String)> = table.per_proc[foo]
        .iter()
        .map(|p| (p.demand.clone(), p.supply.clone(), p.ptf.render(&g.var_names)))
        .collect();
    let expected: Vec<(Vec<i64>, Vec<i64>, String)> = vec![
        (vec![3], vec![0], "t'=t,x'=x,y'=y,z'=z".into()),
        (vec![2], vec![1], "t'=z,x'=x+1,y'=x,z'=1".into()),
        (vec![1], vec![2], "t'=1,x'=x+2,y'=x+1,z'=1".into()),
        (vec![0], vec![3], "t'=1,x'=x+3,y'=x+2,z'=1".into()),
        (vec![0], vec![3], "t'=1,x'=x+4,y'=x+3,z'=1".into()),
    ];
    assert_eq!(rows, expected, "summary table for exit demand [3]");
    assert_eq!(rows[3].2, "t'=1,x'=x+3,y'=x+2,z'=1");

    let rejects: Vec<_> = table
        .events
        .iter()
        .filter_map(|ev| match ev {
            TraceEvent::EteReject { proc, path, cover, .. } if *proc == foo => {
                Some((path.ptf.clone(), cover.iter().map(|c| c.ptf.clone()).collect::<Vec<_>>()))
            }
            _ => None,
        })
        .collect();
    assert_eq!(rejects.len(), 1, "exactly one summary path is rejected");
    assert_eq!(rejects[0].0, "t'=1,x'=x+5,y'=x+4,z'=1");
    assert_eq!(
        rejects[0].1,
        vec![
            "t'=1,x'=x+3,y'=x+2,z'=1".to_string(),
            "t'=1,x'=x+4,y'=x+3,z'=1".to_string(),
        ],
        "the fifth unrolling is covered by the third and fourth"
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 2: PASS example B join and summary table match in {elapsed:?}");
}

#[test]
fn criterion_3_covering_trace_golden() {
    let (_, g) = load("example_a");
    let az = lcp(&g);

    // The covering primitive on hand-built loop paths. One turn of the
    // receive loop covers two turns and is itself covered by the empty
    // path. A higher-demand path never enters the comparison set.
    let one_turn = g.path_from_nodes(&["h", "i", "j", "k"]);
    let two_turns = g.path_from_nodes(&["h", "i", "j", "k", "h", "i", "j", "k"]);
    let ptf_of = |edges: &[usize]| {
        edges
            .iter()
            .fold(az.identity.clone(), |acc, &e| acc.then(&az.fns[e]))
    };
    let d_one = demand(&g, &one_turn, &[0]);
    let d_two = demand(&g, &two_turns, &[0]);
    assert_eq!(d_one, vec![3]);
    assert_eq!(d_two, vec![6]);
    let others = vec![(d_one.clone(), ptf_of(&one_turn))];
    assert_eq!(
        covered(&d_two, &ptf_of(&two_turns), &others),
        Some(vec![0]),
        "two loop turns are covered by one"
    );
    let epsilon = vec![(vec![0], az.identity.clone())];
    assert_eq!(
        covered(&d_one, &ptf_of(&one_turn), &epsilon),
        Some(vec![0]),
        "one loop turn is covered by the empty path"
    );
    assert_eq!(
        covered(&d_one, &ptf_of(&one_turn), &[(d_two, ptf_of(&two_turns))]),
        None,
        "a higher-demand path cannot cover"
    );

    // The engine's full covering trace at k, diffed against the golden
    // file. Set BLESS=1 to regenerate it after an intentional change.
    let k = target_set(&g, "P.k").expect("target P.k");
    let opts = BackwardOptions { trace: true, ..BackwardOptions::default() };
    let out = compute_jofp(&az, &k, &opts).expect("backward engine");
    let rendered = render_trace(&g, &out.trace);

    let golden_path = format!("{}/tests/golden/example_a_trace.txt", env!("CARGO_MANIFEST_DIR"));
    if std::env::var_os("BLESS").is_some() {
        std::fs::create_dir_all(format!("{}/tests/golden", env!("CARGO_MANIFEST_DIR"))).unwrap();
        std::fs::write(&golden_path, &rendered).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path)
        .unwrap_or_else(|e| panic!("reading {golden_path}: {e} (run once with BLESS=1)"));
    assert_eq!(rendered, golden, "covering trace drifted from the golden file");

    let rejections: Vec<_> = out
        .trace
        .iter()
        .filter_map(|ev| match ev {
            TraceEvent::Reject { node, path, cover } => Some((*node, path, cover)),
            _ => None,
        })
        .collect();
    assert_eq!((out.stats.candidates, out.stats.retained, rejections.len()), (40, 37, 3));

    // The five-fold inner unrolling dies at the loop head, covered by the
    // retained three- and four-fold unrollings.
    let (node, path, cover) = &rejections[2];
    assert_eq!(g.node_names[*node], "c");
    assert_eq!(path.ptf, "t'=1,x'=x+5,y'=x+4,z'=1");
    assert_eq!(path.demand, vec![0]);
    let cover_ptfs: Vec<&str> = cover.iter().map(|c| c.ptf.as_str()).collect();
    assert_eq!(cover_ptfs, ["t'=1,x'=x+3,y'=x+2,z'=1", "t'=1,x'=x+4,y'=x+3,z'=1"]);

    println!("criterion 3: PASS covering decisions on example A match the golden trace");
}

#[test]
fn criterion_4_backward_matches_saturated_enumeration() {
    let started = Instant::now();
    let mut agreed = 0usize;
    for (i, case) in corpus().iter().enumerate() {
        let az: Analyzable<LcpFunction> = Analyzable::from_vcfg(case.g.clone());
        let out = compute_jofp(&az, &[case.target], &BackwardOptions::default())
            .unwrap_or_else(|e| panic!("case {i}: backward failed: {e}"));
        assert_eq!(
            out.value,
            case.oracle.per_node[case.target],
            "case {i}: backward {} vs enumerated {} at node {}",
            out.value.render(&case.g.var_names),
            case.oracle.per_node[case.target].render(&case.g.var_names),
            case.g.node_names[case.target]
        );
        agreed += 1;
    }
    let elapsed = started.elapsed();
    assert_eq!(agreed, 100);
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!("criterion 4: PASS backward agrees with the enumerator on {agreed}/100 random graphs in {elapsed:?}");
}

#[test]
fn criterion_5_forward_bounds_the_enumeration_everywhere() {
    for (i, case) in corpus().iter().enumerate() {
        let az: Analyzable<LcpFunction> = Analyzable::from_vcfg(case.g.clone());
        for theta in 0..=3u32 {
            let res = kildall(&az, az.initial_env(), theta, &ForwardOptions::default())
                .unwrap_or_else(|e| panic!("case {i} theta {theta}: forward failed: {e}"));
            for v in 0..case.g.node_count() {
                let joined = joinmap(&res.per_node[v]);
                assert!(
                    case.oracle.per_node[v].leq(&joined),
                    "case {i} theta {theta} node {}: enumerated {} not below forward {}",
                    case.g.node_names[v],
                    case.oracle.per_node[v].render(&case.g.var_names),
                    joined.render(&case.g.var_names)
                );
            }
        }
    }
    println!("criterion 5: PASS forward results bound the enumerator at every node for theta 0..=3 (theta 0 is the queue-blind join)");
}

#[test]
fn criterion_6_lemma_suites() {
    assert_eq!(check_demand_composition(0xACC1, 1000), 1000);
    assert_eq!(check_demand_coverage(0xACC2, 1000), 1000);
    assert_eq!(check_supply_limit(0xACC3, 1000), 1000);
    assert_eq!(check_function_coverage(0xACC4, 1000), 1000);
    let simulated = check_counter_abstraction(4, 3);
    assert_eq!(simulated, 790, "exhaustive counter-step simulation size");
    println!("criterion 6: PASS four lemma suites at 1000 instances each and {simulated} exhaustive counter-step checks");
}

#[test]
fn criterion_7_precision_orderings_on_shipped_models() {
    // Queue-blind constants embed into theta 2 forward constants, strictly
    // somewhere, on the procedure-free models.
    let mut forward_strict = false;
    let mut forward_models = 0usize;
    for name in ["example_a", "handshake", "collector", "mutex"] {
        let (_, g) = load(name);
        let jop = forward_joined(&g, 0);
        let fwd = forward_joined(&g, 2);
        for v in 0..g.node_count() {
            for var in 0..g.var_names.len() {
                if at_most_one_value(&jop[v], var) {
                    assert!(
                        at_most_one_value(&fwd[v], var),
                        "{name}: jop proves {} at {} but theta 2 does not",
                        g.var_names[var],
                        g.node_names[v]
                    );
                } else if at_most_one_value(&fwd[v], var) {
                    forward_strict = true;
                }
            }
        }
        forward_models += 1;
    }
    assert!(forward_models >= 3);
    assert!(forward_strict, "theta 2 should beat the queue-blind join somewhere");

    // Copy-constant results embed into linear-constant results, strictly
    // somewhere, on every shipped model.
    let mut domain_strict = false;
    let mut domain_models = 0usize;
    for name in ["example_a", "example_b", "handshake", "collector", "mutex"] {
        let (_, g) = load(name);
        let ccp_az = match attach_domain(g.clone(), DomainKind::Ccp) {
            Attached::Ccp(az) => az,
            _ => unreachable!(),
        };
        let opts = BackwardOptions::default();
        for v in 0..g.node_count() {
            let lcp_env = compute_jofp(&lcp(&g), &[v], &opts).expect("lcp run").value;
            let ccp_env = compute_jofp(&ccp_az, &[v], &opts).expect("ccp run").value;
            for var in 0..g.var_names.len() {
                if at_most_one_value(&ccp_env, var) {
                    assert!(
                        at_most_one_value(&lcp_env, var),
                        "{name}: ccp proves {} at {} but lcp does not",
                        g.var_names[var],
                        g.node_names[v]
                    );
                } else if at_most_one_value(&lcp_env, var) {
                    domain_strict = true;
                }
            }
        }
        domain_models += 1;
    }
    assert!(domain_models >= 3);
    assert!(domain_strict, "linear formulas should beat copy constants somewhere");
    println!("criterion 7: PASS constant sets nest (jop within theta 2, ccp within lcp) with strict gaps");
}

#[test]
fn criterion_8_reports_are_byte_identical_across_runs() {
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_dfas"))
            .args(args)
            .output()
            .expect("spawning the cli");
        assert!(
            out.status.success(),
            "cli failed: {:?}\n{}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };

    let backward_args = [
        "analyze",
        &model_path("example_b"),
        "--engine",
        "backward",
        "--domain",
        "lcp",
        "--target",
        "M.k",
        "--trace",
        "--json",
    ];
    let first = run(&backward_args);
    let second = run(&backward_args);
    assert!(!first.is_empty());
    assert_eq!(first, second, "backward JSON report differs between runs");

    let forward_args = [
        "analyze",
        &model_path("handshake"),
        "--engine",
        "forward",
        "--theta",
        "2",
        "--json",
    ];
    let first = run(&forward_args);
    let second = run(&forward_args);
    assert!(!first.is_empty());
    assert_eq!(first, second, "forward JSON report differs between runs");

    let check_args = ["check", &model_path("collector"), "--json"];
    let first = run(&check_args);
    let second = run(&check_args);
    assert!(!first.is_empty());
    assert_eq!(first, second, "check JSON report differs between runs");

    let compare_args = [
        "compare",
        &model_path("mutex"),
        "backward:lcp",
        "forward:cp:2",
        "--json",
    ];
    let first = run(&compare_args);
    let second = run(&compare_args);
    assert!(!first.is_empty());
    assert_eq!(first, second, "compare JSON report differs between runs");

    println!("criterion 8: PASS JSON reports are byte-identical across repeated runs of every subcommand");
}

#[test]
fn trace_walks_render_node_names() {
    let (_, g) = load("example_a");
    let p = g.path_from_nodes(&["k", "h", "i", "j", "k"]);
    assert_eq!(render_walk(&g, &p), "k->h->i->j->k");
    assert_eq!(render_walk(&g, &[]), "ε");
}
