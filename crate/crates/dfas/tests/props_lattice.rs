//! Property suites for the value and function lattices.
//!
//! Covered here: semilattice laws, order/join agreement, composition
//! algebra, finite height, the two distributivity directions of composition
//! over join (one universal, one only for shift prefixes, with a pinned
//! counterexample), the embedding of the copy domain into the linear one,
//! and prefix stability of the covering test.

use dfas::domains::{CcpFormula, CcpFunction, CpEnv, CpVal, Formula, LcpFunction};
use dfas::{AbstractValue, TransferFunction, ValueTransfer};
use num_bigint::BigInt;
use proptest::collection::vec;
use proptest::prelude::*;

const NVARS: usize = 3;

fn arb_val() -> impl Strategy<Value = CpVal> {
    prop_oneof![
        3 => (-5i64..=5).prop_map(|c| CpVal::Const(BigInt::from(c))),
        1 => Just(CpVal::Top),
    ]
}

fn arb_env() -> impl Strategy<Value = CpEnv> {
    prop_oneof![
        6 => vec(arb_val(), NVARS).prop_map(CpEnv::Env),
        1 => Just(CpEnv::Unreachable),
    ]
}

fn arb_formula() -> impl Strategy<Value = Formula> {
    prop_oneof![
        3 => (-4i64..=4).prop_map(|c| Formula::Const(BigInt::from(c))),
        4 => ((1i64..=3), 0..NVARS, -4i64..=4)
            .prop_map(|(a, s, b)| Formula::affine(BigInt::from(a), s, BigInt::from(b))),
        1 => ((-3i64..=-1), 0..NVARS, -4i64..=4)
            .prop_map(|(a, s, b)| Formula::affine(BigInt::from(a), s, BigInt::from(b))),
        1 => Just(Formula::Top),
    ]
}

fn arb_fn() -> impl Strategy<Value = LcpFunction> {
    prop_oneof![
        8 => vec(arb_formula(), NVARS).prop_map(LcpFunction::Fn),
        1 => Just(LcpFunction::BotFn(NVARS)),
    ]
}

/// Every slot shifts its own variable. Composing such a prefix into a
/// formula is injective on formulas.
fn arb_shift() -> impl Strategy<Value = LcpFunction> {
    vec(-4i64..=4, NVARS).prop_map(|offs| {
        LcpFunction::Fn(
            offs.iter()
                .enumerate()
                .map(|(i, &b)| Formula::affine(BigInt::from(1), i, BigInt::from(b)))
                .collect(),
        )
    })
}

fn arb_ccp_formula() -> impl Strategy<Value = CcpFormula> {
    prop_oneof![
        3 => (-4i64..=4).prop_map(|c| CcpFormula::Const(BigInt::from(c))),
        3 => (0..NVARS).prop_map(CcpFormula::Copy),
        1 => Just(CcpFormula::Top),
    ]
}

fn arb_ccp() -> impl Strategy<Value = CcpFunction> {
    prop_oneof![
        8 => vec(arb_ccp_formula(), NVARS).prop_map(CcpFunction::Fn),
        1 => Just(CcpFunction::BotFn(NVARS)),
    ]
}

proptest! {
    // ----- value lattice -----

    #[test]
    fn env_join_is_commutative_associative_idempotent(
        a in arb_env(), b in arb_env(), c in arb_env()
    ) {
        prop_assert_eq!(a.join(&b), b.join(&a));
        prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
        prop_assert_eq!(a.join(&a), a);
    }

    #[test]
    fn env_order_agrees_with_join(a in arb_env(), b in arb_env()) {
        let j = a.join(&b);
        prop_assert!(a.leq(&j));
        prop_assert!(b.leq(&j));
        prop_assert_eq!(a.leq(&b), a.join(&b) == b);
        prop_assert!(CpEnv::bottom().leq(&a));
        prop_assert_eq!(CpEnv::bottom().join(&a), a);
    }

    #[test]
    fn env_chains_ascend_at_most_nvars_plus_one_times(
        envs in vec(arb_env(), 0..12)
    ) {
        let mut acc = CpEnv::bottom();
        let mut ascents = 0;
        for e in &envs {
            let next = acc.join(e);
            if next != acc {
                ascents += 1;
            }
            acc = next;
        }
        prop_assert!(ascents <= NVARS + 1, "{} strict ascents", ascents);
    }

    // ----- function lattice -----

    #[test]
    fn fn_join_is_commutative_associative_idempotent(
        f in arb_fn(), g in arb_fn(), h in arb_fn()
    ) {
        prop_assert_eq!(f.fjoin(&g), g.fjoin(&f));
        prop_assert_eq!(f.fjoin(&g).fjoin(&h), f.fjoin(&g.fjoin(&h)));
        prop_assert_eq!(f.fjoin(&f), f);
    }

    #[test]
    fn fn_order_agrees_with_join_and_application(
        f in arb_fn(), g in arb_fn(), v in arb_env()
    ) {
        let j = f.fjoin(&g);
        prop_assert!(f.fleq(&j));
        prop_assert!(g.fleq(&j));
        prop_assert_eq!(f.fleq(&g), f.fjoin(&g) == g);
        if f.fleq(&g) {
            prop_assert!(f.apply(&v).leq(&g.apply(&v)));
        }
    }

    #[test]
    fn composition_is_associative_with_identity(
        f in arb_fn(), g in arb_fn(), h in arb_fn()
    ) {
        prop_assert_eq!(f.then(&g).then(&h), f.then(&g.then(&h)));
        let id = f.identity_like();
        prop_assert_eq!(id.then(&f), f.clone());
        prop_assert_eq!(f.then(&id), f);
    }

    #[test]
    fn application_respects_composition(f in arb_fn(), g in arb_fn(), v in arb_env()) {
        prop_assert_eq!(f.then(&g).apply(&v), g.apply(&f.apply(&v)));
    }

    #[test]
    fn fn_chains_ascend_at_most_nvars_plus_one_times(fs in vec(arb_fn(), 0..12)) {
        let mut acc = LcpFunction::BotFn(NVARS);
        let mut ascents = 0;
        for f in &fs {
            let next = acc.fjoin(f);
            if next != acc {
                ascents += 1;
            }
            acc = next;
        }
        prop_assert!(ascents <= NVARS + 1, "{} strict ascents", ascents);
    }

    // ----- distributivity of composition over join -----

    #[test]
    fn joining_prefixes_distributes(f in arb_fn(), g in arb_fn(), h in arb_fn()) {
        prop_assert_eq!(f.fjoin(&g).then(&h), f.then(&h).fjoin(&g.then(&h)));
    }

    #[test]
    fn joining_suffixes_distributes_after_shift_prefixes(
        f in arb_fn(), g in arb_fn(), h in arb_shift()
    ) {
        prop_assert_eq!(h.then(&f.fjoin(&g)), h.then(&f).fjoin(&h.then(&g)));
    }

    #[test]
    fn joining_suffixes_after_any_prefix_stays_sound(
        f in arb_fn(), g in arb_fn(), h in arb_fn(), v in arb_env()
    ) {
        // The two sides can differ in representation, but only toward ⊤.
        let folded = h.then(&f).fjoin(&h.then(&g));
        let joined = h.then(&f.fjoin(&g));
        prop_assert!(folded.fleq(&joined));
        prop_assert!(folded.apply(&v).leq(&joined.apply(&v)));
    }

    // ----- embedding of the copy domain -----

    #[test]
    fn ccp_embeds_homomorphically(c1 in arb_ccp(), c2 in arb_ccp(), v in arb_env()) {
        prop_assert_eq!(c1.then(&c2).to_lcp(), c1.to_lcp().then(&c2.to_lcp()));
        prop_assert_eq!(c1.fjoin(&c2).to_lcp(), c1.to_lcp().fjoin(&c2.to_lcp()));
        prop_assert_eq!(c1.fleq(&c2), c1.to_lcp().fleq(&c2.to_lcp()));
        prop_assert_eq!(c1.apply(&v), c1.to_lcp().apply(&v));
    }

    // ----- covering stability -----

    #[test]
    fn covering_survives_prefixes_pointwise(
        cover in vec(vec(arb_formula(), NVARS), 1..4),
        picks in vec(0usize..4, NVARS),
        h in arb_fn(),
        v in arb_env(),
    ) {
        let cover: Vec<LcpFunction> = cover.into_iter().map(LcpFunction::Fn).collect();
        let cand = LcpFunction::Fn(
            picks
                .iter()
                .enumerate()
                .map(|(slot, &p)| {
                    cover[p % cover.len()].formulas().unwrap()[slot].clone()
                })
                .collect(),
        );
        let refs: Vec<&LcpFunction> = cover.iter().collect();
        if cand.covered_by(&refs) {
            let lhs = h.then(&cand).apply(&v);
            let rhs = cover
                .iter()
                .fold(CpEnv::bottom(), |acc, f| acc.join(&h.then(f).apply(&v)));
            prop_assert!(lhs.leq(&rhs), "{lhs:?} not below {rhs:?}");
        }
    }
}

/// The one-sided failure pinned: joining suffixes does not distribute over
/// an arbitrary (constant-writing) prefix in representation.
#[test]
fn suffix_distribution_fails_without_shift_prefixes() {
    let names = vec!["x".to_string()];
    let f = LcpFunction::Fn(vec![Formula::affine(BigInt::from(1), 0, BigInt::from(2))]);
    let g = LcpFunction::Fn(vec![Formula::Const(BigInt::from(5))]);
    let h = LcpFunction::Fn(vec![Formula::Const(BigInt::from(3))]);
    let joined = h.then(&f.fjoin(&g));
    let folded = h.then(&f).fjoin(&h.then(&g));
    assert_eq!(joined.render(&names), "x'=⊤");
    assert_eq!(folded.render(&names), "x'=5");
    assert_ne!(joined, folded);
}

/// Covering is not plain representation-join domination: a constant is
/// rejected against a cover that still agrees somewhere, and the pointwise
/// failure after a zeroing prefix is exactly the reason.
#[test]
fn covering_rejects_agreeing_families_that_join_to_top() {
    let id = LcpFunction::identity(1);
    let zero = LcpFunction::Fn(vec![Formula::Const(BigInt::from(0))]);
    let one = LcpFunction::Fn(vec![Formula::Const(BigInt::from(1))]);
    assert!(one.fleq(&id.fjoin(&zero)), "representation join is ⊤");
    assert!(one.covered_by(&[&id, &zero]) == false);

    // After the prefix x := 0 the cover join evaluates to 0 while the
    // candidate stays 1, so accepting it would have been unsound.
    let h = zero.clone();
    let env = CpEnv::Env(vec![CpVal::Const(BigInt::from(7))]);
    let lhs = h.then(&one).apply(&env);
    let rhs = h.then(&id).apply(&env).join(&h.then(&zero).apply(&env));
    assert!(!lhs.leq(&rhs));
}
