//! Copy-constant propagation: the restriction of linear constant
//! propagation to constants and plain copies. Anything affine beyond
//! `1*src + 0` collapses to ⊤.

use crate::lattice::{TransferFunction, ValueTransfer};
use crate::model::Action;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::cp::{CpEnv, CpVal};
use super::lcp::{lcp_from_action, Formula, LcpFunction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CcpFormula {
    Const(BigInt),
    Copy(usize),
    Top,
}

impl CcpFormula {
    fn render(&self, names: &[String]) -> String {
        match self {
            CcpFormula::Const(n) => n.to_string(),
            CcpFormula::Copy(src) => names[*src].clone(),
            CcpFormula::Top => "⊤".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CcpFunction {
    BotFn(usize),
    Fn(Vec<CcpFormula>),
}

impl CcpFunction {
    pub fn identity(nvars: usize) -> CcpFunction {
        CcpFunction::Fn((0..nvars).map(CcpFormula::Copy).collect())
    }

    pub fn arity(&self) -> usize {
        match self {
            CcpFunction::BotFn(n) => *n,
            CcpFunction::Fn(fs) => fs.len(),
        }
    }

    /// Embeds into the linear domain. The embedding preserves composition,
    /// join, order, and application.
    pub fn to_lcp(&self) -> LcpFunction {
        match self {
            CcpFunction::BotFn(n) => LcpFunction::BotFn(*n),
            CcpFunction::Fn(fs) => LcpFunction::Fn(
                fs.iter()
                    .map(|f| match f {
                        CcpFormula::Const(n) => Formula::Const(n.clone()),
                        CcpFormula::Copy(src) => Formula::var(*src),
                        CcpFormula::Top => Formula::Top,
                    })
                    .collect(),
            ),
        }
    }
}

fn restrict(f: &Formula) -> CcpFormula {
    match f {
        Formula::Const(n) => CcpFormula::Const(n.clone()),
        Formula::Affine { a, src, b } if a.is_one() && b.is_zero() => CcpFormula::Copy(*src),
        _ => CcpFormula::Top,
    }
}

/// Builds the copy-constant transfer of one action by restricting its
/// linear transfer slot by slot. Restriction happens after the linear
/// linearizer runs, so `x := y + 1; x := x - 1` still yields a copy.
pub fn ccp_from_action(a: &Action, nvars: usize) -> CcpFunction {
    match lcp_from_action(a, nvars) {
        LcpFunction::BotFn(n) => CcpFunction::BotFn(n),
        LcpFunction::Fn(fs) => CcpFunction::Fn(fs.iter().map(restrict).collect()),
    }
}

impl ValueTransfer for CcpFunction {
    type Value = CpEnv;

    fn apply(&self, env: &CpEnv) -> CpEnv {
        let fs = match self {
            CcpFunction::BotFn(_) => return CpEnv::Unreachable,
            CcpFunction::Fn(fs) => fs,
        };
        let vals = match env {
            CpEnv::Unreachable => return CpEnv::Unreachable,
            CpEnv::Env(vals) => vals,
        };
        let out = fs
            .iter()
            .map(|f| match f {
                CcpFormula::Const(n) => CpVal::Const(n.clone()),
                CcpFormula::Copy(src) => vals[*src].clone(),
                CcpFormula::Top => CpVal::Top,
            })
            .collect();
        CpEnv::Env(out)
    }
}

impl TransferFunction for CcpFunction {
    fn then(&self, next: &CcpFunction) -> CcpFunction {
        let (ffs, gfs) = match (self, next) {
            (CcpFunction::BotFn(n), _) | (_, CcpFunction::BotFn(n)) => {
                return CcpFunction::BotFn(*n)
            }
            (CcpFunction::Fn(ffs), CcpFunction::Fn(gfs)) => (ffs, gfs),
        };
        let out = gfs
            .iter()
            .map(|gf| match gf {
                CcpFormula::Const(n) => CcpFormula::Const(n.clone()),
                CcpFormula::Top => CcpFormula::Top,
                CcpFormula::Copy(src) => ffs[*src].clone(),
            })
            .collect();
        CcpFunction::Fn(out)
    }

    fn fjoin(&self, other: &CcpFunction) -> CcpFunction {
        let (ffs, gfs) = match (self, other) {
            (CcpFunction::BotFn(_), o) | (o, CcpFunction::BotFn(_)) => return o.clone(),
            (CcpFunction::Fn(ffs), CcpFunction::Fn(gfs)) => (ffs, gfs),
        };
        let out = ffs
            .iter()
            .zip(gfs)
            .map(|(a, b)| if a == b { a.clone() } else { CcpFormula::Top })
            .collect();
        CcpFunction::Fn(out)
    }

    fn fleq(&self, other: &CcpFunction) -> bool {
        match (self, other) {
            (CcpFunction::BotFn(_), _) => true,
            (CcpFunction::Fn(_), CcpFunction::BotFn(_)) => false,
            (CcpFunction::Fn(ffs), CcpFunction::Fn(gfs)) => ffs
                .iter()
                .zip(gfs)
                .all(|(a, b)| a == b || matches!(b, CcpFormula::Top)),
        }
    }

    fn identity_like(&self) -> CcpFunction {
        CcpFunction::identity(self.arity())
    }

    /// Delegates to the linear check through the application-preserving
    /// embedding.
    fn covered_by(&self, others: &[&CcpFunction]) -> bool {
        let lifted: Vec<LcpFunction> = others.iter().map(|o| o.to_lcp()).collect();
        let refs: Vec<&LcpFunction> = lifted.iter().collect();
        self.to_lcp().covered_by(&refs)
    }

    fn render(&self, var_names: &[String]) -> String {
        match self {
            CcpFunction::BotFn(_) => "⊥".to_string(),
            CcpFunction::Fn(fs) => fs
                .iter()
                .zip(var_names)
                .map(|(f, n)| format!("{n}'={}", f.render(var_names)))
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_action_str;

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into(), "z".into()]
    }

    fn f(s: &str) -> CcpFunction {
        ccp_from_action(&parse_action_str(s, &names(), &[], &[]).unwrap(), 3)
    }

    fn l(s: &str) -> LcpFunction {
        lcp_from_action(&parse_action_str(s, &names(), &[], &[]).unwrap(), 3)
    }

    #[test]
    fn restriction_keeps_copies_and_constants() {
        assert_eq!(f("y := x").render(&names()), "x'=x,y'=x,z'=z");
        assert_eq!(f("y := 5").render(&names()), "x'=x,y'=5,z'=z");
        assert_eq!(f("y := x + 1").render(&names()), "x'=x,y'=⊤,z'=z");
    }

    #[test]
    fn restriction_runs_after_linearization() {
        // The increment and decrement cancel in the linear domain, so the
        // copy survives restriction.
        assert_eq!(f("x := y + 1; x := x - 1").render(&names()), "x'=y,y'=y,z'=z");
    }

    #[test]
    fn copy_chains_compose() {
        let comp = f("y := x").then(&f("z := y"));
        assert_eq!(comp.render(&names()), "x'=x,y'=x,z'=x");
    }

    #[test]
    fn embedding_commutes_with_then_and_fjoin() {
        let pairs = [("y := x", "z := y"), ("x := 3", "y := x"), ("y := x + 1", "z := y")];
        for (s1, s2) in pairs {
            let (c1, c2) = (f(s1), f(s2));
            let (l1, l2) = (l(s1), l(s2));
            // Embedding the restricted functions, not lcp_from_action of the
            // same text: the restriction may have dropped precision first.
            assert_eq!(c1.then(&c2).to_lcp(), c1.to_lcp().then(&c2.to_lcp()), "{s1}; {s2}");
            assert_eq!(c1.fjoin(&c2).to_lcp(), c1.to_lcp().fjoin(&c2.to_lcp()), "{s1} vs {s2}");
            // The restriction itself only loses precision, never soundness.
            assert!(l1.fleq(&c1.to_lcp()));
            assert!(l2.fleq(&c2.to_lcp()));
        }
    }

    #[test]
    fn apply_matches_embedding() {
        let env = CpEnv::from_consts(&[BigInt::from(7), BigInt::from(0), BigInt::from(1)]);
        for s in ["y := x", "x := 2", "z := x + 1"] {
            let c = f(s);
            assert_eq!(c.apply(&env), c.to_lcp().apply(&env), "{s}");
        }
    }

    #[test]
    fn bottom_absorbs() {
        let bot = CcpFunction::BotFn(3);
        assert_eq!(bot.then(&f("x := 1")), bot);
        assert_eq!(f("x := 1").then(&bot), bot);
        assert_eq!(bot.fjoin(&f("x := 1")), f("x := 1"));
        assert_eq!(bot.apply(&CpEnv::top(3)), CpEnv::Unreachable);
    }
}
