//! Linear constant propagation.
//!
//! An element maps every variable to a formula over the *input* environment:
//! a constant, an affine term `a*src + b` with `a != 0`, or ⊤. The dedicated
//! bottom function represents the empty path set. Composition is by
//! substitution and join is pointwise, with unequal formulas collapsing to ⊤.

use crate::lattice::{TransferFunction, ValueTransfer};
use crate::model::{Action, BinOp, IntExpr};
use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::cp::{CpEnv, CpVal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Const(BigInt),
    Affine { a: BigInt, src: usize, b: BigInt },
    Top,
}

impl Formula {
    /// Normalizing constructor; a zero coefficient degenerates to a constant.
    pub fn affine(a: BigInt, src: usize, b: BigInt) -> Formula {
        if a.is_zero() {
            Formula::Const(b)
        } else {
            Formula::Affine { a, src, b }
        }
    }

    pub fn var(src: usize) -> Formula {
        Formula::Affine { a: BigInt::one(), src, b: BigInt::zero() }
    }

    /// Computes `scale * self + offset`, the substitution step of
    /// composition.
    fn scale_add(&self, scale: &BigInt, offset: &BigInt) -> Formula {
        if scale.is_zero() {
            return Formula::Const(offset.clone());
        }
        match self {
            Formula::Const(c) => Formula::Const(scale * c + offset),
            Formula::Affine { a, src, b } => {
                Formula::affine(scale * a, *src, scale * b + offset)
            }
            Formula::Top => Formula::Top,
        }
    }

    fn add(&self, other: &Formula) -> Formula {
        match (self, other) {
            (Formula::Const(a), Formula::Const(b)) => Formula::Const(a + b),
            (Formula::Const(c), f) | (f, Formula::Const(c)) => {
                f.scale_add(&BigInt::one(), c)
            }
            (
                Formula::Affine { a: a1, src: s1, b: b1 },
                Formula::Affine { a: a2, src: s2, b: b2 },
            ) if s1 == s2 => Formula::affine(a1 + a2, *s1, b1 + b2),
            _ => Formula::Top,
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        match self {
            Formula::Const(n) => n.to_string(),
            Formula::Top => "⊤".to_string(),
            Formula::Affine { a, src, b } => {
                let name = &names[*src];
                let head = if a.is_one() {
                    name.clone()
                } else if (-a).is_one() {
                    format!("-{name}")
                } else {
                    format!("{a}*{name}")
                };
                if b.is_zero() {
                    head
                } else if b.sign() == num_bigint::Sign::Minus {
                    format!("{head}{b}")
                } else {
                    format!("{head}+{b}")
                }
            }
        }
    }
}

/// Linearizes an integer expression into a formula over the current
/// environment. Products need a constant factor; integer division is only
/// exact on constants.
fn linearize(e: &IntExpr) -> Formula {
    match e {
        IntExpr::Int(n) => Formula::Const(n.clone()),
        IntExpr::Var(v) => Formula::var(*v),
        IntExpr::Neg(inner) => linearize(inner).scale_add(&BigInt::from(-1), &BigInt::zero()),
        IntExpr::Bin(op, l, r) => {
            let lf = linearize(l);
            let rf = linearize(r);
            match op {
                BinOp::Add => lf.add(&rf),
                BinOp::Sub => lf.add(&rf.scale_add(&BigInt::from(-1), &BigInt::zero())),
                BinOp::Mul => match (&lf, &rf) {
                    (Formula::Const(c), f) | (f, Formula::Const(c)) => {
                        f.scale_add(c, &BigInt::zero())
                    }
                    _ => Formula::Top,
                },
                BinOp::Div => match (&lf, &rf) {
                    (Formula::Const(a), Formula::Const(b)) if !b.is_zero() => {
                        Formula::Const(a / b)
                    }
                    _ => Formula::Top,
                },
            }
        }
    }
}

/// A linear constant propagation function: the bottom function of a given
/// arity, or one formula per variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LcpFunction {
    BotFn(usize),
    Fn(Vec<Formula>),
}

impl LcpFunction {
    pub fn identity(nvars: usize) -> LcpFunction {
        LcpFunction::Fn((0..nvars).map(Formula::var).collect())
    }

    pub fn arity(&self) -> usize {
        match self {
            LcpFunction::BotFn(n) => *n,
            LcpFunction::Fn(fs) => fs.len(),
        }
    }

    pub fn is_bottom_fn(&self) -> bool {
        matches!(self, LcpFunction::BotFn(_))
    }

    pub fn formulas(&self) -> Option<&[Formula]> {
        match self {
            LcpFunction::BotFn(_) => None,
            LcpFunction::Fn(fs) => Some(fs),
        }
    }
}

fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let mut a = a.clone();
    let mut b = b.clone();
    while !b.is_zero() {
        let r = &a % &b;
        a = std::mem::replace(&mut b, r);
    }
    a
}

/// True when the two formulas evaluate to the same non-⊤ value on no
/// environment at all. The predicate is stable under substituting a common
/// prefix into both sides: distinct constants stay distinct, same-source
/// pairs keep an unsolvable offset equation, and formulas with disjoint
/// value ranges keep them disjoint.
fn never_agree(f: &Formula, g: &Formula) -> bool {
    match (f, g) {
        (Formula::Top, _) | (_, Formula::Top) => false,
        (Formula::Const(c), Formula::Const(d)) => c != d,
        (Formula::Const(c), Formula::Affine { a, b, .. })
        | (Formula::Affine { a, b, .. }, Formula::Const(c)) => !((c - b) % a).is_zero(),
        (
            Formula::Affine { a: a1, src: s1, b: b1 },
            Formula::Affine { a: a2, src: s2, b: b2 },
        ) => {
            if s1 == s2 {
                if a1 == a2 {
                    b1 != b2
                } else {
                    !((b2 - b1) % (a1 - a2)).is_zero()
                }
            } else {
                !((b1 - b2) % gcd(a1, a2)).is_zero()
            }
        }
    }
}

/// A slot family whose value join is ⊤ on every environment: witnessed by a
/// ⊤ member or by two members that never agree.
fn slot_join_top_everywhere(slot: &[&Formula]) -> bool {
    if slot.iter().any(|f| matches!(f, Formula::Top)) {
        return true;
    }
    slot.iter()
        .enumerate()
        .any(|(i, f)| slot[i + 1..].iter().any(|g| never_agree(f, g)))
}

/// Builds the transfer function of one action. Compound actions compose
/// left to right, so later atoms see the updates of earlier ones.
pub fn lcp_from_action(a: &Action, nvars: usize) -> LcpFunction {
    fn single(a: &Action, nvars: usize) -> LcpFunction {
        match a {
            Action::Skip | Action::Send(..) | Action::Receive(..) | Action::Assume(_) => {
                LcpFunction::identity(nvars)
            }
            Action::Assign(v, e) => {
                let mut fs: Vec<Formula> = (0..nvars).map(Formula::var).collect();
                fs[*v] = linearize(e);
                LcpFunction::Fn(fs)
            }
            Action::Seq(_) => unreachable!("nested compound actions are rejected by the parser"),
        }
    }
    a.atoms()
        .fold(LcpFunction::identity(nvars), |acc, atom| lcp_compose(&acc, &single(atom, nvars)))
}

/// Apply-left-first composition: `lcp_compose(f, g)` behaves as `f` followed
/// by `g`.
pub fn lcp_compose(f: &LcpFunction, g: &LcpFunction) -> LcpFunction {
    debug_assert_eq!(f.arity(), g.arity());
    let (ffs, gfs) = match (f, g) {
        (LcpFunction::BotFn(n), _) | (_, LcpFunction::BotFn(n)) => {
            return LcpFunction::BotFn(*n)
        }
        (LcpFunction::Fn(ffs), LcpFunction::Fn(gfs)) => (ffs, gfs),
    };
    let out = gfs
        .iter()
        .map(|gf| match gf {
            Formula::Const(c) => Formula::Const(c.clone()),
            Formula::Top => Formula::Top,
            Formula::Affine { a, src, b } => ffs[*src].scale_add(a, b),
        })
        .collect();
    LcpFunction::Fn(out)
}

/// Pointwise join; slots that disagree go to ⊤, and the bottom function is
/// the neutral element.
pub fn lcp_join(f: &LcpFunction, g: &LcpFunction) -> LcpFunction {
    debug_assert_eq!(f.arity(), g.arity());
    let (ffs, gfs) = match (f, g) {
        (LcpFunction::BotFn(_), other) | (other, LcpFunction::BotFn(_)) => return other.clone(),
        (LcpFunction::Fn(ffs), LcpFunction::Fn(gfs)) => (ffs, gfs),
    };
    let out = ffs
        .iter()
        .zip(gfs)
        .map(|(a, b)| if a == b { a.clone() } else { Formula::Top })
        .collect();
    LcpFunction::Fn(out)
}

/// Applies a function to an environment value.
pub fn lcp_apply(f: &LcpFunction, env: &CpEnv) -> CpEnv {
    let fs = match f {
        LcpFunction::BotFn(_) => return CpEnv::Unreachable,
        LcpFunction::Fn(fs) => fs,
    };
    let vals = match env {
        CpEnv::Unreachable => return CpEnv::Unreachable,
        CpEnv::Env(vals) => vals,
    };
    debug_assert_eq!(fs.len(), vals.len());
    let out = fs
        .iter()
        .map(|f| match f {
            Formula::Const(c) => CpVal::Const(c.clone()),
            Formula::Top => CpVal::Top,
            Formula::Affine { a, src, b } => match &vals[*src] {
                CpVal::Const(c) => CpVal::Const(a * c + b),
                CpVal::Top => CpVal::Top,
            },
        })
        .collect();
    CpEnv::Env(out)
}

impl ValueTransfer for LcpFunction {
    type Value = CpEnv;

    fn apply(&self, v: &CpEnv) -> CpEnv {
        lcp_apply(self, v)
    }
}

impl TransferFunction for LcpFunction {
    fn then(&self, next: &LcpFunction) -> LcpFunction {
        lcp_compose(self, next)
    }

    fn fjoin(&self, other: &LcpFunction) -> LcpFunction {
        lcp_join(self, other)
    }

    fn fleq(&self, other: &LcpFunction) -> bool {
        match (self, other) {
            (LcpFunction::BotFn(_), _) => true,
            (LcpFunction::Fn(_), LcpFunction::BotFn(_)) => false,
            (LcpFunction::Fn(ffs), LcpFunction::Fn(gfs)) => {
                debug_assert_eq!(ffs.len(), gfs.len());
                ffs.iter()
                    .zip(gfs)
                    .all(|(a, b)| a == b || matches!(b, Formula::Top))
            }
        }
    }

    fn identity_like(&self) -> LcpFunction {
        LcpFunction::identity(self.arity())
    }

    /// A slot is dominated when its formula occurs verbatim in the cover
    /// set, or when the cover slots join to ⊤ on every environment. Both
    /// certificates survive composition with a common prefix; a plain
    /// `fleq` against the representation join does not.
    fn covered_by(&self, others: &[&LcpFunction]) -> bool {
        if others.is_empty() {
            return false;
        }
        let fs = match self {
            LcpFunction::BotFn(_) => return true,
            LcpFunction::Fn(fs) => fs,
        };
        let live: Vec<&[Formula]> = others.iter().filter_map(|o| o.formulas()).collect();
        if live.is_empty() {
            return false;
        }
        fs.iter().enumerate().all(|(v, f)| {
            let slot: Vec<&Formula> = live.iter().map(|gs| &gs[v]).collect();
            slot.iter().any(|g| *g == f) || slot_join_top_everywhere(&slot)
        })
    }

    fn render(&self, var_names: &[String]) -> String {
        match self {
            LcpFunction::BotFn(_) => "⊥".to_string(),
            LcpFunction::Fn(fs) => fs
                .iter()
                .zip(var_names)
                .map(|(f, n)| format!("{n}'={}", f.render(var_names)))
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}
