//! Constant propagation over variable environments.
//!
//! An environment is either unreachable or assigns each variable a value
//! from the flat constant lattice. Arithmetic is strict in ⊤: any operand
//! being ⊤ makes the result ⊤, and division by zero yields ⊤ rather than an
//! error.

use crate::lattice::{AbstractValue, ValueTransfer};
use crate::model::{Action, BinOp, BoolExpr, CmpOp, IntExpr};
use num_bigint::BigInt;
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpVal {
    Const(BigInt),
    Top,
}

impl CpVal {
    pub fn join(&self, other: &CpVal) -> CpVal {
        match (self, other) {
            (CpVal::Const(a), CpVal::Const(b)) if a == b => CpVal::Const(a.clone()),
            _ => CpVal::Top,
        }
    }

    pub fn leq(&self, other: &CpVal) -> bool {
        matches!(other, CpVal::Top) || self == other
    }

    pub fn as_const(&self) -> Option<&BigInt> {
        match self {
            CpVal::Const(n) => Some(n),
            CpVal::Top => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            CpVal::Const(n) => n.to_string(),
            CpVal::Top => "⊤".to_string(),
        }
    }
}

/// A variable environment. `Unreachable` is the bottom element; `Env` holds
/// one lattice value per declared variable, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpEnv {
    Unreachable,
    Env(Vec<CpVal>),
}

impl CpEnv {
    pub fn from_consts(vals: &[BigInt]) -> CpEnv {
        CpEnv::Env(vals.iter().map(|n| CpVal::Const(n.clone())).collect())
    }

    pub fn top(nvars: usize) -> CpEnv {
        CpEnv::Env(vec![CpVal::Top; nvars])
    }

    pub fn get(&self, v: usize) -> Option<&CpVal> {
        match self {
            CpEnv::Unreachable => None,
            CpEnv::Env(vals) => Some(&vals[v]),
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        match self {
            CpEnv::Unreachable => "unreachable".to_string(),
            CpEnv::Env(vals) => names
                .iter()
                .zip(vals)
                .map(|(n, v)| format!("{n}={}", v.render()))
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

impl AbstractValue for CpEnv {
    fn bottom() -> CpEnv {
        CpEnv::Unreachable
    }

    fn join(&self, other: &CpEnv) -> CpEnv {
        match (self, other) {
            (CpEnv::Unreachable, x) | (x, CpEnv::Unreachable) => x.clone(),
            (CpEnv::Env(a), CpEnv::Env(b)) => {
                debug_assert_eq!(a.len(), b.len());
                CpEnv::Env(a.iter().zip(b).map(|(x, y)| x.join(y)).collect())
            }
        }
    }

    fn leq(&self, other: &CpEnv) -> bool {
        match (self, other) {
            (CpEnv::Unreachable, _) => true,
            (CpEnv::Env(_), CpEnv::Unreachable) => false,
            (CpEnv::Env(a), CpEnv::Env(b)) => {
                debug_assert_eq!(a.len(), b.len());
                a.iter().zip(b).all(|(x, y)| x.leq(y))
            }
        }
    }
}

/// Evaluates an integer expression over a reachable environment's values.
pub fn eval_int(e: &IntExpr, vals: &[CpVal]) -> CpVal {
    match e {
        IntExpr::Int(n) => CpVal::Const(n.clone()),
        IntExpr::Var(v) => vals[*v].clone(),
        IntExpr::Neg(inner) => match eval_int(inner, vals) {
            CpVal::Const(n) => CpVal::Const(-n),
            CpVal::Top => CpVal::Top,
        },
        IntExpr::Bin(op, l, r) => {
            let (a, b) = match (eval_int(l, vals), eval_int(r, vals)) {
                (CpVal::Const(a), CpVal::Const(b)) => (a, b),
                _ => return CpVal::Top,
            };
            match op {
                BinOp::Add => CpVal::Const(a + b),
                BinOp::Sub => CpVal::Const(a - b),
                BinOp::Mul => CpVal::Const(a * b),
                BinOp::Div => {
                    if b.is_zero() {
                        CpVal::Top
                    } else {
                        CpVal::Const(a / b)
                    }
                }
            }
        }
    }
}

/// Three-valued evaluation of a boolean expression: `None` when the
/// environment does not determine the outcome.
pub fn eval_bool(e: &BoolExpr, vals: &[CpVal]) -> Option<bool> {
    match e {
        BoolExpr::Lit(b) => Some(*b),
        BoolExpr::Cmp(op, l, r) => {
            let a = eval_int(l, vals);
            let b = eval_int(r, vals);
            match (a.as_const(), b.as_const()) {
                (Some(a), Some(b)) => Some(match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                }),
                _ => None,
            }
        }
        BoolExpr::Not(inner) => eval_bool(inner, vals).map(|b| !b),
        BoolExpr::And(l, r) => match (eval_bool(l, vals), eval_bool(r, vals)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        BoolExpr::Or(l, r) => match (eval_bool(l, vals), eval_bool(r, vals)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
    }
}

/// The constant propagation transfer of one action. Sends, receives, and
/// assumes do not touch variables; assignments update one slot; compound
/// actions apply left to right.
pub fn cp_transfer(a: &Action, env: &CpEnv) -> CpEnv {
    let vals = match env {
        CpEnv::Unreachable => return CpEnv::Unreachable,
        CpEnv::Env(vals) => vals,
    };
    match a {
        Action::Skip | Action::Send(..) | Action::Receive(..) | Action::Assume(_) => env.clone(),
        Action::Assign(v, e) => {
            let mut out = vals.clone();
            out[*v] = eval_int(e, vals);
            CpEnv::Env(out)
        }
        Action::Seq(items) => items.iter().fold(env.clone(), |acc, item| cp_transfer(item, &acc)),
    }
}

/// Edge transfer wrapper used by the forward engine when running plain
/// constant propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct CpAction(pub Action);

impl ValueTransfer for CpAction {
    type Value = CpEnv;

    fn apply(&self, v: &CpEnv) -> CpEnv {
        cp_transfer(&self.0, v)
    }
}
