//! Core lattice contracts shared by the analysis engines.
//!
//! Two layers are distinguished. An [`AbstractValue`] is a point in a join
//! semilattice of data flow facts (environments). A [`TransferFunction`] is a
//! symbolic, composable edge effect over such values. The forward engine only
//! needs to apply edge effects, so it accepts any [`ValueTransfer`]; the
//! backward engine manipulates path transfer functions symbolically and
//! requires the full [`TransferFunction`] contract.
//!
//! Contract notes:
//! * `join` is the least upper bound; `leq(a, b)` must agree with
//!   `join(a, b) == b`.
//! * `widen` defaults to `join`, which is correct for finite-height domains.
//! * Composition is written in application order: `(f.then(g)).apply(v)`
//!   equals `g.apply(&f.apply(v))`.

use std::fmt;

/// A point in a join semilattice with a least element.
pub trait AbstractValue: Clone + PartialEq + fmt::Debug {
    /// The least element.
    fn bottom() -> Self;

    /// Least upper bound of `self` and `other`.
    fn join(&self, other: &Self) -> Self;

    /// Partial order test. `leq(a, b)` holds iff `join(a, b) == b`.
    fn leq(&self, other: &Self) -> bool;

    fn is_bottom(&self) -> bool {
        *self == Self::bottom()
    }

    /// Widening hook. `newer` is the already-joined candidate value and the
    /// result must be an upper bound of both arguments. Finite-height domains
    /// keep the default, plain join.
    fn widen(&self, newer: &Self) -> Self {
        self.join(newer)
    }
}

/// An edge effect that can be applied to a value. This is the minimal
/// contract needed by the forward engine and by the enumeration oracle.
pub trait ValueTransfer: Clone + fmt::Debug {
    type Value: AbstractValue;

    fn apply(&self, v: &Self::Value) -> Self::Value;
}

/// A symbolic transfer function that forms a join semilattice itself and is
/// closed under composition. Required by the backward engine, which builds
/// and compares path transfer functions.
pub trait TransferFunction: ValueTransfer + PartialEq {
    /// Composition in application order: `f.then(g)` applies `f` first.
    fn then(&self, next: &Self) -> Self;

    /// Least upper bound in the function lattice.
    fn fjoin(&self, other: &Self) -> Self;

    /// Partial order in the function lattice. Must be compatible with
    /// application: `f.fleq(g)` implies `f.apply(v).leq(&g.apply(v))` for all
    /// `v`.
    fn fleq(&self, other: &Self) -> bool;

    /// The identity function over the same variable universe as `self`.
    fn identity_like(&self) -> Self;

    /// Equality as mutual `fleq`.
    fn feq(&self, other: &Self) -> bool {
        self.fleq(other) && other.fleq(self)
    }

    /// True when `self` is dominated by the join of `others` in a way that is
    /// stable under composition with an arbitrary prefix: for every `h`,
    /// `h.then(self)` must stay dominated by the joined `h.then(o)`. An empty
    /// `others` never covers. The default checks `fleq` against the
    /// representation join, which is only adequate for domains whose join
    /// loses no value-level information; domains with a conflating join must
    /// override this with a stronger test.
    fn covered_by(&self, others: &[&Self]) -> bool {
        let Some((first, rest)) = others.split_first() else {
            return false;
        };
        let mut joined = (*first).clone();
        for o in rest {
            joined = joined.fjoin(o);
        }
        self.fleq(&joined)
    }

    /// Human-readable rendering, used by traces and reports.
    fn render(&self, var_names: &[String]) -> String;
}

/// Path transfer function: the fold of `funcs` in path order, seeded with
/// `identity`. An empty path yields the identity.
pub fn ptf_of<'a, F, I>(identity: &F, funcs: I) -> F
where
    F: TransferFunction + 'a,
    I: IntoIterator<Item = &'a F>,
{
    funcs
        .into_iter()
        .fold(identity.clone(), |acc, f| acc.then(f))
}
