//! Data flow analysis for asynchronous message-passing programs.
//!
//! The crate analyzes systems of communicating processes that exchange
//! messages over unbounded FIFO-less channels (counting semantics: a channel
//! holds a multiset of messages). Programs are described by a small JSON
//! model format ([`model`]), compiled into a VASS control flow graph
//! ([`vcfg`]), and analyzed by one of three engines:
//!
//! * [`backward`]: a demand-driven engine that computes the join over all
//!   feasible paths, exact for the built-in linear and copy constant
//!   propagation domains. Supports loop-free recursive procedures.
//! * [`forward`]: a Kildall-style fixpoint over queue configurations bounded
//!   by a cutoff Theta. Sound for any value domain, procedure-free models.
//! * [`oracle`]: a bounded explicit-state enumerator used as a test oracle.
//!
//! Conventions used throughout:
//! * Path transfer functions compose in application order. `f.then(g)`
//!   applies `f` first.
//! * Counter vectors are indexed by the sorted table of (channel, message)
//!   pairs that appear in send actions.
//! * Feasibility of a path means every prefix keeps all counters
//!   non-negative with respect to the initial (all-zero) channel state.

pub mod backward;
pub mod domains;
pub mod forward;
pub mod lattice;
pub mod model;
pub mod oracle;
pub mod vcfg;

pub use domains::{CcpFunction, CpAction, CpEnv, CpVal, LcpFunction};
pub use lattice::{AbstractValue, TransferFunction, ValueTransfer};
pub use model::{parse_model, validate, Diagnostic, EngineKind, Model};
pub use vcfg::{attach_domain, build_vcfg, target_set, Analyzable, Attached, DomainKind, Vcfg};
