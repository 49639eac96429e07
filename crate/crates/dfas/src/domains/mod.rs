//! Value domains shared by the engines.
//!
//! * [`cp`]: plain constant propagation over variable environments.
//! * [`lcp`]: linear constant propagation, a function domain whose elements
//!   map every variable to an affine formula over the input environment.
//! * [`ccp`]: copy-constant propagation, the restriction of [`lcp`] to
//!   constants and plain copies.

pub mod ccp;
pub mod cp;
pub mod lcp;

pub use ccp::{ccp_from_action, CcpFormula, CcpFunction};
pub use cp::{cp_transfer, eval_bool, eval_int, CpAction, CpEnv, CpVal};
pub use lcp::{lcp_apply, lcp_compose, lcp_from_action, lcp_join, Formula, LcpFunction};
