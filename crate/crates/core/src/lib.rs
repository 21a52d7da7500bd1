//! Laboratory for vertex-reinforced random walks on the integers with
//! sub-linear reinforcement.
//!
//! The crate has two halves. The numerical half ([`weights`], [`calculus`],
//! [`operators`]) computes the primitive `W`, the iterates of the operators
//! `G` and `H`, and the localization indexes `i±`, `j±` they define. The
//! stochastic half ([`walks`], [`coupling`], [`experiments`]) simulates the
//! walk and its comparison processes from a shared field of uniforms, checks
//! pathwise orderings, and measures localization.

pub mod calculus;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod operators;
mod quad;
pub mod walks;
pub mod weights;

pub use calculus::{compute_w, compute_w_psi, invert_w, WCoords, WCoordsConfig};
pub use error::{Error, Result};
pub use grid::{GridFn, Tail, TailRule};
pub use operators::{
    classify_tail, index_limits, index_sweep, IdentityCheck, IndexReport, IndexValue, Operand,
    OperatorConfig, Operators, TailClass, TailThresholds, Verdict,
};
pub use walks::{
    HatParams, Kernel, KindSpec, LedgerState, LedgerView, RandomField, RunOptions, WalkKind,
    WalkRun,
};
pub use weights::{WeightSpec, WeightTable};
