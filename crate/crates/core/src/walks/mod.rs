//! Walks built from a shared field of uniforms `U_i^x`: at time `n`, a walk at
//! `x` with local time `Z_n(x) = i` reads `U_i^x` and takes its `down` outcome
//! iff `U_i^x ≤ p_down`.

mod enumerate;
mod field;
mod kind;
mod ledger;
mod run;
mod series;

pub use enumerate::{endpoint_law, enumerate_exact, PathProb, MAX_ENUMERATION_STEPS};
pub use field::RandomField;
pub use kind::{HatParams, Kernel, KindSpec, WalkKind};
pub use ledger::{LedgerState, LedgerView};
pub use run::{LogSites, RunOptions, StepEvent, VisitLog, VisitRow, WalkRun};
pub use series::{checkpoint_times, simulate, DiagnosticSeries, Probes, Snapshot};
