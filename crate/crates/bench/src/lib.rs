//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use vrrw_core::{LedgerState, RandomField, RunOptions, WalkKind, WalkRun, WeightSpec, WeightTable};

pub fn table(weight: &str, cap: usize) -> Arc<WeightTable> {
    let spec: WeightSpec = weight.parse().expect("benchmark weight");
    Arc::new(WeightTable::new(spec, cap).expect("benchmark table"))
}

/// Fresh run from the trivial state without logs or `Y±` tracking.
pub fn fresh_run(kind: &WalkKind, table: &Arc<WeightTable>, seed: u64) -> WalkRun {
    WalkRun::new(
        kind.clone(),
        Arc::clone(table),
        LedgerState::trivial(),
        RandomField::new(seed),
        RunOptions::default(),
    )
    .expect("benchmark run")
}
