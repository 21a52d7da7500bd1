//! Paired runs under a shared field and pathwise checks of the order `X ≺ X'`:
//! at every matched visit clock `σ(x,k)` the left walk has seen at least as many
//! visits to `x-1` and at most as many to `x+1`, and a right jump of the left walk
//! forces a right jump of the right walk.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walks::{
    HatParams, Kernel, LedgerState, LedgerView, LogSites, RandomField, RunOptions, VisitRow,
    WalkKind, WalkRun,
};
use crate::weights::WeightTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Breach {
    /// `Z(x-1)` of the left walk is below that of the right walk.
    LeftNeighbour,
    /// `Z(x+1)` of the left walk exceeds that of the right walk.
    RightNeighbour,
    /// The left walk jumped right and the right walk did not.
    Implication,
}

/// One failed comparison at `(x, k)`, with both visit rows for replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: i64,
    pub k: u64,
    pub breach: Breach,
    pub left: VisitRow,
    pub right: VisitRow,
}

/// Good-event check on a hat trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodEvent {
    pub l: i64,
    pub m: u64,
    pub holds: bool,
    /// Smallest admissible `K`, when it is at most `L`.
    pub k: Option<i64>,
    pub first_violation_step: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub left_kind: String,
    pub right_kind: String,
    pub weight: String,
    pub seed: u64,
    pub n_steps: u64,
    /// Pairs `(x,k)` with both clocks finite.
    pub compared: u64,
    /// Pairs whose implication needs a move beyond the horizon.
    pub incomparable: u64,
    pub violations: Vec<Violation>,
    pub left_range: (i64, i64),
    pub right_range: (i64, i64),
    /// Final local times over `⟦lo, lo + len - 1⟧` (the union of both ranges).
    pub lo: i64,
    pub left_z: Vec<u64>,
    pub right_z: Vec<u64>,
    /// Right walk local times at three quarters of the horizon.
    pub right_z_three_quarters: Vec<u64>,
    /// Good event of the right walk over the whole run when it is a hat walk.
    pub good_event: Option<GoodEvent>,
}

impl CouplingRecord {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn logged_run(
    kind: &WalkKind,
    table: &Arc<WeightTable>,
    initial: &LedgerState,
    seed: u64,
    trace: bool,
) -> Result<WalkRun> {
    let opts = RunOptions {
        trace,
        track_y: false,
        visit_logs: LogSites::All,
    };
    WalkRun::new(
        kind.clone(),
        Arc::clone(table),
        initial.clone(),
        RandomField::new(seed),
        opts,
    )
}

/// Runs both walks from the same field and state and compares every matched visit.
/// When the right walk is a hat walk, the good event `Ê(L, 0)` with `L = hat_l` is also monitored.
pub fn paired_simulate(
    left: &WalkKind,
    right: &WalkKind,
    table: &Arc<WeightTable>,
    initial: &LedgerState,
    seed: u64,
    n_steps: u64,
    hat_l: i64,
) -> Result<CouplingRecord> {
    let mut a = logged_run(left, table, initial, seed, false)?;
    let mut b = logged_run(right, table, initial, seed, right.hat_params().is_some())?;
    a.run(n_steps)?;
    let q = n_steps * 3 / 4;
    b.run(q)?;
    let (blo, bhi) = b.visited_range();
    let snap = b.counts(blo, bhi);
    b.run(n_steps - q)?;

    let (alo, ahi) = a.visited_range();
    let (rlo, rhi) = b.visited_range();
    let (lo, hi) = (alo.min(rlo), ahi.max(rhi));
    let mut compared = 0;
    let mut incomparable = 0;
    let mut violations = Vec::new();
    for x in lo.max(alo).max(rlo)..=hi.min(ahi).min(rhi) {
        let (Some(la), Some(lb)) = (a.visit_log(x), b.visit_log(x)) else {
            continue;
        };
        let k0 = la.first_k.max(lb.first_k);
        let k1 = (la.first_k + la.rows.len() as u64).min(lb.first_k + lb.rows.len() as u64);
        for k in k0..k1 {
            let (ra, rb) = (*la.visit(k).unwrap(), *lb.visit(k).unwrap());
            compared += 1;
            let mut push = |breach| {
                violations.push(Violation {
                    x,
                    k,
                    breach,
                    left: ra,
                    right: rb,
                })
            };
            if ra.z_left < rb.z_left {
                push(Breach::LeftNeighbour);
            }
            if ra.z_right > rb.z_right {
                push(Breach::RightNeighbour);
            }
            match (ra.next, rb.next) {
                (None, _) | (Some(1), None) => incomparable += 1,
                (Some(1), Some(d)) if d != 1 => push(Breach::Implication),
                _ => {}
            }
        }
    }
    let mut snap_full = vec![0; (hi - lo + 1) as usize];
    for (i, v) in snap.into_iter().enumerate() {
        snap_full[(blo + i as i64 - lo) as usize] = v;
    }
    let good_event = match b.kind().hat_params() {
        Some(_) => Some(monitor_good_event(&b, hat_l, 0)?),
        None => None,
    };
    Ok(CouplingRecord {
        left_kind: left.to_string(),
        right_kind: right.to_string(),
        weight: table.spec().to_string(),
        seed,
        n_steps,
        compared,
        incomparable,
        violations,
        left_range: (alo, ahi),
        right_range: (rlo, rhi),
        lo,
        left_z: a.counts(lo, hi),
        right_z: b.counts(lo, hi),
        right_z_three_quarters: snap_full,
        good_event,
    })
}

/// Checks `Ê(L, M)` on a hat run that kept its trace.
pub fn monitor_good_event(run: &WalkRun, l: i64, m: u64) -> Result<GoodEvent> {
    let params = run.kind().hat_params().ok_or_else(|| {
        Error::InvalidArgument(format!("good event needs a hat walk, got {}", run.kind()))
    })?;
    let trace = run
        .trace()
        .ok_or_else(|| Error::InvalidArgument("good event needs a run with a trace".into()))?;
    good_event_on_path(params, run.initial(), trace, l, m)
}

/// `Ê(L, M)` along a path `X_0 = 0, X_1, …` from `initial`: for all `n ≥ M`,
/// `Z_n(1) ≤ N_n(0,1) + f(N_n(0,1))`, `Z_n(x) ≤ (1+ε) N_n(x-1,x)` on `⟦2, K⟧`,
/// and no visit to `x ≥ K` after `M`. `K` is the smallest admissible value.
pub fn good_event_on_path(
    params: &HatParams,
    initial: &LedgerState,
    path: &[i64],
    l: i64,
    m: u64,
) -> Result<GoodEvent> {
    if l < 1 {
        return Err(Error::InvalidArgument(format!(
            "good event needs L >= 1, got {l}"
        )));
    }
    if path.first() != Some(&0) {
        return Err(Error::InvalidArgument("paths start at 0".into()));
    }
    let site_ok = |led: &LedgerState, x: i64| -> bool {
        let z = led.z(x) as f64;
        let n = led.n(x - 1) as f64;
        if x == 1 {
            z <= n + params.f.eval(n)
        } else {
            z <= (1.0 + params.epsilon) * n
        }
    };
    let mut led = initial.clone();
    led.bump(0, false, true);
    let mut x1_fail: Option<u64> = None;
    // first violation time per site x ≥ 2, counted from M
    let mut site_fail: std::collections::BTreeMap<i64, u64> = Default::default();
    let mut top: Option<i64> = None;
    let mut exceeded: Option<u64> = None;
    let check_at_m = |led: &LedgerState, x1_fail: &mut Option<u64>| {
        if !site_ok(led, 1) {
            *x1_fail = Some(m);
        }
    };
    if m == 0 {
        check_at_m(&led, &mut x1_fail);
    }
    let mut at_m = (m == 0).then(|| led.clone());
    for (t, pair) in path.windows(2).enumerate() {
        let (x, y) = (pair[0], pair[1]);
        let time = t as u64 + 1;
        if (y - x).abs() > 1 {
            return Err(Error::InvalidArgument(format!(
                "path jumps from {x} to {y}"
            )));
        }
        if y == x + 1 {
            led.bump(x, true, true);
        }
        led.bump(y, false, true);
        if time == m {
            check_at_m(&led, &mut x1_fail);
            at_m = Some(led.clone());
        }
        if time > m {
            if top.is_none_or(|v| y > v) {
                top = Some(y);
            }
            if y + 1 > l && exceeded.is_none() {
                exceeded = Some(time);
            }
            if y == 1 && x1_fail.is_none() && !site_ok(&led, 1) {
                x1_fail = Some(time);
            }
            if y >= 2 && !site_fail.contains_key(&y) && !site_ok(&led, y) {
                site_fail.insert(y, time);
            }
        }
    }
    let Some(at_m) = at_m else {
        return Err(Error::InvalidArgument(format!(
            "horizon {} ends before M = {m}",
            path.len() - 1
        )));
    };
    let k = top.map_or(1, |v| (v + 1).max(1));
    // sites of ⟦2, K⟧ never revisited after M keep their time-M values
    for x in 2..=k {
        if !site_fail.contains_key(&x) && !site_ok(&at_m, x) {
            site_fail.insert(x, m);
        }
    }
    let first = [
        x1_fail,
        exceeded,
        site_fail.range(2..=k).map(|(_, &t)| t).min(),
    ]
    .into_iter()
    .flatten()
    .min();
    Ok(GoodEvent {
        l,
        m,
        holds: first.is_none() && k <= l,
        k: (k <= l).then_some(k),
        first_violation_step: first,
    })
}

/// Finite-horizon reading of the consequences of `X ≺ X'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    /// Leftmost site whose right-walk local time still grew over the last quarter.
    pub x0: Option<i64>,
    /// `Z_left(x) ≤ Z_right(x)` at the horizon for every `x ≥ x0`.
    pub counts_dominated: bool,
    /// `max X ≤ max X'` over the horizon.
    pub range_bound: bool,
    /// Always true: these are horizon-limited proxies of almost-sure limits.
    pub soft: bool,
}

pub fn check_corollary_consequences(rec: &CouplingRecord) -> CorollaryReport {
    let x0 = rec
        .right_z
        .iter()
        .zip(&rec.right_z_three_quarters)
        .position(|(a, b)| a > b)
        .map(|i| rec.lo + i as i64);
    let counts_dominated = match x0 {
        Some(x0) => {
            let from = (x0 - rec.lo) as usize;
            rec.left_z[from..]
                .iter()
                .zip(&rec.right_z[from..])
                .all(|(l, r)| l <= r)
        }
        None => true,
    };
    CorollaryReport {
        x0,
        counts_dominated,
        range_bound: rec.left_range.1 <= rec.right_range.1,
        soft: true,
    }
}

/// Re-derivation of one step of a seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReplay {
    pub kind: String,
    pub seed: u64,
    pub time: u64,
    pub position: i64,
    pub visit_index: u64,
    pub uniform: f64,
    pub p_left: f64,
    pub p_hold: f64,
    pub p_right: f64,
    pub next: i64,
    pub z_left: u64,
    pub z_right: u64,
    pub n_right: u64,
}

/// State, uniform and kernel at time `step`, and the move taken.
pub fn replay_step(
    kind: &WalkKind,
    table: &Arc<WeightTable>,
    initial: &LedgerState,
    seed: u64,
    step: u64,
) -> Result<StepReplay> {
    let mut run = WalkRun::new(
        kind.clone(),
        Arc::clone(table),
        initial.clone(),
        RandomField::new(seed),
        RunOptions::default(),
    )?;
    run.run(step)?;
    let x = run.position();
    let (zl, zr, nr, visit) = (run.z(x - 1), run.z(x + 1), run.n(x), run.z(x));
    let e = run.step()?;
    let Kernel { left, hold, right } = e.kernel;
    Ok(StepReplay {
        kind: kind.to_string(),
        seed,
        time: step,
        position: x,
        visit_index: visit,
        uniform: e.uniform,
        p_left: left,
        p_hold: hold,
        p_right: right,
        next: e.to,
        z_left: zl,
        z_right: zr,
        n_right: nr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridFn, TailRule};
    use crate::weights::WeightSpec;

    fn table() -> Arc<WeightTable> {
        Arc::new(WeightTable::new(WeightSpec::linear(1.0).unwrap(), 1 << 14).unwrap())
    }

    fn hat() -> HatParams {
        let f = GridFn::from_fn(
            vec![0.0, 1.0, 1e6],
            |x| x.sqrt(),
            |x| 0.5 / x.max(1e-9).sqrt(),
            TailRule::Power,
        )
        .unwrap();
        HatParams::new(0.1, f).unwrap()
    }

    #[test]
    fn identical_walks_agree() {
        let t = table();
        for seed in 0..20 {
            let r = paired_simulate(
                &WalkKind::Vrrw,
                &WalkKind::Vrrw,
                &t,
                &LedgerState::trivial(),
                seed,
                2000,
                8,
            )
            .unwrap();
            assert!(r.holds());
            assert_eq!(r.left_z, r.right_z);
            let c = check_corollary_consequences(&r);
            assert!(c.counts_dominated && c.range_bound);
        }
    }

    #[test]
    fn tilde_left_of_reflected() {
        let t = table();
        for seed in 0..50 {
            let r = paired_simulate(
                &WalkKind::Tilde,
                &WalkKind::Reflected,
                &t,
                &LedgerState::trivial(),
                seed,
                3000,
                8,
            )
            .unwrap();
            assert!(r.holds(), "seed {seed}: {:?}", r.violations.first());
            assert!(r.compared > 0);
        }
    }

    #[test]
    fn good_event_on_short_paths() {
        let p = hat();
        let s = LedgerState::trivial();
        let stay = good_event_on_path(&p, &s, &[0, -1, 0, -1, 0], 3, 0).unwrap();
        assert!(stay.holds && stay.k == Some(1));
        // Z(1) = 3 > N(0,1) + f(N(0,1)) = 2 at the last step
        let bad = good_event_on_path(&p, &s, &[0, 1, 2, 1, 2, 1], 5, 0).unwrap();
        assert!(!bad.holds && bad.first_violation_step == Some(5));
        let late = good_event_on_path(&p, &s, &[0, 1, 2, 1, 2, 1, 0], 5, 6).unwrap();
        assert_eq!(late.first_violation_step, Some(6));
        let far = good_event_on_path(&p, &s, &[0, 1, 2, 3], 3, 0).unwrap();
        assert!(!far.holds && far.k.is_none() && far.first_violation_step == Some(3));
    }
}
