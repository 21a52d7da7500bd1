use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::{RandomField, SiteCursor};
use super::kind::{Kernel, WalkKind};
use super::ledger::{LedgerState, LedgerView};
use crate::error::{Error, Result};
use crate::weights::WeightTable;

const NEVER: u64 = u64::MAX;
const MAX_COUNT: u64 = i64::MAX as u64;

/// Sites whose visits are logged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum LogSites {
    #[default]
    None,
    All,
    Only(Vec<i64>),
}

impl LogSites {
    fn includes(&self, x: i64) -> bool {
        match self {
            LogSites::None => false,
            LogSites::All => true,
            LogSites::Only(v) => v.contains(&x),
        }
    }
}

/// What a run records beyond the ledger.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every position `X_0, X_1, …`.
    pub trace: bool,
    /// Track `Y⁺_n(x)` and `Y⁻_n(x)` at every site.
    pub track_y: bool,
    pub visit_logs: LogSites,
}

/// One visit `σ(x,k)`: the neighbour local times at that time and the move taken next
/// (`-1`, `0` for a hold, `+1`; `None` while the walk is still there).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRow {
    pub time: u64,
    pub z_left: u64,
    pub z_right: u64,
    pub next: Option<i8>,
}

/// Visit log of one site, starting at visit `k = first_k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitLog {
    pub first_k: u64,
    pub rows: Vec<VisitRow>,
}

impl VisitLog {
    /// Row of the `k`-th visit.
    pub fn visit(&self, k: u64) -> Option<&VisitRow> {
        k.checked_sub(self.first_k)
            .and_then(|i| self.rows.get(i as usize))
    }
}

#[derive(Clone, Debug)]
struct Site {
    z: u64,
    n: u64,
    z0: u64,
    first: u64,
    last: u64,
    y_plus: f64,
    y_minus: f64,
    cursor: Option<Box<SiteCursor>>,
    log: Option<VisitLog>,
}

impl Site {
    fn new(z0: u64, n0: u64) -> Self {
        Self {
            z: z0,
            n: n0,
            z0,
            first: NEVER,
            last: NEVER,
            y_plus: 0.0,
            y_minus: 0.0,
            cursor: None,
            log: None,
        }
    }
}

/// Outcome of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepEvent {
    /// Time after the step.
    pub time: u64,
    pub from: i64,
    pub to: i64,
    pub uniform: f64,
    pub kernel: Kernel,
}

/// A walk in progress: kind, weights, shared field and evolving local times.
#[derive(Clone, Debug)]
pub struct WalkRun {
    kind: WalkKind,
    table: Arc<WeightTable>,
    field: RandomField,
    initial: LedgerState,
    opts: RunOptions,
    pos: i64,
    time: u64,
    lo: i64,
    sites: Vec<Site>,
    min_seen: i64,
    max_seen: i64,
    trace: Vec<i64>,
}

impl LedgerView for WalkRun {
    fn z(&self, x: i64) -> u64 {
        self.site(x).map_or_else(|| self.initial.z(x), |s| s.z)
    }

    fn n(&self, x: i64) -> u64 {
        self.site(x).map_or_else(|| self.initial.n(x), |s| s.n)
    }
}

impl WalkRun {
    /// Starts at 0 from `initial`; the origin's count already includes time 0.
    pub fn new(
        kind: WalkKind,
        table: Arc<WeightTable>,
        initial: LedgerState,
        field: RandomField,
        opts: RunOptions,
    ) -> Result<Self> {
        kind.validate()?;
        let (lo, hi) = kind.range();
        if lo > 0 || hi < 0 {
            return Err(Error::OutOfRange {
                kind: kind.to_string(),
                position: 0,
            });
        }
        let mut run = Self {
            kind,
            table,
            field,
            initial,
            opts,
            pos: 0,
            time: 0,
            lo: -2,
            sites: Vec::new(),
            min_seen: 0,
            max_seen: 0,
            trace: Vec::new(),
        };
        run.sites = (-2..=2)
            .map(|x| Site::new(run.initial.z(x), run.initial.n(x)))
            .collect();
        run.arrive(0)?;
        if run.opts.trace {
            run.trace.push(0);
        }
        Ok(run)
    }

    pub fn kind(&self) -> &WalkKind {
        &self.kind
    }

    pub fn table(&self) -> &Arc<WeightTable> {
        &self.table
    }

    pub fn field(&self) -> RandomField {
        self.field
    }

    pub fn initial(&self) -> &LedgerState {
        &self.initial
    }

    pub fn options(&self) -> &RunOptions {
        &self.opts
    }

    pub fn position(&self) -> i64 {
        self.pos
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Smallest and largest site visited so far.
    pub fn visited_range(&self) -> (i64, i64) {
        (self.min_seen, self.max_seen)
    }

    pub fn trace(&self) -> Option<&[i64]> {
        self.opts.trace.then_some(self.trace.as_slice())
    }

    fn site(&self, x: i64) -> Option<&Site> {
        let i = x.checked_sub(self.lo)?;
        if i < 0 {
            return None;
        }
        self.sites.get(i as usize)
    }

    fn idx(&self, x: i64) -> usize {
        (x - self.lo) as usize
    }

    fn ensure(&mut self, a: i64, b: i64) {
        let hi = self.lo + self.sites.len() as i64 - 1;
        if a < self.lo {
            let grow = (self.sites.len() as i64).max(self.lo - a);
            let new_lo = self.lo - grow;
            let mut front: Vec<Site> = (new_lo..self.lo)
                .map(|x| Site::new(self.initial.z(x), self.initial.n(x)))
                .collect();
            front.append(&mut self.sites);
            self.sites = front;
            self.lo = new_lo;
        }
        if b > hi {
            let grow = (self.sites.len() as i64).max(b - hi);
            let start = self.lo + self.sites.len() as i64;
            let init = &self.initial;
            self.sites
                .extend((start..start + grow).map(|x| Site::new(init.z(x), init.n(x))));
        }
    }

    fn arrive(&mut self, x: i64) -> Result<()> {
        self.ensure(x - 1, x + 1);
        let zl = self.sites[self.idx(x - 1)].z;
        let zr = self.sites[self.idx(x + 1)].z;
        let log = self.opts.visit_logs.includes(x);
        let time = self.time;
        let i = self.idx(x);
        let s = &mut self.sites[i];
        if s.z >= MAX_COUNT {
            return Err(Error::CounterOverflow);
        }
        s.z += 1;
        if s.first == NEVER {
            s.first = time;
        }
        s.last = time;
        if log {
            let k = s.z;
            let l = s.log.get_or_insert_with(|| VisitLog {
                first_k: k,
                rows: Vec::new(),
            });
            l.rows.push(VisitRow {
                time,
                z_left: zl,
                z_right: zr,
                next: None,
            });
        }
        self.min_seen = self.min_seen.min(x);
        self.max_seen = self.max_seen.max(x);
        Ok(())
    }

    /// Transition law at the current position.
    pub fn kernel(&self) -> Result<Kernel> {
        self.kind.kernel(&self.table, self, self.pos)
    }

    /// One step: reads `U_i^x` with `i = Z_n(x)` and takes the `down` outcome iff `U ≤ p_down`.
    pub fn step(&mut self) -> Result<StepEvent> {
        let x = self.pos;
        let kernel = self.kernel()?;
        let field = self.field;
        let ix = self.idx(x);
        let site = &mut self.sites[ix];
        let visit = site.z;
        let u = site
            .cursor
            .get_or_insert_with(|| Box::new(field.cursor(x, visit)))
            .take(visit);
        let p = kernel.p_down();
        // a zero threshold is a reflection and must never move down, even on U = 0
        let down = p > 0.0 && u <= p;
        let to = match (down, kernel.down_is_hold()) {
            (true, true) => x,
            (true, false) => x - 1,
            (false, _) => x + 1,
        };
        if to == x + 1 {
            let zr = self.sites[ix + 1].z;
            let s = &mut self.sites[ix];
            if s.n >= MAX_COUNT {
                return Err(Error::CounterOverflow);
            }
            s.n += 1;
            if self.opts.track_y {
                s.y_plus += 1.0 / self.table.w_int(zr);
            }
        } else if to == x - 1 && self.opts.track_y {
            let zl = self.sites[ix - 1].z;
            self.sites[ix].y_minus += 1.0 / self.table.w_int(zl);
        }
        if let Some(l) = self.sites[ix].log.as_mut() {
            if let Some(r) = l.rows.last_mut() {
                r.next = Some((to - x) as i8);
            }
        }
        self.time += 1;
        self.pos = to;
        self.arrive(to)?;
        if self.opts.trace {
            self.trace.push(to);
        }
        Ok(StepEvent {
            time: self.time,
            from: x,
            to,
            uniform: u,
            kernel,
        })
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Current state as a sparse ledger.
    pub fn ledger(&self) -> LedgerState {
        let mut out = self.initial.clone();
        for (i, s) in self.sites.iter().enumerate() {
            let x = self.lo + i as i64;
            out.insert_z(x, s.z);
            out.insert_n(x, s.n);
        }
        out
    }

    /// Local times `Z_n(x)` for `x` in `⟦a, b⟧`.
    pub fn counts(&self, a: i64, b: i64) -> Vec<u64> {
        (a..=b).map(|x| self.z(x)).collect()
    }

    pub fn first_visit(&self, x: i64) -> Option<u64> {
        self.site(x).map(|s| s.first).filter(|&t| t != NEVER)
    }

    pub fn last_visit(&self, x: i64) -> Option<u64> {
        self.site(x).map(|s| s.last).filter(|&t| t != NEVER)
    }

    /// `Y⁺_n(x)` and `Y⁻_n(x)`; zero unless tracked.
    pub fn y(&self, x: i64) -> (f64, f64) {
        self.site(x).map_or((0.0, 0.0), |s| (s.y_plus, s.y_minus))
    }

    /// `M_n(x) = Y⁺_n(x) - Y⁻_n(x)`.
    pub fn martingale(&self, x: i64) -> f64 {
        let (p, m) = self.y(x);
        p - m
    }

    pub fn visit_log(&self, x: i64) -> Option<&VisitLog> {
        self.site(x).and_then(|s| s.log.as_ref())
    }

    /// `σ(x,k)`, when the `k`-th visit is logged or is the first visit.
    pub fn sigma(&self, x: i64, k: u64) -> Option<u64> {
        if let Some(r) = self.visit_log(x).and_then(|l| l.visit(k)) {
            return Some(r.time);
        }
        let s = self.site(x)?;
        (k == s.z0 + 1).then_some(s.first).filter(|&t| t != NEVER)
    }

    /// `Σ_x (Z_n(x) - z(x)) = n + 1`.
    pub fn conservation_holds(&self) -> bool {
        let added: u64 = self.sites.iter().map(|s| s.z - s.z0).sum();
        added == self.time + 1
    }

    /// `N_n(x,x+1) ≤ Z_n(x+1)` at every site of the window.
    pub fn edge_bound_holds(&self) -> bool {
        self.sites.windows(2).all(|p| p[0].n <= p[1].z)
    }

    /// Sites in the window, with their final local times, as `(lo, counts)`.
    pub fn window(&self) -> (i64, Vec<u64>) {
        (self.min_seen, self.counts(self.min_seen, self.max_seen))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;

    fn table() -> Arc<WeightTable> {
        Arc::new(WeightTable::new(WeightSpec::linear(1.0).unwrap(), 1 << 12).unwrap())
    }

    fn opts() -> RunOptions {
        RunOptions {
            trace: true,
            track_y: true,
            visit_logs: LogSites::All,
        }
    }

    #[test]
    fn zero_steps_counts_the_origin() {
        let init = LedgerState::from_path(&[0, 1, 0]).unwrap();
        let r = WalkRun::new(
            WalkKind::Vrrw,
            table(),
            init.clone(),
            RandomField::new(1),
            opts(),
        )
        .unwrap();
        assert_eq!(r.z(0), init.z(0) + 1);
        assert_eq!(r.z(1), init.z(1));
        assert!(r.conservation_holds());
    }

    #[test]
    fn threshold_rule_and_first_uniform() {
        let f = RandomField::new(3);
        let mut r =
            WalkRun::new(WalkKind::Vrrw, table(), LedgerState::trivial(), f, opts()).unwrap();
        let e = r.step().unwrap();
        assert_eq!(e.uniform, f.uniform(0, 1));
        assert_eq!(e.to, if e.uniform <= 0.5 { -1 } else { 1 });
    }

    #[test]
    fn replay_is_identical() {
        let go = || {
            let mut r = WalkRun::new(
                WalkKind::Vrrw,
                table(),
                LedgerState::trivial(),
                RandomField::new(11),
                opts(),
            )
            .unwrap();
            r.run(2000).unwrap();
            (r.ledger(), r.trace().unwrap().to_vec())
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn invariants_hold_for_every_kind() {
        let kinds = [
            WalkKind::Vrrw,
            WalkKind::Reflected,
            WalkKind::Tilde,
            WalkKind::Breve { gamma: 0.3 },
            WalkKind::Restricted { lo: 0, hi: 4 },
        ];
        for k in kinds {
            let mut r = WalkRun::new(
                k.clone(),
                table(),
                LedgerState::trivial(),
                RandomField::new(5),
                opts(),
            )
            .unwrap();
            for _ in 0..500 {
                r.step().unwrap();
                assert!(r.conservation_holds() && r.edge_bound_holds(), "{k}");
                let (lo, hi) = k.range();
                assert!((lo..=hi).contains(&r.position()));
            }
            let (p, m) = r.y(1);
            assert_eq!(r.martingale(1), p - m);
        }
    }

    #[test]
    fn visit_logs_record_next_moves() {
        let mut r = WalkRun::new(
            WalkKind::Vrrw,
            table(),
            LedgerState::trivial(),
            RandomField::new(2),
            opts(),
        )
        .unwrap();
        r.run(300).unwrap();
        let tr = r.trace().unwrap().to_vec();
        let log = r.visit_log(0).unwrap();
        assert_eq!(log.first_k, 1);
        for (k, row) in log.rows.iter().enumerate() {
            assert_eq!(tr[row.time as usize], 0);
            assert_eq!(r.sigma(0, k as u64 + 1), Some(row.time));
            if let Some(d) = row.next {
                assert_eq!(tr[row.time as usize + 1], d as i64);
            }
        }
    }
}
