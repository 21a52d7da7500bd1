//! Localization detection, local-time profiles, pathwise identities and
//! multi-seed campaigns.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{paired_simulate, CouplingRecord};
use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::io::{write_bytes_atomic, write_json_atomic};
use crate::operators::{index_limits, IndexValue, OperatorConfig, Operators};
use crate::quad::linear_fit;
use crate::walks::{
    endpoint_law, enumerate_exact, KindSpec, LedgerState, LedgerView, LogSites, RandomField,
    RunOptions, WalkKind, WalkRun,
};
use crate::weights::{WeightSpec, WeightTable};

pub use crate::walks::{checkpoint_times, simulate, DiagnosticSeries, Probes, Snapshot};

/// Shortest run accepted by [`detect_localization`].
pub const MIN_LOCALIZATION_STEPS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localization {
    /// Range over the last half equals range over the last tenth.
    pub localized: bool,
    /// Range over the last half of the steps.
    pub range: (i64, i64),
    /// First time from which the walk stays in `range`.
    pub stabilization_step: u64,
}

impl Localization {
    pub fn size(&self) -> u64 {
        (self.range.1 - self.range.0 + 1) as u64
    }
}

/// Range of the sites visited at or after time `t`.
fn range_since(run: &WalkRun, t: u64) -> (i64, i64) {
    let (lo, hi) = run.visited_range();
    let recent = |x: &i64| run.last_visit(*x).is_some_and(|v| v >= t);
    let a = (lo..=hi).find(recent).unwrap_or(run.position());
    let b = (lo..=hi).rev().find(recent).unwrap_or(run.position());
    (a, b)
}

pub fn detect_localization(run: &WalkRun) -> Result<Localization> {
    let n = run.time();
    if n < MIN_LOCALIZATION_STEPS {
        return Err(Error::Precondition(format!(
            "localization needs at least {MIN_LOCALIZATION_STEPS} steps, got {n}"
        )));
    }
    let half = range_since(run, n - n / 2);
    let tenth = range_since(run, n - n / 10);
    let (lo, hi) = run.visited_range();
    let stabilization_step = (lo..=hi)
        .filter(|x| *x < half.0 || *x > half.1)
        .filter_map(|x| run.last_visit(x))
        .max()
        .map_or(0, |t| t + 1);
    Ok(Localization {
        localized: half == tenth,
        range: half,
        stabilization_step,
    })
}

/// Site with the largest local time; ties go to the leftmost.
pub fn most_visited(s: &Snapshot) -> i64 {
    let mut best = (0, s.lo);
    for (i, &v) in s.z.iter().enumerate() {
        if v > best.0 {
            best = (v, s.lo + i as i64);
        }
    }
    best.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub i: u32,
    pub z_minus: u64,
    pub z_plus: u64,
    /// `Ψ_{½,i}(n)`.
    pub psi: f64,
    pub ratio_minus: f64,
    pub ratio_plus: f64,
    /// Log-log slopes of `Z(c∓i)` against `Ψ_{½,i}` over the checkpoints.
    pub slope_minus: Option<f64>,
    pub slope_plus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub center: i64,
    pub n: u64,
    pub rows: Vec<ProfileRow>,
}

/// Compares local times at distance `i` from the most visited site with `Ψ_{½,i}`,
/// from checkpoint snapshots (the last one is the final state).
pub fn profile_from_snapshots(
    times: &[u64],
    snaps: &[Snapshot],
    psi: &[GridFn],
) -> Result<ProfileTable> {
    let (Some(&n), Some(last)) = (times.last(), snaps.last()) else {
        return Err(Error::InvalidArgument("no checkpoints".into()));
    };
    if times.len() != snaps.len() {
        return Err(Error::InvalidArgument(
            "one snapshot per checkpoint is needed".into(),
        ));
    }
    let c = most_visited(last);
    let mut rows = Vec::new();
    for (i, p) in psi.iter().enumerate() {
        let i = i as u32 + 1;
        let d = i as i64;
        let value = p.eval(n as f64);
        let slope = |x: i64| {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (&t, s) in times.iter().zip(snaps) {
                let (z, q) = (s.z(x), p.eval(t as f64));
                if t >= 16 && z > 0 && q > 0.0 {
                    xs.push(q.ln());
                    ys.push((z as f64).ln());
                }
            }
            if xs.len() >= 3 {
                linear_fit(&xs, &ys).map(|v| v.0)
            } else {
                None
            }
        };
        let (zm, zp) = (last.z(c - d), last.z(c + d));
        rows.push(ProfileRow {
            i,
            z_minus: zm,
            z_plus: zp,
            psi: value,
            ratio_minus: zm as f64 / value,
            ratio_plus: zp as f64 / value,
            slope_minus: slope(c - d),
            slope_plus: slope(c + d),
        });
    }
    Ok(ProfileTable { center: c, n, rows })
}

/// Profile comparison for a localized run whose series kept snapshots.
pub fn profile_compare(
    run: &WalkRun,
    series: &DiagnosticSeries,
    psi: &[GridFn],
) -> Result<ProfileTable> {
    if !detect_localization(run)?.localized {
        return Err(Error::Precondition(
            "profile comparison needs a localized run".into(),
        ));
    }
    if series.snapshots.len() != series.checkpoints.len() {
        return Err(Error::InvalidArgument(
            "series was recorded without snapshots".into(),
        ));
    }
    profile_from_snapshots(&series.checkpoints, &series.snapshots, psi)
}

/// Share of the time spent on the most visited site and its two neighbours.
pub fn center_share(s: &Snapshot, n: u64) -> f64 {
    let c = most_visited(s);
    (s.z(c - 1) + s.z(c) + s.z(c + 1)) as f64 / (n + 1) as f64
}

/// Residual of the telescoping identity
/// `W(Z(x+2)) - W(Z(x)) - [Y⁻(x+3) - Y⁺(x-1) + M(x+1)]`, with the discrete
/// `W(z) = Σ_{i<z} 1/w(i)`, relative to its starting value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub x: i64,
    pub steps: u64,
    pub initial: f64,
    pub max_residual: f64,
}

/// Steps a doubly reflected run that tracks `Y±` and reports the largest drift of the identity at `x`.
pub fn pathwise_identity_check(run: &mut WalkRun, n_steps: u64, x: i64) -> Result<IdentityReport> {
    let (lo, hi) = match *run.kind() {
        WalkKind::Restricted { lo, hi } => (lo, hi),
        ref k => {
            return Err(Error::InvalidArgument(format!(
                "identity check needs a doubly reflected walk, got {k}"
            )))
        }
    };
    if x < lo || x + 2 > hi {
        return Err(Error::InvalidArgument(format!(
            "x = {x} needs x and x+2 inside ⟦{lo},{hi}⟧"
        )));
    }
    if !run.options().track_y {
        return Err(Error::InvalidArgument(
            "identity check needs Y± tracking".into(),
        ));
    }
    let top = (lo..=hi).map(|s| run.z(s)).max().unwrap_or(0) + n_steps + 1;
    let table = Arc::clone(run.table());
    let mut wd = Vec::with_capacity(top as usize + 1);
    let mut acc = 0.0;
    for i in 0..=top {
        wd.push(acc);
        acc += 1.0 / table.w_int(i);
    }
    let residual = |r: &WalkRun| {
        let (p_left, _) = r.y(x - 1);
        let (_, m_right) = r.y(x + 3);
        wd[r.z(x + 2) as usize] - wd[r.z(x) as usize] - (m_right - p_left + r.martingale(x + 1))
    };
    let initial = residual(run);
    let mut max_residual: f64 = 0.0;
    for _ in 0..n_steps {
        run.step()?;
        max_residual = max_residual.max((residual(run) - initial).abs());
    }
    Ok(IdentityReport {
        x,
        steps: n_steps,
        initial,
        max_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrnSeries {
    pub times: Vec<u64>,
    /// `Z(1)/Z(-1)` at each visit to 0; infinite while `Z(-1) = 0`.
    pub ratios: Vec<f64>,
}

/// Minimum number of visits to 0 for [`urn_balance`].
pub const MIN_URN_VISITS: usize = 100;

/// `Z_{σ(0,n)}(1) / Z_{σ(0,n)}(-1)` at every logged visit to 0.
pub fn urn_balance(run: &WalkRun) -> Result<UrnSeries> {
    let log = run.visit_log(0).ok_or_else(|| {
        Error::InvalidArgument("urn balance needs the visit log of site 0".into())
    })?;
    if log.rows.len() < MIN_URN_VISITS {
        return Err(Error::Precondition(format!(
            "site 0 visited {} times; urn balance needs {MIN_URN_VISITS}",
            log.rows.len()
        )));
    }
    let times = log.rows.iter().map(|r| r.time).collect();
    let ratios = log
        .rows
        .iter()
        .map(|r| {
            if r.z_left == 0 {
                f64::INFINITY
            } else {
                r.z_right as f64 / r.z_left as f64
            }
        })
        .collect();
    Ok(UrnSeries { times, ratios })
}

/// Per-checkpoint sample variance of `M_n(probe)` over many series.
pub fn martingale_variance(series: &[DiagnosticSeries], probe: usize) -> Vec<f64> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    (0..first.m.len())
        .map(|c| {
            let v: Vec<f64> = series.iter().map(|s| s.m[c][probe]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (v.len().max(2) - 1) as f64
        })
        .collect()
}

/// Exact endpoint law from path enumeration against the empirical law of seeded runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationCheck {
    pub kind: String,
    pub weight: String,
    pub n_steps: u32,
    pub runs: u64,
    /// `|Σ p - 1|` over enumerated paths.
    pub mass_error: f64,
    pub exact: BTreeMap<i64, f64>,
    pub empirical: BTreeMap<i64, f64>,
    /// `½ Σ |p̂ - p|`.
    pub tv: f64,
    /// `½ Σ √(p(1-p)/N)`, the standard-error radius of `tv`.
    pub radius: f64,
}

impl EnumerationCheck {
    pub fn within(&self, radii: f64) -> bool {
        self.tv <= radii * self.radius
    }
}

/// Runs seeds `1..=runs` for `n_steps` each and compares endpoints with [`enumerate_exact`].
pub fn enumeration_check(
    kind: &WalkKind,
    table: &Arc<WeightTable>,
    initial: &LedgerState,
    n_steps: u32,
    runs: u64,
) -> Result<EnumerationCheck> {
    if runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let paths = enumerate_exact(kind, table, initial, n_steps)?;
    let mass_error = (paths.iter().map(|p| p.prob).sum::<f64>() - 1.0).abs();
    let exact = endpoint_law(&paths);
    let ends = (1..=runs)
        .into_par_iter()
        .map(|s| {
            let mut run = WalkRun::new(
                kind.clone(),
                Arc::clone(table),
                initial.clone(),
                RandomField::new(s),
                RunOptions::default(),
            )?;
            run.run(n_steps as u64)?;
            Ok(run.position())
        })
        .collect::<Result<Vec<i64>>>()?;
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for x in ends {
        *counts.entry(x).or_insert(0) += 1;
    }
    let nr = runs as f64;
    let empirical: BTreeMap<i64, f64> = counts.iter().map(|(&x, &c)| (x, c as f64 / nr)).collect();
    let mut tv = 0.0;
    let mut radius = 0.0;
    for x in exact
        .keys()
        .chain(empirical.keys())
        .collect::<std::collections::BTreeSet<_>>()
    {
        let p = exact.get(x).copied().unwrap_or(0.0);
        let q = empirical.get(x).copied().unwrap_or(0.0);
        tv += 0.5 * (q - p).abs();
        radius += 0.5 * (p * (1.0 - p) / nr).sqrt();
    }
    Ok(EnumerationCheck {
        kind: kind.to_string(),
        weight: table.spec().to_string(),
        n_steps,
        runs,
        mass_error,
        exact,
        empirical,
        tv,
        radius,
    })
}

/// Seeds as a list or an inclusive range string `"a..b"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range(String),
}

impl Seeds {
    pub fn expand(&self) -> Result<Vec<u64>> {
        match self {
            Seeds::List(v) => Ok(v.clone()),
            Seeds::Range(s) => parse_seed_range(s),
        }
    }
}

/// `"7"`, `"1..200"` (inclusive) or a comma list of either.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = |e: String| Error::InvalidArgument(format!("seed range `{part}`: {e}"));
        match part.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                let a: u64 = a
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                let b: u64 = b
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                if b < a {
                    return Err(bad("empty range".into()));
                }
                out.extend(a..=b);
            }
            None => out.push(
                part.parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            ),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(format!("no seeds in `{s}`")));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingPlan {
    pub left: String,
    pub right: String,
    pub steps: u64,
    #[serde(default = "default_hat_l")]
    pub hat_l: i64,
    /// Ledger JSON file holding the common initial state; trivial when absent.
    #[serde(default)]
    pub initial: Option<String>,
}

fn default_hat_l() -> i64 {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityPlan {
    pub steps: u64,
    #[serde(default = "default_identity_sites")]
    pub x: Vec<i64>,
}

fn default_identity_sites() -> Vec<i64> {
    vec![0, 1, 2]
}

/// Campaign description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub version: u32,
    pub seeds: Seeds,
    pub weights: Vec<String>,
    #[serde(default)]
    pub kinds: Vec<String>,
    #[serde(default)]
    pub horizons: Vec<u64>,
    #[serde(default = "default_per_octave")]
    pub per_octave: u32,
    #[serde(default)]
    pub couplings: Vec<CouplingPlan>,
    #[serde(default)]
    pub identity: Option<IdentityPlan>,
    /// Write one CSV row per run.
    #[serde(default)]
    pub per_run_csv: bool,
    /// Write mean local-time profiles around the localization center.
    #[serde(default)]
    pub profiles: bool,
    /// Report `[2i₋+1, 2i₊+1]` next to the range histogram.
    #[serde(default)]
    pub predict_band: bool,
}

fn default_per_octave() -> u32 {
    4
}

/// A validated campaign.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub config: CampaignConfig,
    pub seeds: Vec<u64>,
    pub weights: Vec<WeightSpec>,
    pub kinds: Vec<KindSpec>,
    pub couplings: Vec<(KindSpec, KindSpec, LedgerState)>,
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(self) -> Result<Campaign> {
        let mut errs = Vec::new();
        if self.version != 1 {
            errs.push(format!("version: expected 1, got {}", self.version));
        }
        let seeds = self.seeds.expand().unwrap_or_else(|e| {
            errs.push(format!("seeds: {e}"));
            Vec::new()
        });
        if self.weights.is_empty() {
            errs.push("weights: list is empty".into());
        }
        let mut weights = Vec::new();
        for w in &self.weights {
            match w.parse::<WeightSpec>() {
                Ok(s) => weights.push(s),
                Err(e) => errs.push(format!("weights: {e}")),
            }
        }
        if self.kinds.is_empty() && self.couplings.is_empty() && self.identity.is_none() {
            errs.push("kinds: list is empty and no coupling or identity plan is given".into());
        }
        let mut kinds = Vec::new();
        for k in &self.kinds {
            match k.parse::<KindSpec>() {
                Ok(s) => kinds.push(s),
                Err(e) => errs.push(format!("kinds: {e}")),
            }
        }
        if !self.kinds.is_empty() && self.horizons.is_empty() {
            errs.push("horizons: list is empty".into());
        }
        for &h in &self.horizons {
            if h < MIN_LOCALIZATION_STEPS {
                errs.push(format!(
                    "horizons: {h} is below the localization minimum {MIN_LOCALIZATION_STEPS}"
                ));
            }
        }
        if self.per_octave == 0 {
            errs.push("per_octave: must be at least 1".into());
        }
        let mut couplings = Vec::new();
        for (i, c) in self.couplings.iter().enumerate() {
            let initial = match &c.initial {
                None => Some(LedgerState::trivial()),
                Some(p) => LedgerState::from_json_file(p)
                    .map_err(|e| errs.push(format!("couplings[{i}]: initial: {e}")))
                    .ok(),
            };
            match (c.left.parse::<KindSpec>(), c.right.parse::<KindSpec>()) {
                (Ok(a), Ok(b)) => couplings.extend(initial.map(|st| (a, b, st))),
                (a, b) => {
                    for e in [a.err(), b.err()].into_iter().flatten() {
                        errs.push(format!("couplings[{i}]: {e}"));
                    }
                }
            }
            if c.steps == 0 {
                errs.push(format!("couplings[{i}]: steps must be positive"));
            }
            if c.hat_l < 1 {
                errs.push(format!("couplings[{i}]: hat_l must be at least 1"));
            }
        }
        if let Some(id) = &self.identity {
            if id.steps == 0 {
                errs.push("identity: steps must be positive".into());
            }
            for &x in &id.x {
                if !(0..=2).contains(&x) {
                    errs.push(format!("identity: x = {x} outside ⟦0,2⟧"));
                }
            }
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Campaign {
            config: self,
            seeds,
            weights,
            kinds,
            couplings,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub weight: String,
    pub kind: String,
    pub horizon: u64,
    pub seed: u64,
    pub localized: bool,
    pub range_lo: i64,
    pub range_hi: i64,
    pub size: u64,
    pub stabilization_step: u64,
    pub center: i64,
    pub center_share: f64,
    /// Local times at offsets `-5..=5` from the center, divided by `n+1`.
    pub profile: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub weight: String,
    pub kind: String,
    pub horizon: u64,
    pub runs: usize,
    pub localized: usize,
    pub localized_fraction: f64,
    /// Last-half range size to number of runs.
    pub range_histogram: BTreeMap<u64, usize>,
    pub histogram_mode: Option<u64>,
    /// `[2i₋+1, 2i₊+1]`, not asserted; absent when `W` is bounded.
    pub predicted_band: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub weight: String,
    pub left: String,
    pub right: String,
    pub steps: u64,
    pub runs: usize,
    pub trivial_initial: bool,
    pub compared: u64,
    pub incomparable: u64,
    pub violations: u64,
    pub runs_with_violations: usize,
    /// Hat runs on which the good event held throughout.
    pub good_event_runs: Option<usize>,
    /// Violations on those runs.
    pub good_event_violations: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub weight: String,
    pub x: i64,
    pub steps: u64,
    pub runs: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub version: u32,
    pub seeds: usize,
    pub groups: Vec<GroupSummary>,
    pub couplings: Vec<CouplingSummary>,
    pub identity: Vec<IdentitySummary>,
}

/// Report plus the optional per-run rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CampaignOutput {
    pub report: CampaignReport,
    pub runs: Vec<RunSummary>,
}

/// Weight cache covering `steps` moves, capped at the domain of tabulated weights.
pub fn table_for(spec: &WeightSpec, steps: u64) -> Result<Arc<WeightTable>> {
    let cap = (steps + 2).min(spec.domain_top().floor() as u64) as usize;
    Ok(Arc::new(WeightTable::new(spec.clone(), cap)?))
}

/// `None` when `W` is bounded and the indexes are not defined.
fn band(spec: &WeightSpec) -> Result<Option<(String, String)>> {
    let ops = match Operators::new(spec, OperatorConfig::default()) {
        Ok(o) => o,
        Err(Error::BoundedPrimitive { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let r = index_limits(&ops, 0.05, 5)?;
    let edge = |v: IndexValue| match v {
        IndexValue::Finite(i) => (2 * i + 1).to_string(),
        other => other.to_string(),
    };
    Ok(Some((edge(r.i_minus), edge(r.i_plus))))
}

/// One localization run summarised.
pub fn localization_run(
    kind: &WalkKind,
    table: &Arc<WeightTable>,
    seed: u64,
    horizon: u64,
) -> Result<RunSummary> {
    let mut run = WalkRun::new(
        kind.clone(),
        Arc::clone(table),
        LedgerState::trivial(),
        RandomField::new(seed),
        RunOptions::default(),
    )?;
    run.run(horizon)?;
    let loc = detect_localization(&run)?;
    let (lo, z) = run.window();
    let snap = Snapshot { lo, z };
    let c = most_visited(&snap);
    let total = (horizon + 1) as f64;
    Ok(RunSummary {
        weight: table.spec().to_string(),
        kind: kind.to_string(),
        horizon,
        seed,
        localized: loc.localized,
        range_lo: loc.range.0,
        range_hi: loc.range.1,
        size: loc.size(),
        stabilization_step: loc.stabilization_step,
        center: c,
        center_share: center_share(&snap, horizon),
        profile: (-5..=5).map(|d| snap.z(c + d) as f64 / total).collect(),
    })
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs every (weight, kind, horizon, seed), coupling and identity task. The output
/// depends only on the configuration, not on the number of threads.
pub fn run_campaign(c: &Campaign, threads: Option<usize>) -> Result<CampaignOutput> {
    let pool = build_pool(threads)?;
    pool.install(|| run_campaign_inner(c))
}

fn run_campaign_inner(c: &Campaign) -> Result<CampaignOutput> {
    let cfg = &c.config;
    let max_steps = cfg
        .horizons
        .iter()
        .copied()
        .chain(cfg.couplings.iter().map(|p| p.steps))
        .chain(cfg.identity.iter().map(|p| p.steps))
        .max()
        .unwrap_or(0);
    let needs_ops = c
        .kinds
        .iter()
        .chain(c.couplings.iter().flat_map(|p| [&p.0, &p.1]))
        .any(|k| k.needs_operators());
    let mut groups = Vec::new();
    let mut runs = Vec::new();
    let mut couplings = Vec::new();
    let mut identity = Vec::new();
    for spec in &c.weights {
        let table = table_for(spec, max_steps)?;
        let ops = if needs_ops {
            Some(Operators::new(spec, OperatorConfig::default())?)
        } else {
            None
        };
        let predicted = if cfg.predict_band { band(spec)? } else { None };
        let resolve = |k: &KindSpec| k.resolve(ops.as_ref());
        for ks in &c.kinds {
            let kind = resolve(ks)?;
            for &h in &cfg.horizons {
                let rows: Vec<RunSummary> = c
                    .seeds
                    .par_iter()
                    .map(|&s| localization_run(&kind, &table, s, h))
                    .collect::<Result<_>>()?;
                let mut hist = BTreeMap::new();
                for r in &rows {
                    *hist.entry(r.size).or_insert(0) += 1;
                }
                let mode = hist
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(&k, _)| k);
                let localized = rows.iter().filter(|r| r.localized).count();
                groups.push(GroupSummary {
                    weight: spec.to_string(),
                    kind: kind.to_string(),
                    horizon: h,
                    runs: rows.len(),
                    localized,
                    localized_fraction: localized as f64 / rows.len() as f64,
                    range_histogram: hist,
                    histogram_mode: mode,
                    predicted_band: predicted.clone(),
                });
                runs.extend(rows);
            }
        }
        for (plan, (l, r, initial)) in cfg.couplings.iter().zip(&c.couplings) {
            let (lk, rk) = (resolve(l)?, resolve(r)?);
            couplings
                .push(couple_seeds(&lk, &rk, &table, initial, &c.seeds, plan.steps, plan.hat_l)?.0);
        }
        if let Some(plan) = &cfg.identity {
            for &x in &plan.x {
                let res = c
                    .seeds
                    .par_iter()
                    .map(|&s| {
                        let opts = RunOptions {
                            track_y: true,
                            ..Default::default()
                        };
                        let kind = WalkKind::Restricted { lo: 0, hi: 4 };
                        let mut run = WalkRun::new(
                            kind,
                            Arc::clone(&table),
                            LedgerState::trivial(),
                            RandomField::new(s),
                            opts,
                        )?;
                        Ok(pathwise_identity_check(&mut run, plan.steps, x)?.max_residual)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                identity.push(IdentitySummary {
                    weight: spec.to_string(),
                    x,
                    steps: plan.steps,
                    runs: res.len(),
                    max_residual: res.iter().fold(0.0, |m: f64, v| m.max(*v)),
                });
            }
        }
    }
    Ok(CampaignOutput {
        report: CampaignReport {
            version: cfg.version,
            seeds: c.seeds.len(),
            groups,
            couplings,
            identity,
        },
        runs,
    })
}

/// Paired runs over `seeds` from a common initial state. Returns the summary and
/// the records that contain violations.
pub fn couple_seeds(
    left: &WalkKind,
    right: &WalkKind,
    table: &Arc<WeightTable>,
    initial: &LedgerState,
    seeds: &[u64],
    steps: u64,
    hat_l: i64,
) -> Result<(CouplingSummary, Vec<CouplingRecord>)> {
    let recs = seeds
        .par_iter()
        .map(|&s| {
            let rec = paired_simulate(left, right, table, initial, s, steps, hat_l)?;
            let good = rec.good_event.as_ref().map(|g| g.holds);
            let keep = (!rec.violations.is_empty()).then_some(rec.clone());
            Ok((
                rec.compared,
                rec.incomparable,
                rec.violations.len() as u64,
                good,
                keep,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let hat = right.hat_params().is_some();
    let summary = CouplingSummary {
        weight: table.spec().to_string(),
        left: left.to_string(),
        right: right.to_string(),
        steps,
        runs: recs.len(),
        trivial_initial: initial.is_trivial(),
        compared: recs.iter().map(|r| r.0).sum(),
        incomparable: recs.iter().map(|r| r.1).sum(),
        violations: recs.iter().map(|r| r.2).sum(),
        runs_with_violations: recs.iter().filter(|r| r.2 > 0).count(),
        good_event_runs: hat.then(|| recs.iter().filter(|r| r.3 == Some(true)).count()),
        good_event_violations: hat
            .then(|| recs.iter().filter(|r| r.3 == Some(true)).map(|r| r.2).sum()),
    };
    Ok((summary, recs.into_iter().filter_map(|r| r.4).collect()))
}

/// Writes `report.json`, and `runs.csv` and `profile_*.dat` when configured.
pub fn write_campaign(
    out: &CampaignOutput,
    cfg: &CampaignConfig,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let report = dir.join("report.json");
    write_json_atomic(&report, &out.report)?;
    written.push(report);
    if cfg.per_run_csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "weight",
            "kind",
            "horizon",
            "seed",
            "localized",
            "range_lo",
            "range_hi",
            "size",
            "stabilization_step",
            "center",
            "center_share",
        ])?;
        for r in &out.runs {
            w.write_record([
                r.weight.clone(),
                r.kind.clone(),
                r.horizon.to_string(),
                r.seed.to_string(),
                r.localized.to_string(),
                r.range_lo.to_string(),
                r.range_hi.to_string(),
                r.size.to_string(),
                r.stabilization_step.to_string(),
                r.center.to_string(),
                format!("{:e}", r.center_share),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let p = dir.join("runs.csv");
        write_bytes_atomic(&p, &bytes)?;
        written.push(p);
    }
    if cfg.profiles {
        for (gi, g) in out.report.groups.iter().enumerate() {
            let rows: Vec<&RunSummary> = out
                .runs
                .iter()
                .filter(|r| r.weight == g.weight && r.kind == g.kind && r.horizon == g.horizon)
                .collect();
            let mut text = format!(
                "# weight {} kind {} horizon {} runs {}\n# offset mean_share\n",
                g.weight,
                g.kind,
                g.horizon,
                rows.len()
            );
            for (j, d) in (-5i64..=5).enumerate() {
                let mean =
                    rows.iter().map(|r| r.profile[j]).sum::<f64>() / rows.len().max(1) as f64;
                text.push_str(&format!("{d} {mean:e}\n"));
            }
            let p = dir.join(format!("profile_{gi}.dat"));
            write_bytes_atomic(&p, text.as_bytes())?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Runs with visit logs at 0 and `Y±` tracking, as needed by [`urn_balance`] and the identity check.
pub fn diagnostic_options() -> RunOptions {
    RunOptions {
        trace: false,
        track_y: true,
        visit_logs: LogSites::Only(vec![0]),
    }
}
