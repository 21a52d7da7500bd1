use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use vrrw_core::coupling::replay_step;
use vrrw_core::experiments::{
    couple_seeds, detect_localization, enumeration_check, parse_seed_range,
    pathwise_identity_check, profile_compare, run_campaign, simulate as record_series, table_for,
    write_campaign, CampaignConfig, Probes, MIN_LOCALIZATION_STEPS,
};
use vrrw_core::io::{write_atomic, write_bytes_atomic, write_json_atomic};
use vrrw_core::walks::RunOptions;
use vrrw_core::{
    index_sweep, KindSpec, LedgerState, OperatorConfig, Operators, RandomField, WalkKind, WalkRun,
    WeightSpec,
};

use crate::args::{
    CampaignArgs, CoupleArgs, Format, IndexArgs, ProfileArgs, SimulateArgs, VerifyArgs,
};
use crate::Failure;

type Outcome = Result<(), Failure>;

fn finish(errs: Vec<String>) -> Outcome {
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(errs))
    }
}

fn weight(s: &str, errs: &mut Vec<String>) -> Option<WeightSpec> {
    s.parse()
        .map_err(|e| errs.push(format!("--weight: {e}")))
        .ok()
}

fn kind(flag: &str, s: &str, errs: &mut Vec<String>) -> Option<KindSpec> {
    s.parse()
        .map_err(|e| errs.push(format!("--{flag}: {e}")))
        .ok()
}

fn seeds(flag: &str, s: &str, errs: &mut Vec<String>) -> Vec<u64> {
    parse_seed_range(s).unwrap_or_else(|e| {
        errs.push(format!("--{flag}: {e}"));
        Vec::new()
    })
}

fn list<T: std::str::FromStr>(flag: &str, s: &str, errs: &mut Vec<String>) -> Vec<T>
where
    T::Err: std::fmt::Display,
{
    let parts: Vec<&str> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        errs.push(format!("--{flag}: list is empty"));
    }
    let mut out = Vec::new();
    for part in parts {
        match part.parse() {
            Ok(v) => out.push(v),
            Err(e) => errs.push(format!("--{flag}: `{part}`: {e}")),
        }
    }
    out
}

fn initial(path: &Option<PathBuf>, errs: &mut Vec<String>) -> LedgerState {
    match path {
        None => LedgerState::trivial(),
        Some(p) => LedgerState::from_json_file(p).unwrap_or_else(|e| {
            errs.push(format!("--initial {}: {e}", p.display()));
            LedgerState::trivial()
        }),
    }
}

fn positive(flag: &str, v: u64, errs: &mut Vec<String>) {
    if v == 0 {
        errs.push(format!("--{flag}: must be positive"));
    }
}

fn eta_sweep(s: &str, errs: &mut Vec<String>) -> Vec<f64> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = |errs: &mut Vec<String>, why: &str| errs.push(format!("--eta-sweep `{s}`: {why}"));
    if parts.len() != 3 {
        bad(errs, "expected START:END:COUNT");
        return Vec::new();
    }
    let (a, b, n) = match (
        parts[0].parse::<f64>(),
        parts[1].parse::<f64>(),
        parts[2].parse::<usize>(),
    ) {
        (Ok(a), Ok(b), Ok(n)) => (a, b, n),
        _ => {
            bad(errs, "START and END must be numbers and COUNT an integer");
            return Vec::new();
        }
    };
    if !(a > 0.0 && b < 1.0 && a < b) {
        bad(errs, "need 0 < START < END < 1");
        return Vec::new();
    }
    if n < 2 {
        bad(errs, "COUNT must be at least 2");
        return Vec::new();
    }
    (0..n)
        .map(|k| {
            let (k, m) = (k as f64, (n - 1) as f64);
            // 12 decimals keeps printed grids free of binary noise
            ((a * (m - k) + b * k) / m * 1e12).round() / 1e12
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Outcome {
    match out {
        Some(p) => write_bytes_atomic(p, bytes)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)?;
            so.flush()?;
        }
    }
    Ok(())
}

fn operators_for(kinds: &[&KindSpec], spec: &WeightSpec) -> Result<Option<Operators>, Failure> {
    if kinds.iter().any(|k| k.needs_operators()) {
        Ok(Some(Operators::new(spec, OperatorConfig::default())?))
    } else {
        Ok(None)
    }
}

pub fn index(a: IndexArgs) -> Outcome {
    let mut errs = Vec::new();
    let spec = weight(&a.weight, &mut errs);
    let etas = eta_sweep(&a.eta_sweep, &mut errs);
    if !(a.w_hull > 10.0 && a.w_hull.is_finite()) {
        errs.push("--w-hull: must be a finite number above 10".into());
    }
    if !(a.x_hull > 10.0 && a.x_hull.is_finite()) {
        errs.push("--x-hull: must be a finite number above 10".into());
    }
    if a.nodes_per_decade < 4 {
        errs.push("--nodes-per-decade: must be at least 4".into());
    }
    if a.max_level == 0 {
        errs.push("--max-level: must be positive".into());
    }
    finish(errs)?;
    let cfg = OperatorConfig {
        w_hull: a.w_hull,
        x_hull: a.x_hull,
        nodes_per_decade: a.nodes_per_decade,
        x_nodes_per_decade: a.nodes_per_decade,
        max_level: a.max_level,
        ..OperatorConfig::default()
    };
    let ops = Operators::new(&spec.unwrap(), cfg)?;
    let report = index_sweep(&ops, &etas)?;
    let bytes = match a.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut s = String::from("eta,i,j\n");
            for ((e, i), j) in report.eta.iter().zip(&report.i).zip(&report.j) {
                s.push_str(&format!("{e},{i},{j}\n"));
            }
            s.into_bytes()
        }
    };
    emit(&a.out, &bytes)
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let mut errs = Vec::new();
    let spec = weight(&a.weight, &mut errs);
    let ks = kind("kind", &a.kind, &mut errs);
    let probes: Vec<i64> = list("probes", &a.probes, &mut errs);
    let init = initial(&a.initial, &mut errs);
    positive("steps", a.steps, &mut errs);
    positive("per-octave", a.per_octave as u64, &mut errs);
    finish(errs)?;
    let (spec, ks) = (spec.unwrap(), ks.unwrap());
    let ops = operators_for(&[&ks], &spec)?;
    let kind = ks.resolve(ops.as_ref())?;
    let table = table_for(&spec, a.steps)?;
    let opts = RunOptions {
        track_y: true,
        ..RunOptions::default()
    };
    let mut run = WalkRun::new(kind, table, init, RandomField::new(a.seed), opts)?;
    let series = record_series(
        &mut run,
        a.steps,
        &Probes {
            sites: probes,
            per_octave: a.per_octave,
            snapshots: a.snapshots,
            five_site: a.five_site,
        },
    )?;
    let series_path = match a.format {
        Format::Csv => {
            let p = a.out_dir.join("series.csv");
            write_atomic(&p, |w| series.write_csv(w))?;
            p
        }
        Format::Json => {
            let p = a.out_dir.join("series.json");
            write_json_atomic(&p, &series)?;
            p
        }
    };
    let ledger_path = a.out_dir.join("ledger.json");
    write_json_atomic(&ledger_path, &run.ledger())?;
    let localization = if a.steps >= MIN_LOCALIZATION_STEPS {
        Some(detect_localization(&run)?)
    } else {
        None
    };
    let summary = json!({
        "weight": spec.to_string(),
        "kind": run.kind().to_string(),
        "seed": a.seed,
        "steps": a.steps,
        "position": run.position(),
        "visited_range": run.visited_range(),
        "localization": localization,
    });
    let summary_path = a.out_dir.join("summary.json");
    write_json_atomic(&summary_path, &summary)?;
    for p in [series_path, ledger_path, summary_path] {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn couple(a: CoupleArgs) -> Outcome {
    let mut errs = Vec::new();
    let spec = weight(&a.weight, &mut errs);
    let lk = kind("left", &a.left, &mut errs);
    let rk = kind("right", &a.right, &mut errs);
    let seed_list = seeds("seeds", &a.seeds, &mut errs);
    let init = initial(&a.initial, &mut errs);
    positive("steps", a.steps, &mut errs);
    if a.hat_l < 1 {
        errs.push("--hat-l: must be at least 1".into());
    }
    let replay = a.replay.as_deref().and_then(|r| {
        let parsed = r.split_once(':').and_then(|(s, t)| {
            Some((s.trim().parse::<u64>().ok()?, t.trim().parse::<u64>().ok()?))
        });
        if parsed.is_none() {
            errs.push(format!("--replay `{r}`: expected SEED:STEP"));
        }
        parsed
    });
    finish(errs)?;
    let (spec, lk, rk) = (spec.unwrap(), lk.unwrap(), rk.unwrap());
    let ops = operators_for(&[&lk, &rk], &spec)?;
    let (left, right) = (lk.resolve(ops.as_ref())?, rk.resolve(ops.as_ref())?);
    if let Some((seed, step)) = replay {
        let table = table_for(&spec, step + 1)?;
        let l = replay_step(&left, &table, &init, seed, step)?;
        let r = replay_step(&right, &table, &init, seed, step)?;
        return emit(&a.out, &json_bytes(&json!({ "left": l, "right": r }))?);
    }
    let table = table_for(&spec, a.steps)?;
    let (summary, records) =
        couple_seeds(&left, &right, &table, &init, &seed_list, a.steps, a.hat_l)?;
    if let Some(dir) = &a.records_dir {
        for rec in &records {
            write_json_atomic(dir.join(format!("record_{}.json", rec.seed)), rec)?;
        }
    }
    emit(&a.out, &json_bytes(&summary)?)
}

pub fn profile(a: ProfileArgs) -> Outcome {
    let mut errs = Vec::new();
    let spec = weight(&a.weight, &mut errs);
    let ks = kind("kind", &a.kind, &mut errs);
    if a.steps < MIN_LOCALIZATION_STEPS {
        errs.push(format!(
            "--steps: must be at least {MIN_LOCALIZATION_STEPS}"
        ));
    }
    positive("i-max", a.i_max as u64, &mut errs);
    positive("per-octave", a.per_octave as u64, &mut errs);
    finish(errs)?;
    let (spec, ks) = (spec.unwrap(), ks.unwrap());
    let ops = Operators::new(&spec, OperatorConfig::default())?;
    let psi = ops.psi_profile(a.i_max)?;
    let kind = ks.resolve(Some(&ops))?;
    let table = table_for(&spec, a.steps)?;
    let mut run = WalkRun::new(
        kind,
        table,
        LedgerState::trivial(),
        RandomField::new(a.seed),
        RunOptions::default(),
    )?;
    let probes = Probes {
        sites: Vec::new(),
        per_octave: a.per_octave,
        snapshots: true,
        five_site: false,
    };
    let series = record_series(&mut run, a.steps, &probes)?;
    let table = profile_compare(&run, &series, &psi)?;
    let bytes = match a.format {
        Format::Json => json_bytes(&table)?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
            let mut s = format!("# center {} n {}\ni,z_minus,z_plus,psi,ratio_minus,ratio_plus,slope_minus,slope_plus\n", table.center, table.n);
            for r in &table.rows {
                s.push_str(&format!(
                    "{},{},{},{:e},{:e},{:e},{},{}\n",
                    r.i,
                    r.z_minus,
                    r.z_plus,
                    r.psi,
                    r.ratio_minus,
                    r.ratio_plus,
                    opt(r.slope_minus),
                    opt(r.slope_plus)
                ));
            }
            s.into_bytes()
        }
    };
    emit(&a.out, &bytes)
}

#[derive(Serialize)]
struct CheckResult {
    name: String,
    passed: bool,
    detail: serde_json::Value,
}

const CHECKS: [&str; 5] = ["operators", "sandwich", "f-eta", "identity", "enumeration"];

pub fn verify(a: VerifyArgs) -> Outcome {
    let mut errs = Vec::new();
    let spec = weight(&a.weight, &mut errs);
    let checks: Vec<String> = list("checks", &a.checks, &mut errs);
    for c in &checks {
        if !CHECKS.contains(&c.as_str()) {
            errs.push(format!(
                "--checks: unknown check `{c}` (expected one of {})",
                CHECKS.join(", ")
            ));
        }
    }
    let etas: Vec<f64> = list("etas", &a.etas, &mut errs);
    if etas.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        errs.push("--etas: values must lie in (0, 1)".into());
    }
    let ks: Vec<u32> = list("sandwich-k", &a.sandwich_k, &mut errs);
    if ks.contains(&0) {
        errs.push("--sandwich-k: levels start at 1".into());
    }
    if !(a.sandwich_eta > 0.0 && a.sandwich_eta < 1.0) {
        errs.push("--sandwich-eta: must lie in (0, 1)".into());
    }
    if !(a.f_eta > 0.5 && a.f_eta < 1.0) {
        errs.push("--f-eta: must lie in (1/2, 1)".into());
    }
    if !(a.f_hull > 10.0 && a.f_hull.is_finite()) {
        errs.push("--f-hull: must be a finite number above 10".into());
    }
    let seed_list = seeds("seeds", &a.seeds, &mut errs);
    positive("steps", a.steps, &mut errs);
    let kinds: Vec<String> = list("kinds", &a.kinds, &mut errs);
    let kind_specs: Vec<KindSpec> = kinds
        .iter()
        .filter_map(|k| kind("kinds", k, &mut errs))
        .collect();
    if a.enum_steps == 0 || a.enum_steps > vrrw_core::walks::MAX_ENUMERATION_STEPS {
        errs.push(format!(
            "--enum-steps: must lie in 1..={}",
            vrrw_core::walks::MAX_ENUMERATION_STEPS
        ));
    }
    positive("runs", a.runs, &mut errs);
    for (flag, v) in [
        ("rel-tol", a.rel_tol),
        ("sandwich-tol", a.sandwich_tol),
        ("identity-tol", a.identity_tol),
    ] {
        if v.is_nan() || v <= 0.0 {
            errs.push(format!("--{flag}: must be positive"));
        }
    }
    finish(errs)?;
    let spec = spec.unwrap();
    let ops = Operators::new(&spec, OperatorConfig::default())?;
    let mut results = Vec::new();
    for name in CHECKS.iter().filter(|c| checks.iter().any(|s| s == *c)) {
        let r = match *name {
            "operators" => {
                let c = ops.identity_check(&etas)?;
                CheckResult {
                    name: name.to_string(),
                    passed: c.passes(a.rel_tol),
                    detail: serde_json::to_value(&c)?,
                }
            }
            "sandwich" => {
                if spec.family_name() != "polylog" {
                    CheckResult {
                        name: name.to_string(),
                        passed: true,
                        detail: json!("skipped: polylog weights only"),
                    }
                } else {
                    let reps = ks
                        .iter()
                        .map(|&k| ops.growth_sandwich_check(a.sandwich_eta, k))
                        .collect::<Result<Vec<_>, _>>()?;
                    let passed = reps.iter().all(|r| r.within(a.sandwich_tol));
                    CheckResult {
                        name: name.to_string(),
                        passed,
                        detail: serde_json::to_value(&reps)?,
                    }
                }
            }
            "f-eta" => match ops.build_f_eta(a.f_eta, a.f_hull) {
                Ok(f) => CheckResult {
                    name: name.to_string(),
                    passed: true,
                    detail: json!({ "eta": f.eta, "hull": f.hull, "corrected": f.corrected, "check": f.check }),
                },
                Err(e) => CheckResult {
                    name: name.to_string(),
                    passed: false,
                    detail: json!(e.to_string()),
                },
            },
            "identity" => {
                let table = table_for(&spec, a.steps)?;
                let mut worst = Vec::new();
                for x in 0..=2 {
                    let mut m = 0.0f64;
                    for &s in &seed_list {
                        let opts = RunOptions {
                            track_y: true,
                            ..RunOptions::default()
                        };
                        let mut run = WalkRun::new(
                            WalkKind::Restricted { lo: 0, hi: 4 },
                            Arc::clone(&table),
                            LedgerState::trivial(),
                            RandomField::new(s),
                            opts,
                        )?;
                        m = m.max(pathwise_identity_check(&mut run, a.steps, x)?.max_residual);
                    }
                    worst.push(json!({ "x": x, "max_residual": m }));
                }
                let passed = worst
                    .iter()
                    .all(|w| w["max_residual"].as_f64().unwrap() <= a.identity_tol);
                CheckResult {
                    name: name.to_string(),
                    passed,
                    detail: json!({ "seeds": seed_list.len(), "steps": a.steps, "sites": worst }),
                }
            }
            _ => {
                let table = table_for(&spec, a.enum_steps as u64 + 2)?;
                let mut rows = Vec::new();
                let mut passed = true;
                for ks in &kind_specs {
                    let k = ks.resolve(Some(&ops))?;
                    let c = enumeration_check(
                        &k,
                        &table,
                        &LedgerState::trivial(),
                        a.enum_steps,
                        a.runs,
                    )?;
                    passed &= c.within(4.0) && c.mass_error <= 1e-12;
                    rows.push(c);
                }
                CheckResult {
                    name: name.to_string(),
                    passed,
                    detail: serde_json::to_value(&rows)?,
                }
            }
        };
        results.push(r);
    }
    let passed = results.iter().all(|r| r.passed);
    emit(
        &a.out,
        &json_bytes(&json!({ "weight": spec.to_string(), "passed": passed, "checks": results }))?,
    )?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect();
        Err(Failure::Runtime(anyhow::anyhow!(
            "checks failed: {}",
            failed.join(", ")
        )))
    }
}

fn threads(flag: Option<usize>, errs: &mut Vec<String>) -> Option<usize> {
    if flag == Some(0) {
        errs.push("--threads: must be positive".into());
    }
    let env = match std::env::var("VRRW_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                errs.push(format!("VRRW_LAB_THREADS: `{v}` is not a positive integer"));
                None
            }
        },
        Err(_) => None,
    };
    match (flag, env) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn resolve_relative(base: &Path, p: &str) -> String {
    let path = Path::new(p);
    if path.is_absolute() {
        p.to_string()
    } else {
        base.join(path).to_string_lossy().into_owned()
    }
}

pub fn campaign(a: CampaignArgs) -> Outcome {
    let mut errs = Vec::new();
    let n_threads = threads(a.threads, &mut errs);
    let text = match std::fs::read_to_string(&a.config) {
        Ok(t) => t,
        Err(e) => {
            errs.push(format!("--config {}: {e}", a.config.display()));
            return finish(errs);
        }
    };
    let mut cfg = match CampaignConfig::from_toml(&text) {
        Ok(c) => c,
        Err(vrrw_core::Error::Config(list)) => {
            errs.extend(list);
            return finish(errs);
        }
        Err(e) => return Err(e.into()),
    };
    let base = a.config.parent().unwrap_or(Path::new("")).to_path_buf();
    for c in &mut cfg.couplings {
        if let Some(p) = &c.initial {
            c.initial = Some(resolve_relative(&base, p));
        }
    }
    let plan = match cfg.validate() {
        Ok(p) => Some(p),
        Err(vrrw_core::Error::Config(list)) => {
            errs.extend(list);
            None
        }
        Err(e) => return Err(e.into()),
    };
    finish(errs)?;
    let plan = plan.unwrap();
    let out = run_campaign(&plan, n_threads)?;
    for p in write_campaign(&out, &plan.config, &a.out_dir)? {
        println!("{}", p.display());
    }
    Ok(())
}
