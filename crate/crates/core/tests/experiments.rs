use std::sync::Arc;

use proptest::prelude::*;
use vrrw_core::experiments::{
    detect_localization, martingale_variance, pathwise_identity_check, simulate, urn_balance,
    CampaignConfig, Probes,
};
use vrrw_core::walks::LogSites;
use vrrw_core::{
    Error, LedgerState, RandomField, RunOptions, WalkKind, WalkRun, WeightSpec, WeightTable,
};

fn table(spec: WeightSpec, cap: usize) -> Arc<WeightTable> {
    Arc::new(WeightTable::new(spec, cap).unwrap())
}

fn tracked(kind: WalkKind, t: &Arc<WeightTable>, seed: u64) -> WalkRun {
    let opts = RunOptions {
        track_y: true,
        ..Default::default()
    };
    WalkRun::new(
        kind,
        Arc::clone(t),
        LedgerState::trivial(),
        RandomField::new(seed),
        opts,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn y_counters_increase_and_difference_is_m(seed in any::<u64>(), k in 0usize..3) {
        let kind = [WalkKind::Vrrw, WalkKind::Reflected, WalkKind::Restricted { lo: 0, hi: 4 }][k].clone();
        let t = table(WeightSpec::linear(1.0).unwrap(), 1 << 14);
        let mut run = tracked(kind, &t, seed);
        let probes = Probes { sites: vec![0, 1, 2, 3], per_octave: 8, ..Default::default() };
        let s = simulate(&mut run, 5_000, &probes).unwrap();
        for c in 0..s.checkpoints.len() {
            for p in 0..probes.sites.len() {
                prop_assert_eq!(s.m[c][p], s.y_plus[c][p] - s.y_minus[c][p]);
                if c > 0 {
                    prop_assert!(s.y_plus[c][p] >= s.y_plus[c - 1][p]);
                    prop_assert!(s.y_minus[c][p] >= s.y_minus[c - 1][p]);
                }
            }
        }
    }

    #[test]
    fn telescoping_identity_is_exact(seed in any::<u64>(), x in 0i64..3, s in 0usize..2) {
        let spec = [WeightSpec::linear(1.0).unwrap(), WeightSpec::polylog(0.6).unwrap()][s].clone();
        let t = table(spec, 1 << 14);
        let mut run = tracked(WalkKind::Restricted { lo: 0, hi: 4 }, &t, seed);
        let r = pathwise_identity_check(&mut run, 5_000, x).unwrap();
        prop_assert!(r.max_residual <= 1e-8, "{r:?}");
    }
}

#[test]
fn localization_window_grows_with_the_horizon() {
    // a boundary site of the last-half window may stop being visited, so the
    // window at 2T contains the one at T in most runs rather than all
    for spec in [
        WeightSpec::power(2.0).unwrap(),
        WeightSpec::linear(1.0).unwrap(),
    ] {
        let t = table(spec.clone(), 1 << 16);
        let (mut localized, mut contained) = (0, 0);
        for seed in 1..=200 {
            let mut run = WalkRun::new(
                WalkKind::Vrrw,
                Arc::clone(&t),
                LedgerState::trivial(),
                RandomField::new(seed),
                RunOptions::default(),
            )
            .unwrap();
            run.run(10_000).unwrap();
            let a = detect_localization(&run).unwrap();
            let seen = run.visited_range();
            run.run(10_000).unwrap();
            let b = detect_localization(&run).unwrap();
            let later = run.visited_range();
            assert!(later.0 <= seen.0 && seen.1 <= later.1);
            assert!(later.0 <= b.range.0 && b.range.1 <= later.1);
            if a.localized {
                localized += 1;
                contained += usize::from(b.range.0 <= a.range.0 && a.range.1 <= b.range.1);
            }
        }
        assert!(
            localized > 0 && contained as f64 >= 0.9 * localized as f64,
            "{spec}: {contained}/{localized}"
        );
    }
}

#[test]
fn short_runs_are_rejected() {
    let t = table(WeightSpec::linear(1.0).unwrap(), 1 << 10);
    let mut run = WalkRun::new(
        WalkKind::Vrrw,
        t,
        LedgerState::trivial(),
        RandomField::new(1),
        RunOptions::default(),
    )
    .unwrap();
    run.run(100).unwrap();
    assert!(matches!(
        detect_localization(&run),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn martingale_variance_does_not_explode() {
    let t = table(WeightSpec::linear(1.0).unwrap(), 1 << 16);
    let probes = Probes {
        sites: vec![2],
        per_octave: 2,
        ..Default::default()
    };
    let series: Vec<_> = (1..=200)
        .map(|seed| {
            simulate(
                &mut tracked(WalkKind::Restricted { lo: 0, hi: 4 }, &t, seed),
                40_000,
                &probes,
            )
            .unwrap()
        })
        .collect();
    let var = martingale_variance(&series, 0);
    let times = &series[0].checkpoints;
    let first = times.iter().position(|&c| c >= 1_000).unwrap();
    for (c, v) in var.iter().enumerate().skip(first) {
        assert!(
            *v <= 4.0 * var[first],
            "n = {}: {v} > 4 × {}",
            times[c],
            var[first]
        );
    }
}

#[test]
fn urn_ratio_needs_returns() {
    let t = table(WeightSpec::linear(1.0).unwrap(), 1 << 12);
    let opts = RunOptions {
        visit_logs: LogSites::Only(vec![0]),
        ..Default::default()
    };
    let mut run = WalkRun::new(
        WalkKind::Vrrw,
        Arc::clone(&t),
        LedgerState::trivial(),
        RandomField::new(2),
        opts.clone(),
    )
    .unwrap();
    run.run(10).unwrap();
    assert!(urn_balance(&run).is_err());
    let mut run = WalkRun::new(
        WalkKind::Vrrw,
        t,
        LedgerState::trivial(),
        RandomField::new(2),
        opts,
    )
    .unwrap();
    run.run(3_000).unwrap();
    let u = urn_balance(&run).unwrap();
    assert_eq!(u.times.len(), u.ratios.len());
}

#[test]
fn empty_kind_list_is_reported_with_the_rest() {
    let text = r#"
        version = 1
        weights = ["linear:1", "nonsense"]
        kinds = []
        seeds = "1..4"
        horizons = [20000]
    "#;
    let err = CampaignConfig::from_toml(text)
        .and_then(|c| c.validate().map(|_| ()))
        .unwrap_err();
    let Error::Config(list) = err else {
        panic!("{err}")
    };
    assert!(list.len() >= 2, "{list:?}");
}
