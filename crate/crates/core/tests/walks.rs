use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use vrrw_core::grid::geometric_nodes;
use vrrw_core::walks::{enumerate_exact, LogSites};
use vrrw_core::{
    GridFn, HatParams, LedgerState, LedgerView, RandomField, RunOptions, TailRule, WalkKind,
    WalkRun, WeightSpec, WeightTable,
};

fn table(spec: WeightSpec) -> Arc<WeightTable> {
    Arc::new(WeightTable::new(spec, 1 << 12).unwrap())
}

fn sqrt_hat(eps: f64) -> HatParams {
    let f = GridFn::from_fn(
        geometric_nodes(1e-3, 1e12, 8),
        f64::sqrt,
        |x| 0.5 / x.max(1e-3).sqrt(),
        TailRule::Power,
    )
    .unwrap();
    HatParams::new(eps, f).unwrap()
}

fn kinds() -> Vec<WalkKind> {
    vec![
        WalkKind::Vrrw,
        WalkKind::Reflected,
        WalkKind::Tilde,
        WalkKind::Hat(sqrt_hat(0.1)),
        WalkKind::HatRestricted {
            l: 4,
            params: sqrt_hat(0.05),
        },
        WalkKind::Breve { gamma: 0.3 },
        WalkKind::Restricted { lo: -2, hi: 3 },
    ]
}

fn specs() -> Vec<WeightSpec> {
    vec![
        WeightSpec::linear(1.0).unwrap(),
        WeightSpec::polylog(0.6).unwrap(),
        WeightSpec::power(0.7).unwrap(),
    ]
}

/// Excursion from 0 back to 0 that stays in `[lo, hi]`, driven by coin flips.
fn excursion(flips: &[bool], lo: i64, hi: i64) -> Vec<i64> {
    let mut path = vec![0];
    let mut x = 0i64;
    for &up in flips {
        let mut next = if up { x + 1 } else { x - 1 };
        if next < lo || next > hi {
            next = 2 * x - next;
        }
        x = next;
        path.push(x);
    }
    while x != 0 {
        x -= x.signum();
        path.push(x);
    }
    path
}

fn initial_for(kind: &WalkKind, flips: &[bool]) -> LedgerState {
    let (lo, hi) = kind.range();
    // the breve walk holds at 0 but never jumps left of it
    LedgerState::from_path(&excursion(flips, lo.max(-6), hi.min(6))).unwrap()
}

fn ulps_from_one(v: f64) -> f64 {
    (v - 1.0).abs() / f64::EPSILON
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ledger_invariants_after_every_step(
        k in 0usize..7,
        s in 0usize..3,
        seed in any::<u64>(),
        flips in prop::collection::vec(any::<bool>(), 0..30),
        steps in 1u64..300,
    ) {
        let kind = kinds().swap_remove(k);
        let init = initial_for(&kind, &flips);
        prop_assert!(init.is_reachable());
        let mut run = WalkRun::new(kind, table(specs().swap_remove(s)), init.clone(), RandomField::new(seed), RunOptions::default()).unwrap();
        for _ in 0..steps {
            let kern = run.kernel().unwrap();
            prop_assert!(ulps_from_one(kern.total()) <= 4.0, "kernel {kern:?}");
            prop_assert!(kern.left >= 0.0 && kern.hold >= 0.0 && kern.right >= 0.0);
            run.step().unwrap();
            let led = run.ledger();
            let (lo, hi) = led.support().unwrap();
            let added: i64 = (lo..=hi).map(|x| led.z(x) as i64 - init.z(x) as i64).sum();
            prop_assert_eq!(added, run.time() as i64 + 1);
            for x in lo - 1..=hi {
                prop_assert!(led.n(x) <= led.z(x + 1), "edge {x}: {} > {}", led.n(x), led.z(x + 1));
            }
            prop_assert!(run.conservation_holds() && run.edge_bound_holds());
        }
    }

    #[test]
    fn same_inputs_same_ledger(k in 0usize..7, seed in any::<u64>(), flips in prop::collection::vec(any::<bool>(), 0..20)) {
        let kind = kinds().swap_remove(k);
        let init = initial_for(&kind, &flips);
        let t = table(WeightSpec::polylog(0.6).unwrap());
        let go = || {
            let mut r = WalkRun::new(kind.clone(), Arc::clone(&t), init.clone(), RandomField::new(seed), RunOptions::default()).unwrap();
            r.run(500).unwrap();
            (r.ledger(), r.position())
        };
        prop_assert_eq!(go(), go());
    }

    #[test]
    fn uniforms_ignore_query_order(seed in any::<u64>(), keys in prop::collection::vec((-50i64..50, 1u64..10_000), 1..40)) {
        let a = RandomField::new(seed);
        let forward: Vec<f64> = keys.iter().map(|&(x, i)| a.uniform(x, i)).collect();
        let b = RandomField::new(seed);
        let mut backward: Vec<f64> = keys.iter().rev().map(|&(x, i)| b.uniform(x, i)).collect();
        backward.reverse();
        prop_assert_eq!(&forward, &backward);
        prop_assert!(forward.iter().all(|u| (0.0..=1.0).contains(u)));
    }

    #[test]
    fn enumerated_mass_is_one(k in 0usize..7, flips in prop::collection::vec(any::<bool>(), 0..16), n in 1u32..8) {
        let kind = kinds().swap_remove(k);
        let init = initial_for(&kind, &flips);
        let paths = enumerate_exact(&kind, &table(WeightSpec::linear(1.0).unwrap()), &init, n).unwrap();
        let mass: f64 = paths.iter().map(|p| p.prob).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12, "mass {mass}");
    }
}

#[test]
fn linear_second_step_goes_back_with_two_thirds() {
    let t = table(WeightSpec::linear(1.0).unwrap());
    // local times at time 1, after the first move 0 -> 1
    let led = LedgerState::new([(0, 1), (1, 1)].into(), [(0, 1)].into()).unwrap();
    let p = WalkKind::Vrrw.prob_left(&t, &led, 1).unwrap();
    // w(k) = 1 + k: left neighbour 0 has been visited once, right neighbour 2 never
    assert_eq!(p, 2.0 / 3.0);

    let paths = enumerate_exact(&WalkKind::Vrrw, &t, &LedgerState::trivial(), 2).unwrap();
    let back: f64 = paths
        .iter()
        .filter(|p| p.path == [0, 1, 0] || p.path == [0, -1, 0])
        .map(|p| p.prob)
        .sum();
    assert!((back - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn reflection_and_hold_rules() {
    let t = table(WeightSpec::linear(1.0).unwrap());
    let led = LedgerState::trivial();
    for k in [
        WalkKind::Reflected,
        WalkKind::Tilde,
        WalkKind::Hat(sqrt_hat(0.1)),
    ] {
        assert_eq!(k.prob_left(&t, &led, -1).unwrap(), 0.0, "{k}");
        assert!(k.prob_left(&t, &led, -2).is_err());
    }
    let hr = WalkKind::HatRestricted {
        l: 3,
        params: sqrt_hat(0.1),
    };
    assert_eq!(hr.prob_left(&t, &led, 3).unwrap(), 1.0);
    let kern = WalkKind::Breve { gamma: 0.2 }.kernel(&t, &led, 0).unwrap();
    assert_eq!((kern.left, kern.hold, kern.right), (0.0, 0.8, 0.2));
    for k in kinds()
        .into_iter()
        .filter(|k| !matches!(k, WalkKind::Breve { .. }))
    {
        assert_eq!(k.prob_left(&t, &led, 0).unwrap(), 0.5, "{k}");
    }
}

#[test]
fn symmetrized_right_excursion() {
    let led = LedgerState::new([(0, 1), (1, 1)].into(), [(0, 1)].into()).unwrap();
    let s = led.symmetrize().unwrap();
    assert_eq!((s.z(-1), s.z(0), s.z(1)), (1, 2, 1));
    assert_eq!((s.n(-1), s.n(0)), (1, 1));
    assert!(s.is_symmetric());
}

#[test]
fn logged_clocks_match_the_trace() {
    let t = table(WeightSpec::polylog(0.6).unwrap());
    let opts = RunOptions {
        trace: true,
        track_y: false,
        visit_logs: LogSites::All,
    };
    let mut run = WalkRun::new(
        WalkKind::Vrrw,
        t,
        LedgerState::trivial(),
        RandomField::new(11),
        opts,
    )
    .unwrap();
    run.run(2_000).unwrap();
    let trace = run.trace().unwrap().to_vec();
    let mut seen: BTreeMap<i64, Vec<u64>> = BTreeMap::new();
    for (n, &x) in trace.iter().enumerate() {
        seen.entry(x).or_default().push(n as u64);
    }
    for (x, times) in seen {
        for (k, &t) in times.iter().enumerate() {
            assert_eq!(run.sigma(x, k as u64 + 1), Some(t), "σ({x},{})", k + 1);
        }
        assert_eq!(run.z(x), times.len() as u64);
    }
}
