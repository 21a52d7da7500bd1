use std::sync::Arc;

use proptest::prelude::*;
use vrrw_core::coupling::{
    check_corollary_consequences, good_event_on_path, paired_simulate, replay_step,
};
use vrrw_core::grid::geometric_nodes;
use vrrw_core::{GridFn, HatParams, LedgerState, TailRule, WalkKind, WeightSpec, WeightTable};

fn table(spec: WeightSpec) -> Arc<WeightTable> {
    Arc::new(WeightTable::new(spec, 1 << 14).unwrap())
}

fn specs() -> Vec<WeightSpec> {
    vec![
        WeightSpec::linear(1.0).unwrap(),
        WeightSpec::polylog(0.6).unwrap(),
        WeightSpec::power(0.5).unwrap(),
    ]
}

/// Excursion from 0 back to 0 on `[-1, 6]`.
fn half_line_state(flips: &[bool]) -> LedgerState {
    let mut path = vec![0i64];
    let mut x = 0i64;
    for &up in flips {
        x = if (up && x < 6) || x == -1 {
            x + 1
        } else {
            x - 1
        };
        path.push(x);
    }
    while x != 0 {
        x -= x.signum();
        path.push(x);
    }
    LedgerState::from_path(&path).unwrap()
}

fn hat(eps: f64) -> HatParams {
    let f = GridFn::from_fn(
        geometric_nodes(1e-3, 1e12, 8),
        f64::sqrt,
        |x| 0.5 / x.max(1e-3).sqrt(),
        TailRule::Power,
    )
    .unwrap();
    HatParams::new(eps, f).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tilde_is_left_of_reflected(s in 0usize..3, seed in any::<u64>(), flips in prop::collection::vec(any::<bool>(), 0..40)) {
        let init = half_line_state(&flips);
        let rec = paired_simulate(&WalkKind::Tilde, &WalkKind::Reflected, &table(specs().swap_remove(s)), &init, seed, 3_000, 8).unwrap();
        prop_assert!(rec.holds(), "{:?}", rec.violations.first());
        prop_assert!(rec.compared > 0);
        prop_assert!(rec.left_range.1 <= rec.right_range.1);
    }

    #[test]
    fn tilde_kernel_leans_left_of_vertex_kernel(
        s in 0usize..3,
        zl in 0u64..5_000,
        zr in 0u64..5_000,
        frac in 0.0f64..=1.0,
    ) {
        // the edge local time n(x, x+1) is at most z(x+1)
        let n = (zr as f64 * frac).floor() as u64;
        let t = table(specs().swap_remove(s));
        let (a, b, c) = (t.w_int(zl), t.w_int(n), t.w_int(zr));
        prop_assert!(b / (a + b) <= c / (a + c));
        let led = LedgerState::new([(-1, zl), (1, zr)].into(), [(0, n)].into()).unwrap();
        let pt = WalkKind::Tilde.prob_left(&t, &led, 0).unwrap();
        let pr = WalkKind::Reflected.prob_left(&t, &led, 0).unwrap();
        prop_assert!(pt >= pr, "tilde {pt} < reflected {pr}");
    }
}

#[test]
fn identical_walks_never_disagree() {
    for spec in specs() {
        let rec = paired_simulate(
            &WalkKind::Vrrw,
            &WalkKind::Vrrw,
            &table(spec),
            &LedgerState::trivial(),
            3,
            5_000,
            8,
        )
        .unwrap();
        assert!(rec.holds());
        assert_eq!(rec.left_z, rec.right_z);
        let c = check_corollary_consequences(&rec);
        assert!(c.counts_dominated && c.range_bound && c.soft);
    }
}

#[test]
fn zero_step_record_is_vacuous() {
    let rec = paired_simulate(
        &WalkKind::Tilde,
        &WalkKind::Reflected,
        &table(specs().remove(0)),
        &LedgerState::trivial(),
        1,
        0,
        8,
    )
    .unwrap();
    assert!(rec.holds());
    assert!(check_corollary_consequences(&rec).counts_dominated);
}

#[test]
fn good_event_on_hand_built_paths() {
    let p = hat(0.1);
    let ev =
        good_event_on_path(&p, &LedgerState::trivial(), &[0, -1, 0, -1, 0, -1, 0], 4, 0).unwrap();
    assert!(
        ev.holds && ev.k == Some(1) && ev.first_violation_step.is_none(),
        "{ev:?}"
    );

    // at time 5, Z(1) = 3 > N(0,1) + f(N(0,1)) = 1 + 1
    let ev = good_event_on_path(&p, &LedgerState::trivial(), &[0, 1, 2, 1, 2, 1, 2], 8, 5).unwrap();
    assert!(!ev.holds);
    assert_eq!(ev.first_violation_step, Some(5));
    let ev = good_event_on_path(&p, &LedgerState::trivial(), &[0, 1, 2, 1, 2, 1, 2], 8, 4).unwrap();
    assert_eq!(ev.first_violation_step, Some(5));

    // leaving ⟦-1, L-1⟧ breaks the event at the step that reaches L
    let ev = good_event_on_path(&p, &LedgerState::trivial(), &[0, 1, 2, 3], 2, 0).unwrap();
    assert!(!ev.holds);
}

#[test]
fn replay_reproduces_the_walk() {
    let t = table(WeightSpec::polylog(0.6).unwrap());
    let kind = WalkKind::Hat(hat(0.1));
    let a = replay_step(&kind, &t, &LedgerState::trivial(), 9, 250).unwrap();
    let b = replay_step(&kind, &t, &LedgerState::trivial(), 9, 250).unwrap();
    assert_eq!(a, b);
    assert!((a.p_left + a.p_hold + a.p_right - 1.0).abs() <= 4.0 * f64::EPSILON);
    assert_eq!(a.next == a.position - 1, a.uniform <= a.p_left);
}
