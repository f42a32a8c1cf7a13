use proptest::prelude::*;

use merge_sim::config::SimConfig;
use merge_sim::driver::profile_from_q;
use merge_sim::dynamics::{step, Controls, VehicleParams, VehicleState};
use merge_sim::game::{combine, headway_utility, solve_stackelberg, Action, ActionPair, PayoffBimatrix};
use merge_sim::perception::{collision_index, OrientedRect};

fn rect() -> impl Strategy<Value = OrientedRect> {
    (-10.0..10.0f64, -10.0..10.0f64, -3.2..3.2f64, 0.2..3.0f64, 0.2..5.0f64).prop_map(|(x, y, h, w, l)| OrientedRect {
        center: [x, y],
        heading: h,
        half_width: w,
        half_length: l,
    })
}

fn bimatrix() -> impl Strategy<Value = [f64; 8]> {
    proptest::array::uniform8(-50.0..50.0f64)
}

fn build(v: &[f64; 8]) -> PayoffBimatrix {
    let i = |a: Action| usize::from(a == Action::Straight);
    PayoffBimatrix::from_fn(|p: ActionPair| {
        let k = 2 * i(p.leader) + i(p.follower);
        (v[k], v[4 + k])
    })
}

proptest! {
    #[test]
    fn collision_index_is_bounded_and_symmetric(a in rect(), b in rect()) {
        let ab = collision_index(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, collision_index(&b, &a));
        prop_assert_eq!(collision_index(&a, &a), 1.0);
    }

    #[test]
    fn collision_index_falls_with_separation(a in rect(), dy in 0.0..20.0f64) {
        let far = OrientedRect { center: [a.center[0], a.center[1] + 30.0 + dy], ..a };
        let farther = OrientedRect { center: [a.center[0], a.center[1] + 40.0 + dy], ..a };
        prop_assert!(collision_index(&a, &far) >= collision_index(&a, &farther));
        prop_assert!(collision_index(&a, &far) < 1.0);
    }

    #[test]
    fn stackelberg_follower_plays_a_best_response(v in bimatrix()) {
        let m = build(&v);
        let sol = solve_stackelberg(&m);
        prop_assert!(m.best_responses(sol.actions.leader).contains(&sol.actions.follower));
        // The leader's secure value is at least that of its other move.
        for l in Action::ALL {
            prop_assert!(sol.leader_value >= m.secure_value(l).0);
        }
    }

    #[test]
    fn stackelberg_is_invariant_to_positive_affine_rescaling(v in bimatrix(), s in 0.1..10.0f64, c in -5.0..5.0f64) {
        let mut w = v;
        for x in &mut w {
            *x = *x * s + c;
        }
        prop_assert_eq!(solve_stackelberg(&build(&v)).actions, solve_stackelberg(&build(&w)).actions);
    }

    #[test]
    fn headway_utility_is_monotone_and_capped(q in 0.0..=1.0f64, d in 0.0..500.0f64, extra in 0.0..100.0f64) {
        let c = SimConfig::default();
        let p = profile_from_q(q, &c.profile, &c.vehicle).unwrap();
        let u = headway_utility(d, &p);
        prop_assert!(u >= 0.0 && u <= p.headway_cap() + 1e-9);
        prop_assert!(headway_utility(d + extra, &p) >= u);
    }

    #[test]
    fn combine_orders_like_its_parts(pos in 0.0..100.0f64, neg in 0.0..100.0f64, more in 0.0..10.0f64) {
        prop_assert!(combine(pos + more, neg) >= combine(pos, neg));
        prop_assert!(combine(pos, neg + more) <= combine(pos, neg));
    }

    #[test]
    fn profile_orders_with_aggressiveness(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let c = SimConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = profile_from_q(lo, &c.profile, &c.vehicle).unwrap();
        let r = profile_from_q(hi, &c.profile, &c.vehicle).unwrap();
        prop_assert!(r.prediction_time <= p.prediction_time);
        prop_assert!(r.accel_limit >= p.accel_limit);
        prop_assert!((1.0..=1.3).contains(&p.magnification));
    }

    #[test]
    fn straight_motion_is_exact(v in 1.0..40.0f64, a in -2.0..2.0f64, n in 1usize..200) {
        let p = VehicleParams::default();
        let dt = 0.01;
        let u = Controls { accel: a, steer: 0.0 };
        let mut s = VehicleState::cruising(3.3, 0.0, v);
        for _ in 0..n {
            s = step(&s, &p, &u, dt).unwrap();
        }
        let t = n as f64 * dt;
        // Exact unless the speed floor engaged.
        if v + a * t > 0.0 {
            prop_assert!((s.y_long - (v * t + 0.5 * a * t * t)).abs() < 1e-9);
            prop_assert!((s.v_long - (v + a * t)).abs() < 1e-9);
        }
        prop_assert_eq!(s.x_lat, 3.3);
    }
}

#[test]
fn step_rejects_bad_inputs() {
    let p = VehicleParams::default();
    let s = VehicleState::cruising(0.0, 0.0, 20.0);
    assert!(step(&s, &p, &Controls { accel: f64::NAN, steer: 0.0 }, 0.01).is_err());
    assert!(step(&s, &p, &Controls::default(), -0.01).is_err());
    assert_eq!(step(&s, &p, &Controls::default(), 0.0).unwrap(), s);
}
