use proptest::prelude::*;

use uavwpt_core::gsp::{build_gsp, repair, solve_gsp};
use uavwpt_core::init::initial_trajectory;
use uavwpt_core::io::fmt_f64;
use uavwpt_core::linearize::*;
use uavwpt_core::model::{input_power, rate};
use uavwpt_core::sweep::parse_values;
use uavwpt_core::verify::simulate_plan;
use uavwpt_core::{EhParams, GroundTerminal, Plan, Point2, Scenario, Schedule, SystemParams, Trajectory};

fn point(r: f64) -> impl Strategy<Value = Point2> {
    (-r..r, -r..r).prop_map(|(x, y)| Point2::new(x, y))
}

fn scenario(gts: &[Point2], demand: f64) -> Scenario {
    Scenario::new(
        SystemParams::reference(),
        EhParams::reference(),
        gts.iter()
            .map(|&p| GroundTerminal {
                position_m: p,
                demand_bits: demand,
            })
            .collect(),
    )
    .unwrap()
}

fn within(lb: f64, truth: f64) -> bool {
    lb <= truth + 1e-9 * truth.abs().max(lb.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bounds_never_exceed_true_values(
        gts in prop::collection::vec(point(150.0), 1..4),
        interior in prop::collection::vec(point(150.0), 1..6),
        q in point(300.0),
        a0 in 0.0..1.0f64,
        pick in any::<prop::sample::Index>(),
    ) {
        let sc = scenario(&gts, 1000.0);
        let p = &sc.params;
        let mut pts = vec![Point2::ORIGIN];
        pts.extend(interior);
        pts.push(Point2::ORIGIN);
        let ep = make_expansion_point(&Trajectory::from_slots(pts), &sc).unwrap();
        let k = pick.index(ep.num_blocks());
        let m = pick.index(gts.len());
        let s = gts[m];
        let n = q.dist_sq(s) + p.altitude_m * p.altitude_m;
        let v = p.altitude_m / n.sqrt();
        let big_s = p.logistic.s_of(v);
        let pin = input_power(q, s, p);

        let rc = rate_bound_coeffs(&ep, m, k, p);
        prop_assert!(within(rate_lower_bound(&rc, &ep, m, k, q, big_s), rate(q, s, p)));
        prop_assert!(within(elevation_lower_bound(&ep, m, k, q), v));
        let pc = input_power_bound_coeffs(&ep, m, k, p);
        prop_assert!(within(input_power_lower_bound(&pc, &ep, m, k, q, big_s), pin));
        let hc = harvest_bound_coeffs(&ep, m, k, &sc.eh, p.slot_duration_s);
        let truth = p.slot_duration_s * a0 * sc.eh.output_power(pin);
        prop_assert!(within(harvest_lower_bound(&hc, a0, sc.eh.u_of(pin)), truth));
    }

    #[test]
    fn compression_round_trips(
        runs in prop::collection::vec((point(50.0), 1usize..40), 0..8),
        max_blocks in 2usize..30,
    ) {
        let mut pts = vec![Point2::ORIGIN];
        for (p, n) in runs {
            pts.extend(std::iter::repeat_n(p, n));
        }
        pts.push(Point2::ORIGIN);
        let tr = Trajectory::compress(&pts, max_blocks);
        prop_assert_eq!(tr.horizon(), pts.len());
        prop_assert_eq!(tr.expand(), pts.clone());
        prop_assert_eq!(tr.weights()[0], 1);
        prop_assert_eq!(*tr.weights().last().unwrap(), 1);
        if pts.len() <= max_blocks {
            prop_assert!(tr.is_per_slot());
        }
    }

    #[test]
    fn repair_yields_feasible_rows(
        gts in prop::collection::vec(point(100.0), 1..4),
        raw in prop::collection::vec(prop::collection::vec(-0.2..1.2f64, 4), 6),
    ) {
        let sc = scenario(&gts, 5000.0);
        let traj = Trajectory::from_slots(initial_trajectory(&sc, 6 + 10 * gts.len(), 1).unwrap());
        let gp = build_gsp(&traj, &sc).unwrap();
        let mut sched = Schedule::zeros(gp.num_blocks(), gts.len());
        for k in 0..gp.num_blocks() {
            sched.row_mut(k).copy_from_slice(&raw[k % raw.len()][..=gts.len()]);
        }
        repair(&gp, &mut sched);
        for row in sched.rows() {
            prop_assert!(row.iter().all(|&a| (0.0..=1.0).contains(&a)));
            prop_assert!(row.iter().sum::<f64>() <= 1.0);
        }
        prop_assert!(gp.min_stored_energy(&sched) >= -1e-12);
    }

    #[test]
    fn float_text_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = fmt_f64(v);
        prop_assert_eq!(s.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn ranges_are_inclusive(a in -50i64..50, len in 0i64..20) {
        let v = parse_values(&format!("{a}..{}", a + len)).unwrap();
        prop_assert_eq!(v.len() as i64, len + 1);
        prop_assert_eq!(v[0], a as f64);
        prop_assert_eq!(*v.last().unwrap(), (a + len) as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The LP schedule on any speed-feasible tour replays without an
    /// energy violation and delivers what the LP claims.
    #[test]
    fn schedule_replays_as_claimed(
        gts in prop::collection::vec(point(100.0), 1..4),
        extra in 0usize..10,
        seed in 0u64..50,
    ) {
        let sc = scenario(&gts, 8000.0);
        let init = match initial_trajectory(&sc, 2 + 8 * gts.len() + extra, seed) {
            Ok(q) => q,
            Err(_) => return Ok(()),
        };
        let traj = Trajectory::compress(&init, 40);
        let gp = build_gsp(&traj, &sc).unwrap();
        let sol = solve_gsp(&gp, 1e-9).unwrap();
        let plan = Plan::from_blocks(&traj, &sol.schedule).unwrap();
        let rep = simulate_plan(&sc, &plan).unwrap();
        prop_assert!(rep.min_remaining_j >= -1e-9, "{}", rep.min_remaining_j);
        for m in 0..gts.len() {
            let claimed = gp.delivered(&sol.schedule, m);
            prop_assert!((rep.delivered_bits[m] - claimed).abs() <= 1e-6 * claimed.max(1.0));
        }
    }
}
