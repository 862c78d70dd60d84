use lanealloc::scenario::{
    emit_scenario, load_scenario, BaseStation, CarrierPlan, Lane, NoiseModel, Point, Scenario, TimeGrid, User,
    Waypoint,
};
use proptest::prelude::*;

fn lane_strategy(duration: f64) -> impl Strategy<Value = Lane> {
    (2usize..6)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(1.0f64..100.0, n - 1),
                prop::collection::vec((-5e4f64..5e4, 1e3f64..6e4), n),
            )
        })
        .prop_map(move |(gaps, pts)| {
            let total: f64 = gaps.iter().sum();
            let mut t = 0.0;
            let mut wps = vec![Waypoint {
                t,
                position: Point::new(pts[0].0, pts[0].1),
            }];
            for (g, p) in gaps.iter().zip(&pts[1..]) {
                t += g / total * duration;
                wps.push(Waypoint {
                    t,
                    position: Point::new(p.0, p.1),
                });
            }
            wps.last_mut().unwrap().t = duration;
            Lane::new(wps).unwrap()
        })
}

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (1usize..4, 1usize..5, 1usize..8, 1.0f64..50.0).prop_flat_map(|(bss, users, slots, slot_len)| {
        let duration = slots as f64 * slot_len;
        (
            prop::collection::vec((-3e4f64..3e4, 10.0f64..200.0, 1usize..33, 1.0f64..80.0), bss),
            prop::collection::vec((lane_strategy(duration), 1.0f64..30.0, 0.0f64..1e9), users),
            Just(slots),
            Just(slot_len),
            1usize..20,
        )
            .prop_map(|(bs, us, slots, slot_len, n)| {
                let carrier = CarrierPlan::new(1.9e9, 2e6 * n as f64, n).unwrap();
                let noise = NoiseModel::new(-174.0, carrier.subcarrier_bandwidth).unwrap();
                let base_stations = bs
                    .into_iter()
                    .enumerate()
                    .map(|(id, (x, h, l, p))| BaseStation {
                        id,
                        position: Point::new(x, 0.0),
                        antenna_height: h,
                        antenna_count: l,
                        max_power: p,
                    })
                    .collect();
                let users = us
                    .into_iter()
                    .enumerate()
                    .map(|(id, (lane, h, c))| User {
                        id,
                        lane,
                        antenna_height: h,
                        demand: c,
                    })
                    .collect();
                Scenario::new(carrier, TimeGrid::new(slots, slot_len).unwrap(), noise, base_stations, users).unwrap()
            })
    })
}

fn translated(s: &Scenario, dx: f64, dy: f64) -> Scenario {
    let mut out = s.clone();
    for bs in &mut out.base_stations {
        bs.position = Point::new(bs.position.x + dx, bs.position.y + dy);
    }
    for u in &mut out.users {
        let wps = u
            .lane
            .waypoints()
            .iter()
            .map(|w| Waypoint {
                t: w.t,
                position: Point::new(w.position.x + dx, w.position.y + dy),
            })
            .collect();
        u.lane = Lane::new(wps).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positions_are_lipschitz(lane in lane_strategy(1000.0), t in 0.0f64..999.0, eps in 1e-3f64..1.0) {
        let a = lane.position_at(t).unwrap();
        let b = lane.position_at(t + eps).unwrap();
        prop_assert!(a.distance(b) <= lane.max_speed() * eps * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn slot_distance_ignores_translation(s in scenario_strategy(), dx in -1e5f64..1e5, dy in -1e5f64..1e5) {
        let moved = translated(&s, dx, dy);
        let (nk, nm, nj, _) = s.dims();
        for k in 0..nk {
            for m in 0..nm {
                for j in 0..nj {
                    let a = s.slot_distance(k, m, j).unwrap();
                    let b = moved.slot_distance(k, m, j).unwrap();
                    prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0) + 1e-6, "{} {}", a, b);
                }
            }
        }
    }

    #[test]
    fn emit_load_round_trips(s in scenario_strategy()) {
        let back = load_scenario(&emit_scenario(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}
