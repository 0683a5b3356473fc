use proptest::prelude::*;
use teleop_core::scenario::Scenario;
use teleop_core::world::{normalize_angle, Actuation, Cell, Grabber, GrabberAction, Pose, DRIVE_MAX_RPM};
use teleop_oracles::wheel_speed;

const CORRIDOR: &str = "map:
####################
#S.................#
####################
";

fn full(rpm_l: f64, rpm_r: f64) -> Actuation {
    Actuation {
        left_rpm: rpm_l,
        right_rpm: rpm_r,
        ..Actuation::default()
    }
}

#[test]
fn forty_ticks_at_full_speed() {
    let s = Scenario::parse(CORRIDOR).unwrap();
    let mut w = s.world();
    let x0 = w.pose().x;
    for _ in 0..40 {
        w.step(&full(160.0, 160.0), 0.05).unwrap();
    }
    let expected = 40.0 * wheel_speed(160.0, 0.0325) * 0.05;
    assert!((expected - 40.0 * 0.0272).abs() < 0.01 * expected);
    let got = w.pose().x - x0;
    assert!((got - expected).abs() <= 0.01 * expected, "{got} vs {expected}");
    assert_eq!(w.pose().y, s.start_pose().y);
}

#[test]
fn ping_reads_obstacle_distance_within_half_a_cell() {
    // robot centre at x = 0.15, wall face at x = 0.5: 0.35 m
    let s = Scenario::parse("map:\n######\n#S...#\n######\n").unwrap();
    let w = s.world();
    let r = w.sense();
    assert!((r.ping - 0.35).abs() <= 0.05, "{}", r.ping);
    // and after moving so the wall is about 0.3 m away
    let mut w = s.world();
    w.body.pose.x = 0.2;
    let r = w.sense();
    assert!((r.ping - 0.3).abs() <= 0.05, "{}", r.ping);
}

#[test]
fn open_space_reads_max_range() {
    let mut text = String::from("map:\n");
    for row in 0..50 {
        let mut line = String::new();
        for col in 0..50 {
            line.push(if row == 25 && col == 2 { 'S' } else { '.' });
        }
        text.push_str(&line);
        text.push('\n');
    }
    let w = Scenario::parse(&text).unwrap().world();
    let r = w.sense();
    assert_eq!(r.proximity, [1.0; 3]);
    assert_eq!(r.ping, 2.0);
    assert!(!r.pit_ahead && !r.left_is_obstacle && !r.left_is_white);
}

#[test]
fn left_white_line_is_seen() {
    let w = Scenario::parse("map:\n#####\n#===#\n#.S.#\n#####\n").unwrap().world();
    assert!(w.sense().left_is_white);
}

#[test]
fn grabber_closes_on_near_beacon_only() {
    let s = Scenario::parse("map:\n#####\n#SB.#\n#####\n").unwrap();
    let mut w = s.world();
    assert_eq!(w.grabber_at(), Grabber::Open);
    let close = Actuation {
        grabber_action: GrabberAction::Close,
        ..Actuation::default()
    };
    // beacon face 0.05 m ahead of the robot centre
    w.step(&close, 0.05).unwrap();
    assert_eq!(w.grabber_at(), Grabber::Holding(1));

    let s = Scenario::parse("map:\n######\n#S..B#\n######\n").unwrap();
    let mut w = s.world();
    w.step(&close, 0.05).unwrap();
    assert_eq!(w.grabber_at(), Grabber::Closed);
}

fn random_map() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::sample::select(vec!['.', '.', '.', '.', '#', 'O', '=']), 64).prop_map(|cells| {
        let mut text = String::from("map:\n##########\n");
        for row in 0..8 {
            text.push('#');
            for col in 0..8 {
                text.push(if row == 4 && col == 4 {
                    'S'
                } else {
                    cells[row * 8 + col]
                });
            }
            text.push_str("#\n");
        }
        text.push_str("##########\n");
        text
    })
}

fn actuations() -> impl Strategy<Value = Vec<Actuation>> {
    proptest::collection::vec(
        (-DRIVE_MAX_RPM..=DRIVE_MAX_RPM, -DRIVE_MAX_RPM..=DRIVE_MAX_RPM).prop_map(|(l, r)| full(l, r)),
        1..120,
    )
}

/// Body-frame displacement of a step, measured in the frame of the pose it
/// started from.
fn body_step(before: Pose, after: Pose) -> (f64, f64) {
    let (dx, dy) = (after.x - before.x, after.y - before.y);
    let (s, c) = before.heading.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn motion_invariants(map in random_map(), acts in actuations(), heading in -180.0f64..180.0) {
        let mut s = Scenario::parse(&map).unwrap();
        s.start_heading_deg = heading;
        let mut w = s.world();
        let res = s.geometry.flow_resolution;
        let v_max = wheel_speed(DRIVE_MAX_RPM, s.geometry.wheel_radius);
        let (mut flow, mut path) = ((0i64, 0i64), (0.0, 0.0));
        for (k, a) in acts.iter().enumerate() {
            let before = w.clone();
            let r = w.step(a, 0.05).unwrap();
            let p = w.pose();
            prop_assert!(!w.grid.cell_at(p.x, p.y).blocks_motion());
            let moved = ((p.x - before.pose().x).powi(2) + (p.y - before.pose().y).powi(2)).sqrt();
            prop_assert!(moved <= v_max * 0.05 + 1e-12);
            if before.fallen {
                prop_assert_eq!(before.body.pose, w.body.pose);
                prop_assert!(w.fallen);
            }
            if w.fallen {
                prop_assert_eq!(w.grid.cell_at(p.x, p.y), Cell::Pit);
            }
            let b = body_step(before.pose(), p);
            flow.0 += r.optical_flow.0 as i64;
            flow.1 += r.optical_flow.1 as i64;
            path.0 += b.0;
            path.1 += b.1;
            let ticks = (k + 1) as f64;
            prop_assert!((flow.0 as f64 * res - path.0).abs() <= res * ticks);
            prop_assert!((flow.1 as f64 * res - path.1).abs() <= res * ticks);
            if !before.fallen {
                prop_assert_eq!(r.wheel_rpm, (a.left_rpm, a.right_rpm));
            }
        }
    }

    #[test]
    fn runs_are_deterministic(map in random_map(), acts in actuations()) {
        let s = Scenario::parse(&map).unwrap();
        let (mut a, mut b) = (s.world(), s.world());
        for act in &acts {
            let ra = a.step(act, 0.05).unwrap();
            let rb = b.step(act, 0.05).unwrap();
            prop_assert_eq!(ra, rb);
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn spin_in_place_keeps_position(rpm in 1.0f64..160.0, ticks in 1usize..50) {
        let s = Scenario::parse("map:\n#####\n#...#\n#.S.#\n#...#\n#####\n").unwrap();
        let mut w = s.world();
        let p0 = w.pose();
        for _ in 0..ticks {
            w.step(&full(-rpm, rpm), 0.05).unwrap();
        }
        let p = w.pose();
        prop_assert!((p.x - p0.x).abs() < 1e-12 && (p.y - p0.y).abs() < 1e-12);
        let omega = 2.0 * wheel_speed(rpm, 0.0325) / 0.15;
        let expected = normalize_angle(omega * 0.05 * ticks as f64);
        prop_assert!(normalize_angle(p.heading - expected).abs() < 1e-9);
    }
}
