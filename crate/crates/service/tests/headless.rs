use teleop_core::controller::{CommandKind, CommandSource, SafetyState};
use teleop_core::scenario::Scenario;
use teleop_core::sim::TickRecord;
use teleop_core::world::Cell;
use teleop_oracles::wheel_speed;
use teleop_service::headless::{run_script, RunOptions};
use teleop_service::script::Script;
use teleop_service::wire::{self, Body};

fn scenario(name: &str) -> Scenario {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    Scenario::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn script(text: &str) -> Script {
    Script::parse(text).unwrap()
}

fn ticks(n: u64) -> RunOptions {
    RunOptions {
        min_ticks: n,
        ..RunOptions::default()
    }
}

/// First tick whose command came from a decoded key press. A tone of
/// `tone_ms` followed by silence ends its detection run on the first frame
/// after the tone (or on the frame straddling its end); the sample that
/// completes that frame arrives during tick `sample / samples_per_tick`, and
/// the digit applies on the tick after.
fn first_command_tick(tone_ms: u32) -> u64 {
    let (fs, frame, per_tick) = (8000u64, 205u64, 400u64);
    let tone = fs * tone_ms as u64 / 1000;
    let straddling = tone / frame;
    let candidates = [straddling, straddling + 1].map(|f| ((f + 1) * frame - 1) / per_tick + 1);
    assert_eq!(candidates[0], candidates[1], "tone end too close to a tick boundary");
    candidates[0]
}

#[test]
fn press_forward_then_wait_passes_on_empty_map() {
    let s = scenario("empty.scn");
    let out = run_script(
        &s,
        &script("press 2 500; wait 40; expect pose.x > 0.3"),
        &RunOptions::default(),
    )
    .unwrap();
    assert!(out.passed(), "{:?}", out.failures);
    assert_eq!(out.digits.len(), 1);
    assert_eq!(out.digits[0].symbol.as_char(), '2');

    let k0 = first_command_tick(500);
    assert_eq!(k0, 11);
    for (k, r) in out.records.iter().enumerate() {
        let expected = if (k as u64) < k0 {
            CommandKind::Stop
        } else {
            CommandKind::Forward
        };
        assert_eq!(r.controller.command.kind, expected, "tick {k}");
    }
    let step = wheel_speed(160.0, s.geometry.wheel_radius) * s.dt();
    let travelled = out.records.last().unwrap().true_pose.x - s.start_pose().x;
    let expected = (40 - k0) as f64 * step;
    assert!(
        (travelled - expected).abs() <= 0.01 * expected,
        "{travelled} vs {expected}"
    );
}

#[test]
fn forty_tick_full_speed_run() {
    let s = scenario("empty.scn");
    let k0 = first_command_tick(100);
    let out = run_script(
        &s,
        &script(&format!("press 2 100; wait {}", k0 + 40)),
        &RunOptions::default(),
    )
    .unwrap();
    let before = if k0 == 0 {
        s.start_pose()
    } else {
        out.records[k0 as usize - 1].true_pose
    };
    let after = out.records.last().unwrap().true_pose;
    let expected = 40.0 * 0.0272;
    assert!(
        ((after.x - before.x) - expected).abs() <= 0.01 * expected,
        "{}",
        after.x - before.x
    );
    assert_eq!(after.y, before.y);
}

#[test]
fn pit_in_path_halts_before_the_pit_cell() {
    let s = scenario("pit_corridor.scn");
    let out = run_script(&s, &script("press 2 100; wait 80"), &RunOptions::default()).unwrap();
    assert!(out.passed() && !out.fallen);
    let pit_x = (0..s.grid.width() as i64)
        .find(|&ix| s.grid.cell(ix, s.start.1) == Cell::Pit)
        .unwrap();
    let halted = out
        .records
        .iter()
        .position(|r| r.controller.safety == SafetyState::HaltedAwaitingInstruction)
        .expect("robot halts");
    for r in &out.records[halted..] {
        assert_eq!(r.controller.safety, SafetyState::HaltedAwaitingInstruction);
        assert_eq!(
            (r.controller.actuation.left_rpm, r.controller.actuation.right_rpm),
            (0.0, 0.0)
        );
    }
    for r in &out.records {
        let (ix, _) = s.grid.index_of(r.true_pose.x, r.true_pose.y);
        assert!(ix < pit_x);
    }
}

#[test]
fn obstacle_ahead_forces_a_reversal() {
    let s = scenario("obstacle.scn");
    let out = run_script(&s, &script("press 2 100; wait 60"), &RunOptions::default()).unwrap();
    let first = out
        .records
        .iter()
        .position(|r| r.controller.readings.min_proximity() < s.controller.stop_distance)
        .expect("robot closes on the wall");
    let r = &out.records[first];
    assert_eq!(
        (r.controller.command.kind, r.controller.command.source),
        (CommandKind::Backward, CommandSource::Safety)
    );
}

#[test]
fn identical_inputs_give_identical_transcripts() {
    let s = scenario("line_follow.scn");
    let text = "press 2 200; wait 30; press 6 100; wait 10; sirc 1 1; wait 5; press 5 60; wait 20";
    let a = run_script(&s, &script(text), &ticks(120)).unwrap();
    let b = run_script(&s, &script(text), &ticks(120)).unwrap();
    assert_eq!(a.transcript.as_bytes(), b.transcript.as_bytes());
    assert_eq!(a.transcript.lines().count(), 120);
}

#[test]
fn empty_script_with_ten_ticks_gives_ten_lines() {
    let out = run_script(&scenario("empty.scn"), &Script::default(), &ticks(10)).unwrap();
    assert_eq!(out.transcript.lines().count(), 10);
    for (i, line) in out.transcript.lines().enumerate() {
        let msg = wire::decode(line).unwrap();
        assert_eq!(msg.seq, i as u64);
        let Body::Telemetry(rec) = msg.body else {
            panic!("{line}")
        };
        assert_eq!(rec.controller.tick, i as u64);
    }
}

#[test]
fn transcript_poses_match_world_ground_truth() {
    // replay the logged actuations through a fresh world
    let s = scenario("empty.scn");
    let out = run_script(
        &s,
        &script("press 2 150; wait 12; press 4 100; wait 9; press 8 100; wait 15"),
        &RunOptions::default(),
    )
    .unwrap();
    let records: Vec<TickRecord> = out
        .transcript
        .lines()
        .map(|l| match wire::decode(l).unwrap().body {
            Body::Telemetry(r) => *r,
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(records, out.records);
    let mut world = s.world();
    for r in &records {
        world.step(&r.controller.actuation, s.dt()).unwrap();
        assert_eq!(world.pose(), r.true_pose, "tick {}", r.controller.tick);
        assert_eq!(world.fallen, r.fallen);
    }
}

#[test]
fn track_follower_matches_golden_transcript() {
    let s = scenario("line_follow.scn");
    let golden = include_str!("../../../scenarios/line_follow.golden");
    let expected: Vec<(u64, &str)> = golden
        .lines()
        .map(|l| {
            let (t, k) = l.split_once(' ').unwrap();
            (t.parse().unwrap(), k)
        })
        .collect();
    let out = run_script(&s, &Script::default(), &ticks(expected.len() as u64)).unwrap();
    let got: Vec<(u64, String)> = out
        .records
        .iter()
        .map(|r| {
            assert_eq!(r.controller.command.source, CommandSource::Follower);
            let kind = serde_json::to_value(r.controller.command.kind).unwrap();
            (r.controller.tick, kind.as_str().unwrap().to_string())
        })
        .collect();
    for (g, e) in got.iter().zip(&expected) {
        assert_eq!((g.0, g.1.as_str()), *e);
    }
    assert_eq!(got.len(), expected.len());
}

#[test]
fn failed_expectations_are_reported_with_their_line() {
    let out = run_script(
        &scenario("empty.scn"),
        &script("expect pose.x > 0\nwait 2\nexpect pose.x > 5\nexpect safety == nominal"),
        &RunOptions::default(),
    )
    .unwrap();
    let lines: Vec<usize> = out.failures.iter().map(|f| f.line).collect();
    assert_eq!(lines, [1, 3]);
    assert!(out.failures[0].actual.is_none());
    assert_eq!(out.expectations, 3);
}

#[test]
fn unknown_field_is_a_script_error() {
    let err = run_script(
        &scenario("empty.scn"),
        &script("wait 1\nexpect pose.w > 0"),
        &RunOptions::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn fallen_robot_ends_the_run() {
    // the pit sensor only looks ahead, so backing up finds the pit
    let s = Scenario::parse("map:\n#######\n#.OS..#\n#######\n").unwrap();
    let out = run_script(&s, &script("press 8 100; wait 100"), &RunOptions::default()).unwrap();
    assert!(out.fallen);
    assert!(out.records.len() < 100);
    assert!(out.records.last().unwrap().fallen);
}
