//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the report is printed even
//! under `cargo test` without `--nocapture`.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use teleop_core::controller::CommandKind;
use teleop_core::dtmf::{
    decode_stream, detect_digit, encode_digit, goertzel_power, DetectorConfig, KeypadSymbol, ToneFrame, COL_FREQS,
    ROW_FREQS,
};
use teleop_core::pid::{PidGains, PidState};
use teleop_core::progmem::workload::{replay, zipf_trace};
use teleop_core::progmem::{
    EvictionPolicy, Lookup, MemoryEvent, MemoryEventKind, ProgressiveStore, Provenance, StoreConfig,
};
use teleop_core::scenario::Scenario;
use teleop_core::sirc::{decode_pulses, encode_frame, Pulse, PulseTrain, SircFrame, DEFAULT_TOLERANCE};
use teleop_oracles::memory::{self, Model, Outcome};
use teleop_oracles::{dft_power, first_order_zoh, keypad_freqs, sirc_marks, wheel_speed};
use teleop_service::headless::{run_script, RunOptions};
use teleop_service::script::Script;

const FS: u32 = 8000;
const KEYS: &str = "0123456789*#ABCD";

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tone(parts: &[(f64, f64, f64)], len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let t = n as f64 / FS as f64;
            parts.iter().map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum()
        })
        .collect()
}

fn scenario(name: &str) -> Scenario {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    Scenario::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn script_file(name: &str) -> Script {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    Script::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dtmf_round_trip() -> Check {
    let config = DetectorConfig::default();
    let mut n = 0;
    for sym in KeypadSymbol::all() {
        for ms in [50, 100, 200] {
            let samples = encode_digit(sym, ms, FS, 0.4)
                .map_err(|e| e.to_string())?
                .into_samples();
            let events = decode_stream(&samples, FS, &config).map_err(|e| e.to_string())?;
            let got: String = events.iter().map(|e| e.symbol.as_char()).collect();
            ensure(got == sym.as_char().to_string(), || {
                format!("{} at {ms} ms decoded as {got:?}", sym.as_char())
            })?;
            n += 1;
        }
    }
    Ok(format!("{n}/{n} single-event decodes"))
}

fn dtmf_noise() -> Check {
    let config = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    // each of the two tones has amplitude 0.4, so signal power is 0.16
    let sigma = (0.16f64 / 100.0).sqrt();
    let noise = Normal::new(0.0, sigma).unwrap();
    let (mut correct, mut total) = (0usize, 0usize);
    let mut worst = (2.0f64, ' ');
    for c in KEYS.chars() {
        let (lo, hi) = keypad_freqs(c).unwrap();
        let mut ok = 0;
        for _ in 0..1000 {
            let (p1, p2) = (rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI);
            let x: Vec<f64> = tone(&[(lo, 0.4, p1), (hi, 0.4, p2)], 205)
                .into_iter()
                .map(|s| s + noise.sample(&mut rng))
                .collect();
            let frame = ToneFrame::new(x, FS).map_err(|e| e.to_string())?;
            if let Some((sym, _)) = detect_digit(&frame, &config).map_err(|e| e.to_string())? {
                if sym.as_char() == c {
                    ok += 1;
                }
            }
        }
        let rate = ok as f64 / 1000.0;
        if rate < worst.0 {
            worst = (rate, c);
        }
        correct += ok;
        total += 1000;
    }
    ensure(worst.0 >= 0.99, || {
        format!("symbol {} detected {:.1}%", worst.1, 100.0 * worst.0)
    })?;

    // noise alone: white noise at peak 0.1 and at the 20 dB noise level
    let mut false_hits = 0;
    for i in 0..2000 {
        let x: Vec<f64> = if i < 1000 {
            (0..205).map(|_| rng.random_range(-0.1..0.1)).collect()
        } else {
            (0..205).map(|_| noise.sample(&mut rng)).collect()
        };
        let frame = ToneFrame::new(x, FS).map_err(|e| e.to_string())?;
        if detect_digit(&frame, &config).map_err(|e| e.to_string())?.is_some() {
            false_hits += 1;
        }
    }
    ensure(false_hits == 0, || {
        format!("{false_hits} detections on 2000 noise-only frames")
    })?;
    let stream: Vec<f64> = (0..10 * FS).map(|_| rng.random_range(-0.1..0.1)).collect();
    let events = decode_stream(&stream, FS, &config).map_err(|e| e.to_string())?;
    ensure(events.is_empty(), || {
        format!("{} events from 10 s of noise", events.len())
    })?;
    Ok(format!(
        "{correct}/{total} correct, worst symbol {} at {:.1}%, 0/2000 noise-only frames, 0 events in 10 s of noise",
        worst.1,
        100.0 * worst.0
    ))
}

fn goertzel_vs_dft() -> Check {
    let all: Vec<f64> = ROW_FREQS.iter().chain(COL_FREQS.iter()).copied().collect();
    let mut worst: f64 = 0.0;
    for &f0 in &all {
        for len in [205usize, 256, 400] {
            let x = tone(&[(f0, 0.3, 0.7)], len);
            let frame = ToneFrame::new(x.clone(), FS).map_err(|e| e.to_string())?;
            let g = goertzel_power(&frame, f0).map_err(|e| e.to_string())?;
            let d = dft_power(&x, FS as f64, f0);
            let rel = (g - d).abs() / d;
            worst = worst.max(rel);
            ensure(rel <= 0.02, || format!("{f0} Hz over {len} samples: {g} vs {d}"))?;
        }
    }
    Ok(format!("worst relative difference {:.2e}", worst))
}

fn sirc() -> Check {
    let frames: Vec<SircFrame> = (0u8..128)
        .flat_map(|c| (0u8..32).map(move |a| SircFrame::new(c, a).unwrap()))
        .collect();
    for &f in &frames {
        let train = encode_frame(f);
        let marks: Vec<u32> = train.0.iter().map(|p| p.mark_us).collect();
        ensure(marks == sirc_marks(f.command(), f.address()), || {
            format!("{f:?} mark layout")
        })?;
        ensure(decode_pulses(&train, DEFAULT_TOLERANCE) == Ok(f), || {
            format!("{f:?} round trip")
        })?;
    }
    let mut jittered = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let f = frames[rng.random_range(0..frames.len())];
            let train = PulseTrain(
                encode_frame(f)
                    .0
                    .iter()
                    .map(|p| Pulse {
                        mark_us: (p.mark_us as f64 * rng.random_range(0.9..=1.1)).round() as u32,
                        space_us: (p.space_us as f64 * rng.random_range(0.9..=1.1)).round() as u32,
                    })
                    .collect(),
            );
            ensure(decode_pulses(&train, DEFAULT_TOLERANCE) == Ok(f), || {
                format!("seed {seed}: {f:?}")
            })?;
            jittered += 1;
        }
    }
    Ok(format!("{} exact and {jittered} jittered frames decoded", frames.len()))
}

fn pid() -> Check {
    const TAU: f64 = 0.5;
    let g = PidGains::default();
    let mut settle = Vec::new();
    for dt in [0.001f64, 0.01, 0.05] {
        let mut state = PidState::default();
        let mut y = 0.0;
        let mut last_outside = 0.0;
        let steps = (3.0 / dt).round() as usize;
        for k in 1..=steps {
            let u = state.step(&g, 1.0, y, dt).map_err(|e| e.to_string())?;
            y = first_order_zoh(y, u, TAU, dt);
            if (1.0 - y).abs() >= 0.02 {
                last_outside = k as f64 * dt;
            }
        }
        ensure(last_outside < 3.0 - dt / 2.0 && (1.0 - y).abs() < 0.02, || {
            format!("dt {dt}: outside the 0.02 band until {last_outside} s")
        })?;
        settle.push(format!("{last_outside:.2}s@dt={dt}"));
    }

    let gains = (0.0f64..5.0, 0.0f64..10.0, 0.0f64..1.0, 0.1f64..200.0, 0.0f64..200.0).prop_map(
        |(kp, ki, kd, span, integral_limit)| PidGains {
            kp,
            ki,
            kd,
            output_min: -span,
            output_max: span,
            integral_limit,
        },
    );
    let inputs = proptest::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 1..60);
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 512,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    runner
        .run(&(gains, inputs, 0.001f64..0.2), |(g, inputs, dt)| {
            let mut s = PidState::default();
            for (sp, m) in inputs {
                let before = s;
                let u = s.step(&g, sp, m, dt).unwrap();
                prop_assert!(u >= g.output_min && u <= g.output_max);
                prop_assert!(s.integral.abs() <= g.integral_bound() + 1e-12);
                let e = sp - m;
                let d = if before.initialized {
                    (e - before.prev_error) / dt
                } else {
                    0.0
                };
                let raw = g.kp * e + g.ki * s.integral + g.kd * d;
                if e > 0.0 && s.integral > before.integral {
                    prop_assert!(raw <= g.output_max + 1e-9);
                }
                if e < 0.0 && s.integral < before.integral {
                    prop_assert!(raw >= g.output_min - 1e-9);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "settled by {}; clamp and anti-windup held over 512 cases",
        settle.join(", ")
    ))
}

fn memory_events(evs: &[MemoryEvent]) -> Vec<memory::Event> {
    evs.iter()
        .map(|e| {
            let kind = match e.kind {
                MemoryEventKind::Offloaded => "Offloaded",
                MemoryEventKind::Fetched => "Fetched",
                MemoryEventKind::ServerDeleted => "ServerDeleted",
                MemoryEventKind::Hit => "Hit",
                MemoryEventKind::Miss => "Miss",
            };
            (kind, e.key.clone(), e.tick)
        })
        .collect()
}

fn lookup(l: &Lookup) -> Outcome {
    match l {
        Lookup::Miss => Outcome::Miss,
        Lookup::Found { payload, provenance } => Outcome::Found(
            payload.clone(),
            match provenance {
                Provenance::Active => "Active",
                Provenance::InTransit => "InTransit",
                Provenance::FetchedFromServer => "FetchedFromServer",
            },
        ),
    }
}

fn progressive_memory() -> Check {
    let mut events = 0usize;
    for seed in 0..10u64 {
        let config = StoreConfig {
            active_capacity: 12 + (seed as usize % 5) * 4,
            server_capacity: 16,
            growth_step: if seed % 3 == 0 { 0 } else { 16 },
            server_hard_limit: 64,
            pin_duration: 1 + seed % 6,
            uplink_latency: seed % 4,
            uplink_failure_rate: if seed % 2 == 0 { 0.0 } else { 0.15 },
            seed,
            policy: if seed % 4 == 3 {
                EvictionPolicy::Fifo
            } else {
                EvictionPolicy::Progressive
            },
        };
        let mut store = ProgressiveStore::new(config).map_err(|e| e.to_string())?;
        let mut model = Model::new(memory::Config {
            active_capacity: config.active_capacity,
            server_capacity: config.server_capacity,
            growth_step: config.growth_step,
            server_hard_limit: config.server_hard_limit,
            pin_duration: config.pin_duration,
            uplink_latency: config.uplink_latency,
            uplink_failure_rate: config.uplink_failure_rate,
            seed,
            fifo: config.policy == EvictionPolicy::Fifo,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce);
        let mut now = 0u64;
        for op in 0..10_000 {
            let roll: f64 = rng.random();
            let key = format!("k{}", (rng.random::<f64>().powi(3) * 150.0) as u32);
            let (a, b) = if roll < 0.15 {
                now += rng.random_range(1..3);
                (store.tick(now).map(|e| memory_events(&e)).ok(), model.tick(now).ok())
            } else if roll < 0.45 {
                let payload = op.to_string().into_bytes();
                (
                    store.put(&key, payload.clone(), now).map(|e| memory_events(&e)).ok(),
                    model.put(&key, &payload, now).ok(),
                )
            } else {
                let a = store.get(&key, now).ok().map(|(l, e)| (lookup(&l), memory_events(&e)));
                let b = model.get(&key, now).ok();
                ensure(a.as_ref().map(|x| &x.0) == b.as_ref().map(|x| &x.0), || {
                    format!("seed {seed} op {op}: lookup")
                })?;
                (a.map(|x| x.1), b.map(|x| x.1))
            };
            ensure(a == b, || format!("seed {seed} op {op}: events {a:?} vs {b:?}"))?;
            events += a.map_or(0, |e| e.len());
            let occupancy = store.stats().active_count;
            ensure(occupancy <= config.active_capacity, || {
                format!("seed {seed} op {op}: {occupancy} active")
            })?;
        }
    }

    let trace = zipf_trace(1000, 1.0, 20_000, 7);
    let base = StoreConfig {
        active_capacity: 64,
        uplink_latency: 0,
        ..StoreConfig::default()
    };
    let progressive = replay(&trace, base).map_err(|e| e.to_string())?;
    let fifo = replay(
        &trace,
        StoreConfig {
            policy: EvictionPolicy::Fifo,
            ..base
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(progressive.hit_rate > fifo.hit_rate, || {
        format!("progressive {} not above fifo {}", progressive.hit_rate, fifo.hit_rate)
    })?;
    Ok(format!(
        "{events} events identical over 10 x 10000 ops; zipf hit rate {:.3} vs fifo {:.3}",
        progressive.hit_rate, fifo.hit_rate
    ))
}

fn safety() -> Check {
    let s = scenario("pit_corridor.scn");
    let out = run_script(&s, &script_file("pit.script"), &RunOptions::default()).map_err(|e| e.to_string())?;
    // a record's readings are the ones its command was chosen from
    let k = out
        .records
        .iter()
        .position(|r| r.controller.readings.pit_ahead)
        .ok_or("pit never sensed")?;
    let r = &out.records[k];
    ensure(
        r.controller.actuation.left_rpm == 0.0 && r.controller.actuation.right_rpm == 0.0,
        || format!("tick {k} after pit_ahead drives {:?}", r.controller.actuation),
    )?;
    ensure(
        !out.fallen
            && out.records[k..]
                .iter()
                .all(|r| r.controller.safety == teleop_core::controller::SafetyState::HaltedAwaitingInstruction),
        || "halt did not hold".into(),
    )?;

    let s = scenario("obstacle.scn");
    let out = run_script(&s, &script_file("obstacle.script"), &RunOptions::default()).map_err(|e| e.to_string())?;
    let j = out
        .records
        .iter()
        .position(|r| r.controller.readings.min_proximity() < s.controller.stop_distance)
        .ok_or("obstacle never sensed")?;
    let reversed = out.records[j..(j + 2).min(out.records.len())]
        .iter()
        .position(|r| r.controller.actuation.left_rpm < 0.0 && r.controller.actuation.right_rpm < 0.0)
        .ok_or_else(|| format!("no backward actuation within a tick of tick {j}"))?;
    Ok(format!(
        "pit: zero drive at tick {k}, halted; obstacle: backward {reversed} tick(s) after tick {j}"
    ))
}

fn track_follower() -> Check {
    let s = scenario("line_follow.scn");
    let golden = include_str!("../../../scenarios/line_follow.golden");
    let expected: Vec<&str> = golden.lines().collect();
    let out = run_script(
        &s,
        &Script::default(),
        &RunOptions {
            min_ticks: expected.len() as u64,
            ..RunOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(out.records.len() == expected.len(), || {
        format!("{} ticks for {} golden lines", out.records.len(), expected.len())
    })?;
    for (r, line) in out.records.iter().zip(&expected) {
        let kind = serde_json::to_value(r.controller.command.kind).unwrap();
        let got = format!("{} {}", r.controller.tick, kind.as_str().unwrap());
        ensure(got == *line, || format!("got {got:?}, golden {line:?}"))?;
    }
    Ok(format!("{} ticks match the golden transcript", expected.len()))
}

fn kinematics() -> Check {
    let s = scenario("empty.scn");
    let out = run_script(
        &s,
        &Script::parse("press 2 100; wait 60").unwrap(),
        &RunOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let k0 = out
        .records
        .iter()
        .position(|r| r.controller.command.kind == CommandKind::Forward)
        .ok_or("forward never issued")?;
    ensure(
        out.records[k0..k0 + 40]
            .iter()
            .all(|r| r.controller.command.kind == CommandKind::Forward),
        || "forward interrupted".into(),
    )?;
    let before = if k0 == 0 {
        s.start_pose()
    } else {
        out.records[k0 - 1].true_pose
    };
    let travelled = out.records[k0 + 39].true_pose.x - before.x;
    let expected = 40.0 * wheel_speed(160.0, s.geometry.wheel_radius) * s.dt();
    ensure((travelled - 40.0 * 0.0272).abs() <= 0.01 * 40.0 * 0.0272, || {
        format!("{travelled} m")
    })?;
    Ok(format!(
        "{travelled:.4} m in 40 ticks (40 x 0.0272 = 1.088, exact {expected:.4})"
    ))
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("teleop-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let script = dir.join("mixed.script");
    std::fs::write(
        &script,
        "press 2 200\nwait 30\npress 6 100; wait 10\nsirc 1 1\nwait 5\npress 5 60\nwait 20\n",
    )
    .map_err(|e| e.to_string())?;
    let mut transcripts = Vec::new();
    for i in 0..2 {
        let path = dir.join(format!("run{i}.ndjson"));
        let status = Command::new(env!("CARGO_BIN_EXE_teleop"))
            .args([
                "run",
                "--scenario",
                &format!("{}/../../scenarios/line_follow.scn", env!("CARGO_MANIFEST_DIR")),
            ])
            .arg("--script")
            .arg(&script)
            .arg("--transcript")
            .arg(&path)
            .args(["--ticks", "150"])
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.success(), || format!("run {i} exited with {status}"))?;
        transcripts.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(transcripts[0] == transcripts[1], || "transcripts differ".into())?;
    ensure(!transcripts[0].is_empty(), || "empty transcript".into())?;
    Ok(format!(
        "two separate processes wrote identical {}-byte transcripts",
        transcripts[0].len()
    ))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "dtmf round trip",
            budget: Some(Duration::from_secs(5)),
            check: dtmf_round_trip,
        },
        Criterion {
            name: "dtmf noise robustness",
            budget: Some(Duration::from_secs(60)),
            check: dtmf_noise,
        },
        Criterion {
            name: "goertzel vs dft",
            budget: None,
            check: goertzel_vs_dft,
        },
        Criterion {
            name: "sirc exhaustive and jitter",
            budget: Some(Duration::from_secs(10)),
            check: sirc,
        },
        Criterion {
            name: "pid",
            budget: None,
            check: pid,
        },
        Criterion {
            name: "progressive memory",
            budget: Some(Duration::from_secs(30)),
            check: progressive_memory,
        },
        Criterion {
            name: "safety",
            budget: None,
            check: safety,
        },
        Criterion {
            name: "track follower",
            budget: None,
            check: track_follower,
        },
        Criterion {
            name: "kinematics",
            budget: None,
            check: kinematics,
        },
        Criterion {
            name: "determinism",
            budget: None,
            check: determinism,
        },
    ];
    // keep assertion noise out of the report; failures are reported below
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match (result, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => {
                Err(format!("took {:.2}s, budget {}s", elapsed.as_secs_f64(), b.as_secs()))
            }
            (r, _) => r,
        };
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag}  {:<28} {:>7.2}s  {detail}", c.name, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
