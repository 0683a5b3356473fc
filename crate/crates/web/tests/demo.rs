use std::f64::consts::PI;

use teleop_oracles::{dft_power, keypad_freqs, pid_first_order_error, wheel_speed};
use teleop_web::{analyse_tone, pid_step_response, Sandbox};

#[test]
fn clean_tone_peaks_at_its_keypad_pair() {
    for key in "0123456789*#ABCD".chars() {
        let a = analyse_tone(key, 0.0, 1).unwrap();
        assert_eq!(a.decoded, key.to_string());
        let (lo, hi) = keypad_freqs(key).unwrap();
        let argmax = |r: std::ops::Range<usize>| r.max_by(|&i, &j| a.powers[i].total_cmp(&a.powers[j])).unwrap();
        assert_eq!(a.freqs[argmax(0..4)], lo, "{key}");
        assert_eq!(a.freqs[argmax(4..8)], hi, "{key}");

        let frame: Vec<f64> = (0..205)
            .map(|n| {
                let t = n as f64 / 8000.0;
                0.4 * ((2.0 * PI * lo * t).sin() + (2.0 * PI * hi * t).sin())
            })
            .collect();
        for f in [lo, hi] {
            let i = a.freqs.iter().position(|&x| x == f).unwrap();
            let d = dft_power(&frame, 8000.0, f);
            assert!(
                (a.powers[i] - d).abs() <= 0.02 * d,
                "{key} at {f}: {} vs {d}",
                a.powers[i]
            );
        }
    }
}

#[test]
fn moderate_noise_still_decodes() {
    for seed in 0..20 {
        assert_eq!(analyse_tone('7', 0.1, seed).unwrap().decoded, "7");
    }
}

#[test]
fn tone_arguments_are_checked() {
    assert!(analyse_tone('x', 0.0, 0).is_err());
    assert!(analyse_tone('1', 0.5, 0).is_err());
    assert!(analyse_tone('1', -0.1, 0).is_err());
}

#[test]
fn step_response_follows_continuous_oracle() {
    let (kp, ki, kd, tau) = (0.5, 5.0, 0.0, 0.5);
    let y = pid_step_response(kp, ki, kd, tau, 3.0, 0.001).unwrap();
    assert_eq!(y.len(), 3000);
    for (t, e) in pid_first_order_error(kp, ki, kd, tau, 3.0, 1e-4, 0.1)
        .into_iter()
        .skip(1)
    {
        let k = (t / 0.001).round() as usize - 1;
        assert!(((1.0 - y[k]) - e).abs() < 0.01, "t {t}");
    }
    assert!((1.0 - y[2999]).abs() < 0.02);
    assert!(pid_step_response(kp, ki, kd, 0.0, 3.0, 0.01).is_err());
    assert!(pid_step_response(kp, ki, kd, tau, 3.0, 0.0).is_err());
}

const MAP: &str = "map:\n##############\n#S...........#\n#............#\n##############\n";

#[test]
fn sandbox_drives_forward_on_a_key_press() {
    let mut sb = Sandbox::new(MAP).unwrap();
    assert_eq!(sb.map().rows.len(), 4);
    let x0 = sb.step().unwrap().true_pose.x;
    sb.press('2').unwrap();
    let mut last = 0.0;
    for _ in 0..10 {
        last = sb.step().unwrap().true_pose.x;
    }
    let expected = 10.0 * wheel_speed(160.0, 0.0325) * 0.05;
    assert!(((last - x0) - expected).abs() <= 0.01 * expected, "{}", last - x0);
    assert!(!sb.fallen());
    assert!(sb.press('x').is_err());
}

#[test]
fn sandbox_reports_scenario_errors() {
    let err = Sandbox::new("tick_ms = fast\nmap:\n#S#\n").err().unwrap();
    assert!(err.contains("tick_ms"), "{err}");
}
