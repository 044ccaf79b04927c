// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{binomial_pmf, birth_death_matrix, histogram, mean, stationary, total_variation};
use dml_core::circuits::{
    and_gate, build_value_circuit, inverter, vc_read_rate, vc_reinforce, vc_reinforce_random, Reinforcement,
    ValueCircuitConfig, ValueCircuitHandle,
};
use dml_core::graph::Part;
use dml_core::kernel::{Network, Schedule, Stimulus};
use dml_core::seed::{stream_rng, Stream};
use rand::Rng;

fn vc(theta: u32, delta_q: u32, initial: u32) -> (Network, ValueCircuitHandle) {
    build_value_circuit(&ValueCircuitConfig { theta, delta_q, initial: Some(initial) }).unwrap()
}

/// Charge after each of `n` Bernoulli(`r`) signals at random phases.
fn drive(net: &mut Network, h: &ValueCircuitHandle, r: f64, n: usize, rng: &mut impl Rng) -> Vec<u32> {
    (0..n)
        .map(|_| {
            let s = if rng.gen_bool(r) { Reinforcement::Reward } else { Reinforcement::Punish };
            vc_reinforce_random(net, h, s, rng).unwrap();
            h.charge(net)
        })
        .collect()
}

#[test]
fn oracle_solver_agrees_with_closed_form() {
    // unit steps make the chain detailed-balanced with a binomial solution
    for r in [0.1, 0.5, 0.7, 0.9] {
        let pi = stationary(&birth_death_matrix(64, 1, r));
        assert!(total_variation(&pi, &binomial_pmf(64, r)) < 1e-9, "r = {r}");
        let m: f64 = pi.iter().enumerate().map(|(q, p)| q as f64 * p).sum();
        assert!((m / 64.0 - r).abs() < 1e-9);
    }
    let pi = stationary(&birth_death_matrix(64, 4, 0.3));
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn bernoulli_stream_tracks_reward_fraction() {
    let (mut net, h) = vc(64, 1, 32);
    let mut rng = stream_rng(11, Stream::Environment);
    let q = drive(&mut net, &h, 0.7, 2000, &mut rng);
    let rates: Vec<f64> = q[1500..].iter().map(|&x| x as f64 / 64.0).collect();
    assert!((mean(&rates) - 0.7).abs() <= 0.05, "{}", mean(&rates));
}

#[test]
fn empirical_charge_distribution_matches_chain() {
    let (mut net, h) = vc(64, 1, 32);
    let mut rng = stream_rng(12, Stream::Environment);
    let q = drive(&mut net, &h, 0.7, 200_000, &mut rng);
    let emp = histogram(&q[1000..], 65);
    let tv = total_variation(&emp, &stationary(&birth_death_matrix(64, 1, 0.7)));
    assert!(tv <= 0.05, "tv = {tv}");
}

#[test]
fn pure_streams_saturate() {
    let (mut net, h) = vc(64, 1, 32);
    let mut rng = stream_rng(3, Stream::Agent);
    drive(&mut net, &h, 1.0, 600, &mut rng);
    assert_eq!(h.charge(&net), 64);
    assert_eq!(vc_read_rate(&mut net, &h, 64).unwrap(), 1.0);
    drive(&mut net, &h, 0.0, 800, &mut rng);
    assert_eq!(h.charge(&net), 0);
    assert_eq!(vc_read_rate(&mut net, &h, 64).unwrap(), 0.0);
}

#[test]
fn gate_blocks_at_the_bounds() {
    let (mut net, h) = vc(64, 1, 64);
    for phase in 0..64 {
        vc_reinforce(&mut net, &h, Reinforcement::Reward, phase).unwrap();
        assert_eq!(h.charge(&net), 64);
    }
    let (mut net, h) = vc(64, 1, 0);
    for phase in 0..64 {
        vc_reinforce(&mut net, &h, Reinforcement::Punish, phase).unwrap();
        assert_eq!(h.charge(&net), 0);
    }
}

#[test]
fn reward_passes_with_probability_one_minus_rate() {
    let (mut net, h) = vc(64, 1, 16);
    let mut rng = stream_rng(5, Stream::Agent);
    let trials = 10_000;
    let mut up = 0;
    for _ in 0..trials {
        net.set_memory_charge(h.memory, 16).unwrap();
        vc_reinforce_random(&mut net, &h, Reinforcement::Reward, &mut rng).unwrap();
        match h.charge(&net) {
            17 => up += 1,
            16 => {}
            other => panic!("charge jumped to {other}"),
        }
    }
    let p = up as f64 / trials as f64;
    assert!((p - 0.75).abs() <= 0.03, "p = {p}");
}

#[test]
fn every_phase_counts_once_per_period() {
    // across all θ phases, exactly θ - q rewards land
    for q in [0, 5, 16, 32, 48, 63, 64] {
        let mut ups = 0;
        for phase in 0..64 {
            let (mut net, h) = vc(64, 1, q);
            vc_reinforce(&mut net, &h, Reinforcement::Reward, phase).unwrap();
            ups += h.charge(&net) - q;
        }
        assert_eq!(ups, 64 - q, "q = {q}");
    }
}

#[test]
fn drift_vanishes_only_at_the_target() {
    let dq = 1.0;
    let drift = |rhat: f64, r: f64| dq * ((1.0 - rhat) * r - rhat * (1.0 - r));
    for k in 0..=20 {
        let r = k as f64 / 20.0;
        assert!(drift(r, r).abs() < 1e-12);
        for j in 0..=20 {
            let rhat = j as f64 / 20.0;
            assert!((drift(rhat, r) - dq * (r - rhat)).abs() < 1e-12);
        }
    }

    let mut rng = stream_rng(21, Stream::Agent);
    for r in [0.3f64, 0.5, 0.7] {
        for (offset, sign) in [(-0.2, 1.0), (0.2, -1.0)] {
            let q0 = ((r + offset) * 64.0).round() as u32;
            let (mut net, h) = vc(64, 1, q0);
            let mut total = 0i64;
            for _ in 0..4000 {
                net.set_memory_charge(h.memory, q0).unwrap();
                let s = if rng.gen_bool(r) { Reinforcement::Reward } else { Reinforcement::Punish };
                vc_reinforce_random(&mut net, &h, s, &mut rng).unwrap();
                total += h.charge(&net) as i64 - q0 as i64;
            }
            let observed = total as f64 / 4000.0;
            assert!(observed * sign > 0.0, "r = {r}, q0 = {q0}, drift {observed}");
            assert!((observed - drift(q0 as f64 / 64.0, r)).abs() < 0.05, "r = {r}, q0 = {q0}, drift {observed}");
        }
    }
}

#[test]
fn memory_window_grows_with_theta_over_delta_q() {
    // signals needed to move from 0.2 to above 0.5 after the reward rate jumps to 0.8
    let mut means = Vec::new();
    for (theta, dq) in [(64, 4), (64, 1), (256, 1)] {
        let mut lags = Vec::new();
        for seed in 0..20 {
            let (mut net, h) = vc(theta, dq, theta / 5);
            let mut rng = stream_rng(seed, Stream::Environment);
            let mut n = 0u32;
            while h.rate(&net) <= 0.5 {
                let s = if rng.gen_bool(0.8) { Reinforcement::Reward } else { Reinforcement::Punish };
                vc_reinforce_random(&mut net, &h, s, &mut rng).unwrap();
                n += 1;
            }
            lags.push(n as f64);
        }
        means.push(mean(&lags));
    }
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn read_rate_quantization() {
    let (mut net, h) = vc(64, 1, 48);
    assert_eq!(vc_read_rate(&mut net, &h, 64).unwrap(), 0.75);
    for _ in 0..16 {
        let r = vc_read_rate(&mut net, &h, 8).unwrap();
        assert!((r - 0.75).abs() <= 0.125, "{r}");
    }
    // θ / gcd(q, θ) = 4 for q = 48
    assert_eq!(vc_read_rate(&mut net, &h, 4).unwrap(), 0.75);
    assert!(vc_read_rate(&mut net, &h, 0).is_err());
    assert_eq!(h.charge(&net), 48);
}

#[test]
fn truth_tables_are_exhaustive() {
    for n in 2..=4 {
        let (g, frag) = and_gate(n).unwrap();
        let netlist = g.compile().unwrap();
        let lines: Vec<usize> = frag.inputs.iter().map(|&p| netlist.index(p, &[0], Part::Main).unwrap()).collect();
        let out = netlist.index(frag.output, &[0], Part::Main).unwrap();
        let mut net = netlist.instantiate().unwrap();
        let mut schedule = Schedule::new();
        for mask in 0..1usize << n {
            let on: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| lines[b]).collect();
            schedule.insert(2 * mask, Stimulus::inputs(on));
        }
        let train = net.run_window(2 << n, &schedule).unwrap().train(out);
        for mask in 0..1usize << n {
            assert_eq!(train[2 * mask + 1], mask == (1 << n) - 1, "n = {n}, inputs {mask:b}");
            assert!(!train[2 * mask]);
        }
    }

    let (g, frag) = inverter().unwrap();
    let netlist = g.compile().unwrap();
    let line = netlist.index(frag.inputs[0], &[0], Part::Main).unwrap();
    let out = netlist.index(frag.output, &[0], Part::Main).unwrap();
    let mut net = netlist.instantiate().unwrap();
    let pattern = [true, false, false, true, true, false, true, false];
    let schedule: Schedule = pattern.iter().enumerate().filter(|(_, &b)| b).map(|(t, _)| (t, Stimulus::inputs([line]))).collect();
    let train = net.run_window(pattern.len() + 1, &schedule).unwrap().train(out);
    for (t, &b) in pattern.iter().enumerate() {
        assert_eq!(train[t + 1], !b, "step {t}");
    }
}
