// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Extra arguments filter criteria by name.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use common::{binomial_pmf, birth_death_matrix, check_golden, histogram, mean, stationary, total_variation};
use dml_core::agent::{agent_graph, Policy};
use dml_core::baseline::{maze_policy_failures, maze_value_iteration, mc_control};
use dml_core::circuits::{and_gate, build_value_circuit, inverter, vc_reinforce_random, Reinforcement, ValueCircuitConfig};
use dml_core::env::{Blackjack, BlackjackState, HIT, STICK};
use dml_core::graph::Part;
use dml_core::harness::{execute, run, sweep, write_output, Backend, ExperimentConfig, RunManifest, SweepParam, SweepSpec, Task};
use dml_core::kernel::{CompartmentSpec, Network, Schedule, Stimulus};
use dml_core::learner::FirstAction;
use dml_core::metrics::{current_state_ltm_fraction, js_divergence, policy_diff};
use dml_core::seed::{replication_seed, stream_rng, Stream};
use dml_core::table::ValueTable;
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 7;
const SEEDS: u64 = 5;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

struct Report {
    filter: Vec<String>,
    failed: Vec<String>,
    ran: usize,
}

impl Report {
    fn wants(&self, name: &str) -> bool {
        self.filter.is_empty() || self.filter.iter().any(|f| name.contains(f.as_str()))
    }

    fn record(&mut self, name: &str, limit: Duration, elapsed: Duration, v: Verdict) {
        let in_time = elapsed <= limit;
        let pass = v.pass && in_time;
        let time = if in_time { format!("{:.1}s", elapsed.as_secs_f64()) } else { format!("{:.1}s, over the {}s limit", elapsed.as_secs_f64(), limit.as_secs()) };
        println!("{} {name}: {} ({time})", if pass { "PASS" } else { "FAIL" }, v.detail);
        self.ran += 1;
        if !pass {
            self.failed.push(name.to_string());
        }
    }

    fn check(&mut self, name: &str, limit_secs: u64, f: impl FnOnce() -> Verdict) {
        if !self.wants(name) {
            return;
        }
        let t0 = Instant::now();
        let v = f();
        self.record(name, Duration::from_secs(limit_secs), t0.elapsed(), v);
    }
}

fn config(task: Task, backend: Backend) -> ExperimentConfig {
    ExperimentConfig { seed: SEED, ..ExperimentConfig::new(task, backend) }
}

fn seeds_sweep(base: ExperimentConfig, param: SweepParam, values: Vec<f64>) -> dml_core::harness::SweepReport {
    sweep(&SweepSpec { base, param, values, seeds: SEEDS, workers: None }, None, false).expect("sweep runs")
}

fn vc_convergence() -> Verdict {
    let rs: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let rows: Vec<(f64, usize, Vec<f64>, f64)> = rs
        .par_iter()
        .map(|&r| {
            let cfg = ValueCircuitConfig::new(64, 1);
            let drive = |seed: u64, n: usize| -> Vec<u32> {
                let (mut net, h) = build_value_circuit(&cfg).unwrap();
                let mut rng = stream_rng(seed, Stream::Environment);
                (0..n)
                    .map(|_| {
                        let s = if rng.gen_bool(r) { Reinforcement::Reward } else { Reinforcement::Punish };
                        vc_reinforce_random(&mut net, &h, s, &mut rng).unwrap();
                        h.charge(&net)
                    })
                    .collect()
            };
            let mut errs = Vec::new();
            let mut pooled = Vec::new();
            for k in 0..SEEDS {
                let seed = replication_seed(SEED, k);
                let q = drive(seed, 100_000);
                let rhat = mean(&q[1500..2000].iter().map(|&x| x as f64 / 64.0).collect::<Vec<_>>());
                errs.push((rhat - r).abs());
                pooled.extend_from_slice(&q[1000..]);
            }
            let ok = errs.iter().filter(|&&e| e <= 0.05).count();
            let oracle = stationary(&birth_death_matrix(64, 1, r));
            let tv = total_variation(&histogram(&pooled, 65), &oracle);
            (r, ok, errs, tv)
        })
        .collect();

    let mut detail = String::new();
    let mut pass = true;
    for (r, ok, errs, tv) in &rows {
        pass &= *ok >= 4 && *tv <= 0.05;
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        let _ = write!(detail, "r={r:.1}: {ok}/5 seeds (max |err| {worst:.3}), TV {tv:.3}; ");
    }
    // the chain oracle at unit steps is Binomial(θ, r)
    let closed = rs.iter().all(|&r| total_variation(&stationary(&birth_death_matrix(64, 1, r)), &binomial_pmf(64, r)) < 1e-9);
    Verdict::new(pass && closed, detail.trim_end_matches("; "))
}

fn rate_law() -> Verdict {
    let mut rng = stream_rng(SEED, Stream::Agent);
    let mut bad = Vec::new();
    for _ in 0..50 {
        let theta: u32 = rng.gen_range(1..=256);
        let q: u32 = rng.gen_range(0..=theta);
        let a0: u32 = rng.gen_range(0..theta);
        let t: u64 = rng.gen_range(1..=1000);
        let mut net = Network::new(&[CompartmentSpec::soft_reset(theta, "srif")], &[]).unwrap();
        net.set_memory_charge(0, q).unwrap();
        net.set_accumulator(0, a0).unwrap();
        net.idle(t as usize);
        let expect = (a0 as u64 + t * q as u64) / theta as u64 - a0 as u64 / theta as u64;
        if net.spike_counts()[0] != expect {
            bad.push((q, theta, t, a0));
        }
    }
    Verdict::new(bad.is_empty(), format!("50 triples, {} mismatches {bad:?}", bad.len()))
}

fn truth_tables() -> Verdict {
    let mut wrong = Vec::new();
    for n in [2, 3] {
        let (g, frag) = and_gate(n).unwrap();
        let netlist = g.compile().unwrap();
        let lines: Vec<usize> = frag.inputs.iter().map(|&p| netlist.index(p, &[0], Part::Main).unwrap()).collect();
        let out = netlist.index(frag.output, &[0], Part::Main).unwrap();
        for mask in 0..1usize << n {
            let mut net = netlist.instantiate().unwrap();
            let on: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| lines[b]).collect();
            let schedule: Schedule = [(0, Stimulus::inputs(on))].into_iter().collect();
            let fired = net.run_window(2, &schedule).unwrap().train(out)[1];
            if fired != (mask == (1 << n) - 1) {
                wrong.push(format!("AND({n}) {mask:0n$b}"));
            }
        }
    }
    let (g, frag) = inverter().unwrap();
    let netlist = g.compile().unwrap();
    let line = netlist.index(frag.inputs[0], &[0], Part::Main).unwrap();
    let out = netlist.index(frag.output, &[0], Part::Main).unwrap();
    for input in [false, true] {
        let mut net = netlist.instantiate().unwrap();
        let schedule: Schedule = if input { [(0, Stimulus::inputs([line]))].into_iter().collect() } else { Schedule::new() };
        if net.run_window(2, &schedule).unwrap().train(out)[1] == input {
            wrong.push(format!("NOT {}", input as u8));
        }
    }
    Verdict::new(wrong.is_empty(), format!("AND(2), AND(3), inverter; wrong rows {wrong:?}"))
}

fn bandit() -> Verdict {
    let cpu = seeds_sweep(config(Task::Bandit, Backend::Cpu), SweepParam::Epsilon, vec![0.1]);
    let spk = seeds_sweep(config(Task::Bandit, Backend::Spiking), SweepParam::Epsilon, vec![0.1]);
    let moa = |r: &dml_core::harness::SweepReport| r.entries.iter().map(|e| e.summary["moa_final"]).collect::<Vec<f64>>();
    let (c, s) = (moa(&cpu), moa(&spk));
    let (mc, ms) = (mean(&c), mean(&s));
    Verdict::new(
        ms >= 0.85 && (ms - mc).abs() <= 0.05,
        format!("spiking MOA {ms:.4} {s:.3?} vs cpu {mc:.4} {c:.3?}; need >= 0.85 and gap {:.4} <= 0.05", (ms - mc).abs()),
    )
}

fn t_sweep() -> Verdict {
    let ts = vec![8.0, 16.0, 32.0, 48.0, 64.0, 96.0];
    let report = seeds_sweep(config(Task::Bandit, Backend::Spiking), SweepParam::Window, ts.clone());
    let m = |t: f64| report.row(t, "moa_final").unwrap().mean;
    let table: Vec<String> = ts.iter().map(|&t| format!("T={t}: {:.4}±{:.4}", m(t), report.row(t, "moa_final").unwrap().std)).collect();
    let high = [m(48.0), m(64.0), m(96.0)];
    let spread = high.iter().cloned().fold(f64::MIN, f64::max) - high.iter().cloned().fold(f64::MAX, f64::min);
    let drop = m(64.0) - m(8.0);
    Verdict::new(
        spread <= 0.05 && drop >= 0.10,
        format!("{}; spread over T>=48 {spread:.4} (<= 0.05), drop T=64 -> T=8 {drop:.4} (>= 0.10)", table.join(", ")),
    )
}

fn maze(dir: &Path) -> Verdict {
    let out = execute(&config(Task::Maze, Backend::Spiking)).unwrap();
    write_output(&out, dir, true).unwrap();
    let tail = out.config.final_epochs.unwrap() as usize;
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, phase) in out.phases.iter().enumerate() {
        let spec = phase.maze.as_ref().unwrap();
        let records = out.phase_records(k);
        let ret = dml_core::metrics::mean_return(&records[records.len() - tail..]).unwrap_or(0.0);
        let certified = maze_value_iteration(spec).certified();
        let failures = maze_policy_failures(spec, &phase.policy);
        pass &= ret >= 0.95 && certified && failures.is_empty();
        detail.push(format!("phase {}: return {ret:.3}, policy fails from {} cells", k + 1, failures.len()));
    }
    Verdict::new(pass, detail.join("; "))
}

struct BlackjackResult {
    spiking: ValueTable,
    oracle: ValueTable,
    ltm_fraction: Option<f64>,
    elapsed: Duration,
}

fn blackjack_run() -> BlackjackResult {
    let t0 = Instant::now();
    let oracle_thread = thread::spawn(|| {
        let mut env = Blackjack::new(stream_rng(SEED, Stream::Environment));
        mc_control(&mut env, 5_000_000, Policy::Greedy, FirstAction::Random, SEED).unwrap().0
    });
    let out = execute(&config(Task::Blackjack, Backend::Spiking)).unwrap();
    let oracle = oracle_thread.join().unwrap();
    BlackjackResult {
        spiking: out.final_phase().values.clone(),
        oracle,
        ltm_fraction: current_state_ltm_fraction(out.log.records()),
        elapsed: t0.elapsed(),
    }
}

fn blackjack(bj: &BlackjackResult) -> Verdict {
    let uniform = ValueTable::filled(bj.oracle.n_states, bj.oracle.n_actions, 0.5);
    let jsd = js_divergence(&bj.spiking, &bj.oracle).unwrap();
    let jsd_uniform = js_divergence(&uniform, &bj.oracle).unwrap();
    let oracle_policy = bj.oracle.greedy_policy();
    let diff = policy_diff(&bj.spiking.greedy_policy(), &oracle_policy).unwrap();
    let agreement = 1.0 - diff.fraction;
    let gap = |s: usize| (bj.oracle.get(s, STICK) - bj.oracle.get(s, HIT)).abs();
    let (dis, agr): (Vec<usize>, Vec<usize>) = (0..bj.oracle.n_states).partition(|s| diff.states.contains(s));
    let gap_dis = if dis.is_empty() { 0.0 } else { mean(&dis.iter().map(|&s| gap(s)).collect::<Vec<_>>()) };
    let gap_agr = mean(&agr.iter().map(|&s| gap(s)).collect::<Vec<_>>());
    let sticks_20 = (0..bj.oracle.n_states)
        .filter(|&s| BlackjackState::decode(s).unwrap().player_sum >= 20)
        .all(|s| oracle_policy[s] == STICK);
    Verdict::new(
        jsd < jsd_uniform && agreement >= 0.70 && (dis.is_empty() || gap_dis < gap_agr),
        format!(
            "JSD {jsd:.5} vs uniform {jsd_uniform:.5}; agreement {:.1}% ({} of {} states differ); mean oracle value gap {gap_dis:.4} where they differ vs {gap_agr:.4} where they agree; oracle sticks on 20+: {sticks_20}",
            agreement * 100.0,
            dis.len(),
            bj.oracle.n_states,
        ),
    )
}

fn energy(bj: &BlackjackResult) -> Verdict {
    match bj.ltm_fraction {
        Some(f) => Verdict::new(f <= 0.02, format!("current-state share of value-circuit spikes {:.3}% (<= 2%)", f * 100.0)),
        None => Verdict::new(false, "no value-circuit spikes recorded"),
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    RunManifest::read(dir).unwrap().files.iter().map(|f| (f.clone(), fs::read(dir.join(f)).unwrap())).collect()
}

fn determinism(root: &Path, maze_dir: Option<&Path>) -> Verdict {
    let mut checked = Vec::new();
    let mut differ = Vec::new();
    let mut pair = |name: &str, cfg: ExperimentConfig, first: Option<&Path>| {
        let a = root.join(format!("{name}_a"));
        let b = root.join(format!("{name}_b"));
        let a = match first {
            Some(p) => p.to_path_buf(),
            None => {
                run(&cfg, &a, true).unwrap();
                a
            }
        };
        run(&cfg, &b, true).unwrap();
        let (fa, fb) = (files(&a), files(&b));
        checked.push(format!("{name} ({} files)", fa.len()));
        if fa != fb {
            differ.push(name.to_string());
        }
    };
    pair("bandit", config(Task::Bandit, Backend::Spiking), None);
    pair("bandit_cpu", config(Task::Bandit, Backend::Cpu), None);
    pair("maze", config(Task::Maze, Backend::Spiking), maze_dir);
    pair("blackjack", ExperimentConfig { epochs: Some(5000), ..config(Task::Blackjack, Backend::Spiking) }, None);
    Verdict::new(differ.is_empty(), format!("repeated {}; differing: {differ:?}", checked.join(", ")))
}

fn golden() -> Verdict {
    let bad = check_golden();
    let (g, nodes) = agent_graph(25, 4, &ValueCircuitConfig::default()).unwrap();
    let n = g.compile().unwrap();
    let pairs = n.layout(nodes.stm).len();
    let gates = n.layout(nodes.stm_pair).len();
    Verdict::new(
        bad.is_empty() && pairs == 100 && gates == 100,
        format!("1x4, 25x4, 200x2 byte-stable {:?}; 25x4 outer product: {pairs} pair latches, {gates} pair gates", bad),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut report = Report { filter, failed: Vec::new(), ran: 0 };
    let tmp = tempfile::tempdir().expect("temp dir");
    let t0 = Instant::now();

    let bj_wanted = report.wants("blackjack_vs_oracle") || report.wants("energy_proxy");
    let bj_thread = bj_wanted.then(|| thread::spawn(blackjack_run));

    report.check("vc_convergence", 120, vc_convergence);
    report.check("srif_rate_law", 10, rate_law);
    report.check("gate_truth_tables", 10, truth_tables);
    report.check("golden_netlists", 30, golden);
    report.check("bandit_vs_cpu", 300, bandit);
    report.check("rate_window_sweep", 1200, t_sweep);
    let maze_dir = tmp.path().join("maze");
    let maze_ran = report.wants("maze_three_phases");
    report.check("maze_three_phases", 900, || maze(&maze_dir));
    report.check("determinism", 900, || determinism(tmp.path(), maze_ran.then_some(maze_dir.as_path())));

    if let Some(h) = bj_thread {
        let bj = h.join().expect("blackjack run");
        let limit = Duration::from_secs(3600);
        if report.wants("blackjack_vs_oracle") {
            report.record("blackjack_vs_oracle", limit, bj.elapsed, blackjack(&bj));
        }
        if report.wants("energy_proxy") {
            report.record("energy_proxy", limit, bj.elapsed, energy(&bj));
        }
    }

    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        report.ran - report.failed.len(),
        report.ran,
        t0.elapsed().as_secs_f64()
    );
    if !report.failed.is_empty() {
        println!("failed: {}", report.failed.join(", "));
        std::process::exit(1);
    }
}
