// SPDX-License-Identifier: Apache-2.0

//! Reference computations shared by the integration tests and the
//! acceptance suite. Nothing here calls into the simulator.

#![allow(dead_code, clippy::needless_range_loop)]

/// Per-signal transition matrix of the memory charge on `{0..θ}`: with
/// reward probability `r`, a step up by `dq` happens with probability
/// `(1 - q/θ)·r` and a step down with probability `(q/θ)·(1 - r)`, both
/// clamped to the range.
pub fn birth_death_matrix(theta: u32, dq: u32, r: f64) -> Vec<Vec<f64>> {
    let n = theta as usize + 1;
    let mut p = vec![vec![0.0; n]; n];
    for q in 0..n {
        let frac = q as f64 / theta as f64;
        let up = (1.0 - frac) * r;
        let down = frac * (1.0 - r);
        let hi = (q + dq as usize).min(theta as usize);
        let lo = q.saturating_sub(dq as usize);
        p[q][hi] += up;
        p[q][lo] += down;
        p[q][q] += 1.0 - up - down;
    }
    p
}

/// Stationary distribution `π = πP` by Gaussian elimination on
/// `(Pᵀ - I)π = 0` with the last equation replaced by `Σπ = 1`.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular system");
        for k in col..=n {
            a[col][k] /= d;
        }
        for row in 0..n {
            if row != col && a[row][col] != 0.0 {
                let f = a[row][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    a.iter().map(|row| row[n].max(0.0)).collect()
}

pub fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let mut ln_c = 0.0;
        for i in 0..k {
            ln_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        let v = ln_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
        out.push(if v.is_nan() { if (k == 0 && p == 0.0) || (k == n && p == 1.0) { 1.0 } else { 0.0 } } else { v.exp() });
    }
    out
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn histogram(samples: &[u32], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &s in samples {
        h[s as usize] += 1.0;
    }
    let n = samples.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Jensen-Shannon divergence in bits through the KL form
/// `(KL(P‖M) + KL(Q‖M)) / 2`, after normalizing each table over all entries.
pub fn jsd_bits(p: &[f64], q: &[f64]) -> f64 {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&x, &y) in p.iter().zip(q) {
        let (x, y) = (x / sp, y / sq);
        let m = 0.5 * (x + y);
        if x > 0.0 {
            kl_p += x * (x / m).log2();
        }
        if y > 0.0 {
            kl_q += y * (y / m).log2();
        }
    }
    0.5 * (kl_p + kl_q)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub const GOLDEN_SHAPES: [(usize, usize); 3] = [(1, 4), (25, 4), (200, 2)];

pub fn golden_path(n_states: usize, n_actions: usize) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("agent_{n_states}x{n_actions}.json"))
}

/// Netlist JSON of the agent shape with the default value circuit.
pub fn agent_netlist_json(n_states: usize, n_actions: usize) -> String {
    let vc = dml_core::circuits::ValueCircuitConfig::default();
    let (g, _) = dml_core::agent::agent_graph(n_states, n_actions, &vc).unwrap();
    g.compile().unwrap().to_json()
}

/// Compares every golden netlist with a fresh compile; with `UPDATE_GOLDEN`
/// set, rewrites the files instead. Returns the mismatching shapes.
pub fn check_golden() -> Vec<String> {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut bad = Vec::new();
    for (s, a) in GOLDEN_SHAPES {
        let path = golden_path(s, a);
        let fresh = agent_netlist_json(s, a);
        if update {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &fresh).unwrap();
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(stored) if stored == fresh => {}
            Ok(_) => bad.push(format!("{s}x{a}: differs from {}", path.display())),
            Err(e) => bad.push(format!("{s}x{a}: {}: {e}", path.display())),
        }
    }
    bad
}
