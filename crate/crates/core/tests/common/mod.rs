//! Independent reference implementations written with plain loops, and
//! shared fixtures for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use gcan::coattention::{coattend, CoAttentionParams};
use gcan::datamodel::{Dataset, Label, Provenance, Story, UserRecord};
use gcan::encoders::{build_graph, gcn_forward, GruCell};
use gcan::numerics::{ParamSet, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_positive(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(0.01..1.0))
}

/// Overwrites every parameter with uniform values in `[-1, 1)`.
pub fn randomize(params: &mut ParamSet, rng: &mut ChaCha8Rng) {
    for p in params.iter_mut() {
        p.value = random(p.value.rows(), p.value.cols(), rng);
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn matmul_oracle(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for p in 0..a.cols() {
                acc += a.get(i, p) * b.get(p, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// GRU recurrence one scalar at a time.
pub fn gru_oracle(cell: &GruCell, params: &ParamSet, x: &Tensor) -> Tensor {
    let (hid, inp, steps) = (cell.hidden_size, cell.input_size, x.cols());
    let v = |id| params.value(id);
    let mut h = vec![0.0; hid];
    let mut out = Tensor::zeros(hid, steps);
    for t in 0..steps {
        let mut z = vec![0.0; hid];
        let mut r = vec![0.0; hid];
        for i in 0..hid {
            let (mut zi, mut ri) = (v(cell.b_update).get(i, 0), v(cell.b_reset).get(i, 0));
            for j in 0..inp {
                zi += v(cell.w_update).get(i, j) * x.get(j, t);
                ri += v(cell.w_reset).get(i, j) * x.get(j, t);
            }
            for j in 0..hid {
                zi += v(cell.u_update).get(i, j) * h[j];
                ri += v(cell.u_reset).get(i, j) * h[j];
            }
            z[i] = sig(zi);
            r[i] = sig(ri);
        }
        let mut next = vec![0.0; hid];
        for i in 0..hid {
            let mut ci = v(cell.b_candidate).get(i, 0);
            for j in 0..inp {
                ci += v(cell.w_candidate).get(i, j) * x.get(j, t);
            }
            for j in 0..hid {
                ci += v(cell.u_candidate).get(i, j) * r[j] * h[j];
            }
            let c = ci.tanh();
            next[i] = (1.0 - z[i]) * h[i] + z[i] * c;
        }
        h = next;
        for i in 0..hid {
            out.set(i, t, h[i]);
        }
    }
    out
}

/// Cosine adjacency with unit diagonal, one pair at a time.
pub fn cosine_adjacency_oracle(x: &Tensor) -> Tensor {
    let n = x.rows();
    let mut a = Tensor::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            if p == q {
                a.set(p, q, 1.0);
                continue;
            }
            let (mut dot, mut np, mut nq) = (0.0, 0.0, 0.0);
            for k in 0..x.cols() {
                dot += x.get(p, k) * x.get(q, k);
                np += x.get(p, k) * x.get(p, k);
                nq += x.get(q, k) * x.get(q, k);
            }
            a.set(p, q, dot / (np.sqrt() * nq.sqrt()));
        }
    }
    a
}

/// Two-layer GCN from scratch: adjacency, degree normalization and dense
/// products. Returns `g × n`.
pub fn gcn_oracle(x: &Tensor, w0: &Tensor, w1: &Tensor) -> Tensor {
    let a = cosine_adjacency_oracle(x);
    let n = a.rows();
    let deg: Vec<f64> = (0..n).map(|p| (0..n).map(|q| a.get(p, q)).sum()).collect();
    let norm = Tensor::from_fn(n, n, |p, q| a.get(p, q) / (deg[p].sqrt() * deg[q].sqrt()));
    let relu = |t: Tensor| t.map(|v| v.max(0.0));
    let h1 = relu(matmul_oracle(&matmul_oracle(&norm, x), w0));
    let h2 = relu(matmul_oracle(&matmul_oracle(&norm, &h1), w1));
    h2.transpose()
}

pub struct CoAttentionOracle {
    pub s_hat: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub a_s: Vec<f64>,
    pub a_p: Vec<f64>,
}

fn softmax_loop(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Co-attention written element by element.
pub fn coattention_oracle(
    cp: &CoAttentionParams,
    params: &ParamSet,
    s: &Tensor,
    p: &Tensor,
) -> CoAttentionOracle {
    let (d, m) = (s.rows(), s.cols());
    let (g, n) = (p.rows(), p.cols());
    let k = cp.attention_dim;
    let wl = params.value(cp.affinity);
    let ws = params.value(cp.w_source);
    let wp = params.value(cp.w_partner);
    let whs = params.value(cp.w_hs);
    let whp = params.value(cp.w_hp);

    let mut f = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for a in 0..d {
                for b in 0..g {
                    acc += s.get(a, i) * wl.get(a, b) * p.get(b, j);
                }
            }
            f[i][j] = acc.tanh();
        }
    }
    let proj = |w: &Tensor, x: &Tensor, r: usize, c: usize| {
        (0..x.rows())
            .map(|q| w.get(r, q) * x.get(q, c))
            .sum::<f64>()
    };
    let mut logits_s = vec![0.0; m];
    for i in 0..m {
        for r in 0..k {
            let mut acc = proj(ws, s, r, i);
            for j in 0..n {
                acc += proj(wp, p, r, j) * f[i][j];
            }
            logits_s[i] += whs.get(0, r) * acc.tanh();
        }
    }
    let mut logits_p = vec![0.0; n];
    for j in 0..n {
        for r in 0..k {
            let mut acc = proj(wp, p, r, j);
            for i in 0..m {
                acc += proj(ws, s, r, i) * f[i][j];
            }
            logits_p[j] += whp.get(0, r) * acc.tanh();
        }
    }
    let a_s = softmax_loop(&logits_s);
    let a_p = softmax_loop(&logits_p);
    let s_hat = (0..d)
        .map(|a| (0..m).map(|i| a_s[i] * s.get(a, i)).sum())
        .collect();
    let p_hat = (0..g)
        .map(|b| (0..n).map(|j| a_p[j] * p.get(b, j)).sum())
        .collect();
    CoAttentionOracle {
        s_hat,
        p_hat,
        a_s,
        a_p,
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest deviation of the library GRU from the scalar oracle over
/// `instances` random small problems.
pub fn gru_oracle_error(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (inp, hid, steps) = (
            rng.random_range(1..6),
            rng.random_range(1..6),
            rng.random_range(1..9),
        );
        let mut params = ParamSet::new();
        let cell = GruCell::new(&mut params, "gru", inp, hid, &mut rng);
        randomize(&mut params, &mut rng);
        let x = random(inp, steps, &mut rng);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = cell.forward(&mut tape, &params, xv).unwrap();
        worst = worst.max(
            tape.value(out)
                .max_abs_diff(&gru_oracle(&cell, &params, &x)),
        );
    }
    worst
}

pub fn gcn_oracle_error(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (n, v, g) = (
            rng.random_range(1..8),
            rng.random_range(1..6),
            rng.random_range(1..5),
        );
        let x = random_positive(n, v, &mut rng);
        let w0 = random(v, g, &mut rng);
        let w1 = random(g, g, &mut rng);
        let graph = build_graph(&x).unwrap();
        let mut tape = Tape::new();
        let (a, b) = (tape.constant(w0.clone()), tape.constant(w1.clone()));
        let out = gcn_forward(&mut tape, &graph, &x, a, b).unwrap();
        worst = worst.max(tape.value(out).max_abs_diff(&gcn_oracle(&x, &w0, &w1)));
    }
    worst
}

pub fn coattention_oracle_error(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (d, m, g, n, k) = (
            rng.random_range(1..5),
            rng.random_range(1..7),
            rng.random_range(1..5),
            rng.random_range(1..7),
            rng.random_range(1..5),
        );
        let mut params = ParamSet::new();
        let cp = CoAttentionParams::new(&mut params, "co", d, g, k, &mut rng);
        randomize(&mut params, &mut rng);
        let s = random(d, m, &mut rng);
        let p = random(g, n, &mut rng);
        let mut tape = Tape::new();
        let (sv, pv) = (tape.constant(s.clone()), tape.constant(p.clone()));
        let out = coattend(&mut tape, &params, sv, pv, &cp).unwrap();
        let oracle = coattention_oracle(&cp, &params, &s, &p);
        for (var, want) in [
            (out.s_hat, &oracle.s_hat),
            (out.p_hat, &oracle.p_hat),
            (out.a_s, &oracle.a_s),
            (out.a_p, &oracle.a_p),
        ] {
            worst = worst.max(max_diff(tape.value(var).data(), want));
        }
    }
    worst
}

pub fn cosine_oracle_error(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (n, v) = (rng.random_range(1..9), rng.random_range(1..11));
        let x = random_positive(n, v, &mut rng);
        let graph = build_graph(&x).unwrap();
        worst = worst.max(graph.adjacency.max_abs_diff(&cosine_adjacency_oracle(&x)));
    }
    worst
}

pub fn user(rng: &mut ChaCha8Rng, id: usize) -> UserRecord {
    UserRecord {
        user_id: format!("u{id}"),
        desc_word_count: rng.random_range(0..20) as f64,
        screen_name_word_count: rng.random_range(1..4) as f64,
        follower_count: rng.random_range(0..5000) as f64,
        following_count: rng.random_range(0..2000) as f64,
        story_count: rng.random_range(0..9000) as f64,
        account_age: rng.random_range(1.0..3000.0),
        is_verified: rng.random_range(0..2) as f64,
        geo_enabled: rng.random_range(0..2) as f64,
        retweet_delay: id as f64 * 3.5,
        path_length: rng.random_range(1..4) as f64,
    }
}

/// Small hand-rolled dataset with arbitrary tokens and retweeters.
pub fn toy_dataset(n_stories: usize, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let stories = (0..n_stories)
        .map(|i| {
            let len = rng.random_range(2..8);
            let k = rng.random_range(1..9);
            Story {
                story_id: format!("t{i}"),
                label: Label::from_index(i % 2),
                tokens: (0..len)
                    .map(|_| format!("w{}", rng.random_range(0..12)))
                    .collect(),
                retweets: (0..k).map(|j| user(&mut rng, j)).collect(),
            }
        })
        .collect();
    Dataset::new(stories, Provenance::default()).unwrap()
}
