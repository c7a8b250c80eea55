//! Representation learners: the source-tweet encoder, the GRU and CNN
//! propagation encoders, and the cosine user graph with its two-layer GCN.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet, Tape, Tensor, Var};

/// Gated recurrent unit with separate input, recurrent and bias parameters
/// for the update gate, reset gate and candidate state.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_update: ParamId,
    pub u_update: ParamId,
    pub b_update: ParamId,
    pub w_reset: ParamId,
    pub u_reset: ParamId,
    pub b_reset: ParamId,
    pub w_candidate: ParamId,
    pub u_candidate: ParamId,
    pub b_candidate: ParamId,
}

impl GruCell {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut R,
    ) -> Self {
        let (i, h) = (input_size, hidden_size);
        let mut triple = |gate: &str, params: &mut ParamSet| {
            (
                params.add_glorot(&format!("{prefix}.w_{gate}"), h, i, rng),
                params.add_glorot(&format!("{prefix}.u_{gate}"), h, h, rng),
                params.add_zeros(&format!("{prefix}.b_{gate}"), h, 1),
            )
        };
        let (w_update, u_update, b_update) = triple("update", params);
        let (w_reset, u_reset, b_reset) = triple("reset", params);
        let (w_candidate, u_candidate, b_candidate) = triple("candidate", params);
        GruCell {
            input_size,
            hidden_size,
            w_update,
            u_update,
            b_update,
            w_reset,
            u_reset,
            b_reset,
            w_candidate,
            u_candidate,
            b_candidate,
        }
    }

    /// Runs the recurrence from `h₀ = 0` over the columns of `inputs`
    /// (`input_size × T`) and returns every hidden state (`hidden × T`):
    ///
    /// ```text
    /// z = σ(W_z x + U_z h + b_z)
    /// r = σ(W_r x + U_r h + b_r)
    /// c = tanh(W_c x + U_c (r ⊙ h) + b_c)
    /// h' = (1 − z) ⊙ h + z ⊙ c
    /// ```
    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, inputs: Var) -> Result<Var> {
        let [rows, steps] = tape.shape(inputs);
        if rows != self.input_size {
            return Err(Error::ShapeMismatch {
                op: "gru_forward",
                lhs: [self.input_size, self.hidden_size],
                rhs: [rows, steps],
            });
        }
        let mut load = |id| tape.param(params, id);
        let (wz, uz, bz) = (
            load(self.w_update),
            load(self.u_update),
            load(self.b_update),
        );
        let (wr, ur, br) = (load(self.w_reset), load(self.u_reset), load(self.b_reset));
        let (wc, uc, bc) = (
            load(self.w_candidate),
            load(self.u_candidate),
            load(self.b_candidate),
        );

        // Input projections for all steps at once.
        let xz = tape.matmul(wz, inputs)?;
        let xz = tape.add_column(xz, bz)?;
        let xr = tape.matmul(wr, inputs)?;
        let xr = tape.add_column(xr, br)?;
        let xc = tape.matmul(wc, inputs)?;
        let xc = tape.add_column(xc, bc)?;

        tape.gru_recurrence(xz, xr, xc, uz, ur, uc)
    }
}

pub fn gru_forward(cell: &GruCell, tape: &mut Tape, params: &ParamSet, inputs: Var) -> Result<Var> {
    cell.forward(tape, params, inputs)
}

/// Average pooling of GRU states, `d×n -> d×1`.
pub fn gru_pool(tape: &mut Tape, states: Var) -> Var {
    tape.mean_columns(states)
}

/// `V = tanh(W_w E + b_w)` with `E` the one-hot columns of `indices`,
/// computed as a row lookup into `table` (`vocab × d`). Returns `d×m`.
pub fn embed_source(tape: &mut Tape, table: Var, bias: Var, indices: &[usize]) -> Result<Var> {
    let looked_up = tape.embed(table, indices)?;
    let pre = tape.add_column(looked_up, bias)?;
    Ok(tape.tanh(pre))
}

/// Sliding windows of `width` consecutive users laid out as columns:
/// `(width·v) × (n − width + 1)`, column `t` holding rows `t..t+width` of
/// `features` concatenated.
pub fn window_matrix(features: &Tensor, width: usize) -> Result<Tensor> {
    let (n, v) = (features.rows(), features.cols());
    if width == 0 || n < width {
        return Err(Error::config(
            "lambda",
            format!("filter width {width} needs between 1 and {n} users"),
        ));
    }
    let windows = n - width + 1;
    Ok(Tensor::from_fn(width * v, windows, |r, t| {
        features.get(t + r / v, r % v)
    }))
}

/// `C = ReLU(W_f · X_{t:t+λ−1} + b_f)` for every window `t`; a valid 1-D
/// convolution with stride 1. `filters` is `d × (λ·v)` with each row one
/// output channel, `bias` is `d×1`. Returns `d × (n − λ + 1)`.
pub fn cnn_forward(
    tape: &mut Tape,
    features: &Tensor,
    filters: Var,
    bias: Var,
    width: usize,
) -> Result<Var> {
    let [_, fw] = tape.shape(filters);
    if fw != width * features.cols() {
        return Err(Error::ShapeMismatch {
            op: "cnn_forward",
            lhs: tape.shape(filters),
            rhs: [width, features.cols()],
        });
    }
    let windows = tape.constant(window_matrix(features, width)?);
    let pre = tape.matmul(filters, windows)?;
    let pre = tape.add_column(pre, bias)?;
    Ok(tape.relu(pre))
}

/// Fully connected user graph with cosine edge weights and unit self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGraph {
    pub adjacency: Tensor,
    /// `D^{-1/2} A D^{-1/2}`
    pub normalized: Tensor,
    pub degree: Vec<f64>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Builds the user graph from scaled features (`n × v`). If any row is all
/// zero, a constant 1.0 feature is appended to every row before computing
/// cosines so that every similarity is defined.
pub fn build_graph(features: &Tensor) -> Result<UserGraph> {
    let n = features.rows();
    let any_zero = (0..n).any(|r| features.row_slice(r).iter().all(|&x| x == 0.0));
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row = features.row_slice(r).to_vec();
            if any_zero {
                row.push(1.0);
            }
            row
        })
        .collect();
    for (r, row) in rows.iter().enumerate() {
        let norm = row.iter().map(|x| x * x).sum::<f64>();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput(format!(
                "user {r} has a zero or non-finite feature norm"
            )));
        }
    }
    let mut adjacency = Tensor::identity(n);
    for a in 0..n {
        for b in (a + 1)..n {
            let w = cosine(&rows[a], &rows[b]).clamp(-1.0, 1.0);
            adjacency.set(a, b, w);
            adjacency.set(b, a, w);
        }
    }
    let degree: Vec<f64> = (0..n)
        .map(|r| adjacency.row_slice(r).iter().sum())
        .collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let normalized = Tensor::from_fn(n, n, |a, b| inv_sqrt[a] * adjacency.get(a, b) * inv_sqrt[b]);
    Ok(UserGraph {
        adjacency,
        normalized,
        degree,
    })
}

/// Two stacked graph convolutions, `H¹ = ReLU(Ã X W₀)` and
/// `H² = ReLU(Ã H¹ W₁)`, returned transposed as `G` (`g × n`).
pub fn gcn_forward(
    tape: &mut Tape,
    graph: &UserGraph,
    features: &Tensor,
    w0: Var,
    w1: Var,
) -> Result<Var> {
    if tape.shape(w0)[0] != features.cols() {
        return Err(Error::ShapeMismatch {
            op: "gcn_forward",
            lhs: features.shape(),
            rhs: tape.shape(w0),
        });
    }
    let propagated = graph.normalized.matmul(features)?;
    let ax = tape.constant(propagated);
    let a = tape.constant(graph.normalized.clone());
    let h1 = tape.matmul(ax, w0)?;
    let h1 = tape.relu(h1);
    let ah1 = tape.matmul(a, h1)?;
    let h2 = tape.matmul(ah1, w1)?;
    let h2 = tape.relu(h2);
    Ok(tape.transpose(h2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::NUM_FEATURES;
    use crate::numerics::{sigmoid, Parameter};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// The recurrence written with elementary tape ops.
    fn composed_gru(cell: &GruCell, tape: &mut Tape, params: &ParamSet, inputs: Var) -> Var {
        let mut load = |id| tape.param(params, id);
        let (wz, uz, bz) = (
            load(cell.w_update),
            load(cell.u_update),
            load(cell.b_update),
        );
        let (wr, ur, br) = (load(cell.w_reset), load(cell.u_reset), load(cell.b_reset));
        let (wc, uc, bc) = (
            load(cell.w_candidate),
            load(cell.u_candidate),
            load(cell.b_candidate),
        );
        let steps = tape.shape(inputs)[1];
        let xz = tape.matmul(wz, inputs).unwrap();
        let xz = tape.add_column(xz, bz).unwrap();
        let xr = tape.matmul(wr, inputs).unwrap();
        let xr = tape.add_column(xr, br).unwrap();
        let xc = tape.matmul(wc, inputs).unwrap();
        let xc = tape.add_column(xc, bc).unwrap();
        (|| -> Result<Var> {
            let mut h = tape.constant(Tensor::zeros(cell.hidden_size, 1));
            let mut states = Vec::with_capacity(steps);
            for t in 0..steps {
                let z_in = tape.column(xz, t)?;
                let z_rec = tape.matmul(uz, h)?;
                let z_pre = tape.add(z_in, z_rec)?;
                let z = tape.sigmoid(z_pre);

                let r_in = tape.column(xr, t)?;
                let r_rec = tape.matmul(ur, h)?;
                let r_pre = tape.add(r_in, r_rec)?;
                let r = tape.sigmoid(r_pre);

                let c_in = tape.column(xc, t)?;
                let gated = tape.mul(r, h)?;
                let c_rec = tape.matmul(uc, gated)?;
                let c_pre = tape.add(c_in, c_rec)?;
                let c = tape.tanh(c_pre);

                // (1 − z) ⊙ h + z ⊙ c  ==  h + z ⊙ (c − h)
                let delta = tape.sub(c, h)?;
                let step = tape.mul(z, delta)?;
                h = tape.add(h, step)?;
                states.push(h);
            }
            tape.concat_columns(&states)
        })()
        .unwrap()
    }

    #[test]
    fn fused_gru_matches_composed_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let mut params = ParamSet::new();
            let cell = GruCell::new(&mut params, "gru", 3, 4, &mut rng);
            for p in params.iter_mut() {
                p.value = random(p.value.rows(), p.value.cols(), &mut rng);
            }
            let x = random(3, 7, &mut rng);
            let weights = random(4, 7, &mut rng);
            let run = |fused: bool, params: &mut ParamSet| {
                params.zero_grad();
                let mut tape = Tape::new();
                let xv = tape.constant(x.clone());
                let h = if fused {
                    cell.forward(&mut tape, params, xv).unwrap()
                } else {
                    composed_gru(&cell, &mut tape, params, xv)
                };
                let w = tape.constant(weights.clone());
                let prod = tape.mul(h, w).unwrap();
                let loss = tape.sum(prod);
                tape.backward(loss, params).unwrap();
                let grads: Vec<Tensor> = params.iter().map(|p| p.grad.clone()).collect();
                (tape.value(h).clone(), grads)
            };
            let (h1, g1) = run(true, &mut params);
            let (h2, g2) = run(false, &mut params);
            assert!(h1.max_abs_diff(&h2) < 1e-12);
            for (a, b) in g1.iter().zip(&g2) {
                assert!(a.max_abs_diff(b) < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn gru_zero_parameters_give_zero_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = ParamSet::new();
        let cell = GruCell::new(&mut params, "g", 3, 4, &mut rng);
        for p in params.iter_mut() {
            p.value.fill(0.0);
        }
        let mut tape = Tape::new();
        let x = tape.constant(random(3, 5, &mut rng));
        let h = cell.forward(&mut tape, &params, x).unwrap();
        assert_eq!(tape.value(h), &Tensor::zeros(4, 5));
    }

    #[test]
    fn gru_single_step_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        let cell = GruCell::new(&mut params, "g", 3, 2, &mut rng);
        for id in [cell.b_update, cell.b_candidate, cell.b_reset] {
            params.get_mut(id).value = random(2, 1, &mut rng);
        }
        let x = random(3, 1, &mut rng);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let h = cell.forward(&mut tape, &params, xv).unwrap();
        let wz = params.value(cell.w_update).matmul(&x).unwrap();
        let wc = params.value(cell.w_candidate).matmul(&x).unwrap();
        for r in 0..2 {
            let z = sigmoid(wz.get(r, 0) + params.value(cell.b_update).get(r, 0));
            let c = (wc.get(r, 0) + params.value(cell.b_candidate).get(r, 0)).tanh();
            assert!((tape.value(h).get(r, 0) - z * c).abs() < 1e-15);
        }
    }

    #[test]
    fn gru_is_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ParamSet::new();
        let cell = GruCell::new(&mut params, "g", 3, 4, &mut rng);
        let x = random(3, 6, &mut rng);
        let mut y = x.clone();
        for r in 0..3 {
            y.set(r, 4, 5.0);
        }
        let run = |input: Tensor| {
            let mut tape = Tape::new();
            let v = tape.constant(input);
            let h = cell.forward(&mut tape, &params, v).unwrap();
            tape.value(h).clone()
        };
        let (hx, hy) = (run(x), run(y));
        for t in 0..4 {
            assert_eq!(hx.column_values(t), hy.column_values(t));
        }
        assert_ne!(hx.column_values(4), hy.column_values(4));
    }

    #[test]
    fn embed_zero_parameters_and_locality() {
        let mut tape = Tape::new();
        let table = tape.constant(Tensor::zeros(5, 3));
        let bias = tape.constant(Tensor::zeros(3, 1));
        let v = embed_source(&mut tape, table, bias, &[0, 0, 0, 0]).unwrap();
        assert_eq!(tape.value(v), &Tensor::zeros(3, 4));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = tape.constant(random(5, 3, &mut rng));
        let bias = tape.constant(random(3, 1, &mut rng));
        let a = embed_source(&mut tape, table, bias, &[2, 4, 1]).unwrap();
        let b = embed_source(&mut tape, table, bias, &[3, 4, 0]).unwrap();
        assert_eq!(
            tape.value(a).column_values(1),
            tape.value(b).column_values(1)
        );
        assert!(embed_source(&mut tape, table, bias, &[5]).is_err());
    }

    #[test]
    fn cnn_shapes_and_selector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::from_fn(40, NUM_FEATURES, |_, _| rng.random_range(0.0..1.0));
        let mut tape = Tape::new();
        let w = tape.constant(Tensor::zeros(32, 3 * NUM_FEATURES));
        let b = tape.constant(Tensor::zeros(32, 1));
        let c = cnn_forward(&mut tape, &x, w, b, 3).unwrap();
        assert_eq!(tape.value(c), &Tensor::zeros(32, 38));

        // λ=1, one channel selecting feature 4
        let xs = Tensor::from_fn(6, NUM_FEATURES, |r, k| (r as f64 - 2.5) * (k as f64 + 1.0));
        let mut sel = Tensor::zeros(1, NUM_FEATURES);
        sel.set(0, 4, 1.0);
        let w = tape.constant(sel);
        let b = tape.constant(Tensor::zeros(1, 1));
        let c = cnn_forward(&mut tape, &xs, w, b, 1).unwrap();
        let expect: Vec<f64> = xs
            .column_values(4)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        assert_eq!(tape.value(c).data(), expect.as_slice());

        let w = tape.constant(Tensor::zeros(2, 7 * NUM_FEATURES));
        let b = tape.constant(Tensor::zeros(2, 1));
        assert!(cnn_forward(&mut tape, &xs, w, b, 7).is_err());
    }

    #[test]
    fn graph_closed_forms() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let g = build_graph(&x).unwrap();
        assert!(g.adjacency.data().iter().all(|&w| (w - 1.0).abs() < 1e-15));
        assert!(g
            .normalized
            .data()
            .iter()
            .all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));

        // cos = 0.5 between (1,0) and (1/2, √3/2)
        let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap();
        let g = build_graph(&x).unwrap();
        assert!((g.adjacency.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((g.degree[0] - 1.5).abs() < 1e-15);
        let expect = [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
        for (got, want) in g.normalized.data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_row_safeguard() {
        let x = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let g = build_graph(&x).unwrap();
        // (0,0,1)·(1,0,1) / (1·√2)
        assert!((g.adjacency.get(0, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gcn_zero_weights_and_single_layer() {
        let x = Tensor::from_rows(&[vec![0.2, 0.9], vec![0.4, 0.1], vec![1.0, 0.5]]).unwrap();
        let g = build_graph(&x).unwrap();
        let mut params = ParamSet::new();
        let w0 = params.add(Parameter::new("w0", Tensor::zeros(2, 2)));
        let w1 = params.add(Parameter::new("w1", Tensor::zeros(2, 2)));
        let mut tape = Tape::new();
        let (a, b) = (tape.param(&params, w0), tape.param(&params, w1));
        let out = gcn_forward(&mut tape, &g, &x, a, b).unwrap();
        assert_eq!(tape.value(out), &Tensor::zeros(2, 3));

        // Identity weights on non-negative input: H¹ = Ã X, H² = Ã Ã X.
        let a = tape.constant(Tensor::identity(2));
        let out = gcn_forward(&mut tape, &g, &x, a, a).unwrap();
        let ax = g.normalized.matmul(&x).unwrap();
        let aax = g.normalized.matmul(&ax).unwrap();
        assert!(tape.value(out).max_abs_diff(&aax.transpose()) < 1e-15);
    }
}
