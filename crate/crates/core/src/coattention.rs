//! Co-attention between the source-tweet states `S` (`d×m`) and a partner
//! sequence `P` (`g′×n′`): graph node embeddings for the source-interaction
//! branch, CNN window features for the source-propagation branch.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet, Tape, Tensor, Var};

/// Learnable weights of one co-attention block.
#[derive(Debug, Clone, Copy)]
pub struct CoAttentionParams {
    pub source_dim: usize,
    pub partner_dim: usize,
    pub attention_dim: usize,
    /// `d×g′` bilinear proximity weights.
    pub affinity: ParamId,
    /// `k×d`
    pub w_source: ParamId,
    /// `k×g′`
    pub w_partner: ParamId,
    /// `1×k`
    pub w_hs: ParamId,
    /// `1×k`
    pub w_hp: ParamId,
}

impl CoAttentionParams {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        source_dim: usize,
        partner_dim: usize,
        attention_dim: usize,
        rng: &mut R,
    ) -> Self {
        let (d, g, k) = (source_dim, partner_dim, attention_dim);
        CoAttentionParams {
            source_dim,
            partner_dim,
            attention_dim,
            affinity: params.add_glorot(&format!("{prefix}.affinity"), d, g, rng),
            w_source: params.add_glorot(&format!("{prefix}.w_source"), k, d, rng),
            w_partner: params.add_glorot(&format!("{prefix}.w_partner"), k, g, rng),
            w_hs: params.add_glorot(&format!("{prefix}.w_hs"), 1, k, rng),
            w_hp: params.add_glorot(&format!("{prefix}.w_hp"), 1, k, rng),
        }
    }

    pub fn ids(&self) -> [ParamId; 5] {
        [
            self.affinity,
            self.w_source,
            self.w_partner,
            self.w_hs,
            self.w_hp,
        ]
    }
}

/// Tape handles of one co-attention evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CoAttentionOutput {
    /// `1×d` attended source vector.
    pub s_hat: Var,
    /// `1×g′` attended partner vector.
    pub p_hat: Var,
    /// `1×m` word attention.
    pub a_s: Var,
    /// `1×n′` partner attention.
    pub a_p: Var,
}

/// ```text
/// F   = tanh(Sᵀ W_aff P)                  m×n′
/// H_s = tanh(W_s S + (W_p P) Fᵀ)          k×m
/// H_p = tanh(W_p P + (W_s S) F)           k×n′
/// a_s = softmax(w_hs H_s),  a_p = softmax(w_hp H_p)
/// ŝ   = Σ a_s[i] S[:,i],    p̂ = Σ a_p[j] P[:,j]
/// ```
pub fn coattend(
    tape: &mut Tape,
    params: &ParamSet,
    source: Var,
    partner: Var,
    cp: &CoAttentionParams,
) -> Result<CoAttentionOutput> {
    let m = tape.shape(source)[1];
    coattend_masked(tape, params, source, partner, cp, m)
}

/// Logit given to masked source positions; its softmax weight is exactly 0.
pub const MASKED_LOGIT: f64 = -1e9;

/// [`coattend`] with the source attention restricted to the first
/// `source_len` columns of `S`; later columns (padding) get zero weight.
/// A `source_len` of 0 or at least `m` means no masking.
pub fn coattend_masked(
    tape: &mut Tape,
    params: &ParamSet,
    source: Var,
    partner: Var,
    cp: &CoAttentionParams,
    source_len: usize,
) -> Result<CoAttentionOutput> {
    let [d, m] = tape.shape(source);
    let [g, _] = tape.shape(partner);
    if d != cp.source_dim || g != cp.partner_dim {
        return Err(Error::ShapeMismatch {
            op: "coattend",
            lhs: tape.shape(source),
            rhs: tape.shape(partner),
        });
    }
    let affinity = tape.param(params, cp.affinity);
    let w_s = tape.param(params, cp.w_source);
    let w_p = tape.param(params, cp.w_partner);
    let w_hs = tape.param(params, cp.w_hs);
    let w_hp = tape.param(params, cp.w_hp);

    let source_t = tape.transpose(source);
    let left = tape.matmul(source_t, affinity)?;
    let prox = tape.matmul(left, partner)?;
    let prox = tape.tanh(prox);
    let prox_t = tape.transpose(prox);

    let ws_s = tape.matmul(w_s, source)?;
    let wp_p = tape.matmul(w_p, partner)?;

    let cross_s = tape.matmul(wp_p, prox_t)?;
    let h_s = tape.add(ws_s, cross_s)?;
    let h_s = tape.tanh(h_s);
    let cross_p = tape.matmul(ws_s, prox)?;
    let h_p = tape.add(wp_p, cross_p)?;
    let h_p = tape.tanh(h_p);

    let mut logits_s = tape.matmul(w_hs, h_s)?;
    if source_len > 0 && source_len < m {
        let mask = Tensor::from_fn(1, m, |_, j| if j < source_len { 0.0 } else { MASKED_LOGIT });
        let mask = tape.constant(mask);
        logits_s = tape.add(logits_s, mask)?;
    }
    let a_s = tape.softmax(logits_s)?;
    let logits_p = tape.matmul(w_hp, h_p)?;
    let a_p = tape.softmax(logits_p)?;

    let partner_t = tape.transpose(partner);
    let s_hat = tape.matmul(a_s, source_t)?;
    let p_hat = tape.matmul(a_p, partner_t)?;
    Ok(CoAttentionOutput {
        s_hat,
        p_hat,
        a_s,
        a_p,
    })
}

/// Outputs of both co-attention blocks.
#[derive(Debug, Clone, Copy)]
pub struct DualCoAttention {
    /// Source-interaction (source ↔ graph).
    pub interaction: CoAttentionOutput,
    /// Source-propagation (source ↔ CNN windows).
    pub propagation: CoAttentionOutput,
}

impl DualCoAttention {
    /// `(ŝ₁, ĝ, ŝ₂, ĉ)`
    pub fn vectors(&self) -> [Var; 4] {
        [
            self.interaction.s_hat,
            self.interaction.p_hat,
            self.propagation.s_hat,
            self.propagation.p_hat,
        ]
    }
}

/// Runs the source-interaction block on `(S, G)` and the
/// source-propagation block on `(S, C)` with independent parameters.
pub fn dual_coattend(
    tape: &mut Tape,
    params: &ParamSet,
    source: Var,
    graph: Var,
    conv: Var,
    interaction: &CoAttentionParams,
    propagation: &CoAttentionParams,
) -> Result<DualCoAttention> {
    Ok(DualCoAttention {
        interaction: coattend(tape, params, source, graph, interaction)?,
        propagation: coattend(tape, params, source, conv, propagation)?,
    })
}
