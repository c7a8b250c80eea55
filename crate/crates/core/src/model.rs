//! The assembled detector: configuration, parameters, forward pass, loss,
//! training steps, prediction, ablation variants and checkpoints.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coattention::{coattend_masked, CoAttentionParams, DualCoAttention};
use crate::datamodel::{
    build_vocab, encode_tokens, fix_length, Dataset, FeatureScaler, Label, Story, Vocabulary,
    NUM_FEATURES,
};
use crate::encoders::{
    build_graph, cnn_forward, embed_source, gcn_forward, gru_pool, GruCell, UserGraph,
};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamConfig, ParamId, ParamSet, Tape, Tensor, Var, PROB_CLAMP};

/// Which components the model keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Full,
    /// "GCAN-G": no graph-aware branch.
    NoGraph,
    /// "-A": no co-attention; attended vectors become plain column means.
    NoCoatt,
    /// "-R": no GRU propagation vector.
    NoGru,
    /// "-G": no graph-aware representation.
    NoGcn,
    /// "-C": no CNN propagation branch.
    NoCnn,
    /// "-S-A": no source tweet and no co-attention.
    NoSourceAndCoatt,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::NoGraph,
        Variant::NoCoatt,
        Variant::NoGru,
        Variant::NoGcn,
        Variant::NoCnn,
        Variant::NoSourceAndCoatt,
    ];

    pub fn config_name(self) -> &'static str {
        match self {
            Variant::Full => "FULL",
            Variant::NoGraph => "NO_GRAPH",
            Variant::NoCoatt => "NO_COATT",
            Variant::NoGru => "NO_GRU",
            Variant::NoGcn => "NO_GCN",
            Variant::NoCnn => "NO_CNN",
            Variant::NoSourceAndCoatt => "NO_SOURCE_AND_COATT",
        }
    }

    /// Short ablation label.
    pub fn short_name(self) -> &'static str {
        match self {
            Variant::Full => "GCAN",
            Variant::NoGraph => "GCAN-G",
            Variant::NoCoatt => "-A",
            Variant::NoGru => "-R",
            Variant::NoGcn => "-G",
            Variant::NoCnn => "-C",
            Variant::NoSourceAndCoatt => "-S-A",
        }
    }

    fn uses_graph(self) -> bool {
        !matches!(self, Variant::NoGraph | Variant::NoGcn)
    }

    fn uses_cnn(self) -> bool {
        self != Variant::NoCnn
    }

    fn uses_gru(self) -> bool {
        self != Variant::NoGru
    }

    fn uses_source(self) -> bool {
        self != Variant::NoSourceAndCoatt
    }

    fn uses_coattention(self) -> bool {
        !matches!(self, Variant::NoCoatt | Variant::NoSourceAndCoatt)
    }

    /// Width of the concatenated feature vector `f`.
    pub fn feature_width(self, d: usize, g: usize) -> usize {
        match self {
            Variant::Full | Variant::NoCoatt => 4 * d + g,
            Variant::NoGraph | Variant::NoGcn => 3 * d,
            Variant::NoGru => 3 * d + g,
            Variant::NoCnn => 2 * d + g,
            Variant::NoSourceAndCoatt => 2 * d + g,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.config_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.config_name().eq_ignore_ascii_case(s) || v.short_name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "variant",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcanConfig {
    /// Maximum source length in tokens.
    pub m: usize,
    /// Retweeters per story after truncation or resampling.
    pub n: usize,
    /// Word embedding, GRU and CNN output size.
    pub d: usize,
    /// GCN output size.
    pub g: usize,
    /// CNN filter width in users.
    pub lambda: usize,
    /// Co-attention map size.
    pub k: usize,
    /// Hidden width of the prediction head.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Give PAD word positions zero co-attention weight. Off by default, so
    /// padding is attended like any other position.
    pub mask_padding: bool,
}

impl Default for GcanConfig {
    fn default() -> Self {
        GcanConfig {
            m: 20,
            n: 40,
            d: 32,
            g: 32,
            lambda: 3,
            k: 32,
            hidden: 32,
            epochs: 50,
            batch_size: 16,
            learning_rate: 1e-3,
            min_count: 1,
            seed: 0,
            variant: Variant::Full,
            mask_padding: false,
        }
    }
}

impl GcanConfig {
    /// The small configuration used for gradient checks.
    pub fn tiny() -> Self {
        GcanConfig {
            m: 6,
            n: 5,
            d: 4,
            g: 4,
            lambda: 2,
            k: 3,
            hidden: 4,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("m", self.m),
            ("n", self.n),
            ("d", self.d),
            ("g", self.g),
            ("lambda", self.lambda),
            ("k", self.k),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("min_count", self.min_count),
        ] {
            if value == 0 {
                return Err(Error::config(
                    format!("model.{field}"),
                    "must be at least 1",
                ));
            }
        }
        if self.n < self.lambda {
            return Err(Error::config(
                "model.n",
                format!("must be at least lambda ({}), got {}", self.lambda, self.n),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(
                "model.learning_rate",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn feature_width(&self) -> usize {
        self.variant.feature_width(self.d, self.g)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Parameter handles for every submodule.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub embedding: ParamId,
    pub embedding_bias: ParamId,
    pub source_gru: GruCell,
    pub propagation_gru: GruCell,
    pub cnn_filters: ParamId,
    pub cnn_bias: ParamId,
    pub gcn_w0: ParamId,
    pub gcn_w1: ParamId,
    pub interaction: CoAttentionParams,
    pub propagation: CoAttentionParams,
    pub head_w1: ParamId,
    pub head_b1: ParamId,
    pub head_w2: ParamId,
    pub head_b2: ParamId,
}

impl ModelParams {
    // Allocation order is fixed and the head comes last, so every variant
    // draws identical values for the parameters it shares with the others.
    fn allocate(
        config: &GcanConfig,
        vocab_len: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let (d, g, k, h) = (config.d, config.g, config.k, config.hidden);
        let embedding = params.add_glorot("embedding", vocab_len, d, rng);
        let embedding_bias = params.add_zeros("embedding_bias", d, 1);
        let source_gru = GruCell::new(params, "source_gru", d, d, rng);
        let propagation_gru = GruCell::new(params, "propagation_gru", NUM_FEATURES, d, rng);
        let cnn_filters = params.add_glorot("cnn.filters", d, config.lambda * NUM_FEATURES, rng);
        let cnn_bias = params.add_zeros("cnn.bias", d, 1);
        let gcn_w0 = params.add_glorot("gcn.w0", NUM_FEATURES, g, rng);
        let gcn_w1 = params.add_glorot("gcn.w1", g, g, rng);
        let interaction = CoAttentionParams::new(params, "coatt_interaction", d, g, k, rng);
        let propagation = CoAttentionParams::new(params, "coatt_propagation", d, d, k, rng);
        let head_w1 = params.add_glorot("head.w1", config.feature_width(), h, rng);
        let head_b1 = params.add_zeros("head.b1", 1, h);
        let head_w2 = params.add_glorot("head.w2", h, 2, rng);
        let head_b2 = params.add_zeros("head.b2", 1, 2);
        ModelParams {
            embedding,
            embedding_bias,
            source_gru,
            propagation_gru,
            cnn_filters,
            cnn_bias,
            gcn_w0,
            gcn_w1,
            interaction,
            propagation,
            head_w1,
            head_b1,
            head_w2,
            head_b2,
        }
    }
}

/// A story turned into model inputs.
#[derive(Debug, Clone)]
pub struct EncodedStory {
    pub story_id: String,
    pub label: Label,
    /// Length `m`, PAD-filled.
    pub token_ids: Vec<usize>,
    /// Leading word positions open to co-attention: the non-PAD prefix when
    /// `mask_padding` is set, otherwise all `m`.
    pub source_len: usize,
    /// Scaled `n × 10` features of the fixed-length retweeter sequence.
    pub features: Tensor,
    pub graph: UserGraph,
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    pub probs: Var,
    /// Width of `f`.
    pub feature: Var,
    pub attention: Option<DualCoAttentionView>,
}

/// Whichever co-attention blocks the variant evaluates.
#[derive(Debug, Clone, Copy, Default)]
pub struct DualCoAttentionView {
    pub interaction: Option<crate::coattention::CoAttentionOutput>,
    pub propagation: Option<crate::coattention::CoAttentionOutput>,
}

impl From<DualCoAttention> for DualCoAttentionView {
    fn from(d: DualCoAttention) -> Self {
        DualCoAttentionView {
            interaction: Some(d.interaction),
            propagation: Some(d.propagation),
        }
    }
}

/// Attention weights read back from a forward pass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttentionWeights {
    /// Source-interaction word attention (length m).
    pub interaction_words: Option<Vec<f64>>,
    /// Source-interaction user attention (length n).
    pub interaction_users: Option<Vec<f64>>,
    /// Source-propagation word attention (length m).
    pub propagation_words: Option<Vec<f64>>,
    /// Source-propagation window attention (length n − λ + 1).
    pub propagation_windows: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `[ŷ₀, ŷ₁]`
    pub probs: [f64; 2],
    pub label: Label,
    pub attention: AttentionWeights,
}

/// Binary cross-entropy `−y ln ŷ₁ − (1 − y) ln ŷ₀` with clamped
/// probabilities.
pub fn cross_entropy(probs: [f64; 2], label: Label) -> f64 {
    -probs[label.index()]
        .clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
        .ln()
}

/// Mean cross-entropy over `(prediction, label)` pairs.
pub fn mean_loss(pairs: &[([f64; 2], Label)]) -> f64 {
    pairs.iter().map(|&(p, y)| cross_entropy(p, y)).sum::<f64>() / pairs.len() as f64
}

/// Full model state: configuration, preprocessing learned from the training
/// split, parameters and the RNG driving batch order.
#[derive(Debug, Clone)]
pub struct Gcan {
    config: GcanConfig,
    vocab: Vocabulary,
    scaler: FeatureScaler,
    params: ParamSet,
    ids: ModelParams,
    rng: ChaCha8Rng,
    optimizer_steps: u64,
}

impl Gcan {
    pub fn new(config: GcanConfig, vocab: Vocabulary, scaler: FeatureScaler) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let ids = ModelParams::allocate(&config, vocab.len(), &mut params, &mut rng);
        Ok(Gcan {
            config,
            vocab,
            scaler,
            params,
            ids,
            rng,
            optimizer_steps: 0,
        })
    }

    /// Builds the vocabulary and feature scaler from `train`, then
    /// initializes parameters.
    pub fn for_training_data(config: GcanConfig, train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidInput("training split is empty".into()));
        }
        let vocab = build_vocab(train, config.min_count.max(1));
        let scaler = FeatureScaler::fit(train);
        Self::new(config, vocab, scaler)
    }

    pub fn config(&self) -> &GcanConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn ids(&self) -> &ModelParams {
        &self.ids
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.optimizer_steps
    }

    pub fn is_trained(&self) -> bool {
        self.optimizer_steps > 0
    }

    pub fn encode(&self, story: &Story) -> Result<EncodedStory> {
        let token_ids = encode_tokens(story, &self.vocab, self.config.m);
        let users = fix_length(&story.retweets, self.config.n)?;
        let features = self.scaler.apply(&users);
        let graph = build_graph(&features)?;
        Ok(EncodedStory {
            story_id: story.story_id.clone(),
            label: story.label,
            source_len: if self.config.mask_padding {
                story.tokens.len().min(self.config.m)
            } else {
                self.config.m
            },
            token_ids,
            features,
            graph,
        })
    }

    pub fn encode_all(&self, data: &Dataset) -> Result<Vec<EncodedStory>> {
        data.stories.iter().map(|s| self.encode(s)).collect()
    }

    /// Records the forward pass for `story` on `tape` using `params`, which
    /// must have the layout of this model's own parameter set.
    pub fn forward_with(
        &self,
        params: &ParamSet,
        tape: &mut Tape,
        story: &EncodedStory,
    ) -> Result<ForwardOutput> {
        let cfg = &self.config;
        let variant = cfg.variant;
        if story.token_ids.len() != cfg.m || story.features.rows() != cfg.n {
            return Err(Error::InvalidInput(format!(
                "story {} is encoded for m={}, n={}; model expects m={}, n={}",
                story.story_id,
                story.token_ids.len(),
                story.features.rows(),
                cfg.m,
                cfg.n
            )));
        }
        let ids = &self.ids;

        let source = if variant.uses_source() {
            let table = tape.param(params, ids.embedding);
            let bias = tape.param(params, ids.embedding_bias);
            let embedded = embed_source(tape, table, bias, &story.token_ids)?;
            Some(ids.source_gru.forward(tape, params, embedded)?)
        } else {
            None
        };

        let pooled = if variant.uses_gru() {
            let seq = tape.constant(story.features.transpose());
            let states = ids.propagation_gru.forward(tape, params, seq)?;
            let h = gru_pool(tape, states);
            Some(tape.transpose(h))
        } else {
            None
        };

        let conv = if variant.uses_cnn() {
            let filters = tape.param(params, ids.cnn_filters);
            let bias = tape.param(params, ids.cnn_bias);
            Some(cnn_forward(
                tape,
                &story.features,
                filters,
                bias,
                cfg.lambda,
            )?)
        } else {
            None
        };

        let graph = if variant.uses_graph() {
            let w0 = tape.param(params, ids.gcn_w0);
            let w1 = tape.param(params, ids.gcn_w1);
            Some(gcn_forward(tape, &story.graph, &story.features, w0, w1)?)
        } else {
            None
        };

        let mut parts: Vec<Var> = Vec::with_capacity(5);
        let mut attention = None;
        if variant.uses_coattention() {
            let s = source.expect("co-attention variants keep the source");
            let mut view = DualCoAttentionView::default();
            if let Some(gv) = graph {
                let out = coattend_masked(tape, params, s, gv, &ids.interaction, story.source_len)?;
                parts.extend([out.s_hat, out.p_hat]);
                view.interaction = Some(out);
            }
            if let Some(cv) = conv {
                let out = coattend_masked(tape, params, s, cv, &ids.propagation, story.source_len)?;
                parts.extend([out.s_hat, out.p_hat]);
                view.propagation = Some(out);
            }
            attention = Some(view);
        } else {
            let mean_row = |tape: &mut Tape, v: Var| {
                let m = tape.mean_columns(v);
                tape.transpose(m)
            };
            match variant {
                Variant::NoCoatt => {
                    let s = source.expect("source kept");
                    let s_mean = mean_row(tape, s);
                    let g_mean = mean_row(tape, graph.expect("graph kept"));
                    let c_mean = mean_row(tape, conv.expect("cnn kept"));
                    parts.extend([s_mean, g_mean, s_mean, c_mean]);
                }
                Variant::NoSourceAndCoatt => {
                    let g_mean = mean_row(tape, graph.expect("graph kept"));
                    let c_mean = mean_row(tape, conv.expect("cnn kept"));
                    parts.extend([g_mean, c_mean]);
                }
                _ => unreachable!("variant {variant} uses co-attention"),
            }
        }
        parts.extend(pooled);

        let feature = tape.concat(&parts)?;
        let width = tape.shape(feature)[1];
        if width != cfg.feature_width() {
            return Err(Error::config(
                "model.variant",
                format!(
                    "{variant} produced width {width}, head expects {}",
                    cfg.feature_width()
                ),
            ));
        }
        let w1 = tape.param(params, ids.head_w1);
        let b1 = tape.param(params, ids.head_b1);
        let w2 = tape.param(params, ids.head_w2);
        let b2 = tape.param(params, ids.head_b2);
        let hidden = tape.matmul(feature, w1)?;
        let hidden = tape.add_row(hidden, b1)?;
        let hidden = tape.relu(hidden);
        let logits = tape.matmul(hidden, w2)?;
        let logits = tape.add_row(logits, b2)?;
        let probs = tape.softmax(logits)?;
        Ok(ForwardOutput {
            probs,
            feature,
            attention,
        })
    }

    pub fn forward(&self, tape: &mut Tape, story: &EncodedStory) -> Result<ForwardOutput> {
        self.forward_with(&self.params, tape, story)
    }

    /// Records forward pass plus loss; used for training and gradient checks.
    pub fn loss_tape(&self, params: &ParamSet, story: &EncodedStory) -> Result<(Tape, Var)> {
        let mut tape = Tape::new();
        let out = self.forward_with(params, &mut tape, story)?;
        let loss = tape.neg_log_pick(out.probs, story.label.index())?;
        Ok((tape, loss))
    }

    /// Forward + backward per story with gradients averaged over the batch,
    /// then one Adam update. Returns the mean loss before the update.
    pub fn train_step(&mut self, batch: &[&EncodedStory]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut params = std::mem::take(&mut self.params);
        params.zero_grad();
        let mut total = 0.0;
        let result = batch.iter().try_for_each(|story| {
            let (tape, loss) = self.loss_tape(&params, story)?;
            total += tape.value(loss).item();
            tape.backward_scaled(loss, &mut params, scale)
        });
        if result.is_ok() {
            adam_step(&mut params, &self.config.adam());
            self.optimizer_steps += 1;
        }
        self.params = params;
        result.map(|_| total * scale)
    }

    /// One pass over `data` in a freshly shuffled order. Returns the mean of
    /// the batch losses.
    pub fn train_epoch(&mut self, data: &[EncodedStory]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidInput("no training stories".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&EncodedStory> = chunk.iter().map(|&i| &data[i]).collect();
            losses.push(self.train_step(&batch)?);
        }
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Trains for the configured number of epochs; returns per-epoch losses.
    pub fn fit(&mut self, data: &[EncodedStory]) -> Result<Vec<f64>> {
        (0..self.config.epochs)
            .map(|_| self.train_epoch(data))
            .collect()
    }

    /// Forward pass without recording gradients; label is the argmax.
    pub fn predict(&self, story: &EncodedStory) -> Result<Prediction> {
        let mut tape = Tape::inference();
        let out = self.forward(&mut tape, story)?;
        let p = tape.value(out.probs);
        let probs = [p.get(0, 0), p.get(0, 1)];
        let label = if probs[1] > probs[0] {
            Label::Fake
        } else {
            Label::True
        };
        let read = |v: Var| tape.value(v).data().to_vec();
        let mut attention = AttentionWeights::default();
        if let Some(view) = out.attention {
            if let Some(o) = view.interaction {
                attention.interaction_words = Some(read(o.a_s));
                attention.interaction_users = Some(read(o.a_p));
            }
            if let Some(o) = view.propagation {
                attention.propagation_words = Some(read(o.a_s));
                attention.propagation_windows = Some(read(o.a_p));
            }
        }
        Ok(Prediction {
            probs,
            label,
            attention,
        })
    }

    pub fn predict_story(&self, story: &Story) -> Result<Prediction> {
        self.predict(&self.encode(story)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            scaler: self.scaler.clone(),
            optimizer_steps: self.optimizer_steps,
            split: None,
            parameters: self
                .params
                .iter()
                .map(|p| NamedTensor {
                    name: p.name.clone(),
                    tensor: p.value.clone(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let mut model = Gcan::new(ckpt.config, ckpt.vocab, ckpt.scaler)?;
        let values: Vec<(String, Tensor)> = ckpt
            .parameters
            .into_iter()
            .map(|p| (p.name, p.tensor))
            .collect();
        model.params.load_values(&values)?;
        model.optimizer_steps = ckpt.optimizer_steps;
        Ok(model)
    }
}

pub const CHECKPOINT_FORMAT: &str = "gcan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    #[serde(flatten)]
    pub tensor: Tensor,
}

/// How the training split was drawn, so evaluation can rebuild the test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub train_fraction: f64,
}

/// Serialized model: config, preprocessing state and every parameter
/// tensor as `(name, shape, row-major values)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: GcanConfig,
    pub vocab: Vocabulary,
    pub scaler: FeatureScaler,
    pub optimizer_steps: u64,
    pub split: Option<SplitRecord>,
    pub parameters: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
