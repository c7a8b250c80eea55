//! Synthetic propagation cascades with planted, tunable fake/real signals
//! in both the source text and the retweeter profiles, plus a linear
//! reference classifier over the same data.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    Dataset, FeatureScaler, Label, Provenance, Story, UserRecord, NUM_FEATURES,
};
use crate::error::{Error, Result};
use crate::harness::Metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Even, so labels balance exactly.
    pub n_stories: usize,
    /// Number of neutral filler tokens.
    pub vocab_size: usize,
    /// Mean source length; lengths are uniform in
    /// `tokens_per_story ± tokens_spread`.
    pub tokens_per_story: usize,
    pub tokens_spread: usize,
    pub retweets_min: usize,
    pub retweets_max: usize,
    /// Separation between fake and real distributions, 0 = none.
    pub signal_strength: f64,
    /// Multiplier on `signal_strength` for the text signal.
    pub token_signal: f64,
    /// Multiplier on `signal_strength` for the retweeter-feature signal.
    pub feature_signal: f64,
    /// Tokens over-represented in fake stories.
    pub evidence_tokens: Vec<String>,
    /// Tokens over-represented in real stories.
    pub counter_evidence_tokens: Vec<String>,
    /// Evidence slots per story, each filled from the fake or the real pool.
    pub evidence_per_story: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let words = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect();
        GeneratorConfig {
            n_stories: 500,
            vocab_size: 200,
            tokens_per_story: 13,
            tokens_spread: 4,
            retweets_min: 20,
            retweets_max: 60,
            signal_strength: 0.8,
            token_signal: 1.0,
            feature_signal: 1.0,
            evidence_tokens: words(&["breaking", "shocking", "exposed", "hoax", "leaked"]),
            counter_evidence_tokens: words(&[
                "official",
                "confirmed",
                "report",
                "statement",
                "study",
            ]),
            evidence_per_story: 2,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("generator.{name}");
        if self.n_stories == 0 || !self.n_stories.is_multiple_of(2) {
            return Err(Error::config(
                field("n_stories"),
                "must be a positive even number",
            ));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::config(
                field("signal_strength"),
                format!("must be in [0, 1], got {}", self.signal_strength),
            ));
        }
        for (name, w) in [
            ("token_signal", self.token_signal),
            ("feature_signal", self.feature_signal),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::config(
                    field(name),
                    format!("must be in [0, 1], got {w}"),
                ));
            }
        }
        if self.vocab_size == 0 {
            return Err(Error::config(field("vocab_size"), "must be at least 1"));
        }
        if self.tokens_spread >= self.tokens_per_story {
            return Err(Error::config(
                field("tokens_spread"),
                "must be smaller than tokens_per_story",
            ));
        }
        if self.evidence_per_story > self.tokens_per_story - self.tokens_spread {
            return Err(Error::config(
                field("evidence_per_story"),
                "must fit in the shortest story",
            ));
        }
        if self.retweets_min == 0 || self.retweets_min > self.retweets_max {
            return Err(Error::config(
                field("retweets_min"),
                "need 1 <= retweets_min <= retweets_max",
            ));
        }
        if self.evidence_tokens.is_empty() || self.counter_evidence_tokens.is_empty() {
            return Err(Error::config(
                field("evidence_tokens"),
                "both evidence pools must be non-empty",
            ));
        }
        Ok(())
    }

    fn text_shift(&self) -> f64 {
        self.signal_strength * self.token_signal
    }

    fn feature_shift(&self) -> f64 {
        self.signal_strength * self.feature_signal
    }

    /// Probability that an evidence slot of a story with `label` draws from
    /// the fake pool.
    pub fn fake_pool_probability(&self, label: Label) -> f64 {
        (1.0 + self.text_shift() * sign(label)) / 2.0
    }

    /// Probability that a retweeter of a story with `label` is verified.
    pub fn verified_probability(&self, label: Label) -> f64 {
        0.3 - 0.25 * self.feature_shift() * sign(label)
    }

    /// Probability that a retweeter of a story with `label` retweets the
    /// source directly.
    pub fn direct_retweet_probability(&self, label: Label) -> f64 {
        0.5 + 0.3 * self.feature_shift() * sign(label)
    }
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Fake => 1.0,
        Label::True => -1.0,
    }
}

pub fn neutral_token(i: usize) -> String {
    format!("w{i:03}")
}

fn round_to(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

fn make_user<R: Rng>(cfg: &GeneratorConfig, label: Label, delay: f64, rng: &mut R) -> UserRecord {
    let shift = cfg.feature_shift() * sign(label);
    let normal =
        |mean: f64, sd: f64, rng: &mut R| Normal::new(mean, sd).expect("valid normal").sample(rng);
    let desc = normal(10.0 - 5.0 * shift, 4.0, rng).round().max(0.0);
    let screen = rng.random_range(1..=3) as f64;
    let followers = normal(5.5 - 1.0 * shift, 1.2, rng).exp().round();
    let following = normal(5.5, 1.0, rng).exp().round();
    let stories = normal(7.0 - 0.5 * shift, 1.0, rng).exp().round();
    let age = round_to(normal(900f64.ln() - 1.0 * shift, 0.6, rng).exp(), 3);
    let verified = rng.random_bool(cfg.verified_probability(label));
    let geo = rng.random_bool(0.4);
    let path = if rng.random_bool(cfg.direct_retweet_probability(label)) {
        1.0
    } else {
        rng.random_range(2..=5) as f64
    };
    UserRecord {
        user_id: format!("u{:07}", rng.random_range(0..10_000_000)),
        desc_word_count: desc,
        screen_name_word_count: screen,
        follower_count: followers,
        following_count: following,
        story_count: stories,
        account_age: age,
        is_verified: f64::from(u8::from(verified)),
        geo_enabled: f64::from(u8::from(geo)),
        retweet_delay: round_to(delay, 3),
        path_length: path,
    }
}

fn make_story<R: Rng>(cfg: &GeneratorConfig, index: usize, label: Label, rng: &mut R) -> Story {
    let len = rng.random_range(
        cfg.tokens_per_story - cfg.tokens_spread..=cfg.tokens_per_story + cfg.tokens_spread,
    );
    let mut tokens: Vec<String> = (0..len)
        .map(|_| neutral_token(rng.random_range(0..cfg.vocab_size)))
        .collect();
    let p_fake = cfg.fake_pool_probability(label);
    for pos in sample(rng, len, cfg.evidence_per_story) {
        let pool = if rng.random_bool(p_fake) {
            &cfg.evidence_tokens
        } else {
            &cfg.counter_evidence_tokens
        };
        tokens[pos] = pool[rng.random_range(0..pool.len())].clone();
    }

    let k = rng.random_range(cfg.retweets_min..=cfg.retweets_max);
    let shift = cfg.feature_shift() * sign(label);
    let gaps = Exp::new(1.0 / (30.0 * (1.0 - 0.5 * shift))).expect("positive rate");
    let mut t = 0.0;
    let retweets = (0..k)
        .map(|_| {
            t += gaps.sample(rng);
            make_user(cfg, label, t, rng)
        })
        .collect();
    Story {
        story_id: format!("s{index:05}"),
        label,
        tokens,
        retweets,
    }
}

/// Generates `n_stories` stories alternating fake and real.
pub fn generate(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stories = (0..cfg.n_stories)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Fake } else { Label::True };
            make_story(cfg, i, label, &mut rng)
        })
        .collect();
    Dataset::new(
        stories,
        Provenance {
            source: Some("synthetic".into()),
            seed: Some(cfg.seed),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub metrics: Metrics,
    pub train_accuracy: f64,
    pub n_features: usize,
}

/// Logistic regression on token presence plus the mean scaled retweeter
/// feature vector, trained by full-batch gradient descent.
pub fn oracle_baseline(train: &Dataset, test: &Dataset) -> Result<OracleReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput(
            "oracle baseline needs non-empty splits".into(),
        ));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut tokens: Vec<&str> = train
        .stories
        .iter()
        .flat_map(|s| s.tokens.iter().map(String::as_str))
        .collect();
    tokens.sort_unstable();
    tokens.dedup();
    for (i, t) in tokens.into_iter().enumerate() {
        index.insert(t, i);
    }
    let scaler = FeatureScaler::fit(train);
    let dim = index.len() + NUM_FEATURES;
    let featurize = |s: &Story| {
        let mut x = vec![0.0; dim];
        for t in &s.tokens {
            if let Some(&i) = index.get(t.as_str()) {
                x[i] = 1.0;
            }
        }
        let k = s.retweets.len() as f64;
        for u in &s.retweets {
            for (j, v) in scaler.scale_record(u).into_iter().enumerate() {
                x[index.len() + j] += v / k;
            }
        }
        x
    };
    let xs: Vec<Vec<f64>> = train.stories.iter().map(featurize).collect();
    let ys: Vec<f64> = train
        .stories
        .iter()
        .map(|s| s.label.index() as f64)
        .collect();

    let (lr, l2, iterations) = (0.5, 1e-3, 500);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let n = xs.len() as f64;
    let logit = |w: &[f64], b: f64, x: &[f64]| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    for _ in 0..iterations {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let err = crate::numerics::sigmoid(logit(&w, b, x)) - y;
            for (g, v) in gw.iter_mut().zip(x) {
                *g += err * v;
            }
            gb += err;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * (g / n + l2 * *wi);
        }
        b -= lr * gb / n;
    }
    let predict = |s: &Story| Label::from_index(usize::from(logit(&w, b, &featurize(s)) > 0.0));
    let train_preds: Vec<Label> = train.stories.iter().map(predict).collect();
    let train_labels: Vec<Label> = train.stories.iter().map(|s| s.label).collect();
    let test_preds: Vec<Label> = test.stories.iter().map(predict).collect();
    let test_labels: Vec<Label> = test.stories.iter().map(|s| s.label).collect();
    Ok(OracleReport {
        metrics: Metrics::from_labels(&test_preds, &test_labels)?,
        train_accuracy: Metrics::from_labels(&train_preds, &train_labels)?.accuracy,
        n_features: dim,
    })
}
