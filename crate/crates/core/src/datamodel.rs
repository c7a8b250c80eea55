//! Stories, retweeters and the dataset plumbing around them: JSONL
//! ingestion, vocabulary, fixed-length inputs, feature scaling and splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, LineError, Result};
use crate::numerics::Tensor;

/// Number of per-user features.
pub const NUM_FEATURES: usize = 10;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "desc_word_count",
    "screen_name_word_count",
    "follower_count",
    "following_count",
    "story_count",
    "account_age",
    "is_verified",
    "geo_enabled",
    "retweet_delay",
    "path_length",
];

pub const PAD: usize = 0;
pub const UNKNOWN: usize = 1;

fn default_path_length() -> f64 {
    1.0
}

/// One retweeter and their profile features, in the fixed feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRecord {
    pub user_id: String,
    pub desc_word_count: f64,
    pub screen_name_word_count: f64,
    pub follower_count: f64,
    pub following_count: f64,
    pub story_count: f64,
    /// Time since the account's first story.
    pub account_age: f64,
    pub is_verified: f64,
    pub geo_enabled: f64,
    /// Time between the source post and this retweet.
    pub retweet_delay: f64,
    /// Hops to the source poster, 1 for a direct retweet.
    #[serde(default = "default_path_length")]
    pub path_length: f64,
}

impl UserRecord {
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.desc_word_count,
            self.screen_name_word_count,
            self.follower_count,
            self.following_count,
            self.story_count,
            self.account_age,
            self.is_verified,
            self.geo_enabled,
            self.retweet_delay,
            self.path_length,
        ]
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, value) in FEATURE_NAMES.iter().zip(self.features()) {
            if !value.is_finite() {
                return Err(format!("user {}: {name} is not finite", self.user_id));
            }
            if value < 0.0 {
                return Err(format!(
                    "user {}: {name} must be >= 0, got {value}",
                    self.user_id
                ));
            }
        }
        for (name, value) in [
            ("is_verified", self.is_verified),
            ("geo_enabled", self.geo_enabled),
        ] {
            if value != 0.0 && value != 1.0 {
                return Err(format!(
                    "user {}: {name} must be 0 or 1, got {value}",
                    self.user_id
                ));
            }
        }
        if self.path_length < 1.0 {
            return Err(format!(
                "user {}: path_length must be >= 1, got {}",
                self.user_id, self.path_length
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    True,
    Fake,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::True => 0,
            Label::Fake => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::True
        } else {
            Label::Fake
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::True => "real",
            Label::Fake => "fake",
        })
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::True),
            1 => Ok(Label::Fake),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.index() as u8
    }
}

/// A source tweet with its label and retweeters in retweet-time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Story {
    pub story_id: String,
    pub label: Label,
    pub tokens: Vec<String>,
    pub retweets: Vec<UserRecord>,
}

impl Story {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err(format!("story {}: tokens must be non-empty", self.story_id));
        }
        if self.retweets.is_empty() {
            return Err(format!(
                "story {}: retweets must be non-empty",
                self.story_id
            ));
        }
        self.retweets.iter().try_for_each(UserRecord::validate)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub stories: Vec<Story>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(stories: Vec<Story>, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &stories {
            if !seen.insert(s.story_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate story_id {}",
                    s.story_id
                )));
            }
        }
        Ok(Dataset {
            stories,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stories.is_empty()
    }

    pub fn find(&self, story_id: &str) -> Option<&Story> {
        self.stories.iter().find(|s| s.story_id == story_id)
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.stories {
            counts[s.label.index()] += 1;
        }
        counts
    }

    /// One JSON object per line, LF-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.stories {
            out.push_str(&serde_json::to_string(s).expect("stories serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Parses JSONL text. Every malformed line is reported, not just the
    /// first.
    pub fn parse_jsonl(text: &str, source: &Path) -> Result<Self> {
        let mut stories = Vec::new();
        let mut errors = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Story>(line)
                .map_err(|e| strip_position(&e))
                .and_then(|s| s.validate().map(|_| s));
            match parsed {
                Ok(s) => {
                    if !seen.insert(s.story_id.clone()) {
                        errors.push(LineError {
                            line: line_no,
                            message: format!("duplicate story_id {}", s.story_id),
                        });
                    } else {
                        stories.push(s);
                    }
                }
                Err(message) => errors.push(LineError {
                    line: line_no,
                    message,
                }),
            }
        }
        if !errors.is_empty() {
            return Err(Error::Malformed {
                path: source.to_path_buf(),
                count: errors.len(),
                errors,
            });
        }
        if stories.is_empty() {
            return Err(Error::EmptyDataset(source.to_path_buf()));
        }
        Ok(Dataset {
            stories,
            provenance: Provenance {
                source: Some(source.display().to_string()),
                seed: None,
            },
        })
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text, path)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            stories: indices.iter().map(|&i| self.stories[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

// serde_json appends "at line 1 column N", which is always line 1 here.
fn strip_position(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    match msg.rfind(" at line ") {
        Some(pos) => format!("{} (column {})", &msg[..pos], e.column()),
        None => msg,
    }
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::load_jsonl(path)
}

/// Token index space. 0 is PAD, 1 is UNKNOWN, known tokens start at 2 in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    tokens: Vec<String>,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        Vocabulary::from_tokens(f.tokens)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile { tokens: v.tokens }
    }
}

impl Vocabulary {
    /// `tokens` are the known tokens in index order starting at 2.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 2))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Total index count including PAD and UNKNOWN.
    pub fn len(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn known_tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNKNOWN)
    }

    pub fn token(&self, index: usize) -> &str {
        match index {
            PAD => "<pad>",
            UNKNOWN => "<unk>",
            i => &self.tokens[i - 2],
        }
    }
}

/// Indexes every training token seen at least `min_count` times.
pub fn build_vocab(train: &Dataset, min_count: usize) -> Vocabulary {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &train.stories {
        for t in &s.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let tokens = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    Vocabulary::from_tokens(tokens)
}

/// The first `min(len, m)` token indices followed by PAD up to length `m`.
pub fn encode_tokens(story: &Story, vocab: &Vocabulary, m: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = story
        .tokens
        .iter()
        .take(m)
        .map(|t| vocab.lookup(t))
        .collect();
    ids.resize(m, PAD);
    ids
}

/// Exactly `n` retweeters: the first `n` when there are enough, otherwise
/// the original sequence repeated cyclically.
pub fn fix_length(retweets: &[UserRecord], n: usize) -> Result<Vec<UserRecord>> {
    if retweets.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fix length of an empty retweet list".into(),
        ));
    }
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    Ok(retweets.iter().cycle().take(n).cloned().collect())
}

/// Per-feature min-max scaling learned on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

impl FeatureScaler {
    pub fn fit(train: &Dataset) -> Self {
        let mut min = [f64::INFINITY; NUM_FEATURES];
        let mut max = [f64::NEG_INFINITY; NUM_FEATURES];
        for u in train.stories.iter().flat_map(|s| &s.retweets) {
            for (k, v) in u.features().into_iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        for k in 0..NUM_FEATURES {
            if !min[k].is_finite() {
                min[k] = 0.0;
                max[k] = 0.0;
            }
        }
        FeatureScaler { min, max }
    }

    pub fn scale_value(&self, k: usize, v: f64) -> f64 {
        let range = self.max[k] - self.min[k];
        if range <= 0.0 {
            0.0
        } else {
            ((v - self.min[k]) / range).clamp(0.0, 1.0)
        }
    }

    pub fn scale_record(&self, u: &UserRecord) -> [f64; NUM_FEATURES] {
        let mut out = u.features();
        for (k, v) in out.iter_mut().enumerate() {
            *v = self.scale_value(k, *v);
        }
        out
    }

    /// Scaled `records.len() × 10` feature matrix.
    pub fn apply(&self, records: &[UserRecord]) -> Tensor {
        let rows: Vec<Vec<f64>> = records
            .iter()
            .map(|u| self.scale_record(u).to_vec())
            .collect();
        Tensor::from_rows(&rows).expect("records must be non-empty")
    }
}

pub fn fit_scaler(train: &Dataset) -> FeatureScaler {
    FeatureScaler::fit(train)
}

pub fn apply_scaler(scaler: &FeatureScaler, records: &[UserRecord]) -> Tensor {
    scaler.apply(records)
}

/// Number of training items for a split of `n` with fraction `f`: `⌈f·n⌉`,
/// tolerant of representation error in `f` (0.7 · 10 is 7, not 8).
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    let exact = train_fraction * n as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Seeded random partition into `(train, test)`; each side keeps the
/// original story order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(
            "train_fraction",
            format!("must be in (0, 1), got {train_fraction}"),
        ));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = train_size(dataset.len(), train_fraction);
    let mut train_idx = order[..k].to_vec();
    let mut test_idx = order[k..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((dataset.subset(&train_idx), dataset.subset(&test_idx)))
}
