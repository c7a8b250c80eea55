//! Attention reports built from the source-propagation co-attention: ranked
//! source words, per-retweeter weights along the propagation order, and
//! profiles of the most-attended retweeters.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::{fix_length, Label, Story, UserRecord, PAD, UNKNOWN};
use crate::error::{Error, Result};
use crate::model::Gcan;

pub const REPORT_VERSION: u32 = 1;

/// How window attention becomes per-user attention.
pub const USER_WEIGHT_MAPPING: &str = "window-uniform-spread";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordWeight {
    pub token: String,
    pub position: usize,
    pub weight: f64,
    /// False when the token was outside the training vocabulary.
    pub in_vocabulary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserWeight {
    /// Position in the fixed-length retweeter sequence.
    pub position: usize,
    /// Index into the story's original retweet list.
    pub retweet_index: usize,
    pub user_id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspiciousUser {
    pub position: usize,
    pub weight: f64,
    pub profile: UserRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub user_weight_mapping: String,
    pub lambda: usize,
    pub n: usize,
    pub m: usize,
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionReport {
    pub report_version: u32,
    pub story_id: String,
    pub label: Label,
    pub predicted: Label,
    pub probabilities: [f64; 2],
    /// Set when the model has never taken an optimizer step.
    pub untrained: bool,
    /// Non-PAD words, renormalized, heaviest first.
    pub word_weights: Vec<WordWeight>,
    /// The `top_k` heaviest words excluding out-of-vocabulary tokens.
    pub top_words: Vec<WordWeight>,
    /// One entry per retweeter position, in propagation order.
    pub user_weights: Vec<UserWeight>,
    pub top_suspicious_users: Vec<SuspiciousUser>,
    pub metadata: ReportMetadata,
}

/// Spreads each window's weight evenly over its `width` users and
/// renormalizes, giving `windows.len() + width − 1` user weights.
pub fn windows_to_users(windows: &[f64], width: usize) -> Vec<f64> {
    let mut users = vec![0.0; windows.len() + width - 1];
    for (w, &a) in windows.iter().enumerate() {
        for u in &mut users[w..w + width] {
            *u += a / width as f64;
        }
    }
    let total: f64 = users.iter().sum();
    if total > 0.0 {
        users.iter_mut().for_each(|u| *u /= total);
    }
    users
}

fn by_weight_desc<T>(items: &mut [T], weight: impl Fn(&T) -> f64) {
    items.sort_by(|a, b| weight(b).total_cmp(&weight(a)));
}

pub fn explain_story(model: &Gcan, story: &Story, top_k: usize) -> Result<AttentionReport> {
    let cfg = model.config();
    let encoded = model.encode(story)?;
    let prediction = model.predict(&encoded)?;
    let (Some(words), Some(windows)) = (
        prediction.attention.propagation_words.as_ref(),
        prediction.attention.propagation_windows.as_ref(),
    ) else {
        return Err(Error::InvalidInput(format!(
            "variant {} has no source-propagation co-attention to explain",
            cfg.variant
        )));
    };

    let kept: Vec<usize> = (0..words.len())
        .filter(|&i| encoded.token_ids[i] != PAD)
        .collect();
    let kept_total: f64 = kept.iter().map(|&i| words[i]).sum();
    let mut word_weights: Vec<WordWeight> = kept
        .iter()
        .map(|&i| WordWeight {
            token: story.tokens[i].clone(),
            position: i,
            weight: words[i] / kept_total,
            in_vocabulary: encoded.token_ids[i] != UNKNOWN,
        })
        .collect();
    by_weight_desc(&mut word_weights, |w| w.weight);
    let top_words = word_weights
        .iter()
        .filter(|w| w.in_vocabulary)
        .take(top_k)
        .cloned()
        .collect();

    let users = fix_length(&story.retweets, cfg.n)?;
    let per_user = windows_to_users(windows, cfg.lambda);
    let user_weights: Vec<UserWeight> = per_user
        .iter()
        .enumerate()
        .map(|(position, &weight)| UserWeight {
            position,
            retweet_index: position % story.retweets.len(),
            user_id: users[position].user_id.clone(),
            weight,
        })
        .collect();
    let mut ranked: Vec<&UserWeight> = user_weights.iter().collect();
    by_weight_desc(&mut ranked, |u| u.weight);
    let top_suspicious_users = ranked
        .into_iter()
        .take(top_k)
        .map(|u| SuspiciousUser {
            position: u.position,
            weight: u.weight,
            profile: users[u.position].clone(),
        })
        .collect();

    Ok(AttentionReport {
        report_version: REPORT_VERSION,
        story_id: story.story_id.clone(),
        label: story.label,
        predicted: prediction.label,
        probabilities: prediction.probs,
        untrained: !model.is_trained(),
        word_weights,
        top_words,
        user_weights,
        top_suspicious_users,
        metadata: ReportMetadata {
            user_weight_mapping: USER_WEIGHT_MAPPING.to_string(),
            lambda: cfg.lambda,
            n: cfg.n,
            m: cfg.m,
            variant: cfg.variant.config_name().to_string(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::Unknown {
                kind: "report format",
                value: other.to_string(),
            }),
        }
    }
}

/// Glyphs from lightest to darkest.
pub const HEAT_GLYPHS: &[u8] = b" .:-=+*#%@";

/// One glyph per weight, scaled against the largest weight.
pub fn heat_strip(weights: &[f64]) -> String {
    let max = weights.iter().copied().fold(0.0, f64::max);
    weights
        .iter()
        .map(|&w| {
            let level = if max > 0.0 {
                (w / max * (HEAT_GLYPHS.len() - 1) as f64).round() as usize
            } else {
                0
            };
            HEAT_GLYPHS[level.min(HEAT_GLYPHS.len() - 1)] as char
        })
        .collect()
}

pub fn render_report(report: &AttentionReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        ReportFormat::Text => Ok(render_text(report)),
    }
}

fn render_text(r: &AttentionReport) -> String {
    const BAR: f64 = 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "story {}  label {}  predicted {}  p(fake) {:.4}{}",
        r.story_id,
        r.label,
        r.predicted,
        r.probabilities[1],
        if r.untrained { "  [untrained]" } else { "" }
    );
    let _ = writeln!(out, "\nwords");
    let max = r.word_weights.first().map_or(0.0, |w| w.weight);
    for w in &r.word_weights {
        let len = if max > 0.0 {
            (w.weight / max * BAR).round() as usize
        } else {
            0
        };
        let _ = writeln!(
            out,
            "  {:<16} {:>7.4} {}",
            w.token,
            w.weight,
            "#".repeat(len)
        );
    }
    let weights: Vec<f64> = r.user_weights.iter().map(|u| u.weight).collect();
    let _ = writeln!(out, "\nretweeters ({})", r.metadata.user_weight_mapping);
    let _ = writeln!(out, "  [{}]", heat_strip(&weights));
    let _ = writeln!(out, "\nmost attended retweeters");
    for u in &r.top_suspicious_users {
        let p = &u.profile;
        let _ = writeln!(
            out,
            "  #{:<3} {:<10} w {:.4}  verified {}  age {:.0}  desc {}  followers {}  path {}",
            u.position,
            p.user_id,
            u.weight,
            p.is_verified,
            p.account_age,
            p.desc_word_count,
            p.follower_count,
            p.path_length
        );
    }
    out
}
