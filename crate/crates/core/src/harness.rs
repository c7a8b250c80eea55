//! Evaluation metrics and experiment orchestration: repeated random splits,
//! early-detection sweeps over the retweeter budget `n`, and the ablation
//! suite.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{split, Dataset, Label};
use crate::error::{Error, Result};
use crate::model::{Gcan, GcanConfig, Variant};

/// Confusion counts with Fake as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    /// `(precision, recall, f1)` for one class. A class with neither support
    /// nor predictions scores 1.
    pub fn class_scores(&self, label: Label) -> (f64, f64, f64) {
        let (tp, fp, fn_) = match label {
            Label::Fake => (self.true_positive, self.false_positive, self.false_negative),
            Label::True => (self.true_negative, self.false_negative, self.false_positive),
        };
        if tp + fp + fn_ == 0 {
            return (1.0, 1.0, 1.0);
        }
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        (precision, recall, f1)
    }
}

/// Accuracy plus macro-averaged precision, recall and F1 over the two
/// classes; fake-class scores are kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fake_precision: f64,
    pub fake_recall: f64,
    pub fake_f1: f64,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        let total = confusion.total();
        if total == 0 {
            return Err(Error::InvalidInput(
                "cannot compute metrics on zero predictions".into(),
            ));
        }
        let fake = confusion.class_scores(Label::Fake);
        let real = confusion.class_scores(Label::True);
        Ok(Metrics {
            accuracy: (confusion.true_positive + confusion.true_negative) as f64 / total as f64,
            precision: (fake.0 + real.0) / 2.0,
            recall: (fake.1 + real.1) / 2.0,
            f1: (fake.2 + real.2) / 2.0,
            fake_precision: fake.0,
            fake_recall: fake.1,
            fake_f1: fake.2,
            confusion,
        })
    }

    pub fn from_labels(predicted: &[Label], actual: &[Label]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &y) in predicted.iter().zip(actual) {
            match (p, y) {
                (Label::Fake, Label::Fake) => c.true_positive += 1,
                (Label::Fake, Label::True) => c.false_positive += 1,
                (Label::True, Label::True) => c.true_negative += 1,
                (Label::True, Label::Fake) => c.false_negative += 1,
            }
        }
        Self::from_confusion(c)
    }
}

/// Metrics of `model`'s argmax predictions on `data`.
pub fn evaluate(model: &Gcan, data: &Dataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::InvalidInput("evaluation set is empty".into()));
    }
    let predicted = data
        .stories
        .iter()
        .map(|s| model.predict_story(s).map(|p| p.label))
        .collect::<Result<Vec<_>>>()?;
    let actual: Vec<Label> = data.stories.iter().map(|s| s.label).collect();
    Metrics::from_labels(&predicted, &actual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessOptions {
    pub repeats: usize,
    pub train_fraction: f64,
    /// Repeat `r` splits and initializes with seed `base_seed + r`.
    pub base_seed: u64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            repeats: 20,
            train_fraction: 0.7,
            base_seed: 0,
        }
    }
}

impl HarnessOptions {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config("harness.repeats", "must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(
                "harness.train_fraction",
                format!("must be in (0, 1), got {}", self.train_fraction),
            ));
        }
        Ok(())
    }

    pub fn seed(&self, repeat: usize) -> u64 {
        self.base_seed.wrapping_add(repeat as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test: Metrics,
}

/// Aggregated scalar metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fake_precision: f64,
    pub fake_recall: f64,
    pub fake_f1: f64,
    pub train_accuracy: f64,
}

impl MetricSummary {
    fn of(r: &RepeatResult) -> Self {
        let m = &r.test;
        MetricSummary {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fake_precision: m.fake_precision,
            fake_recall: m.fake_recall,
            fake_f1: m.fake_f1,
            train_accuracy: r.train_accuracy,
        }
    }

    fn to_array(self) -> [f64; 8] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.fake_precision,
            self.fake_recall,
            self.fake_f1,
            self.train_accuracy,
        ]
    }

    fn from_array(a: [f64; 8]) -> Self {
        MetricSummary {
            accuracy: a[0],
            precision: a[1],
            recall: a[2],
            f1: a[3],
            fake_precision: a[4],
            fake_recall: a[5],
            fake_f1: a[6],
            train_accuracy: a[7],
        }
    }
}

/// Arithmetic mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(repeats: &[RepeatResult]) -> (MetricSummary, MetricSummary) {
    let rows: Vec<[f64; 8]> = repeats
        .iter()
        .map(|r| MetricSummary::of(r).to_array())
        .collect();
    let mut mean = [0.0; 8];
    let mut std = [0.0; 8];
    for j in 0..8 {
        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        (mean[j], std[j]) = mean_std(&column);
    }
    (
        MetricSummary::from_array(mean),
        MetricSummary::from_array(std),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: GcanConfig,
    pub options: HarnessOptions,
    pub seeds: Vec<u64>,
    pub repeats: Vec<RepeatResult>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    /// Not serialized so that reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// A model trained on the training side of one seeded split.
pub struct TrainedSplit {
    pub model: Gcan,
    pub train: Dataset,
    pub test: Dataset,
    pub losses: Vec<f64>,
}

/// Splits with `seed`, then builds and trains a model whose initialization
/// and batch order also use `seed`.
pub fn train_on_split(
    dataset: &Dataset,
    config: &GcanConfig,
    train_fraction: f64,
    seed: u64,
) -> Result<TrainedSplit> {
    let (train, test) = split(dataset, train_fraction, seed)?;
    let config = GcanConfig {
        seed,
        ..config.clone()
    };
    let mut model = Gcan::for_training_data(config, &train)?;
    let encoded = model.encode_all(&train)?;
    let losses = model.fit(&encoded)?;
    Ok(TrainedSplit {
        model,
        train,
        test,
        losses,
    })
}

/// Trains on one split and evaluates on the held-out side.
pub fn run_single(
    dataset: &Dataset,
    config: &GcanConfig,
    train_fraction: f64,
    seed: u64,
    repeat: usize,
) -> Result<RepeatResult> {
    let t = train_on_split(dataset, config, train_fraction, seed)?;
    Ok(RepeatResult {
        repeat,
        seed,
        train_size: t.train.len(),
        test_size: t.test.len(),
        final_loss: t.losses.last().copied().unwrap_or(f64::NAN),
        train_accuracy: evaluate(&t.model, &t.train)?.accuracy,
        test: evaluate(&t.model, &t.test)?,
    })
}

/// Repeated train/test runs; repeats run in parallel and are collected in
/// repeat order.
pub fn run_experiment(
    dataset: &Dataset,
    config: &GcanConfig,
    options: &HarnessOptions,
) -> Result<ExperimentReport> {
    config.validate()?;
    options.validate()?;
    let start = Instant::now();
    let repeats = (0..options.repeats)
        .into_par_iter()
        .map(|r| run_single(dataset, config, options.train_fraction, options.seed(r), r))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = summarize(&repeats);
    Ok(ExperimentReport {
        config: config.clone(),
        options: *options,
        seeds: repeats.iter().map(|r| r.seed).collect(),
        repeats,
        mean,
        std,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

impl ExperimentReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "variant {}  repeats {}  n {}  epochs {}",
            self.config.variant,
            self.repeats.len(),
            self.config.n,
            self.config.epochs
        );
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "repeat", "seed", "train_acc", "accuracy", "precision", "recall", "f1"
        );
        for r in &self.repeats {
            let _ = writeln!(
                out,
                "{:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.repeat,
                r.seed,
                r.train_accuracy,
                r.test.accuracy,
                r.test.precision,
                r.test.recall,
                r.test.f1
            );
        }
        let (m, s) = (&self.mean, &self.std);
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            "mean", "", m.train_accuracy, m.accuracy, m.precision, m.recall, m.f1
        );
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            "std", "", s.train_accuracy, s.accuracy, s.precision, s.recall, s.f1
        );
        let _ = writeln!(out, "wall clock {:.1}s", self.wall_clock_secs);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_f1: f64,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// One full experiment per retweeter budget `n`, retraining each time.
pub fn early_detection_sweep(
    dataset: &Dataset,
    config: &GcanConfig,
    n_values: &[usize],
    options: &HarnessOptions,
) -> Result<SweepReport> {
    if n_values.is_empty() {
        return Err(Error::InvalidInput(
            "sweep needs at least one value of n".into(),
        ));
    }
    let rows = n_values
        .iter()
        .map(|&n| {
            let cfg = GcanConfig {
                n,
                ..config.clone()
            };
            let report = run_experiment(dataset, &cfg, options)?;
            Ok(SweepRow {
                n,
                mean_accuracy: report.mean.accuracy,
                std_accuracy: report.std.accuracy,
                mean_f1: report.mean.f1,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}

impl SweepReport {
    pub fn accuracy_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.mean_accuracy)
    }

    /// Table followed by a horizontal bar chart of mean accuracy.
    pub fn to_text(&self) -> String {
        const WIDTH: usize = 40;
        let mut out = String::new();
        let _ = writeln!(out, "{:>4} {:>9} {:>9} {:>9}", "n", "accuracy", "std", "f1");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>4} {:>9.4} {:>9.4} {:>9.4}",
                r.n, r.mean_accuracy, r.std_accuracy, r.mean_f1
            );
        }
        out.push('\n');
        for r in &self.rows {
            let bar = (r.mean_accuracy.clamp(0.0, 1.0) * WIDTH as f64).round() as usize;
            let _ = writeln!(
                out,
                "{:>4} |{:<WIDTH$}| {:.3}",
                r.n,
                "#".repeat(bar),
                r.mean_accuracy
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub name: String,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// The full model and all six reduced variants on identical seeds.
pub fn ablation_suite(
    dataset: &Dataset,
    config: &GcanConfig,
    options: &HarnessOptions,
) -> Result<AblationReport> {
    ablation_subset(dataset, config, options, &Variant::ALL)
}

pub fn ablation_subset(
    dataset: &Dataset,
    config: &GcanConfig,
    options: &HarnessOptions,
    variants: &[Variant],
) -> Result<AblationReport> {
    let rows = variants
        .iter()
        .map(|&variant| {
            let cfg = GcanConfig {
                variant,
                ..config.clone()
            };
            let report = run_experiment(dataset, &cfg, options)?;
            Ok(AblationRow {
                variant,
                name: variant.short_name().to_string(),
                mean: report.mean,
                std: report.std,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { rows })
}

impl AblationReport {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<20} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "name", "variant", "accuracy", "std", "precision", "recall", "f1"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:<20} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.name,
                r.variant.config_name(),
                r.mean.accuracy,
                r.std.accuracy,
                r.mean.precision,
                r.mean.recall,
                r.mean.f1
            );
        }
        out
    }
}
