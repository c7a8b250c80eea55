mod common;

use common::*;
use gcan::datamodel::Label;
use gcan::harness::{
    ablation_suite, early_detection_sweep, run_experiment, HarnessOptions, Metrics,
};
use gcan::model::{GcanConfig, Variant};
use rand::Rng;

fn quick() -> GcanConfig {
    GcanConfig {
        epochs: 2,
        ..GcanConfig::tiny()
    }
}

fn options(repeats: usize) -> HarnessOptions {
    HarnessOptions {
        repeats,
        train_fraction: 0.7,
        base_seed: 3,
    }
}

#[test]
fn experiment_has_one_row_per_repeat_and_exact_means() {
    let data = toy_dataset(20, 1);
    let report = run_experiment(&data, &quick(), &options(4)).unwrap();
    assert_eq!(report.repeats.len(), 4);
    assert_eq!(report.seeds, vec![3, 4, 5, 6]);
    let mean: f64 = report.repeats.iter().map(|r| r.test.accuracy).sum::<f64>() / 4.0;
    assert!((report.mean.accuracy - mean).abs() < 1e-12);
    let mean_f1: f64 = report.repeats.iter().map(|r| r.test.f1).sum::<f64>() / 4.0;
    assert!((report.mean.f1 - mean_f1).abs() < 1e-12);
    assert!(report.to_text().lines().count() >= 7);
}

#[test]
fn experiment_is_deterministic() {
    let data = toy_dataset(20, 2);
    let a = run_experiment(&data, &quick(), &options(2)).unwrap();
    let b = run_experiment(&data, &quick(), &options(2)).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn overfit_run_records_full_train_accuracy() {
    let data = toy_dataset(8, 3);
    let cfg = GcanConfig {
        epochs: 200,
        learning_rate: 1e-2,
        batch_size: 8,
        ..GcanConfig::tiny()
    };
    let report = run_experiment(&data, &cfg, &options(1)).unwrap();
    assert_eq!(report.repeats[0].train_accuracy, 1.0);
}

#[test]
fn sweep_covers_every_budget_and_resamples() {
    let data = toy_dataset(12, 4);
    let report =
        early_detection_sweep(&data, &quick(), &[10, 20, 30, 40, 50], &options(1)).unwrap();
    assert_eq!(
        report.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        vec![10, 20, 30, 40, 50]
    );
    let text = report.to_text();
    assert_eq!(text.matches('|').count(), 10);
    assert!(early_detection_sweep(&data, &quick(), &[], &options(1)).is_err());
}

#[test]
fn ablation_has_seven_rows_on_shared_seeds() {
    let data = toy_dataset(12, 5);
    let report = ablation_suite(&data, &quick(), &options(1)).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        vec!["GCAN", "GCAN-G", "-A", "-R", "-G", "-C", "-S-A"]
    );
    assert!(report.rows.iter().all(|r| r.report.seeds == vec![3]));
    let g = report.row(Variant::NoGcn).unwrap();
    let gg = report.row(Variant::NoGraph).unwrap();
    assert_eq!(g.mean, gg.mean);
}

#[test]
fn invalid_options_are_rejected() {
    let data = toy_dataset(10, 6);
    let bad = HarnessOptions {
        train_fraction: 1.0,
        ..options(1)
    };
    assert!(run_experiment(&data, &quick(), &bad).is_err());
}

#[test]
fn random_predictor_is_near_chance() {
    let mut rng = rng(7);
    let actual: Vec<Label> = (0..200).map(|i| Label::from_index(i % 2)).collect();
    let accs: Vec<f64> = (0..200)
        .map(|_| {
            let predicted: Vec<Label> = (0..200)
                .map(|_| Label::from_index(rng.random_range(0..2)))
                .collect();
            Metrics::from_labels(&predicted, &actual).unwrap().accuracy
        })
        .collect();
    let within = accs.iter().filter(|a| (*a - 0.5).abs() <= 0.1).count();
    assert!(within >= 198, "{within}");
}
