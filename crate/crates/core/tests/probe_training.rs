mod common;

use common::{fixture, oracle, split_by_label};
use pad_eval::data::{join, load_embeddings, load_manifest};
use pad_eval::metrics::d_eer;
use pad_eval::probe::{balanced_batches, predict_all, train_head, ProbeError};
use pad_eval::synthetic::two_gaussians;
use pad_eval::{Label, LabeledDataset, RecordFilter, Split, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gauss16() -> (LabeledDataset, LabeledDataset) {
    let m = load_manifest(&fixture("gauss16/manifest.jsonl")).unwrap();
    let s = load_embeddings(&fixture("gauss16/probe.bin")).unwrap();
    let train = join(&m, &s, &RecordFilter::all().split(Split::Train)).unwrap();
    let test = join(&m, &s, &RecordFilter::all().split(Split::Test)).unwrap();
    (train, test)
}

fn test_eer(head: &pad_eval::ProbeHead, test: &LabeledDataset) -> f64 {
    let scores = predict_all(head, test).unwrap();
    d_eer(&split_by_label(&scores, test)).unwrap().0
}

#[test]
fn loss_is_non_increasing_after_warmup() {
    let (train, _) = gauss16();
    let (_, log) = train_head(&train, "probe", &TrainConfig::default()).unwrap();
    assert_eq!(log.epoch_losses.len(), 50);
    for (e, w) in log.epoch_losses.windows(2).enumerate().skip(2) {
        assert!(w[1] <= w[0], "epoch {} loss {} > {}", e + 1, w[1], w[0]);
    }
    assert!(log.final_loss < log.epoch_losses[0]);
}

#[test]
fn separable_data_reaches_low_loss_and_error() {
    let (train, test) = gauss16();
    let config = TrainConfig {
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let (head, log) = train_head(&train, "probe", &config).unwrap();
    assert!(log.final_loss < 0.05, "final loss {}", log.final_loss);
    assert!(test_eer(&head, &test) < 0.01);
}

#[test]
fn default_config_still_separates_test_data() {
    let (train, test) = gauss16();
    let (head, _) = train_head(&train, "probe", &TrainConfig::default()).unwrap();
    assert!(test_eer(&head, &test) < 0.01);
}

#[test]
fn probe_agrees_with_reference_logistic_regression() {
    let (train, test) = gauss16();
    let config = TrainConfig {
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let (head, _) = train_head(&train, "probe", &config).unwrap();

    let xs: Vec<Vec<f64>> = train
        .samples()
        .iter()
        .map(|s| s.embedding.iter().map(|&v| v as f64).collect())
        .collect();
    let ys: Vec<f64> = train
        .samples()
        .iter()
        .map(|s| s.record.label.target())
        .collect();
    let (w, b) = oracle::logistic_regression(&xs, &ys, 0.5, 300);

    let dot: f64 = w.iter().zip(&head.weights).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = dot / (norm(&w) * norm(&head.weights));
    assert!(cosine > 0.95, "cosine similarity {cosine}");

    let reference: Vec<f64> = test
        .samples()
        .iter()
        .map(|s| {
            let z: f64 = w
                .iter()
                .zip(&s.embedding)
                .map(|(w, x)| w * *x as f64)
                .sum::<f64>()
                + b;
            oracle::logistic(z)
        })
        .collect();
    let ref_eer = d_eer(&split_by_label(&reference, &test)).unwrap().0;
    assert!((ref_eer - test_eer(&head, &test)).abs() < 0.01);
}

#[test]
fn training_is_deterministic_per_seed() {
    let ds = two_gaussians(6, 90, 1.2, 4);
    let config = TrainConfig {
        epochs: 5,
        batch_size: 16,
        seed: 77,
        ..TrainConfig::default()
    };
    let a = train_head(&ds, "x", &config).unwrap();
    let b = train_head(&ds, "x", &config).unwrap();
    assert_eq!(a, b);
    let c = train_head(&ds, "x", &TrainConfig { seed: 78, ..config }).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn invalid_configs_and_single_class_are_rejected() {
    let ds = two_gaussians(3, 10, 1.0, 1);
    for config in [
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            batch_size: 3,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: f64::NAN,
            ..TrainConfig::default()
        },
    ] {
        assert!(matches!(
            train_head(&ds, "x", &config),
            Err(ProbeError::InvalidConfig(_))
        ));
    }
    let bona_fide_only: Vec<_> = ds
        .samples()
        .iter()
        .filter(|s| s.record.label == Label::BonaFide)
        .cloned()
        .collect();
    let one_class = LabeledDataset::new(3, bona_fide_only).unwrap();
    let err = train_head(&one_class, "x", &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, ProbeError::SingleClassDataset), "{err}");
}

#[test]
fn batches_are_balanced_on_imbalanced_data() {
    let ds = two_gaussians(2, 50, 1.0, 3);
    // keep 50 bona fide and 7 attacks
    let mut attacks = 0;
    let samples: Vec<_> = ds
        .samples()
        .iter()
        .filter(|s| {
            s.record.label == Label::BonaFide || {
                attacks += 1;
                attacks <= 7
            }
        })
        .cloned()
        .collect();
    let ds = LabeledDataset::new(2, samples).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batches = balanced_batches(&ds, 16, &mut rng).unwrap();
    assert_eq!(batches.len(), 50usize.div_ceil(8));
    let mut seen_bf = std::collections::BTreeSet::<usize>::new();
    for b in &batches {
        assert_eq!(b.len(), 16);
        let n_attack = b
            .iter()
            .filter(|&&i| ds.samples()[i].record.label == Label::Attack)
            .count();
        assert_eq!(n_attack, 8);
        seen_bf.extend(
            b.iter()
                .copied()
                .filter(|&i| ds.samples()[i].record.label == Label::BonaFide),
        );
    }
    assert_eq!(seen_bf.len(), 50, "every majority sample appears");
}
