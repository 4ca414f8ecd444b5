//! Train a logistic probe on two synthetic Gaussian clusters and score a
//! held-out set; then repeat with shuffled labels as a chance-level baseline.
//! With shuffled labels the D-EER on the training data itself should sit
//! near 50%; the clean test set stays separable along whatever direction the
//! head happened to drift in, so its D-EER is meaningless there.
//!
//!     cargo run --release --example train_probe

use pad_eval::metrics::{evaluate, HterThreshold};
use pad_eval::probe::{predict_all, train_head};
use pad_eval::synthetic::{permute_labels, two_gaussians};
use pad_eval::{Label, LabeledDataset, ScoreSet, TrainConfig};

fn score_set(scores: &[f64], ds: &LabeledDataset) -> ScoreSet {
    let mut set = ScoreSet::new(Vec::new(), Vec::new()).unwrap();
    for (s, x) in ds.samples().iter().zip(scores) {
        match s.record.label {
            Label::Attack => set.attack_scores.push(*x),
            Label::BonaFide => set.bonafide_scores.push(*x),
        }
    }
    set
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = two_gaussians(16, 500, 0.3, 1);
    let test = two_gaussians(16, 500, 0.3, 2);
    let config = TrainConfig::default();
    println!("config: {config:?}");

    for (name, train_ds) in [
        ("true labels", train.clone()),
        ("permuted labels", permute_labels(&train, 7)),
    ] {
        let (head, log) = train_head(&train_ds, "gauss16", &config)?;
        let test_report = evaluate(
            &score_set(&predict_all(&head, &test)?, &test),
            HterThreshold::TestEer,
        )?;
        let train_report = evaluate(
            &score_set(&predict_all(&head, &train_ds)?, &train_ds),
            HterThreshold::TestEer,
        )?;
        println!(
            "{name:>16}: loss {:.4} -> {:.4}, train D-EER {:.2}%, test D-EER {:.2}%, test AUC {:.4}",
            log.epoch_losses[0],
            log.final_loss,
            100.0 * train_report.d_eer,
            100.0 * test_report.d_eer,
            test_report.auc
        );
    }
    Ok(())
}
