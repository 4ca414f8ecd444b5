//! Score-level fusion of two backbones: frame scores are first averaged per
//! video and model, then combined across models with MIN, MAX, SUM or AVG.
//!
//!     cargo run --example fusion

use std::collections::BTreeMap;

use pad_eval::fusion::{fuse_pipeline, FrameScores};
use pad_eval::metrics::{auc, d_eer};
use pad_eval::{FusionRule, ScoreSet};

fn frames(entries: &[(&str, &[f64])]) -> FrameScores {
    entries
        .iter()
        .map(|(v, s)| (v.to_string(), s.to_vec()))
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut per_model = BTreeMap::new();
    per_model.insert(
        "clip".to_string(),
        frames(&[
            ("bf-0", &[0.10, 0.30, 0.20]),
            ("bf-1", &[0.55, 0.45]),
            ("atk-0", &[0.70, 0.90, 0.80]),
            ("atk-1", &[0.35, 0.40]),
        ]),
    );
    per_model.insert(
        "dino".to_string(),
        frames(&[
            ("bf-0", &[0.05, 0.15, 0.10]),
            ("bf-1", &[0.20, 0.30]),
            ("atk-0", &[0.60, 0.50, 0.55]),
            ("atk-1", &[0.65, 0.75]),
        ]),
    );
    let models = vec!["clip".to_string(), "dino".to_string()];

    for rule in FusionRule::ALL {
        let fused = fuse_pipeline(&per_model, &models, rule)?;
        let mut set = ScoreSet::new(Vec::new(), Vec::new())?;
        for (video, score) in &fused {
            if video.starts_with("atk") {
                set.attack_scores.push(*score);
            } else {
                set.bonafide_scores.push(*score);
            }
        }
        let (eer, _) = d_eer(&set)?;
        println!(
            "{:<16} D-EER {:>6.2}%  AUC {:.4}  {:?}",
            rule.system_id(&models),
            100.0 * eer,
            auc(&set)?,
            fused
        );
    }
    Ok(())
}
