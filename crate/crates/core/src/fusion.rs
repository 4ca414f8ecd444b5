//! Frame-to-video mean fusion and cross-model score-level fusion.
//!
//! Fusion order: each model's frame scores are first averaged into a video
//! score, then the per-model video scores are combined with MIN, MAX, SUM or
//! AVG. For SUM and AVG the order does not matter; for MIN and MAX it does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("video `{0}` has no frame scores")]
    EmptyFrameList(String),
    #[error("no model scores to fuse")]
    EmptyModelList,
    #[error("video `{video_id}` has no scores from model `{model_id}`")]
    MissingModelForVideo { video_id: String, model_id: String },
    #[error("non-finite score for `{0}`")]
    NonFiniteScore(String),
    #[error("unknown fusion rule `{0}` (expected min, max, sum or avg)")]
    UnknownRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    Min,
    Max,
    Sum,
    Avg,
}

impl FusionRule {
    pub const ALL: [FusionRule; 4] = [
        FusionRule::Min,
        FusionRule::Max,
        FusionRule::Sum,
        FusionRule::Avg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionRule::Min => "MIN",
            FusionRule::Max => "MAX",
            FusionRule::Sum => "SUM",
            FusionRule::Avg => "AVG",
        }
    }

    /// System id of a fused system, e.g. `AVG[dino,clip]`.
    pub fn system_id(self, models: &[String]) -> String {
        format!("{}[{}]", self.name(), models.join(","))
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionRule {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(FusionRule::Min),
            "max" => Ok(FusionRule::Max),
            "sum" => Ok(FusionRule::Sum),
            "avg" | "mean" => Ok(FusionRule::Avg),
            _ => Err(FusionError::UnknownRule(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub model_id: String,
    pub score: f64,
    pub frame_count: usize,
}

/// Mean of a video's frame scores.
pub fn video_score(
    frame_scores: &[f64],
    video_id: &str,
    model_id: &str,
) -> Result<VideoScore, FusionError> {
    if frame_scores.is_empty() {
        return Err(FusionError::EmptyFrameList(video_id.to_owned()));
    }
    if frame_scores.iter().any(|s| !s.is_finite()) {
        return Err(FusionError::NonFiniteScore(video_id.to_owned()));
    }
    Ok(VideoScore {
        video_id: video_id.to_owned(),
        model_id: model_id.to_owned(),
        score: mean(frame_scores),
        frame_count: frame_scores.len(),
    })
}

fn mean(v: &[f64]) -> f64 {
    // constant lists come back exactly
    let first = v[0];
    if v.iter().all(|&x| x == first) {
        return first;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn fuse_models(scores: &[f64], rule: FusionRule) -> Result<f64, FusionError> {
    if scores.is_empty() {
        return Err(FusionError::EmptyModelList);
    }
    Ok(match rule {
        FusionRule::Min => scores.iter().copied().fold(f64::INFINITY, f64::min),
        FusionRule::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        FusionRule::Sum => scores.iter().sum(),
        FusionRule::Avg => scores.iter().sum::<f64>() / scores.len() as f64,
    })
}

/// Frame scores of one model, grouped by video.
pub type FrameScores = BTreeMap<String, Vec<f64>>;

/// Per-model frame-mean video scores fused across `models` with `rule`.
///
/// `per_model` maps model id to that model's frame scores per video. Every
/// video seen in any of the listed models must be present in all of them.
pub fn fuse_pipeline(
    per_model: &BTreeMap<String, FrameScores>,
    models: &[String],
    rule: FusionRule,
) -> Result<BTreeMap<String, f64>, FusionError> {
    if models.is_empty() {
        return Err(FusionError::EmptyModelList);
    }
    let empty = FrameScores::new();
    let videos: BTreeSet<&String> = models
        .iter()
        .flat_map(|m| per_model.get(m).unwrap_or(&empty).keys())
        .collect();
    let mut out = BTreeMap::new();
    for video in videos {
        let mut per_video = Vec::with_capacity(models.len());
        for model in models {
            let frames = per_model
                .get(model)
                .and_then(|f| f.get(video))
                .ok_or_else(|| FusionError::MissingModelForVideo {
                    video_id: video.clone(),
                    model_id: model.clone(),
                })?;
            per_video.push(video_score(frames, video, model)?.score);
        }
        out.insert(video.clone(), fuse_models(&per_video, rule)?);
    }
    Ok(out)
}

/// One line of a score file: a sample or video id, the producing model and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub model_id: String,
    pub score: f64,
}
