//! Evaluation engine for face presentation attack detection (PAD) built on
//! frozen foundation-model embeddings.
//!
//! The pipeline is: embeddings from a frozen encoder are joined with a
//! labelled manifest, a single-neuron logistic probe is trained per backbone,
//! frame scores are mean-fused into video scores, optionally fused across
//! backbones with MIN/MAX/SUM/AVG, and scored with ISO/IEC 30107-3 error
//! rates (APCER, BPCER, D-EER, BPCER@APCER) plus HTER and AUC.
//!
//! Scores are attack likelihoods: a presentation is classified as an attack
//! iff `score >= threshold`.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod data;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod probe;
pub mod protocols;
pub mod report;
pub mod synthetic;

pub use data::{
    EmbeddingStore, Label, LabeledDataset, Manifest, RecordFilter, SampleRecord, Split,
};
pub use fusion::{FusionRule, VideoScore};
pub use metrics::{MetricsReport, ScoreSet};
pub use probe::{ProbeHead, TrainConfig, TrainLog};
pub use protocols::{ProtocolResult, ProtocolSpec};
