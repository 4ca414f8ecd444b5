//! End-to-end evaluation scenarios: split construction, probe training per
//! backbone, scoring, frame and model fusion, and metrics per fold.
//!
//! Four runners share one fold executor:
//!
//! * known attacks: train and test splits of one dataset, with an optional
//!   per-species breakdown of the test set;
//! * leave-one-out: one fold per attack species, held out from training;
//! * cross-database: train on the union of some datasets, test on another;
//! * grouped splits: arbitrary fold families described by record filters.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{
    join_indices, DataError, EmbeddingStore, Label, Manifest, RecordFilter, SampleRecord, Split,
};
use crate::fusion::{fuse_pipeline, video_score, FrameScores, FusionError, FusionRule};
use crate::metrics::{
    aggregate, d_eer, evaluate, HterThreshold, MetricsError, MetricsReport, MetricsSummary,
    ScoreSet,
};
use crate::probe::{predict_all, train_head, ProbeError, TrainConfig};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("fold `{fold}`: {source}")]
    Probe {
        fold: String,
        #[source]
        source: ProbeError,
    },
    #[error("fold `{fold}`: training data for `{backbone}` lacks one of the two classes")]
    SingleClassDataset { fold: String, backbone: String },
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("fold `{fold}`, subset `{subset}`: {source}")]
    Metrics {
        fold: String,
        subset: String,
        #[source]
        source: MetricsError,
    },
    #[error("no records for `{0}`")]
    MissingSplit(String),
    #[error("leave-one-out needs at least two PAI species, got {0}")]
    FewerThanTwoSpecies(usize),
    #[error("dataset `{0}` has no records")]
    DatasetMissing(String),
    #[error("no embedding store for backbone `{0}`")]
    MissingBackbone(String),
    #[error("fold `{fold}`: sample `{sample_id}` is in both train and test")]
    Leakage { fold: String, sample_id: String },
    #[error("invalid protocol: {0}")]
    InvalidSpec(String),
}

fn default_ratio() -> f64 {
    0.6
}

fn default_true() -> bool {
    true
}

/// Which experiment to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    KnownAttack {
        #[serde(default)]
        dataset_id: Option<String>,
        train_split: Split,
        test_split: Split,
        #[serde(default = "default_true")]
        per_species_breakdown: bool,
        /// Species expected in the test set; absent ones are reported as warnings.
        #[serde(default)]
        species: Option<Vec<String>>,
    },
    LeaveOneOut {
        #[serde(default)]
        dataset_id: Option<String>,
        species_list: Vec<String>,
        #[serde(default = "default_ratio")]
        bonafide_split_ratio: f64,
        /// Seed of the bona fide partition; falls back to the training seed.
        #[serde(default)]
        split_seed: Option<u64>,
    },
    CrossDatabase {
        train_dataset_ids: Vec<String>,
        test_dataset_id: String,
        /// Splits of the source datasets used for training; all when absent.
        #[serde(default)]
        train_splits: Option<Vec<Split>>,
        #[serde(default)]
        test_splits: Option<Vec<Split>>,
    },
    GroupedSplits {
        folds: Vec<FoldDefinition>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldDefinition {
    pub fold_id: String,
    pub train: RecordFilter,
    pub test: RecordFilter,
}

/// Threshold used for HTER in protocol runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// D-EER threshold of each test score set.
    #[default]
    TestEer,
    Fixed(f64),
    /// D-EER threshold of the records matching this filter, scored by the
    /// same head (or fused system).
    DevEer(RecordFilter),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default)]
    pub name: String,
    pub protocol: Protocol,
    pub backbone_ids: Vec<String>,
    /// Rules applied across `fusion_backbones`; no fusion when either is empty.
    #[serde(default)]
    pub fusion_rules: Vec<FusionRule>,
    #[serde(default)]
    pub fusion_backbones: Vec<String>,
    #[serde(default)]
    pub threshold: ThresholdPolicy,
    /// Adds frame-level reports next to the video-level ones.
    #[serde(default)]
    pub frame_level: bool,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

impl ProtocolSpec {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::InvalidSpec(m));
        if self.backbone_ids.is_empty() {
            return bad("backbone_ids is empty".into());
        }
        let unique: BTreeSet<_> = self.backbone_ids.iter().collect();
        if unique.len() != self.backbone_ids.len() {
            return bad("backbone_ids contains duplicates".into());
        }
        for b in &self.fusion_backbones {
            if !unique.contains(b) {
                return bad(format!("fusion backbone `{b}` is not in backbone_ids"));
            }
        }
        match &self.protocol {
            Protocol::LeaveOneOut {
                species_list,
                bonafide_split_ratio,
                ..
            } => {
                if species_list.is_empty() {
                    return bad("species_list is empty".into());
                }
                if !(*bonafide_split_ratio > 0.0 && *bonafide_split_ratio < 1.0) {
                    return bad("bonafide_split_ratio must lie in (0, 1)".into());
                }
            }
            Protocol::CrossDatabase {
                train_dataset_ids,
                test_dataset_id,
                ..
            } => {
                if train_dataset_ids.is_empty() {
                    return bad("train_dataset_ids is empty".into());
                }
                if train_dataset_ids.contains(test_dataset_id) {
                    return bad(format!(
                        "test dataset `{test_dataset_id}` is also a training dataset"
                    ));
                }
            }
            Protocol::GroupedSplits { folds } => {
                if folds.is_empty() {
                    return bad("no folds defined".into());
                }
            }
            Protocol::KnownAttack { .. } => {}
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let spec: ProtocolSpec =
            serde_json::from_str(text).map_err(|e| ProtocolError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Metrics of one system (backbone or fused combination) on one test subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system: String,
    pub subset: String,
    pub metrics: MetricsReport,
}

/// What went into a fold, kept for leakage audits. Not serialized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FoldAudit {
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
    pub train_attack_species: BTreeSet<String>,
    pub train_videos: BTreeSet<String>,
    pub test_videos: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: String,
    pub fold_index: usize,
    pub n_train_samples: usize,
    pub n_test_samples: usize,
    pub train_attack_species: Vec<String>,
    /// Final training loss per backbone.
    pub final_losses: BTreeMap<String, f64>,
    pub reports: Vec<SystemReport>,
    #[serde(skip)]
    pub audit: FoldAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub system: String,
    pub subset: String,
    pub summary: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub name: String,
    pub kind: String,
    pub conventions: BTreeMap<String, String>,
    pub train_config: TrainConfig,
    pub folds: Vec<FoldResult>,
    pub aggregate: Vec<AggregateRow>,
    pub warnings: Vec<String>,
}

impl ProtocolResult {
    pub fn report(&self, fold_id: &str, system: &str, subset: &str) -> Option<&MetricsReport> {
        self.folds
            .iter()
            .find(|f| f.fold_id == fold_id)?
            .reports
            .iter()
            .find(|r| r.system == system && r.subset == subset)
            .map(|r| &r.metrics)
    }

    pub fn aggregate_for(&self, system: &str, subset: &str) -> Option<&MetricsSummary> {
        self.aggregate
            .iter()
            .find(|a| a.system == system && a.subset == subset)
            .map(|a| &a.summary)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

/// Inputs shared by every fold.
pub struct ProtocolInputs<'a> {
    pub manifest: &'a Manifest,
    /// Embedding store per backbone id.
    pub stores: &'a BTreeMap<String, EmbeddingStore>,
}

/// Subset of a fold's test videos evaluated as its own score set.
#[derive(Debug, Clone)]
enum Subset {
    All,
    Species(String),
}

impl Subset {
    fn name(&self) -> String {
        match self {
            Subset::All => "overall".into(),
            Subset::Species(s) => format!("species:{s}"),
        }
    }

    fn keeps(&self, info: &VideoInfo) -> bool {
        match (self, info.label) {
            (Subset::All, _) | (_, Label::BonaFide) => true,
            (Subset::Species(s), Label::Attack) => info.species.as_deref() == Some(s.as_str()),
        }
    }
}

struct FoldPlan {
    fold_id: String,
    train: Vec<usize>,
    test: Vec<usize>,
    dev: Vec<usize>,
    subsets: Vec<Subset>,
}

#[derive(Debug, Clone)]
struct VideoInfo {
    label: Label,
    species: Option<String>,
}

pub const SUBSET_OVERALL: &str = "overall";

fn indices_where(manifest: &Manifest, mut keep: impl FnMut(&SampleRecord) -> bool) -> Vec<usize> {
    manifest
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| keep(r))
        .map(|(i, _)| i)
        .collect()
}

fn dataset_matches(dataset_id: &Option<String>, r: &SampleRecord) -> bool {
    dataset_id.as_ref().is_none_or(|d| &r.dataset_id == d)
}

fn dev_indices(manifest: &Manifest, threshold: &ThresholdPolicy) -> Vec<usize> {
    match threshold {
        ThresholdPolicy::DevEer(filter) => indices_where(manifest, |r| filter.matches(r)),
        _ => Vec::new(),
    }
}

/// Known-attack scenario: every test species is also seen in training.
pub fn run_known_attack(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    jobs: usize,
) -> Result<ProtocolResult, ProtocolError> {
    spec.validate()?;
    let Protocol::KnownAttack {
        dataset_id,
        train_split,
        test_split,
        per_species_breakdown,
        species,
    } = &spec.protocol
    else {
        return Err(ProtocolError::InvalidSpec(
            "expected a known_attack protocol".into(),
        ));
    };
    let m = inputs.manifest;
    let train = indices_where(m, |r| {
        r.split == *train_split && dataset_matches(dataset_id, r)
    });
    if train.is_empty() {
        return Err(ProtocolError::MissingSplit(train_split.to_string()));
    }
    let test = indices_where(m, |r| {
        r.split == *test_split && dataset_matches(dataset_id, r)
    });
    if test.is_empty() {
        return Err(ProtocolError::MissingSplit(test_split.to_string()));
    }
    let present: Vec<String> = {
        let mut seen = BTreeSet::new();
        test.iter()
            .filter_map(|&i| m.records()[i].pai_species.clone())
            .filter(|s| seen.insert(s.clone()))
            .collect()
    };
    let mut warnings = Vec::new();
    let mut subsets = Vec::new();
    if *per_species_breakdown {
        let wanted = species.clone().unwrap_or_else(|| present.clone());
        for s in wanted {
            if present.contains(&s) {
                subsets.push(Subset::Species(s));
            } else {
                let w = format!("species `{s}` has no test attacks; per-species report omitted");
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    subsets.push(Subset::All);
    let plan = FoldPlan {
        fold_id: format!("{train_split}->{test_split}"),
        train,
        test,
        dev: dev_indices(m, &spec.threshold),
        subsets,
    };
    let mut result = execute(inputs, spec, config, vec![plan], jobs, "known_attack")?;
    result.warnings.extend(warnings);
    Ok(result)
}

fn partition_key(seed: u64, video_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(video_id.as_bytes());
    h.finalize().into()
}

/// Deterministic split of bona fide videos into (train, test) sets.
///
/// Videos are ordered by a seeded SHA-256 of their id and the first
/// `round(ratio * n)` go to training, clamped so both sides are non-empty
/// whenever there are at least two videos.
pub fn partition_bona_fide(
    videos: &BTreeSet<String>,
    ratio: f64,
    seed: u64,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut keyed: Vec<_> = videos.iter().map(|v| (partition_key(seed, v), v)).collect();
    keyed.sort();
    let n = keyed.len();
    let mut n_train = (ratio * n as f64).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let train = keyed[..n_train].iter().map(|(_, v)| (*v).clone()).collect();
    let test = keyed[n_train..].iter().map(|(_, v)| (*v).clone()).collect();
    (train, test)
}

/// Unknown-species scenario: one fold per species, trained without it.
pub fn run_leave_one_out(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    jobs: usize,
) -> Result<ProtocolResult, ProtocolError> {
    spec.validate()?;
    let Protocol::LeaveOneOut {
        dataset_id,
        species_list,
        bonafide_split_ratio,
        split_seed,
    } = &spec.protocol
    else {
        return Err(ProtocolError::InvalidSpec(
            "expected a leave_one_out protocol".into(),
        ));
    };
    let m = inputs.manifest;
    let present: BTreeSet<String> = m
        .records()
        .iter()
        .filter(|r| dataset_matches(dataset_id, r))
        .filter_map(|r| r.pai_species.clone())
        .collect();
    let usable: Vec<&String> = species_list
        .iter()
        .filter(|s| present.contains(*s))
        .collect();
    if usable.len() < 2 {
        return Err(ProtocolError::FewerThanTwoSpecies(usable.len()));
    }
    if usable.len() != species_list.len() {
        let missing: Vec<_> = species_list
            .iter()
            .filter(|s| !present.contains(*s))
            .collect();
        return Err(ProtocolError::InvalidSpec(format!(
            "species without attack records: {missing:?}"
        )));
    }

    let bona_fide_videos: BTreeSet<String> = m
        .records()
        .iter()
        .filter(|r| r.label == Label::BonaFide && dataset_matches(dataset_id, r))
        .map(|r| r.video_id.clone())
        .collect();
    let seed = split_seed.unwrap_or(config.seed);
    let (bf_train, bf_test) = partition_bona_fide(&bona_fide_videos, *bonafide_split_ratio, seed);

    let dev = dev_indices(m, &spec.threshold);
    let plans = species_list
        .iter()
        .map(|held_out| {
            let is_held_out = |r: &SampleRecord| r.pai_species.as_deref() == Some(held_out);
            let train = indices_where(m, |r| {
                dataset_matches(dataset_id, r)
                    && match r.label {
                        Label::BonaFide => bf_train.contains(&r.video_id),
                        Label::Attack => !is_held_out(r),
                    }
            });
            let test = indices_where(m, |r| {
                dataset_matches(dataset_id, r)
                    && match r.label {
                        Label::BonaFide => bf_test.contains(&r.video_id),
                        Label::Attack => is_held_out(r),
                    }
            });
            FoldPlan {
                fold_id: held_out.clone(),
                train,
                test,
                dev: dev.clone(),
                subsets: vec![Subset::All],
            }
        })
        .collect();
    let mut result = execute(inputs, spec, config, plans, jobs, "leave_one_out")?;
    result.conventions.insert(
        "bona_fide_partition".into(),
        format!(
            "video-level seeded hash, {:.0}% train, shared by all folds (seed {seed})",
            bonafide_split_ratio * 100.0
        ),
    );
    Ok(result)
}

/// Cross-database scenario: train on the union of the source datasets,
/// test on a disjoint target dataset.
pub fn run_cross_database(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    jobs: usize,
) -> Result<ProtocolResult, ProtocolError> {
    spec.validate()?;
    let Protocol::CrossDatabase {
        train_dataset_ids,
        test_dataset_id,
        train_splits,
        test_splits,
    } = &spec.protocol
    else {
        return Err(ProtocolError::InvalidSpec(
            "expected a cross_database protocol".into(),
        ));
    };
    let m = inputs.manifest;
    let present: BTreeSet<&str> = m.records().iter().map(|r| r.dataset_id.as_str()).collect();
    for d in train_dataset_ids
        .iter()
        .chain(std::iter::once(test_dataset_id))
    {
        if !present.contains(d.as_str()) {
            return Err(ProtocolError::DatasetMissing(d.clone()));
        }
    }
    let split_ok = |splits: &Option<Vec<Split>>, r: &SampleRecord| {
        splits.as_ref().is_none_or(|s| s.contains(&r.split))
    };
    let train = indices_where(m, |r| {
        train_dataset_ids.contains(&r.dataset_id) && split_ok(train_splits, r)
    });
    let test = indices_where(m, |r| {
        &r.dataset_id == test_dataset_id && split_ok(test_splits, r)
    });
    let plan = FoldPlan {
        fold_id: format!("{}->{}", train_dataset_ids.join("&"), test_dataset_id),
        train,
        test,
        dev: dev_indices(m, &spec.threshold),
        subsets: vec![Subset::All],
    };
    let mut result = execute(inputs, spec, config, vec![plan], jobs, "cross_database")?;
    result.conventions.insert(
        "training_pool".into(),
        match train_splits {
            None => "all splits of the source datasets".into(),
            Some(s) => format!("splits {s:?} of the source datasets"),
        },
    );
    Ok(result)
}

/// Fold families encoded in the manifest (for example the sub-protocols of a
/// dataset). Folds may share bona fide presentations; only train/test overlap
/// within a fold is forbidden.
pub fn run_grouped_splits(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    jobs: usize,
) -> Result<ProtocolResult, ProtocolError> {
    spec.validate()?;
    let Protocol::GroupedSplits { folds } = &spec.protocol else {
        return Err(ProtocolError::InvalidSpec(
            "expected a grouped_splits protocol".into(),
        ));
    };
    let m = inputs.manifest;
    let dev = dev_indices(m, &spec.threshold);
    let mut plans = Vec::with_capacity(folds.len());
    for def in folds {
        let train = indices_where(m, |r| def.train.matches(r));
        if train.is_empty() {
            return Err(ProtocolError::MissingSplit(format!(
                "{} (train)",
                def.fold_id
            )));
        }
        let test = indices_where(m, |r| def.test.matches(r));
        if test.is_empty() {
            return Err(ProtocolError::MissingSplit(format!(
                "{} (test)",
                def.fold_id
            )));
        }
        plans.push(FoldPlan {
            fold_id: def.fold_id.clone(),
            train,
            test,
            dev: dev.clone(),
            subsets: vec![Subset::All],
        });
    }
    execute(inputs, spec, config, plans, jobs, "grouped_splits")
}

/// Dispatches on the protocol kind. `spec.train` is ignored here: callers
/// resolve the effective configuration and pass it in.
pub fn run_protocol(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    jobs: usize,
) -> Result<ProtocolResult, ProtocolError> {
    match spec.protocol {
        Protocol::KnownAttack { .. } => run_known_attack(inputs, spec, config, jobs),
        Protocol::LeaveOneOut { .. } => run_leave_one_out(inputs, spec, config, jobs),
        Protocol::CrossDatabase { .. } => run_cross_database(inputs, spec, config, jobs),
        Protocol::GroupedSplits { .. } => run_grouped_splits(inputs, spec, config, jobs),
    }
}

fn execute(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    plans: Vec<FoldPlan>,
    jobs: usize,
    kind: &str,
) -> Result<ProtocolResult, ProtocolError> {
    config
        .validate()
        .map_err(|e| ProtocolError::InvalidSpec(e.to_string()))?;
    for b in &spec.backbone_ids {
        if !inputs.stores.contains_key(b) {
            return Err(ProtocolError::MissingBackbone(b.clone()));
        }
    }
    let videos = video_table(inputs.manifest);
    let run = |(k, plan): (usize, &FoldPlan)| run_fold(inputs, spec, config, &videos, k, plan);
    let folds: Vec<FoldResult> = if jobs <= 1 {
        plans
            .iter()
            .enumerate()
            .map(run)
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ProtocolError::InvalidSpec(format!("thread pool: {e}")))?;
        pool.install(|| {
            plans
                .par_iter()
                .enumerate()
                .map(run)
                .collect::<Result<_, _>>()
        })?
    };

    let mut keys: Vec<(String, String)> = Vec::new();
    for f in &folds {
        for r in &f.reports {
            let key = (r.system.clone(), r.subset.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    let mut aggregate_rows = Vec::with_capacity(keys.len());
    for (system, subset) in keys {
        let reports: Vec<&MetricsReport> = folds
            .iter()
            .flat_map(|f| &f.reports)
            .filter(|r| r.system == system && r.subset == subset)
            .map(|r| &r.metrics)
            .collect();
        let summary = aggregate(&reports).map_err(|source| ProtocolError::Metrics {
            fold: "aggregate".into(),
            subset: subset.clone(),
            source,
        })?;
        aggregate_rows.push(AggregateRow {
            system,
            subset,
            summary,
        });
    }

    let mut conventions = BTreeMap::new();
    conventions.insert(
        "decision_rule".into(),
        "attack iff score >= threshold".into(),
    );
    conventions.insert(
        "evaluation_unit".into(),
        "video (mean of frame scores per model)".into(),
    );
    conventions.insert(
        "fusion_order".into(),
        "per-model frame mean, then cross-model rule".into(),
    );
    conventions.insert(
        "hter_threshold".into(),
        match &spec.threshold {
            ThresholdPolicy::TestEer => HterThreshold::TestEer.describe(),
            ThresholdPolicy::Fixed(t) => HterThreshold::Fixed(*t).describe(),
            ThresholdPolicy::DevEer(_) => "d-eer threshold of the dev records".into(),
        },
    );
    conventions.insert("std_estimator".into(), "sample (n - 1)".into());
    conventions.insert(
        "bpcer_at_apcer".into(),
        "minimum BPCER over operating points with APCER <= target".into(),
    );
    conventions.insert("fold_seed".into(), "training seed xor fold index".into());

    Ok(ProtocolResult {
        name: spec.name.clone(),
        kind: kind.to_owned(),
        conventions,
        train_config: config.clone(),
        folds,
        aggregate: aggregate_rows,
        warnings: Vec::new(),
    })
}

fn video_table(manifest: &Manifest) -> HashMap<String, VideoInfo> {
    manifest
        .records()
        .iter()
        .map(|r| {
            (
                r.video_id.clone(),
                VideoInfo {
                    label: r.label,
                    species: r.pai_species.clone(),
                },
            )
        })
        .collect()
}

/// Per-backbone frame scores of one group of records, grouped by video.
type GroupScores = BTreeMap<String, FrameScores>;

fn run_fold(
    inputs: &ProtocolInputs,
    spec: &ProtocolSpec,
    config: &TrainConfig,
    videos: &HashMap<String, VideoInfo>,
    fold_index: usize,
    plan: &FoldPlan,
) -> Result<FoldResult, ProtocolError> {
    let records = inputs.manifest.records();
    let fold = plan.fold_id.as_str();
    let audit = audit_fold(records, plan)?;
    if matches!(spec.threshold, ThresholdPolicy::DevEer(_)) && plan.dev.is_empty() {
        return Err(ProtocolError::MissingSplit(
            "dev (threshold calibration)".into(),
        ));
    }

    let fold_config = TrainConfig {
        seed: config.seed ^ fold_index as u64,
        ..config.clone()
    };

    let mut test_scores = GroupScores::new();
    let mut dev_scores = GroupScores::new();
    let mut test_frames: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut final_losses = BTreeMap::new();

    for backbone in &spec.backbone_ids {
        let store = &inputs.stores[backbone];
        let train_ds = join_indices(inputs.manifest, store, &plan.train)?;
        let (head, log) = train_head(&train_ds, backbone, &fold_config).map_err(|e| match e {
            ProbeError::SingleClassDataset => ProtocolError::SingleClassDataset {
                fold: fold.to_owned(),
                backbone: backbone.clone(),
            },
            source => ProtocolError::Probe {
                fold: fold.to_owned(),
                source,
            },
        })?;
        final_losses.insert(backbone.clone(), log.final_loss);

        let score = |indices: &[usize]| -> Result<Vec<(String, f64)>, ProtocolError> {
            let ds = join_indices(inputs.manifest, store, indices)?;
            let scores = predict_all(&head, &ds).map_err(|source| ProtocolError::Probe {
                fold: fold.to_owned(),
                source,
            })?;
            Ok(ds
                .samples()
                .iter()
                .map(|s| s.record.video_id.clone())
                .zip(scores)
                .collect())
        };
        let group = |frames: &[(String, f64)]| {
            let mut per_video = FrameScores::new();
            for (video, x) in frames {
                per_video.entry(video.clone()).or_default().push(*x);
            }
            per_video
        };

        let frames = score(&plan.test)?;
        test_scores.insert(backbone.clone(), group(&frames));
        if spec.frame_level {
            test_frames.insert(backbone.clone(), frames);
        }
        if !plan.dev.is_empty() {
            dev_scores.insert(backbone.clone(), group(&score(&plan.dev)?));
        }
    }

    let systems = system_video_scores(spec, &test_scores)?;
    let dev_systems = if plan.dev.is_empty() {
        Default::default()
    } else {
        system_video_scores(spec, &dev_scores)?
    };

    let mut reports = Vec::new();
    for (k, (system, scores)) in systems.iter().enumerate() {
        let policy = match &spec.threshold {
            ThresholdPolicy::TestEer => HterThreshold::TestEer,
            ThresholdPolicy::Fixed(t) => HterThreshold::Fixed(*t),
            ThresholdPolicy::DevEer(_) => {
                let dev = score_set(&dev_systems[k].1, videos, &Subset::All);
                let (_, t) = d_eer(&dev).map_err(|source| ProtocolError::Metrics {
                    fold: fold.to_owned(),
                    subset: "dev".into(),
                    source,
                })?;
                HterThreshold::Fixed(t)
            }
        };
        for subset in &plan.subsets {
            let set = score_set(scores, videos, subset);
            let metrics = evaluate(&set, policy).map_err(|source| ProtocolError::Metrics {
                fold: fold.to_owned(),
                subset: subset.name(),
                source,
            })?;
            reports.push(SystemReport {
                system: system.clone(),
                subset: subset.name(),
                metrics,
            });
        }
    }
    for (backbone, frames) in &test_frames {
        let mut set = ScoreSet {
            attack_scores: Vec::new(),
            bonafide_scores: Vec::new(),
        };
        for (video, score) in frames {
            match videos[video].label {
                Label::Attack => set.attack_scores.push(*score),
                Label::BonaFide => set.bonafide_scores.push(*score),
            }
        }
        let metrics =
            evaluate(&set, HterThreshold::TestEer).map_err(|source| ProtocolError::Metrics {
                fold: fold.to_owned(),
                subset: "frames".into(),
                source,
            })?;
        reports.push(SystemReport {
            system: backbone.clone(),
            subset: format!("{SUBSET_OVERALL}@frames"),
            metrics,
        });
    }

    Ok(FoldResult {
        fold_id: plan.fold_id.clone(),
        fold_index,
        n_train_samples: plan.train.len(),
        n_test_samples: plan.test.len(),
        train_attack_species: audit.train_attack_species.iter().cloned().collect(),
        final_losses,
        reports,
        audit,
    })
}

fn audit_fold(records: &[SampleRecord], plan: &FoldPlan) -> Result<FoldAudit, ProtocolError> {
    let mut audit = FoldAudit::default();
    for &i in &plan.train {
        let r = &records[i];
        audit.train_ids.insert(r.sample_id.clone());
        audit.train_videos.insert(r.video_id.clone());
        if let Some(s) = &r.pai_species {
            audit.train_attack_species.insert(s.clone());
        }
    }
    for &i in &plan.test {
        let r = &records[i];
        if audit.train_ids.contains(&r.sample_id) {
            return Err(ProtocolError::Leakage {
                fold: plan.fold_id.clone(),
                sample_id: r.sample_id.clone(),
            });
        }
        audit.test_ids.insert(r.sample_id.clone());
        audit.test_videos.insert(r.video_id.clone());
    }
    for &i in &plan.dev {
        let r = &records[i];
        if audit.test_ids.contains(&r.sample_id) {
            return Err(ProtocolError::Leakage {
                fold: plan.fold_id.clone(),
                sample_id: r.sample_id.clone(),
            });
        }
    }
    Ok(audit)
}

/// Score per video id.
type VideoScores = BTreeMap<String, f64>;

/// Video scores of every evaluated system: each backbone on its own plus
/// one entry per configured fusion rule.
fn system_video_scores(
    spec: &ProtocolSpec,
    frames: &GroupScores,
) -> Result<Vec<(String, VideoScores)>, ProtocolError> {
    let mut out = Vec::new();
    for backbone in &spec.backbone_ids {
        let per_video = frames.get(backbone).cloned().unwrap_or_default();
        let mut scores = BTreeMap::new();
        for (video, f) in &per_video {
            scores.insert(video.clone(), video_score(f, video, backbone)?.score);
        }
        out.push((backbone.clone(), scores));
    }
    if !spec.fusion_backbones.is_empty() {
        for rule in &spec.fusion_rules {
            let fused = fuse_pipeline(frames, &spec.fusion_backbones, *rule)?;
            out.push((rule.system_id(&spec.fusion_backbones), fused));
        }
    }
    Ok(out)
}

fn score_set(
    scores: &BTreeMap<String, f64>,
    videos: &HashMap<String, VideoInfo>,
    subset: &Subset,
) -> ScoreSet {
    let mut set = ScoreSet {
        attack_scores: Vec::new(),
        bonafide_scores: Vec::new(),
    };
    for (video, &score) in scores {
        let info = &videos[video];
        if !subset.keeps(info) {
            continue;
        }
        match info.label {
            Label::Attack => set.attack_scores.push(score),
            Label::BonaFide => set.bonafide_scores.push(score),
        }
    }
    set
}
