//! Manifests, embedding stores and the joined, labelled datasets the probe
//! trains on.
//!
//! Two on-disk formats live here:
//!
//! * **Manifest**: UTF-8 text, one JSON object per line with the keys
//!   `sample_id`, `video_id`, `frame_index`, `dataset_id`, `label`
//!   (`"bona_fide"` or `"attack"`), `pai_species` and `split`. Unknown keys
//!   are ignored.
//! * **Embedding store**: a little-endian binary container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PADE"
//! 4       2     format_version (u16, = 1)
//! 6       4     dim (u32)
//! 10      8     count (u64)
//! 18      ...   count records: u16 id length, UTF-8 id, dim x f32
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::write_atomic;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"PADE";
pub const EMBEDDING_FORMAT_VERSION: u16 = 1;
pub const EMBEDDING_HEADER_LEN: usize = 18;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),
    #[error("video `{0}` maps to more than one (dataset, label, species) triple")]
    InconsistentVideoLabel(String),
    #[error("bad magic bytes, not an embedding store")]
    BadMagic,
    #[error("unsupported embedding format version {0}")]
    UnsupportedVersion(u16),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("embedding file is truncated")]
    TruncatedFile,
    #[error("embedding file has {0} trailing bytes after the declared records")]
    TrailingBytes(usize),
    #[error("embedding for `{0}` contains a non-finite value")]
    NonFiniteValue(String),
    #[error("sample id `{0}` is not valid UTF-8 or exceeds 65535 bytes")]
    BadSampleId(String),
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("refusing to write an empty embedding store")]
    EmptyStore,
    #[error("no embedding for sample `{0}`")]
    MissingEmbedding(String),
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Ground-truth class of a presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    BonaFide,
    Attack,
}

impl Label {
    /// Binary target used by the probe: attack = 1, bona fide = 0.
    pub fn target(self) -> f64 {
        match self {
            Label::BonaFide => 0.0,
            Label::Attack => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::BonaFide => "bona_fide",
            Label::Attack => "attack",
        })
    }
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
    #[default]
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One frame (or image) of one presentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub video_id: String,
    pub frame_index: u64,
    pub dataset_id: String,
    pub label: Label,
    /// Presentation attack instrument species; `None` for bona fide.
    #[serde(
        default,
        serialize_with = "ser_species",
        deserialize_with = "de_species"
    )]
    pub pai_species: Option<String>,
    #[serde(default)]
    pub split: Split,
}

fn ser_species<S: serde::Serializer>(v: &Option<String>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(v.as_deref().unwrap_or(""))
}

fn de_species<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let v: Option<String> = Option::deserialize(d)?;
    Ok(v.filter(|s| !s.is_empty()))
}

impl SampleRecord {
    pub fn bona_fide(sample_id: &str, video_id: &str, frame_index: u64, dataset_id: &str) -> Self {
        SampleRecord {
            sample_id: sample_id.to_owned(),
            video_id: video_id.to_owned(),
            frame_index,
            dataset_id: dataset_id.to_owned(),
            label: Label::BonaFide,
            pai_species: None,
            split: Split::Unassigned,
        }
    }

    pub fn attack(
        sample_id: &str,
        video_id: &str,
        frame_index: u64,
        dataset_id: &str,
        species: &str,
    ) -> Self {
        SampleRecord {
            label: Label::Attack,
            pai_species: Some(species.to_owned()),
            ..Self::bona_fide(sample_id, video_id, frame_index, dataset_id)
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    fn check(&self) -> Result<(), String> {
        if self.sample_id.is_empty() {
            return Err("empty sample_id".into());
        }
        if self.label == Label::BonaFide && self.pai_species.is_some() {
            return Err(format!(
                "bona fide record `{}` carries a PAI species",
                self.sample_id
            ));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct VersionLine {
    format_version: u32,
}

/// Ordered list of sample records with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub format_version: u32,
    records: Vec<SampleRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            records: Vec::new(),
        }
    }
}

impl Manifest {
    /// Builds a manifest, enforcing every record and cross-record invariant.
    pub fn new(records: Vec<SampleRecord>) -> Result<Self, DataError> {
        for (i, r) in records.iter().enumerate() {
            r.check().map_err(|reason| DataError::MalformedLine {
                line: i + 1,
                reason,
            })?;
        }
        validate_records(&records)?;
        Ok(Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            records,
        })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenates manifests, e.g. one per source dataset.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a Manifest>) -> Result<Self, DataError> {
        let records = parts
            .into_iter()
            .flat_map(|m| m.records.iter().cloned())
            .collect();
        Manifest::new(records)
    }

    /// Label of a video, or of a single sample when `id` is a sample id.
    pub fn label_of(&self, id: &str) -> Option<Label> {
        self.records
            .iter()
            .find(|r| r.video_id == id)
            .or_else(|| self.records.iter().find(|r| r.sample_id == id))
            .map(|r| r.label)
    }

    /// Distinct attack species in first-appearance order.
    pub fn species(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if let Some(s) = &r.pai_species {
                if seen.insert(s.clone()) {
                    out.push(s.clone());
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut records = Vec::new();
        let mut format_version = MANIFEST_FORMAT_VERSION;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(trimmed).map_err(|e| DataError::MalformedLine {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            if value.get("sample_id").is_none() && value.get("format_version").is_some() {
                let v: VersionLine =
                    serde_json::from_value(value).map_err(|e| DataError::MalformedLine {
                        line: line_no,
                        reason: e.to_string(),
                    })?;
                format_version = v.format_version;
                continue;
            }
            let record: SampleRecord =
                serde_json::from_value(value).map_err(|e| DataError::MalformedLine {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            record.check().map_err(|reason| DataError::MalformedLine {
                line: line_no,
                reason,
            })?;
            records.push(record);
        }
        validate_records(&records)?;
        Ok(Manifest {
            format_version,
            records,
        })
    }

    pub fn to_json_lines(&self) -> String {
        crate::io::to_json_lines(&self.records).expect("records serialize")
    }
}

fn validate_records(records: &[SampleRecord]) -> Result<(), DataError> {
    let mut ids = BTreeSet::new();
    let mut videos: HashMap<&str, (&str, Label, Option<&str>)> = HashMap::new();
    for r in records {
        if !ids.insert(r.sample_id.as_str()) {
            return Err(DataError::DuplicateSampleId(r.sample_id.clone()));
        }
        let key = (r.dataset_id.as_str(), r.label, r.pai_species.as_deref());
        match videos.get(r.video_id.as_str()) {
            Some(existing) if *existing != key => {
                return Err(DataError::InconsistentVideoLabel(r.video_id.clone()))
            }
            Some(_) => {}
            None => {
                videos.insert(r.video_id.as_str(), key);
            }
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    Manifest::parse(&text)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), DataError> {
    write_atomic(path, manifest.to_json_lines().as_bytes()).map_err(|e| DataError::io(path, e))
}

/// Fixed-dimension embeddings keyed by sample id, kept in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    values: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::ZeroDim);
        }
        Ok(EmbeddingStore {
            dim,
            ids: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn insert(&mut self, sample_id: &str, vector: &[f32]) -> Result<(), DataError> {
        if vector.len() != self.dim {
            return Err(DataError::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if sample_id.len() > u16::MAX as usize {
            return Err(DataError::BadSampleId(sample_id.to_owned()));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteValue(sample_id.to_owned()));
        }
        if self.index.contains_key(sample_id) {
            return Err(DataError::DuplicateSampleId(sample_id.to_owned()));
        }
        self.index.insert(sample_id.to_owned(), self.ids.len());
        self.ids.push(sample_id.to_owned());
        self.values.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, sample_id: &str) -> Option<&[f32]> {
        self.index
            .get(sample_id)
            .map(|&k| &self.values[k * self.dim..(k + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(self.values.chunks_exact(self.dim))
            .map(|(id, v)| (id.as_str(), v))
    }

    /// Appends every entry of `other`; dims must agree and ids must not collide.
    pub fn extend_from(&mut self, other: &EmbeddingStore) -> Result<(), DataError> {
        for (id, v) in other.iter() {
            self.insert(id, v)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, DataError> {
        if self.is_empty() {
            return Err(DataError::EmptyStore);
        }
        let dim = u32::try_from(self.dim).map_err(|_| DataError::DimMismatch {
            expected: u32::MAX as usize,
            actual: self.dim,
        })?;
        let payload: usize =
            self.ids.iter().map(|id| 2 + id.len()).sum::<usize>() + self.values.len() * 4;
        let mut out = Vec::with_capacity(EMBEDDING_HEADER_LEN + payload);
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if bytes.len() < 4 {
            return Err(if EMBEDDING_MAGIC.starts_with(bytes) {
                DataError::TruncatedFile
            } else {
                DataError::BadMagic
            });
        }
        if cur.take(4)? != EMBEDDING_MAGIC {
            return Err(DataError::BadMagic);
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != EMBEDDING_FORMAT_VERSION {
            return Err(DataError::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(cur.array()?) as usize;
        let count = u64::from_le_bytes(cur.array()?);
        let mut store = EmbeddingStore::new(dim)?;
        let mut vector = vec![0f32; dim];
        for _ in 0..count {
            let len = u16::from_le_bytes(cur.array()?) as usize;
            let raw = cur.take(len)?;
            let id = std::str::from_utf8(raw)
                .map_err(|_| DataError::BadSampleId(String::from_utf8_lossy(raw).into_owned()))?;
            let payload = cur.take(dim * 4)?;
            for (slot, chunk) in vector.iter_mut().zip(payload.chunks_exact(4)) {
                *slot = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            }
            store.insert(id, &vector)?;
        }
        let rest = bytes.len() - cur.pos;
        if rest != 0 {
            return Err(DataError::TrailingBytes(rest));
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self.pos.checked_add(n).ok_or(DataError::TruncatedFile)?;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or(DataError::TruncatedFile)?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DataError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
}

pub fn write_embeddings(store: &EmbeddingStore, path: &Path) -> Result<(), DataError> {
    let bytes = store.to_bytes()?;
    write_atomic(path, &bytes).map_err(|e| DataError::io(path, e))
}

/// Record selection used by `join` and by the protocol runners.
///
/// Every populated criterion must match. Species criteria only constrain
/// attack records; bona fide records carry no species and always pass them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordFilter {
    pub splits: Option<Vec<Split>>,
    pub dataset_ids: Option<Vec<String>>,
    pub labels: Option<Vec<Label>>,
    pub include_species: Option<Vec<String>>,
    pub exclude_species: Vec<String>,
}

impl RecordFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn split(mut self, split: Split) -> Self {
        self.splits.get_or_insert_with(Vec::new).push(split);
        self
    }

    pub fn dataset(mut self, id: &str) -> Self {
        self.dataset_ids
            .get_or_insert_with(Vec::new)
            .push(id.to_owned());
        self
    }

    pub fn label(mut self, label: Label) -> Self {
        self.labels.get_or_insert_with(Vec::new).push(label);
        self
    }

    pub fn only_species(mut self, species: &str) -> Self {
        self.include_species
            .get_or_insert_with(Vec::new)
            .push(species.to_owned());
        self
    }

    pub fn without_species(mut self, species: &str) -> Self {
        self.exclude_species.push(species.to_owned());
        self
    }

    pub fn matches(&self, r: &SampleRecord) -> bool {
        if let Some(splits) = &self.splits {
            if !splits.contains(&r.split) {
                return false;
            }
        }
        if let Some(ds) = &self.dataset_ids {
            if !ds.contains(&r.dataset_id) {
                return false;
            }
        }
        if let Some(labels) = &self.labels {
            if !labels.contains(&r.label) {
                return false;
            }
        }
        if let Some(species) = &r.pai_species {
            if let Some(include) = &self.include_species {
                if !include.contains(species) {
                    return false;
                }
            }
            if self.exclude_species.contains(species) {
                return false;
            }
        }
        true
    }
}

/// A manifest record paired with its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub record: SampleRecord,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::ZeroDim);
        }
        if let Some(bad) = samples.iter().find(|s| s.embedding.len() != dim) {
            return Err(DataError::DimMismatch {
                expected: dim,
                actual: bad.embedding.len(),
            });
        }
        Ok(LabeledDataset { dim, samples })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples
            .iter()
            .filter(|s| s.record.label == label)
            .count()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.record.sample_id.as_str())
    }
}

/// Pairs every record that passes `filter` with its embedding.
pub fn join(
    manifest: &Manifest,
    store: &EmbeddingStore,
    filter: &RecordFilter,
) -> Result<LabeledDataset, DataError> {
    join_where(manifest, store, |r| filter.matches(r))
}

pub fn join_where(
    manifest: &Manifest,
    store: &EmbeddingStore,
    mut keep: impl FnMut(&SampleRecord) -> bool,
) -> Result<LabeledDataset, DataError> {
    let mut samples = Vec::new();
    for r in manifest.records().iter().filter(|r| keep(r)) {
        let v = store
            .get(&r.sample_id)
            .ok_or_else(|| DataError::MissingEmbedding(r.sample_id.clone()))?;
        samples.push(Sample {
            record: r.clone(),
            embedding: v.to_vec(),
        });
    }
    LabeledDataset::new(store.dim(), samples)
}

/// Pairs the records at `indices` (in that order) with their embeddings.
pub fn join_indices(
    manifest: &Manifest,
    store: &EmbeddingStore,
    indices: &[usize],
) -> Result<LabeledDataset, DataError> {
    let mut samples = Vec::with_capacity(indices.len());
    for &i in indices {
        let r = &manifest.records()[i];
        let v = store
            .get(&r.sample_id)
            .ok_or_else(|| DataError::MissingEmbedding(r.sample_id.clone()))?;
        samples.push(Sample {
            record: r.clone(),
            embedding: v.to_vec(),
        });
    }
    LabeledDataset::new(store.dim(), samples)
}
