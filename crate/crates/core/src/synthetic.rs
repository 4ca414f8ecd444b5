//! Synthetic embedding fixtures: Gaussian clusters standing in for frozen
//! backbone features, with full manifest metadata.
//!
//! Useful for examples, tests and smoke runs of the protocol runners where
//! real datasets are not available.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{
    DataError, EmbeddingStore, Label, LabeledDataset, Manifest, Sample, SampleRecord, Split,
};

/// A group of videos sharing a class, species, cluster centre and split.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub dataset_id: String,
    pub label: Label,
    pub species: Option<String>,
    pub videos: usize,
    pub frames_per_video: usize,
    pub center: Vec<f32>,
    pub sigma: f32,
    pub split: Split,
}

/// Builds a manifest and one embedding store per backbone from clusters.
///
/// Every backbone sees the same cluster centres with independent noise.
#[derive(Debug, Clone)]
pub struct SyntheticBuilder {
    dim: usize,
    seed: u64,
    clusters: Vec<Cluster>,
}

impl SyntheticBuilder {
    pub fn new(dim: usize, seed: u64) -> Self {
        SyntheticBuilder {
            dim,
            seed,
            clusters: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cluster(mut self, cluster: Cluster) -> Self {
        assert_eq!(cluster.center.len(), self.dim, "centre has wrong dimension");
        self.clusters.push(cluster);
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub fn bona_fide(
        self,
        dataset_id: &str,
        videos: usize,
        frames_per_video: usize,
        center: Vec<f32>,
        sigma: f32,
        split: Split,
    ) -> Self {
        self.cluster(Cluster {
            dataset_id: dataset_id.to_owned(),
            label: Label::BonaFide,
            species: None,
            videos,
            frames_per_video,
            center,
            sigma,
            split,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn attack(
        self,
        dataset_id: &str,
        species: &str,
        videos: usize,
        frames_per_video: usize,
        center: Vec<f32>,
        sigma: f32,
        split: Split,
    ) -> Self {
        self.cluster(Cluster {
            dataset_id: dataset_id.to_owned(),
            label: Label::Attack,
            species: Some(species.to_owned()),
            videos,
            frames_per_video,
            center,
            sigma,
            split,
        })
    }

    pub fn manifest(&self) -> Result<Manifest, DataError> {
        let mut records = Vec::new();
        let mut counters: BTreeMap<String, usize> = BTreeMap::new();
        for c in &self.clusters {
            let tag = c.species.clone().unwrap_or_else(|| "bf".into());
            let key = format!("{}-{}", c.dataset_id, tag);
            let next = counters.entry(key.clone()).or_default();
            for _ in 0..c.videos {
                let video = format!("{key}-v{next:03}");
                *next += 1;
                for f in 0..c.frames_per_video {
                    let sample_id = format!("{video}-f{f:02}");
                    let r = match &c.species {
                        None => {
                            SampleRecord::bona_fide(&sample_id, &video, f as u64, &c.dataset_id)
                        }
                        Some(s) => {
                            SampleRecord::attack(&sample_id, &video, f as u64, &c.dataset_id, s)
                        }
                    };
                    records.push(r.with_split(c.split));
                }
            }
        }
        Manifest::new(records)
    }

    /// Embedding store for one backbone; `backbone_index` selects the noise stream.
    pub fn store(
        &self,
        manifest: &Manifest,
        backbone_index: u64,
    ) -> Result<EmbeddingStore, DataError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(1_000_003) ^ backbone_index);
        let mut store = EmbeddingStore::new(self.dim)?;
        let mut records = manifest.records().iter();
        let mut v = vec![0f32; self.dim];
        for c in &self.clusters {
            let noise = Normal::new(0.0f32, c.sigma).expect("sigma is finite and non-negative");
            for _ in 0..c.videos * c.frames_per_video {
                let r = records
                    .next()
                    .expect("manifest built from the same clusters");
                for (x, m) in v.iter_mut().zip(&c.center) {
                    *x = m + noise.sample(&mut rng);
                }
                store.insert(&r.sample_id, &v)?;
            }
        }
        Ok(store)
    }

    pub fn build(
        &self,
        backbones: &[&str],
    ) -> Result<(Manifest, BTreeMap<String, EmbeddingStore>), DataError> {
        let manifest = self.manifest()?;
        let mut stores = BTreeMap::new();
        for (i, b) in backbones.iter().enumerate() {
            stores.insert((*b).to_owned(), self.store(&manifest, i as u64)?);
        }
        Ok((manifest, stores))
    }
}

/// `value` in every component.
pub fn constant(dim: usize, value: f32) -> Vec<f32> {
    vec![value; dim]
}

/// Zero vector with `value` on one axis.
pub fn on_axis(dim: usize, axis: usize, value: f32) -> Vec<f32> {
    let mut v = vec![0.0; dim];
    v[axis % dim] = value;
    v
}

/// Two isotropic Gaussians: bona fide around `-1`, attacks around `+1` in
/// every component, one single-frame video per sample.
pub fn two_gaussians(dim: usize, per_class: usize, sigma: f32, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, sigma).expect("valid sigma");
    let mut samples = Vec::with_capacity(2 * per_class);
    for (label, mean) in [(Label::BonaFide, -1.0f32), (Label::Attack, 1.0)] {
        for i in 0..per_class {
            let id = format!("{label}-{i:04}");
            let record = match label {
                Label::BonaFide => SampleRecord::bona_fide(&id, &id, 0, "gauss"),
                Label::Attack => SampleRecord::attack(&id, &id, 0, "gauss", "synthetic"),
            };
            let embedding = (0..dim).map(|_| mean + noise.sample(&mut rng)).collect();
            samples.push(Sample { record, embedding });
        }
    }
    LabeledDataset::new(dim, samples).expect("uniform dimension")
}

/// Copy of `dataset` with labels shuffled across samples (class counts kept).
pub fn permute_labels(dataset: &LabeledDataset, seed: u64) -> LabeledDataset {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Label> = dataset.samples().iter().map(|s| s.record.label).collect();
    labels.shuffle(&mut rng);
    let samples = dataset
        .samples()
        .iter()
        .zip(labels)
        .map(|(s, label)| {
            let mut record = s.record.clone();
            record.label = label;
            record.pai_species = match label {
                Label::BonaFide => None,
                Label::Attack => Some("synthetic".into()),
            };
            Sample {
                record,
                embedding: s.embedding.clone(),
            }
        })
        .collect();
    LabeledDataset::new(dataset.dim(), samples).expect("same dimension")
}
