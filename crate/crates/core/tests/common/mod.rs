#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::path::PathBuf;

use pad_eval::data::{load_embeddings, load_manifest};
use pad_eval::protocols::ProtocolInputs;
use pad_eval::{EmbeddingStore, Label, LabeledDataset, Manifest, ProtocolSpec, ScoreSet};
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub struct Corpus {
    pub manifest: Manifest,
    pub stores: BTreeMap<String, EmbeddingStore>,
}

impl Corpus {
    pub fn load(dir: &str, backbones: &[&str]) -> Corpus {
        let manifest = load_manifest(&fixture(&format!("{dir}/manifest.jsonl"))).unwrap();
        let stores = backbones
            .iter()
            .map(|b| {
                let s = load_embeddings(&fixture(&format!("{dir}/{b}.bin"))).unwrap();
                (b.to_string(), s)
            })
            .collect();
        Corpus { manifest, stores }
    }

    pub fn inputs(&self) -> ProtocolInputs<'_> {
        ProtocolInputs {
            manifest: &self.manifest,
            stores: &self.stores,
        }
    }
}

pub fn spec(rel: &str) -> ProtocolSpec {
    ProtocolSpec::from_json(&std::fs::read_to_string(fixture(rel)).unwrap()).unwrap()
}

pub fn split_by_label(scores: &[f64], ds: &LabeledDataset) -> ScoreSet {
    let mut set = ScoreSet::new(Vec::new(), Vec::new()).unwrap();
    for (s, x) in ds.samples().iter().zip(scores) {
        match s.record.label {
            Label::Attack => set.attack_scores.push(*x),
            Label::BonaFide => set.bonafide_scores.push(*x),
        }
    }
    set
}

/// Random score set; with `ties` the values come from a small grid so equal
/// scores are common within and across classes.
pub fn random_set(rng: &mut impl Rng, n_attack: usize, n_bonafide: usize, ties: bool) -> ScoreSet {
    let shift = rng.gen_range(-0.5..1.5);
    let mut draw = |n: usize, shift: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if ties {
                    (rng.gen_range(0..8) as f64 + shift.round()) / 8.0
                } else {
                    rng.gen::<f64>() + shift
                }
            })
            .collect()
    };
    let attacks = draw(n_attack, shift);
    let bonafide = draw(n_bonafide, 0.0);
    ScoreSet::new(attacks, bonafide).unwrap()
}
