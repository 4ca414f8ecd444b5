//! Regenerates the fixture corpus under `tests/fixtures` (or the directory
//! given as first argument). Output is deterministic; the checked-in files
//! were produced by this program.
//!
//!     cargo run --example make_fixtures -- crates/core/tests/fixtures

use std::path::{Path, PathBuf};

use serde_json::json;

use pad_eval::data::{write_embeddings, write_manifest, Sample};
use pad_eval::io::write_atomic;
use pad_eval::synthetic::{constant, on_axis, two_gaussians, SyntheticBuilder};
use pad_eval::{EmbeddingStore, Label, Manifest, SampleRecord, Split};

type Res = Result<(), Box<dyn std::error::Error>>;

const SIW_SPECIES: [&str; 14] = [
    "funny_eyes",
    "partial_eyes",
    "partial_mouth",
    "paper_glasses",
    "obfuscation",
    "impersonation",
    "cosmetic",
    "half_mask",
    "silicone",
    "transparent_mask",
    "paper_mask",
    "mannequin",
    "replay",
    "print",
];

fn write_json(path: &Path, value: &serde_json::Value) -> Res {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn save(dir: &Path, manifest: &Manifest, stores: &[(&str, &EmbeddingStore)]) -> Res {
    std::fs::create_dir_all(dir)?;
    write_manifest(manifest, &dir.join("manifest.jsonl"))?;
    for (name, store) in stores {
        write_embeddings(store, &dir.join(format!("{name}.bin")))?;
    }
    Ok(())
}

/// Separable 2-Gaussian set: 500/500 train and 500/500 test, dim 16.
fn gauss16(dir: &Path) -> Res {
    let mut records = Vec::new();
    let mut store = EmbeddingStore::new(16)?;
    for (split, seed) in [(Split::Train, 1), (Split::Test, 2)] {
        for Sample { record, embedding } in
            two_gaussians(16, 500, 0.3, seed).samples().iter().cloned()
        {
            let id = format!("{split}-{}", record.sample_id);
            let r = match record.label {
                Label::BonaFide => SampleRecord::bona_fide(&id, &id, 0, "gauss"),
                Label::Attack => SampleRecord::attack(&id, &id, 0, "gauss", "synthetic"),
            };
            store.insert(&id, &embedding)?;
            records.push(r.with_split(split));
        }
    }
    save(dir, &Manifest::new(records)?, &[("probe", &store)])
}

/// Four datasets with train/dev/test splits, two backbones of dim 8; M is
/// shifted against the others.
fn corpus(dir: &Path) -> Res {
    const DIM: usize = 8;
    let mut b = SyntheticBuilder::new(DIM, 17);
    for (ds, shift, species) in [
        ("O", 0.0, &["print", "replay", "mask"][..]),
        ("C", 0.0, &["print", "replay"][..]),
        ("I", 0.0, &["print", "replay"][..]),
        ("M", 0.25, &["print", "replay"][..]),
    ] {
        for split in [Split::Train, Split::Dev, Split::Test] {
            b = b.bona_fide(ds, 12, 3, constant(DIM, -0.15 + shift), 1.4, split);
            for (i, s) in species.iter().enumerate() {
                let mut center = constant(DIM, 0.15 + shift);
                center[i] += 0.8;
                b = b.attack(ds, s, 6, 3, center, 1.4, split);
            }
        }
    }
    let (manifest, stores) = b.build(&["clip", "dino"])?;
    save(
        dir,
        &manifest,
        &[("clip", &stores["clip"]), ("dino", &stores["dino"])],
    )?;

    let backbones = json!({
        "backbone_ids": ["clip", "dino"],
        "fusion_rules": ["min", "max", "sum", "avg"],
        "fusion_backbones": ["clip", "dino"],
    });
    let with = |name: &str, protocol: serde_json::Value| {
        let mut v = backbones.clone();
        v["name"] = json!(name);
        v["protocol"] = protocol;
        v
    };
    write_json(
        &dir.join("known_attack.json"),
        &with(
            "known attacks on O",
            json!({"kind": "known_attack", "dataset_id": "O", "train_split": "train", "test_split": "test"}),
        ),
    )?;
    write_json(
        &dir.join("leave_one_out.json"),
        &with(
            "leave one species out on O",
            json!({"kind": "leave_one_out", "dataset_id": "O", "species_list": ["print", "replay", "mask"]}),
        ),
    )?;
    write_json(
        &dir.join("cross_database.json"),
        &with(
            "O&C&I to M",
            json!({
                "kind": "cross_database",
                "train_dataset_ids": ["O", "C", "I"],
                "test_dataset_id": "M",
                "train_splits": ["train"],
                "test_splits": ["test"],
            }),
        ),
    )?;
    write_json(
        &dir.join("grouped_splits.json"),
        &with(
            "pairwise transfer",
            json!({"kind": "grouped_splits", "folds": [
                {"fold_id": "O->C", "train": {"dataset_ids": ["O"], "splits": ["train"]}, "test": {"dataset_ids": ["C"], "splits": ["test"]}},
                {"fold_id": "C->O", "train": {"dataset_ids": ["C"], "splits": ["train"]}, "test": {"dataset_ids": ["O"], "splits": ["test"]}},
                {"fold_id": "I->M", "train": {"dataset_ids": ["I"], "splits": ["train"]}, "test": {"dataset_ids": ["M"], "splits": ["test"]}},
            ]}),
        ),
    )?;
    let mut dev = with(
        "known attacks on O, dev threshold",
        json!({"kind": "known_attack", "dataset_id": "O", "train_split": "train", "test_split": "test"}),
    );
    dev["threshold"] = json!({"dev_eer": {"splits": ["dev"], "dataset_ids": ["O"]}});
    write_json(&dir.join("dev_threshold.json"), &dev)?;
    Ok(())
}

/// Fourteen PAI species in a single dataset, for the leave-one-out layout.
fn siw14(dir: &Path) -> Res {
    const DIM: usize = 8;
    let mut b = SyntheticBuilder::new(DIM, 14).bona_fide(
        "SiW-Mv2",
        28,
        2,
        constant(DIM, 0.0),
        1.0,
        Split::Unassigned,
    );
    for (i, s) in SIW_SPECIES.iter().enumerate() {
        b = b.attack(
            "SiW-Mv2",
            s,
            3,
            2,
            on_axis(DIM, i, 1.5),
            1.0,
            Split::Unassigned,
        );
    }
    let (manifest, stores) = b.build(&["dino"])?;
    save(dir, &manifest, &[("dino", &stores["dino"])])?;
    write_json(
        &dir.join("leave_one_out.json"),
        &json!({
            "name": "SiW-Mv2 leave-one-out",
            "protocol": {"kind": "leave_one_out", "species_list": SIW_SPECIES, "split_seed": 3},
            "backbone_ids": ["dino"],
        }),
    )?;
    Ok(())
}

/// Rounded-linspace frame plan, as the extractor samples videos.
fn plan_frames(t: usize, k: usize) -> Vec<usize> {
    if t < k {
        return (0..t).collect();
    }
    let mut out: Vec<usize> = Vec::with_capacity(k);
    for j in 0..k {
        let i = (j as f64 * (t - 1) as f64 / (k - 1) as f64).round() as usize;
        if out.last() != Some(&i) {
            out.push(i);
        }
    }
    out
}

/// Files shaped like extractor output: a version header line, three videos
/// of lengths 97, 10 and 49 sampled at 25 frames, two backbones whose dims differ.
fn extractor(dir: &Path) -> Res {
    std::fs::create_dir_all(dir)?;
    let videos = [
        ("bf_long", 97, None),
        ("bf_short", 10, None),
        ("print_49", 49, Some("print")),
    ];
    let mut lines = vec![json!({"format_version": 1, "backbone": "clip:ViT-L-14", "frames": 25, "augment_copies": 0}).to_string()];
    let mut clip = EmbeddingStore::new(12)?;
    let mut dino = EmbeddingStore::new(10)?;
    for (vi, (video, t, species)) in videos.iter().enumerate() {
        for f in plan_frames(*t, 25) {
            let id = format!("{video}/{f:04}");
            let r = match species {
                None => SampleRecord::bona_fide(&id, video, f as u64, "ext"),
                Some(s) => SampleRecord::attack(&id, video, f as u64, "ext", s),
            };
            lines.push(serde_json::to_string(&r)?);
            let x = (vi * 1000 + f) as f32 / 1000.0;
            clip.insert(&id, &(0..12).map(|d| x + d as f32).collect::<Vec<_>>())?;
            dino.insert(&id, &(0..10).map(|d| x - d as f32).collect::<Vec<_>>())?;
        }
    }
    write_atomic(
        &dir.join("manifest.jsonl"),
        (lines.join("\n") + "\n").as_bytes(),
    )?;
    write_embeddings(&clip, &dir.join("clip.bin"))?;
    write_embeddings(&dino, &dir.join("dino.bin"))?;
    Ok(())
}

fn main() -> Res {
    let root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    gauss16(&root.join("gauss16"))?;
    corpus(&root.join("corpus"))?;
    siw14(&root.join("siw14"))?;
    extractor(&root.join("extractor"))?;
    println!("fixtures written to {}", root.display());
    Ok(())
}
