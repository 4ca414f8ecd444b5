//! Grouped splits: folds declared as record filters, here the four
//! one-dataset-out combinations over O, C, I and M, loaded from JSON the way
//! a protocol config file would be.
//!
//!     cargo run --release --example grouped_splits

use pad_eval::protocols::{run_protocol, ProtocolInputs};
use pad_eval::report::protocol_table;
use pad_eval::synthetic::{constant, SyntheticBuilder};
use pad_eval::{ProtocolSpec, Split, TrainConfig};

const DIM: usize = 16;
const DATASETS: [&str; 4] = ["O", "C", "I", "M"];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut builder = SyntheticBuilder::new(DIM, 4);
    for (i, ds) in DATASETS.iter().enumerate() {
        let offset = 0.08 * i as f32;
        builder = builder
            .bona_fide(
                ds,
                12,
                3,
                constant(DIM, -0.2 + offset),
                1.0,
                Split::Unassigned,
            )
            .attack(
                ds,
                "print",
                12,
                3,
                constant(DIM, 0.2 + offset),
                1.0,
                Split::Unassigned,
            );
    }
    let (manifest, stores) = builder.build(&["clip"])?;

    let folds: Vec<serde_json::Value> = DATASETS
        .iter()
        .map(|held_out| {
            let sources: Vec<&str> = DATASETS.iter().copied().filter(|d| d != held_out).collect();
            serde_json::json!({
                "fold_id": format!("{}->{}", sources.join("&"), held_out),
                "train": { "dataset_ids": sources },
                "test": { "dataset_ids": [held_out] },
            })
        })
        .collect();
    let config = serde_json::json!({
        "name": "one dataset out",
        "protocol": { "kind": "grouped_splits", "folds": folds },
        "backbone_ids": ["clip"],
    });
    let spec = ProtocolSpec::from_json(&config.to_string())?;

    let inputs = ProtocolInputs {
        manifest: &manifest,
        stores: &stores,
    };
    let result = run_protocol(&inputs, &spec, &TrainConfig::default(), 2)?;
    print!("{}", protocol_table(&result));
    Ok(())
}
