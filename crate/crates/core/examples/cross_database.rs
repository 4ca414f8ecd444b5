//! Cross-database protocol: train on three source datasets, test on a fourth
//! whose clusters are shifted (a simple stand-in for domain shift).
//!
//!     cargo run --release --example cross_database

use pad_eval::fusion::FusionRule;
use pad_eval::protocols::{run_protocol, Protocol, ProtocolInputs, ThresholdPolicy};
use pad_eval::report::protocol_table;
use pad_eval::synthetic::{constant, SyntheticBuilder};
use pad_eval::{ProtocolSpec, Split, TrainConfig};

const DIM: usize = 16;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut builder = SyntheticBuilder::new(DIM, 21);
    for (ds, offset) in [("O", 0.0), ("C", 0.05), ("I", -0.05), ("M", 0.2)] {
        builder = builder
            .bona_fide(
                ds,
                15,
                4,
                constant(DIM, -0.15 + offset),
                1.0,
                Split::Unassigned,
            )
            .attack(
                ds,
                "print",
                8,
                4,
                constant(DIM, 0.15 + offset),
                1.0,
                Split::Unassigned,
            )
            .attack(
                ds,
                "replay",
                8,
                4,
                constant(DIM, 0.05 + offset),
                1.0,
                Split::Unassigned,
            );
    }
    let (manifest, stores) = builder.build(&["clip", "dino"])?;

    for threshold in [ThresholdPolicy::TestEer, ThresholdPolicy::Fixed(0.5)] {
        let spec = ProtocolSpec {
            name: "O&C&I -> M".into(),
            protocol: Protocol::CrossDatabase {
                train_dataset_ids: vec!["O".into(), "C".into(), "I".into()],
                test_dataset_id: "M".into(),
                train_splits: None,
                test_splits: None,
            },
            backbone_ids: vec!["clip".into(), "dino".into()],
            fusion_rules: vec![FusionRule::Avg, FusionRule::Max],
            fusion_backbones: vec!["clip".into(), "dino".into()],
            threshold,
            frame_level: false,
            train: None,
        };
        let inputs = ProtocolInputs {
            manifest: &manifest,
            stores: &stores,
        };
        let result = run_protocol(&inputs, &spec, &TrainConfig::default(), 1)?;
        print!("{}", protocol_table(&result));
        println!();
    }
    Ok(())
}
