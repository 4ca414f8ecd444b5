//! Known-attack protocol on a synthetic single-dataset corpus with two
//! backbones and their score fusions, broken down per PAI species.
//!
//!     cargo run --release --example known_attack

use pad_eval::fusion::FusionRule;
use pad_eval::protocols::{run_protocol, Protocol, ProtocolInputs, ThresholdPolicy};
use pad_eval::report::protocol_table;
use pad_eval::synthetic::{constant, on_axis, SyntheticBuilder};
use pad_eval::{ProtocolSpec, Split, TrainConfig};

const DIM: usize = 32;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut builder = SyntheticBuilder::new(DIM, 11);
    for split in [Split::Train, Split::Test] {
        builder = builder
            .bona_fide("O", 30, 5, constant(DIM, 0.0), 1.0, split)
            .attack("O", "print", 12, 5, constant(DIM, 0.25), 1.0, split)
            .attack("O", "replay", 12, 5, constant(DIM, 0.15), 1.0, split)
            .attack("O", "mask", 12, 5, on_axis(DIM, 0, 0.8), 1.0, split);
    }
    let (manifest, stores) = builder.build(&["clip", "dino"])?;

    let spec = ProtocolSpec {
        name: "known attacks on O".into(),
        protocol: Protocol::KnownAttack {
            dataset_id: Some("O".into()),
            train_split: Split::Train,
            test_split: Split::Test,
            per_species_breakdown: true,
            species: None,
        },
        backbone_ids: vec!["clip".into(), "dino".into()],
        fusion_rules: FusionRule::ALL.to_vec(),
        fusion_backbones: vec!["clip".into(), "dino".into()],
        threshold: ThresholdPolicy::TestEer,
        frame_level: true,
        train: None,
    };
    let inputs = ProtocolInputs {
        manifest: &manifest,
        stores: &stores,
    };
    let result = run_protocol(&inputs, &spec, &TrainConfig::default(), 1)?;
    print!("{}", protocol_table(&result));
    Ok(())
}
