//! Leave-one-out protocol: one fold per PAI species, each trained on the
//! remaining species and a shared share of the bona fide videos.
//!
//! Folds run in parallel when a job count is given:
//!
//!     cargo run --release --example leave_one_out -- 4

use pad_eval::protocols::{run_protocol, Protocol, ProtocolInputs, ThresholdPolicy};
use pad_eval::report::protocol_table;
use pad_eval::synthetic::{constant, SyntheticBuilder};
use pad_eval::{ProtocolSpec, Split, TrainConfig};

const DIM: usize = 24;
const SPECIES: [&str; 5] = ["print", "replay", "paper_mask", "silicone", "makeup"];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let jobs: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1);

    let mut builder = SyntheticBuilder::new(DIM, 5).bona_fide(
        "SiW-Mv2",
        40,
        4,
        constant(DIM, 0.0),
        1.0,
        Split::Unassigned,
    );
    for (i, s) in SPECIES.iter().enumerate() {
        // a cue shared by all species plus one of their own
        let mut center = constant(DIM, 0.12);
        center[i] += 1.0;
        builder = builder.attack("SiW-Mv2", s, 10, 4, center, 1.0, Split::Unassigned);
    }
    let (manifest, stores) = builder.build(&["dino"])?;

    let spec = ProtocolSpec {
        name: "leave one species out".into(),
        protocol: Protocol::LeaveOneOut {
            dataset_id: None,
            species_list: SPECIES.iter().map(|s| s.to_string()).collect(),
            bonafide_split_ratio: 0.6,
            split_seed: Some(1),
        },
        backbone_ids: vec!["dino".into()],
        fusion_rules: Vec::new(),
        fusion_backbones: Vec::new(),
        threshold: ThresholdPolicy::TestEer,
        frame_level: false,
        train: None,
    };
    let inputs = ProtocolInputs {
        manifest: &manifest,
        stores: &stores,
    };
    let result = run_protocol(&inputs, &spec, &TrainConfig::default(), jobs)?;
    print!("{}", protocol_table(&result));
    for fold in &result.folds {
        println!(
            "{:<12} trained on {:?}",
            fold.fold_id, fold.train_attack_species
        );
    }
    Ok(())
}
