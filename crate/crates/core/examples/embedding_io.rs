//! Write a manifest and an embedding store in the interchange formats, read
//! them back, and join them into a labelled dataset with a filter.
//!
//!     cargo run --example embedding_io

use pad_eval::data::{
    join, load_embeddings, load_manifest, write_embeddings, write_manifest, EMBEDDING_HEADER_LEN,
};
use pad_eval::{EmbeddingStore, Manifest, RecordFilter, SampleRecord, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let records = vec![
        SampleRecord::bona_fide("v0-f0", "v0", 0, "C").with_split(Split::Train),
        SampleRecord::bona_fide("v0-f1", "v0", 1, "C").with_split(Split::Train),
        SampleRecord::attack("v1-f0", "v1", 0, "C", "print").with_split(Split::Train),
        SampleRecord::attack("v2-f0", "v2", 0, "C", "replay").with_split(Split::Test),
    ];
    let manifest = Manifest::new(records)?;

    let mut store = EmbeddingStore::new(3)?;
    store.insert("v0-f0", &[0.1, 0.2, 0.3])?;
    store.insert("v0-f1", &[0.0, -0.5, 1.0])?;
    store.insert("v1-f0", &[1.0, 1.0, 1.0])?;
    store.insert("v2-f0", &[-1.0, 0.25, 2.0])?;

    let manifest_path = dir.path().join("manifest.jsonl");
    let store_path = dir.path().join("clip.bin");
    write_manifest(&manifest, &manifest_path)?;
    write_embeddings(&store, &store_path)?;

    print!("{}", std::fs::read_to_string(&manifest_path)?);
    let bytes = std::fs::read(&store_path)?;
    println!(
        "store: {} bytes, header {:02x?}",
        bytes.len(),
        &bytes[..EMBEDDING_HEADER_LEN]
    );

    let manifest2 = load_manifest(&manifest_path)?;
    let store2 = load_embeddings(&store_path)?;
    assert_eq!(manifest, manifest2);
    assert_eq!(store, store2);

    let train = join(
        &manifest2,
        &store2,
        &RecordFilter::all().split(Split::Train),
    )?;
    let no_replay = join(
        &manifest2,
        &store2,
        &RecordFilter::all().without_species("replay"),
    )?;
    println!("train split: {:?}", train.sample_ids().collect::<Vec<_>>());
    println!(
        "without replay: {:?}",
        no_replay.sample_ids().collect::<Vec<_>>()
    );
    Ok(())
}
