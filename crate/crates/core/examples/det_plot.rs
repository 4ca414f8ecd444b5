//! Overlay DET curves of several synthetic systems on probit axes and write
//! the SVG (plus one det-csv per system) to a directory.
//!
//!     cargo run --example det_plot -- target/det

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pad_eval::io::write_atomic;
use pad_eval::metrics::det_curve;
use pad_eval::report::{det_csv, det_svg};
use pad_eval::ScoreSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/det".into())
        .into();
    std::fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let mut curves = Vec::new();
    for (name, separation) in [("weak", 0.8), ("medium", 1.8), ("strong", 3.0)] {
        let bf = Normal::new(0.0, 1.0)?;
        let atk = Normal::new(separation, 1.0)?;
        let set = ScoreSet::new(
            (0..2000).map(|_| atk.sample(&mut rng)).collect(),
            (0..2000).map(|_| bf.sample(&mut rng)).collect(),
        )?;
        let det = det_curve(&set)?;
        write_atomic(
            &out.join(format!("{name}.det.csv")),
            det_csv(&det).as_bytes(),
        )?;
        curves.push((name.to_string(), det));
    }
    let svg_path = out.join("det.svg");
    write_atomic(&svg_path, det_svg(&curves).as_bytes())?;
    println!("wrote {}", svg_path.display());
    Ok(())
}
