//! ISO/IEC 30107-3 style metrics on a small score set: DET points, D-EER,
//! BPCER at fixed APCER, HTER and AUC.
//!
//!     cargo run --example metrics_report

use pad_eval::metrics::{auc, bpcer_at_apcer, d_eer, det_curve, evaluate, hter, HterThreshold};
use pad_eval::report::metrics_table;
use pad_eval::ScoreSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // scores are attack likelihoods
    let set = ScoreSet::new(vec![0.4, 0.6, 0.9], vec![0.1, 0.5, 0.8])?;

    println!("{:>12} {:>8} {:>8}", "threshold", "APCER", "BPCER");
    for p in det_curve(&set)? {
        println!("{:>12.6} {:>8.4} {:>8.4}", p.threshold, p.apcer, p.bpcer);
    }
    let (eer, tau) = d_eer(&set)?;
    println!("D-EER {eer:.4} at threshold {tau:.4}");
    println!("BPCER10 {:.4}", bpcer_at_apcer(&set, 0.10)?);
    println!("HTER at 0.5: {:.4}", hter(&set, 0.5)?);
    println!("AUC {:.4}", auc(&set)?);

    let at_eer = evaluate(&set, HterThreshold::TestEer)?;
    let fixed = evaluate(&set, HterThreshold::Fixed(0.5))?;
    println!();
    print!(
        "{}",
        metrics_table(&[
            ("HTER@D-EER".to_string(), &at_eer),
            ("HTER@0.5".to_string(), &fixed)
        ])
    );
    Ok(())
}
