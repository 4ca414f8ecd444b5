//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs against the checked-in fixtures only.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{oracle, random_set, split_by_label, Corpus};
use pad_eval::data::join;
use pad_eval::fusion::{fuse_pipeline, FrameScores};
use pad_eval::metrics::{auc, bpcer_at_apcer, d_eer, det_curve, evaluate, HterThreshold};
use pad_eval::probe::{loss_gradient, predict_all, train_head};
use pad_eval::protocols::{run_protocol, ProtocolResult};
use pad_eval::synthetic::permute_labels;
use pad_eval::{FusionRule, Label, ProbeHead, RecordFilter, ScoreSet, Split, TrainConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn metrics_oracle_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst_eer = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(2..=200);
        let na = rng.gen_range(1..n);
        let set = random_set(&mut rng, na, n - na, case % 3 == 0);

        let det = det_curve(&set).map_err(|e| e.to_string())?;
        let pts = oracle::operating_points(&set);
        check(det.len() == pts.len(), || {
            format!(
                "case {case}: {} DET points, oracle {}",
                det.len(),
                pts.len()
            )
        })?;
        for (k, (p, &(t, a, b))) in det.iter().zip(&pts).enumerate() {
            check(p.apcer == a && p.bpcer == b, || {
                format!(
                    "case {case} point {k}: ({}, {}) vs oracle ({a}, {b})",
                    p.apcer, p.bpcer
                )
            })?;
            // sentinels differ in value, interior thresholds are the scores themselves
            if k > 0 && k + 1 < det.len() {
                check(p.threshold == t, || {
                    format!("case {case} point {k}: threshold {} vs {t}", p.threshold)
                })?;
            }
            check(
                oracle::apcer(&set, p.threshold) == p.apcer
                    && oracle::bpcer(&set, p.threshold) == p.bpcer,
                || {
                    format!(
                        "case {case} point {k}: rates disagree with counting at its own threshold"
                    )
                },
            )?;
        }
        for t in oracle::thresholds(&set) {
            let a = pad_eval::metrics::apcer_at(&set, t).unwrap();
            let b = pad_eval::metrics::bpcer_at(&set, t).unwrap();
            check(
                a == oracle::apcer(&set, t) && b == oracle::bpcer(&set, t),
                || format!("case {case}: APCER/BPCER at {t} differ from counting"),
            )?;
        }
        for alpha in [0.10, 0.05, 0.01] {
            let got = bpcer_at_apcer(&set, alpha).unwrap();
            let want = oracle::bpcer_at_apcer(&set, alpha);
            check(got == want, || {
                format!("case {case}: BPCER@{alpha} {got} vs oracle {want}")
            })?;
        }
        let report = evaluate(&set, HterThreshold::TestEer).unwrap();
        check(
            report.bpcer10 == oracle::bpcer_at_apcer(&set, 0.10)
                && report.bpcer20 == oracle::bpcer_at_apcer(&set, 0.05)
                && report.bpcer100 == oracle::bpcer_at_apcer(&set, 0.01),
            || format!("case {case}: report BPCER10/20/100 differ from oracle"),
        )?;
        let (eer, _) = d_eer(&set).unwrap();
        let diff = (eer - oracle::eer(&set)).abs();
        worst_eer = worst_eer.max(diff);
        check(diff <= 1e-9, || {
            format!("case {case}: D-EER {eer} vs oracle {}", oracle::eer(&set))
        })?;
    }
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!(
        "1000 sets, max |D-EER diff| {worst_eer:.1e}, {took:.2?}"
    ))
}

fn auc_pairwise_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.gen_range(2..=500);
        let na = rng.gen_range(1..n);
        let set = random_set(&mut rng, na, n - na, case % 2 == 0);
        let got = auc(&set).unwrap();
        let want = oracle::auc(&set);
        worst = worst.max((got - want).abs());
        check((got - want).abs() <= 1e-12, || {
            format!("case {case}: AUC {got} vs pairwise {want}")
        })?;
    }
    Ok(format!("200 sets (half tie-heavy), max diff {worst:.1e}"))
}

fn labelled_sets(fused: &BTreeMap<String, f64>, labels: &BTreeMap<String, Label>) -> ScoreSet {
    let mut set = ScoreSet::new(Vec::new(), Vec::new()).unwrap();
    for (video, score) in fused {
        match labels[video] {
            Label::Attack => set.attack_scores.push(*score),
            Label::BonaFide => set.bonafide_scores.push(*score),
        }
    }
    set
}

fn sum_avg_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for case in 0..300 {
        let n_models = rng.gen_range(1..=5);
        let n_videos = rng.gen_range(2..=60);
        let models: Vec<String> = (0..n_models).map(|m| format!("m{m}")).collect();
        let mut labels = BTreeMap::new();
        let mut per_model: BTreeMap<String, FrameScores> = BTreeMap::new();
        for v in 0..n_videos {
            let video = format!("v{v:03}");
            let label = if v == 0 || (v > 1 && rng.gen_bool(0.5)) {
                Label::Attack
            } else {
                Label::BonaFide
            };
            labels.insert(video.clone(), label);
            for m in &models {
                let frames = rng.gen_range(1..=25);
                let scores = (0..frames).map(|_| rng.gen::<f64>()).collect();
                per_model
                    .entry(m.clone())
                    .or_default()
                    .insert(video.clone(), scores);
            }
        }
        let sum = labelled_sets(
            &fuse_pipeline(&per_model, &models, FusionRule::Sum).unwrap(),
            &labels,
        );
        let avg = labelled_sets(
            &fuse_pipeline(&per_model, &models, FusionRule::Avg).unwrap(),
            &labels,
        );
        let (ds, da) = (det_curve(&sum).unwrap(), det_curve(&avg).unwrap());
        check(ds.len() == da.len(), || {
            format!("case {case}: DET lengths {} vs {}", ds.len(), da.len())
        })?;
        for (p, q) in ds.iter().zip(&da) {
            check(
                (p.apcer - q.apcer).abs() <= 1e-12 && (p.bpcer - q.bpcer).abs() <= 1e-12,
                || format!("case {case}: DET rates differ"),
            )?;
        }
        let (es, ea) = (d_eer(&sum).unwrap().0, d_eer(&avg).unwrap().0);
        check((es - ea).abs() <= 1e-12, || {
            format!("case {case}: D-EER {es} vs {ea}")
        })?;
        let (auc_s, auc_a) = (auc(&sum).unwrap(), auc(&avg).unwrap());
        check((auc_s - auc_a).abs() <= 1e-12, || {
            format!("case {case}: AUC {auc_s} vs {auc_a}")
        })?;
    }

    // the same holds end to end in a protocol run with both rules configured
    let corpus = Corpus::load("corpus", &["clip", "dino"]);
    let spec = common::spec("corpus/cross_database.json");
    let result = run_protocol(&corpus.inputs(), &spec, &TrainConfig::default(), 1)
        .map_err(|e| e.to_string())?;
    let fold = &result.folds[0].fold_id;
    let sum = result
        .report(fold, "SUM[clip,dino]", "overall")
        .ok_or("no SUM report")?;
    let avg = result
        .report(fold, "AVG[clip,dino]", "overall")
        .ok_or("no AVG report")?;
    check(
        (sum.hter - avg.hter).abs() <= 1e-12
            && (sum.auc - avg.auc).abs() <= 1e-12
            && (sum.d_eer - avg.d_eer).abs() <= 1e-12,
        || {
            format!(
                "protocol SUM {:?} vs AVG {:?}",
                (sum.hter, sum.auc),
                (avg.hter, avg.auc)
            )
        },
    )?;
    Ok(format!(
        "300 random tables; cross-database SUM and AVG rows both HTER {:.2}% / AUC {:.2}%",
        100.0 * sum.hter,
        100.0 * sum.auc
    ))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dim = rng.gen_range(1..=32);
        let mut head = ProbeHead::zeros("g", dim);
        head.weights = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        head.bias = rng.gen_range(-1.0..1.0);
        let x32: Vec<f32> = (0..dim).map(|_| rng.gen_range(-2.0f32..2.0)).collect();
        let x: Vec<f64> = x32.iter().map(|&v| v as f64).collect();
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };

        let (gw, gb) = loss_gradient(&head, &x32, y).unwrap();
        let (nw, nb) = oracle::numeric_gradient(&head.weights, head.bias, &x, y, 1e-5);
        for (a, n) in gw
            .iter()
            .chain(std::iter::once(&gb))
            .zip(nw.iter().chain(std::iter::once(&nb)))
        {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
            worst = worst.max(rel);
            check(rel < 1e-5, || {
                format!("case {case}: analytic {a} vs numeric {n} (rel {rel:.2e})")
            })?;
        }
    }
    Ok(format!("100 instances, max relative error {worst:.2e}"))
}

fn probe_learnability() -> Outcome {
    let start = Instant::now();
    let corpus = Corpus::load("gauss16", &["probe"]);
    let store = &corpus.stores["probe"];
    let train = join(
        &corpus.manifest,
        store,
        &RecordFilter::all().split(Split::Train),
    )
    .map_err(|e| e.to_string())?;
    let test = join(
        &corpus.manifest,
        store,
        &RecordFilter::all().split(Split::Test),
    )
    .map_err(|e| e.to_string())?;
    check(
        train.count(Label::Attack) == 500 && train.count(Label::BonaFide) == 500,
        || "fixture is not 500/500".into(),
    )?;

    let config = TrainConfig::default();
    check(
        config.learning_rate == 1e-4 && config.epochs == 50 && config.batch_size == 128,
        || format!("default hyperparameters changed: {config:?}"),
    )?;
    let (head, _) = train_head(&train, "gauss16", &config).map_err(|e| e.to_string())?;
    let test_eer = d_eer(&split_by_label(&predict_all(&head, &test).unwrap(), &test))
        .unwrap()
        .0;
    check(test_eer < 0.01, || {
        format!("test D-EER {:.2}% on separable data", 100.0 * test_eer)
    })?;

    let permuted = permute_labels(&train, 2024);
    let (head, _) = train_head(&permuted, "gauss16", &config).map_err(|e| e.to_string())?;
    let chance_eer = d_eer(&split_by_label(
        &predict_all(&head, &permuted).unwrap(),
        &permuted,
    ))
    .unwrap()
    .0;
    check((0.45..=0.55).contains(&chance_eer), || {
        format!(
            "permuted-label D-EER {:.2}% outside [45%, 55%]",
            100.0 * chance_eer
        )
    })?;
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "test D-EER {:.2}%, permuted-label D-EER {:.2}%, {took:.2?}",
        100.0 * test_eer,
        100.0 * chance_eer
    ))
}

/// Checks train/test disjointness from the fold audit and returns the number of folds.
fn audit_disjoint(result: &ProtocolResult) -> Result<usize, String> {
    for f in &result.folds {
        check(
            !f.audit.train_ids.is_empty() && !f.audit.test_ids.is_empty(),
            || format!("{} fold {}: empty audit", result.kind, f.fold_id),
        )?;
        check(f.audit.train_ids.is_disjoint(&f.audit.test_ids), || {
            format!(
                "{} fold {}: train and test share sample ids",
                result.kind, f.fold_id
            )
        })?;
        check(
            f.audit.train_ids.len() == f.n_train_samples
                && f.audit.test_ids.len() == f.n_test_samples,
            || {
                format!(
                    "{} fold {}: audit sizes disagree with fold sizes",
                    result.kind, f.fold_id
                )
            },
        )?;
    }
    Ok(result.folds.len())
}

fn leakage_audit() -> Outcome {
    let corpus = Corpus::load("corpus", &["clip", "dino"]);
    let config = TrainConfig::default();
    let mut folds = 0;
    for name in [
        "known_attack",
        "leave_one_out",
        "cross_database",
        "grouped_splits",
        "dev_threshold",
    ] {
        let spec = common::spec(&format!("corpus/{name}.json"));
        let result = run_protocol(&corpus.inputs(), &spec, &config, 2)
            .map_err(|e| format!("{name}: {e}"))?;
        folds += audit_disjoint(&result)?;
    }

    let siw = Corpus::load("siw14", &["dino"]);
    let spec = common::spec("siw14/leave_one_out.json");
    let pad_eval::protocols::Protocol::LeaveOneOut { species_list, .. } = &spec.protocol else {
        return Err("siw14 config is not leave-one-out".into());
    };
    let result = run_protocol(&siw.inputs(), &spec, &config, 4).map_err(|e| e.to_string())?;
    check(result.folds.len() == 14, || {
        format!("{} folds, expected 14", result.folds.len())
    })?;
    audit_disjoint(&result)?;

    let records: BTreeMap<&str, _> = siw
        .manifest
        .records()
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();
    let mut bona_fide_test: Option<BTreeSet<String>> = None;
    for (fold, held_out) in result.folds.iter().zip(species_list) {
        check(&fold.fold_id == held_out, || {
            format!("fold {} out of order, expected {held_out}", fold.fold_id)
        })?;
        let mut trained_species = BTreeSet::new();
        for id in &fold.audit.train_ids {
            if let Some(s) = &records[id.as_str()].pai_species {
                trained_species.insert(s.clone());
            }
        }
        check(!trained_species.contains(held_out), || {
            format!("fold {held_out}: held-out species in training")
        })?;
        check(trained_species.len() == 13, || {
            format!(
                "fold {held_out}: trained on {} species",
                trained_species.len()
            )
        })?;
        let mut test_species = BTreeSet::new();
        let mut bf_test = BTreeSet::new();
        for id in &fold.audit.test_ids {
            let r = records[id.as_str()];
            match &r.pai_species {
                Some(s) => {
                    test_species.insert(s.clone());
                }
                None => {
                    bf_test.insert(r.video_id.clone());
                }
            }
        }
        check(
            test_species.len() == 1 && test_species.contains(held_out),
            || format!("fold {held_out}: test attacks are {test_species:?}"),
        )?;
        check(bf_test.is_disjoint(&fold.audit.train_videos), || {
            format!("fold {held_out}: bona fide video in train and test")
        })?;
        match &bona_fide_test {
            None => bona_fide_test = Some(bf_test),
            Some(first) => check(first == &bf_test, || {
                format!("fold {held_out}: bona fide test pool changed")
            })?,
        }
    }
    Ok(format!(
        "{folds} corpus folds over all runners, 14-fold leave-one-out clean"
    ))
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let mut args: Vec<String> = vec!["pad-eval".into(), "protocol".into()];
        args.extend([
            "--protocol-config".into(),
            common::fixture("corpus/leave_one_out.json")
                .display()
                .to_string(),
        ]);
        args.extend([
            "--manifest".into(),
            common::fixture("corpus/manifest.jsonl")
                .display()
                .to_string(),
        ]);
        for b in ["clip", "dino"] {
            args.extend([
                "--embeddings".into(),
                format!(
                    "{b}={}",
                    common::fixture(&format!("corpus/{b}.bin")).display()
                ),
            ]);
        }
        args.extend(["--seed".into(), "42".into(), "--jobs".into(), "3".into()]);
        args.extend(["--formats".into(), "json,text-table,det-csv".into()]);
        args.extend(["--out-dir".into(), dir.path().display().to_string()]);
        let code = pad_eval::cli::run(&args);
        check(code == 0, || format!("protocol run exited with {code}"))?;
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let entry = entry.unwrap();
            files.insert(entry.file_name(), std::fs::read(entry.path()).unwrap());
        }
        outputs.push(files);
    }
    check(
        outputs[0].contains_key(std::ffi::OsStr::new("protocol_report.json")),
        || "no JSON report".into(),
    )?;
    check(outputs[0] == outputs[1], || {
        "reports differ between runs".into()
    })?;
    Ok(format!(
        "{} report files byte-identical across two runs",
        outputs[0].len()
    ))
}

fn monotone_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = |x: f64| x * x * x + x;
    for case in 0..500 {
        let n = rng.gen_range(2..=200);
        let na = rng.gen_range(1..n);
        let set = random_set(&mut rng, na, n - na, case % 2 == 1);
        let moved = set.map(f);
        let rates = |s: &ScoreSet| -> Vec<(f64, f64)> {
            det_curve(s)
                .unwrap()
                .iter()
                .map(|p| (p.apcer, p.bpcer))
                .collect()
        };
        check(rates(&set) == rates(&moved), || {
            format!("case {case}: DET rates changed")
        })?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        check(
            close(d_eer(&set).unwrap().0, d_eer(&moved).unwrap().0),
            || format!("case {case}: D-EER changed"),
        )?;
        for alpha in [0.10, 0.05, 0.01] {
            check(
                close(
                    bpcer_at_apcer(&set, alpha).unwrap(),
                    bpcer_at_apcer(&moved, alpha).unwrap(),
                ),
                || format!("case {case}: BPCER@{alpha} changed"),
            )?;
        }
        check(close(auc(&set).unwrap(), auc(&moved).unwrap()), || {
            format!("case {case}: AUC changed")
        })?;
    }
    Ok("500 sets under x -> x^3 + x".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("metrics oracle suite", metrics_oracle_suite),
        ("AUC equals pairwise Mann-Whitney", auc_pairwise_oracle),
        ("SUM/AVG fusion equivalence", sum_avg_equivalence),
        ("gradient check vs finite differences", gradient_check),
        ("probe learnability", probe_learnability),
        ("protocol leakage audit", leakage_audit),
        ("protocol determinism", determinism),
        ("monotone transform invariance", monotone_invariance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
