//! ISO/IEC 30107-3 error rates and the non-ISO benchmarking metrics (HTER,
//! AUC), all computed by exact sweeps over finite score sets.
//!
//! Decision rule used everywhere: a presentation is classified as an attack
//! iff `score >= threshold`. Ties therefore count as attack decisions.
//!
//! * APCER(t) = |{a : a < t}| / |attacks|
//! * BPCER(t) = |{b : b >= t}| / |bona fide|

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("score set has no {0} scores")]
    EmptyClass(&'static str),
    #[error("score set contains a non-finite score")]
    NonFiniteScore,
    #[error("cannot aggregate an empty list of reports")]
    EmptyList,
}

/// Attack and bona fide score populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub attack_scores: Vec<f64>,
    pub bonafide_scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(attack_scores: Vec<f64>, bonafide_scores: Vec<f64>) -> Result<Self, MetricsError> {
        if attack_scores
            .iter()
            .chain(&bonafide_scores)
            .any(|s| !s.is_finite())
        {
            return Err(MetricsError::NonFiniteScore);
        }
        Ok(ScoreSet {
            attack_scores,
            bonafide_scores,
        })
    }

    /// Applies `f` to every score, keeping class membership.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScoreSet {
        ScoreSet {
            attack_scores: self.attack_scores.iter().map(|&s| f(s)).collect(),
            bonafide_scores: self.bonafide_scores.iter().map(|&s| f(s)).collect(),
        }
    }

    fn require_attacks(&self) -> Result<(), MetricsError> {
        if self.attack_scores.is_empty() {
            Err(MetricsError::EmptyClass("attack"))
        } else {
            Ok(())
        }
    }

    fn require_bonafide(&self) -> Result<(), MetricsError> {
        if self.bonafide_scores.is_empty() {
            Err(MetricsError::EmptyClass("bona fide"))
        } else {
            Ok(())
        }
    }

    fn require_both(&self) -> Result<(), MetricsError> {
        self.require_attacks()?;
        self.require_bonafide()
    }
}

/// One operating point of the DET curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

pub fn apcer_at(s: &ScoreSet, threshold: f64) -> Result<f64, MetricsError> {
    s.require_attacks()?;
    let missed = s.attack_scores.iter().filter(|&&a| a < threshold).count();
    Ok(missed as f64 / s.attack_scores.len() as f64)
}

pub fn bpcer_at(s: &ScoreSet, threshold: f64) -> Result<f64, MetricsError> {
    s.require_bonafide()?;
    let rejected = s
        .bonafide_scores
        .iter()
        .filter(|&&b| b >= threshold)
        .count();
    Ok(rejected as f64 / s.bonafide_scores.len() as f64)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Every distinct operating point, ordered by ascending threshold.
///
/// Candidate thresholds are the distinct score values plus one sentinel just
/// below the minimum (everything rejected as attack: APCER = 0, BPCER = 1)
/// and one just above the maximum (APCER = 1, BPCER = 0).
pub fn det_curve(s: &ScoreSet) -> Result<Vec<DetPoint>, MetricsError> {
    s.require_both()?;
    let attacks = sorted(&s.attack_scores);
    let bonafide = sorted(&s.bonafide_scores);
    let (na, nb) = (attacks.len(), bonafide.len());

    let mut thresholds: Vec<f64> = attacks.iter().chain(&bonafide).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup_by(|a, b| a == b);
    let lo = thresholds[0].next_down();
    let hi = thresholds[thresholds.len() - 1].next_up();

    let mut points = Vec::with_capacity(thresholds.len() + 2);
    let (mut ia, mut ib) = (0usize, 0usize);
    for t in std::iter::once(lo)
        .chain(thresholds)
        .chain(std::iter::once(hi))
    {
        // ia / ib count scores strictly below t
        while ia < na && attacks[ia] < t {
            ia += 1;
        }
        while ib < nb && bonafide[ib] < t {
            ib += 1;
        }
        points.push(DetPoint {
            threshold: t,
            apcer: ia as f64 / na as f64,
            bpcer: (nb - ib) as f64 / nb as f64,
        });
    }
    Ok(points)
}

/// Detection equal error rate and the threshold where it is reached.
///
/// Walks the DET curve for the first point where APCER - BPCER changes sign
/// and linearly interpolates the rates and the threshold to the crossing.
/// A point with APCER == BPCER exactly is returned as is.
pub fn d_eer(s: &ScoreSet) -> Result<(f64, f64), MetricsError> {
    let det = det_curve(s)?;
    Ok(eer_from_det(&det))
}

pub(crate) fn eer_from_det(det: &[DetPoint]) -> (f64, f64) {
    for pair in det.windows(2) {
        let (p, q) = (pair[0], pair[1]);
        let dp = p.apcer - p.bpcer;
        if dp == 0.0 {
            return (p.apcer, p.threshold);
        }
        let dq = q.apcer - q.bpcer;
        if dq == 0.0 {
            return (q.apcer, q.threshold);
        }
        if dp < 0.0 && dq > 0.0 {
            let t = dp / (dp - dq);
            let eer = p.apcer + t * (q.apcer - p.apcer);
            let threshold = p.threshold + t * (q.threshold - p.threshold);
            return (eer, threshold);
        }
    }
    // unreachable for curves produced by det_curve: they start at d = -1 and end at d = +1
    let last = det[det.len() - 1];
    (last.apcer, last.threshold)
}

/// Lowest BPCER over all operating points whose APCER does not exceed `max_apcer`.
pub fn bpcer_at_apcer(s: &ScoreSet, max_apcer: f64) -> Result<f64, MetricsError> {
    let det = det_curve(s)?;
    Ok(bpcer_at_apcer_from_det(&det, max_apcer))
}

fn bpcer_at_apcer_from_det(det: &[DetPoint], max_apcer: f64) -> f64 {
    det.iter()
        .filter(|p| p.apcer <= max_apcer)
        .map(|p| p.bpcer)
        .fold(f64::INFINITY, f64::min)
}

pub fn hter(s: &ScoreSet, threshold: f64) -> Result<f64, MetricsError> {
    Ok((apcer_at(s, threshold)? + bpcer_at(s, threshold)?) / 2.0)
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random attack outscores a random bona fide, ties counting one half.
pub fn auc(s: &ScoreSet) -> Result<f64, MetricsError> {
    s.require_both()?;
    let bonafide = sorted(&s.bonafide_scores);
    // twice the U statistic, kept integral so the result is exact up to the final division
    let mut twice_u: u128 = 0;
    for &a in &s.attack_scores {
        let below = bonafide.partition_point(|&b| b < a);
        let not_above = bonafide.partition_point(|&b| b <= a);
        twice_u += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = s.attack_scores.len() as u128 * bonafide.len() as u128;
    Ok(twice_u as f64 / (2 * pairs) as f64)
}

/// Where the HTER threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HterThreshold {
    /// D-EER threshold of the evaluated score set itself.
    #[default]
    TestEer,
    /// A threshold fixed beforehand, e.g. the D-EER threshold of a dev set.
    Fixed(f64),
}

impl HterThreshold {
    pub fn describe(&self) -> String {
        match self {
            HterThreshold::TestEer => "d-eer threshold of the evaluated scores".into(),
            HterThreshold::Fixed(t) => format!("fixed threshold {t}"),
        }
    }
}

/// Every metric the reports carry for one score set. Rates are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_attack: usize,
    pub n_bonafide: usize,
    pub d_eer: f64,
    pub eer_threshold: f64,
    /// BPCER at APCER <= 10%.
    pub bpcer10: f64,
    /// BPCER at APCER <= 5%.
    pub bpcer20: f64,
    /// BPCER at APCER <= 1%.
    pub bpcer100: f64,
    pub hter: f64,
    pub hter_threshold: f64,
    pub hter_apcer: f64,
    pub hter_bpcer: f64,
    pub auc: f64,
    pub det: Vec<DetPoint>,
}

pub fn evaluate(s: &ScoreSet, policy: HterThreshold) -> Result<MetricsReport, MetricsError> {
    let det = det_curve(s)?;
    let (d_eer, eer_threshold) = eer_from_det(&det);
    let hter_threshold = match policy {
        HterThreshold::TestEer => eer_threshold,
        HterThreshold::Fixed(t) => t,
    };
    let hter_apcer = apcer_at(s, hter_threshold)?;
    let hter_bpcer = bpcer_at(s, hter_threshold)?;
    Ok(MetricsReport {
        n_attack: s.attack_scores.len(),
        n_bonafide: s.bonafide_scores.len(),
        d_eer,
        eer_threshold,
        bpcer10: bpcer_at_apcer_from_det(&det, 0.10),
        bpcer20: bpcer_at_apcer_from_det(&det, 0.05),
        bpcer100: bpcer_at_apcer_from_det(&det, 0.01),
        hter: (hter_apcer + hter_bpcer) / 2.0,
        hter_threshold,
        hter_apcer,
        hter_bpcer,
        auc: auc(s)?,
        det,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator), 0 for a single value.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Result<MeanStd, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MeanStd { mean, std })
}

/// Mean and sample standard deviation of each scalar metric across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub folds: usize,
    pub d_eer: MeanStd,
    pub bpcer10: MeanStd,
    pub bpcer20: MeanStd,
    pub bpcer100: MeanStd,
    pub hter: MeanStd,
    pub hter_apcer: MeanStd,
    pub hter_bpcer: MeanStd,
    pub auc: MeanStd,
}

pub fn aggregate(reports: &[&MetricsReport]) -> Result<MetricsSummary, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let field = |f: fn(&MetricsReport) -> f64| {
        let values: Vec<f64> = reports.iter().map(|r| f(r)).collect();
        mean_std(&values)
    };
    Ok(MetricsSummary {
        folds: reports.len(),
        d_eer: field(|r| r.d_eer)?,
        bpcer10: field(|r| r.bpcer10)?,
        bpcer20: field(|r| r.bpcer20)?,
        bpcer100: field(|r| r.bpcer100)?,
        hter: field(|r| r.hter)?,
        hter_apcer: field(|r| r.hter_apcer)?,
        hter_bpcer: field(|r| r.hter_bpcer)?,
        auc: field(|r| r.auc)?,
    })
}
