//! Reference implementations written for clarity, not speed: every metric is
//! recomputed by brute force over explicit thresholds or pairs.

use pad_eval::ScoreSet;

pub fn apcer(s: &ScoreSet, t: f64) -> f64 {
    s.attack_scores.iter().filter(|&&a| a < t).count() as f64 / s.attack_scores.len() as f64
}

pub fn bpcer(s: &ScoreSet, t: f64) -> f64 {
    s.bonafide_scores.iter().filter(|&&b| b >= t).count() as f64 / s.bonafide_scores.len() as f64
}

/// Every distinct score plus one value below all scores and one above.
pub fn thresholds(s: &ScoreSet) -> Vec<f64> {
    let mut all: Vec<f64> = s
        .attack_scores
        .iter()
        .chain(&s.bonafide_scores)
        .copied()
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    let lo = all[0] - 1.0;
    let hi = all[all.len() - 1] + 1.0;
    let mut t = vec![lo];
    t.extend(all);
    t.push(hi);
    t
}

/// (threshold, apcer, bpcer) at every oracle threshold, ascending.
pub fn operating_points(s: &ScoreSet) -> Vec<(f64, f64, f64)> {
    thresholds(s)
        .into_iter()
        .map(|t| (t, apcer(s, t), bpcer(s, t)))
        .collect()
}

/// Equal error rate by walking the operating points: the value at an exact
/// APCER = BPCER point, else the linear interpolation where the difference
/// changes sign.
pub fn eer(s: &ScoreSet) -> f64 {
    let pts = operating_points(s);
    for &(_, a, b) in &pts {
        if a == b {
            return a;
        }
    }
    for w in pts.windows(2) {
        let (_, a0, b0) = w[0];
        let (_, a1, b1) = w[1];
        let d0 = a0 - b0;
        let d1 = a1 - b1;
        if d0 < 0.0 && d1 > 0.0 {
            let t = d0 / (d0 - d1);
            let ea = a0 + t * (a1 - a0);
            let eb = b0 + t * (b1 - b0);
            return 0.5 * (ea + eb);
        }
    }
    unreachable!("apcer rises from 0 to 1 while bpcer falls from 1 to 0")
}

pub fn bpcer_at_apcer(s: &ScoreSet, alpha: f64) -> f64 {
    operating_points(s)
        .into_iter()
        .filter(|&(_, a, _)| a <= alpha)
        .map(|(_, _, b)| b)
        .fold(f64::INFINITY, f64::min)
}

pub fn hter(s: &ScoreSet, t: f64) -> f64 {
    0.5 * (apcer(s, t) + bpcer(s, t))
}

/// Pairwise Mann-Whitney AUC.
pub fn auc(s: &ScoreSet) -> f64 {
    let mut total = 0.0;
    for &a in &s.attack_scores {
        for &b in &s.bonafide_scores {
            total += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (s.attack_scores.len() * s.bonafide_scores.len()) as f64
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation, zero for a single value.
pub fn std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Unclamped binary cross-entropy of a logistic unit.
pub fn bce(w: &[f64], b: f64, x: &[f64], y: f64) -> f64 {
    let z: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b;
    let p = logistic(z);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Central finite differences of `bce` with step `h`: (d/dw, d/db).
pub fn numeric_gradient(w: &[f64], b: f64, x: &[f64], y: f64, h: f64) -> (Vec<f64>, f64) {
    let gw = (0..w.len())
        .map(|i| {
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[i] += h;
            down[i] -= h;
            (bce(&up, b, x, y) - bce(&down, b, x, y)) / (2.0 * h)
        })
        .collect();
    let gb = (bce(w, b + h, x, y) - bce(w, b - h, x, y)) / (2.0 * h);
    (gw, gb)
}

/// Full-batch gradient descent logistic regression, a reference for the
/// minibatch Adam probe.
pub fn logistic_regression(xs: &[Vec<f64>], ys: &[f64], lr: f64, iters: usize) -> (Vec<f64>, f64) {
    let dim = xs[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let n = xs.len() as f64;
    for _ in 0..iters {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let z: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b;
            let r = logistic(z) - y;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += r * xi;
            }
            gb += r;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g / n;
        }
        b -= lr * gb / n;
    }
    (w, b)
}
