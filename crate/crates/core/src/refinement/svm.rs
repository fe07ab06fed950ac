//! Soft-margin linear SVM trained by dual coordinate descent, plus the
//! feature minimisation and coefficient rounding used to turn it into a
//! readable predicate.

use serde::Serialize;

/// A labelled point set. `true` marks the positive class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Points {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
}

impl Points {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn dims(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvmConfig {
    /// Soft-margin penalty; large values approximate a hard margin.
    pub c: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    /// Minimum training accuracy for a classifier to be accepted.
    pub accuracy_threshold: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 100.0,
            max_epochs: 5000,
            tolerance: 1e-6,
            accuracy_threshold: 0.99,
        }
    }
}

/// `sum coefficients[i] * x_i >= threshold` predicts the positive class.
/// Coefficients are indexed by the full feature vector; unused features
/// have coefficient 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearClassifier {
    pub coefficients: Vec<f64>,
    pub threshold: f64,
    pub accuracy: f64,
    /// Smallest distance, in raw feature units, between the boundary and a
    /// correctly classified point (0 if some point is misclassified).
    pub margin: f64,
}

impl LinearClassifier {
    pub fn predict(&self, x: &[f64]) -> bool {
        score(&self.coefficients, x) >= self.threshold
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&i| self.coefficients[i] != 0.0)
            .collect()
    }

    fn evaluate(coefficients: Vec<f64>, threshold: f64, data: &Points) -> LinearClassifier {
        let correct = data
            .x
            .iter()
            .zip(&data.y)
            .filter(|(x, &y)| (score(&coefficients, x) >= threshold) == y)
            .count();
        let accuracy = correct as f64 / data.len().max(1) as f64;
        let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        let margin = if correct == data.len() && norm > 0.0 {
            data.x
                .iter()
                .map(|x| (score(&coefficients, x) - threshold).abs() / norm)
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        LinearClassifier {
            coefficients,
            threshold,
            accuracy,
            margin,
        }
    }
}

fn score(c: &[f64], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Trains on the features listed in `features`. Points are centred and
/// divided by one common scale so the margin geometry of the raw space is
/// preserved. Returns `None` when there is nothing to separate.
pub fn train(data: &Points, features: &[usize], config: &SvmConfig) -> Option<LinearClassifier> {
    let n = data.len();
    let dims = data.dims();
    if n == 0 || features.is_empty() || !data.y.iter().any(|&y| y) || data.y.iter().all(|&y| y) {
        return None;
    }
    let k = features.len();
    let mean: Vec<f64> = features
        .iter()
        .map(|&f| data.x.iter().map(|x| x[f]).sum::<f64>() / n as f64)
        .collect();
    let spread = (features
        .iter()
        .zip(&mean)
        .map(|(&f, m)| data.x.iter().map(|x| (x[f] - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (n * k) as f64)
        .sqrt();
    if spread == 0.0 {
        return None;
    }
    // Augmented points: scaled features followed by a constant bias term.
    let rows: Vec<Vec<f64>> = data
        .x
        .iter()
        .map(|x| {
            let mut r: Vec<f64> = features.iter().zip(&mean).map(|(&f, m)| (x[f] - m) / spread).collect();
            r.push(1.0);
            r
        })
        .collect();
    let sign: Vec<f64> = data.y.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();
    let q: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; k + 1];
    for _ in 0..config.max_epochs {
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let g = sign[i] * score(&w, &rows[i]) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == config.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, config.c);
                let step = (alpha[i] - old) * sign[i];
                for (wj, rj) in w.iter_mut().zip(&rows[i]) {
                    *wj += step * rj;
                }
            }
        }
        if pg_max - pg_min < config.tolerance {
            break;
        }
    }
    // Back to raw units: w.(x - m)/s + b >= 0  <=>  (w/s).x >= (w.m)/s - b.
    let mut coefficients = vec![0.0; dims];
    let mut threshold = -w[k];
    for (j, &f) in features.iter().enumerate() {
        coefficients[f] = w[j] / spread;
        threshold += w[j] * mean[j] / spread;
    }
    if coefficients.iter().all(|&c| c == 0.0) {
        return None;
    }
    Some(LinearClassifier::evaluate(coefficients, threshold, data))
}

/// Trains on all features and accepts the result only if it reaches the
/// accuracy threshold.
pub fn train_accepted(data: &Points, config: &SvmConfig) -> Option<LinearClassifier> {
    let all: Vec<usize> = (0..data.dims()).collect();
    train(data, &all, config).filter(|c| c.accuracy >= config.accuracy_threshold)
}

/// Greedily retrains on the `k` largest-magnitude variables for growing `k`
/// and returns the first classifier that still meets the threshold.
pub fn minimize_features(clf: &LinearClassifier, data: &Points, config: &SvmConfig) -> LinearClassifier {
    let mut order = clf.support();
    if order.len() <= 1 {
        return clf.clone();
    }
    order.sort_by(|&a, &b| {
        clf.coefficients[b]
            .abs()
            .total_cmp(&clf.coefficients[a].abs())
            .then(a.cmp(&b))
    });
    for k in 1..order.len() {
        let mut subset = order[..k].to_vec();
        subset.sort_unstable();
        if let Some(c) = train(data, &subset, config) {
            if c.accuracy >= config.accuracy_threshold {
                return c;
            }
        }
    }
    clf.clone()
}

/// Best threshold for the projection `c . x`: the midpoint of the gap that
/// maximises accuracy, preferring the widest such gap.
fn best_threshold(coefficients: &[f64], data: &Points) -> f64 {
    let mut z: Vec<(f64, bool)> = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| (score(coefficients, x), y))
        .collect();
    z.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_pos = z.iter().filter(|p| p.1).count();
    // Threshold below everything: all predicted positive.
    let mut correct = total_pos;
    let mut best = (correct, f64::INFINITY, z[0].0 - 1.0);
    let mut i = 0;
    while i < z.len() {
        let v = z[i].0;
        while i < z.len() && z[i].0 == v {
            correct = if z[i].1 { correct - 1 } else { correct + 1 };
            i += 1;
        }
        let (threshold, gap) = match z.get(i) {
            Some(&(next, _)) => ((v + next) / 2.0, next - v),
            None => (v + 1.0, f64::INFINITY),
        };
        if correct > best.0 || (correct == best.0 && gap > best.1) {
            best = (correct, gap, threshold);
        }
    }
    best.2
}

fn round_sig(v: f64, digits: i32) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let mag = v.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - mag);
    (v * factor).round() / factor
}

/// Scales the largest coefficient to magnitude 1 and rounds the rest to 1,
/// 2 or 3 significant digits, choosing a fresh threshold each time; the
/// first rounding that keeps the accuracy threshold wins. Falls back to the
/// scaled, unrounded classifier.
pub fn rationalize(clf: &LinearClassifier, data: &Points, config: &SvmConfig) -> LinearClassifier {
    let scale = clf.coefficients.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if scale == 0.0 || data.is_empty() {
        return clf.clone();
    }
    let scaled: Vec<f64> = clf.coefficients.iter().map(|c| c / scale).collect();
    for digits in 1..=3 {
        let rounded: Vec<f64> = scaled.iter().map(|&c| round_sig(c, digits)).collect();
        if rounded.iter().all(|&c| c == 0.0) {
            continue;
        }
        let raw = best_threshold(&rounded, data);
        // Prefer a short decimal threshold if it classifies identically.
        let mut candidate = LinearClassifier::evaluate(rounded.clone(), raw, data);
        for td in 1..=6 {
            let t = round_sig(raw, td);
            let c = LinearClassifier::evaluate(rounded.clone(), t, data);
            if c.accuracy >= candidate.accuracy {
                candidate = c;
                break;
            }
        }
        if candidate.accuracy >= config.accuracy_threshold && candidate.accuracy >= clf.accuracy {
            return candidate;
        }
    }
    LinearClassifier::evaluate(scaled, clf.threshold / scale, data)
}
