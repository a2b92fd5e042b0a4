//! Reference computations that share no code with the library paths they check.

#![allow(dead_code)]

/// Pairwise AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counted as one half.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Mean over rows of the summed binary cross-entropy, with the same clamp
/// the library applies before logarithms.
pub fn reference_bce(probs: &[f64], labels: &[u8], n_classes: usize, eps: f64) -> f64 {
    let n = probs.len() / n_classes;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(eps).min(1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / n as f64
}

/// Per-entry gradient of [`reference_bce`]: (p - y) / (p (1 - p)) / N.
pub fn reference_bce_grad(probs: &[f64], labels: &[u8], n_classes: usize) -> Vec<f64> {
    let n = (probs.len() / n_classes) as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - y as f64) / (p * (1.0 - p)) / n)
        .collect()
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// All points of the 3-simplex on a lattice of the given number of steps.
pub fn simplex_grid3(steps: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let a = i as f64 / steps as f64;
            let b = j as f64 / steps as f64;
            out.push([a, b, (1.0 - a - b).max(0.0)]);
        }
    }
    out
}

/// `|a - n| / max(|a|, |n|)`, or 0 when both are exactly zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}
